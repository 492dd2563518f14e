use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{open_reader, write_atomic, Corpus, Token, SHARD_LINES};
use crate::error::{Error, Result};

/// Word types with dense ids, ordered by descending frequency and then by
/// token text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    freqs: Vec<u64>,
    index: HashMap<Token, u32>,
}

/// Counts token types over `corpus` and keeps the `max_size` most frequent
/// ones with frequency at least `min_freq`.
pub fn build_vocabulary(corpus: &Corpus, max_size: usize, min_freq: u64) -> Result<Vocabulary> {
    if max_size == 0 {
        return Err(Error::Argument("max_size must be positive".into()));
    }
    let counts = count_types(corpus);
    Ok(Vocabulary::from_counts(counts, max_size, min_freq))
}

/// Sharded type count; shards merge by summation, so the result does not
/// depend on line order or shard boundaries.
pub(crate) fn count_types(corpus: &Corpus) -> HashMap<String, u64> {
    corpus
        .lines()
        .par_chunks(SHARD_LINES)
        .map(|shard| {
            let mut counts: HashMap<String, u64> = HashMap::new();
            for line in shard {
                for tok in line.split_whitespace() {
                    *counts.entry(tok.to_owned()).or_default() += 1;
                }
            }
            counts
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}

fn merge_counts(
    mut into: HashMap<String, u64>,
    from: HashMap<String, u64>,
) -> HashMap<String, u64> {
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
    into
}

fn frequency_order(a: &(Token, u64), b: &(Token, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl Vocabulary {
    pub fn from_counts(counts: HashMap<String, u64>, max_size: usize, min_freq: u64) -> Self {
        let mut entries: Vec<(Token, u64)> = counts
            .into_iter()
            .filter(|&(_, f)| f >= min_freq && f > 0)
            .map(|(t, f)| (Token::from_valid(t), f))
            .collect();
        entries.sort_unstable_by(frequency_order);
        entries.truncate(max_size);
        Self::from_sorted(entries)
    }

    fn from_sorted(entries: Vec<(Token, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let (tokens, freqs) = entries.into_iter().unzip();
        Vocabulary {
            tokens,
            freqs,
            index,
        }
    }

    /// Builds a vocabulary from explicit entries, which must already be in
    /// canonical order (descending frequency, then token text) with no
    /// duplicates.
    pub fn from_entries(entries: Vec<(Token, u64)>) -> Result<Self> {
        for pair in entries.windows(2) {
            if frequency_order(&pair[0], &pair[1]) != std::cmp::Ordering::Less {
                return Err(Error::Validation(format!(
                    "vocabulary entries {:?} and {:?} are out of order or duplicated",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(Self::from_sorted(entries))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &Token {
        &self.tokens[id as usize]
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freqs[id as usize]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Token, u64)> {
        self.tokens
            .iter()
            .zip(&self.freqs)
            .enumerate()
            .map(|(i, (t, &f))| (i as u32, t, f))
    }

    /// One `token<TAB>freq` line per entry, in id order.
    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        for (_, tok, freq) in self.iter() {
            writeln!(w, "{tok}\t{freq}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {lineno}"), e))?;
            let (tok, freq) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, lineno, "expected token<TAB>freq"))?;
            let tok =
                Token::new(tok).map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
            let freq: u64 = freq.parse().map_err(|_| {
                Error::parse(source_name, lineno, format!("bad frequency {freq:?}"))
            })?;
            if let Some(prev) = entries.last() {
                if frequency_order(prev, &(tok.clone(), freq)) != std::cmp::Ordering::Less {
                    return Err(Error::parse(
                        source_name,
                        lineno,
                        "entries must be in descending frequency, ties by token, without duplicates",
                    ));
                }
            }
            entries.push((tok, freq));
        }
        Ok(Self::from_sorted(entries))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string())
    }
}
