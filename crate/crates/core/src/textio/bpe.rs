use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use super::vocab::count_types;
use super::{open_reader, write_atomic, Corpus, Token};
use crate::error::{Error, Result};

/// Ordered merge rules. Rule `k` joins adjacent pieces `(left, right)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeList {
    merges: Vec<(Token, Token)>,
    ranks: HashMap<(Token, Token), usize>,
}

impl MergeList {
    pub fn new(merges: Vec<(Token, Token)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            if ranks.insert(pair.clone(), rank).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate merge {} {}",
                    pair.0, pair.1
                )));
            }
        }
        Ok(MergeList { merges, ranks })
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Token, Token)> {
        self.merges.iter()
    }

    /// Subword inventory induced over a set of words: their characters plus
    /// every merge product.
    pub fn induced_vocabulary<'a, I>(&self, words: I) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab: BTreeSet<String> = words
            .into_iter()
            .flat_map(|w| w.chars().map(String::from))
            .collect();
        for (l, r) in &self.merges {
            vocab.insert(format!("{l}{r}"));
        }
        vocab
    }

    /// One `left<SPACE>right` line per merge, in application order.
    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        for (l, r) in &self.merges {
            writeln!(w, "{l} {r}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(format!("{source_name}: line {lineno}"), e))?;
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(source_name, lineno, "expected `left right`"));
            };
            let pair = Token::new(l)
                .and_then(|l| Ok((l, Token::new(r)?)))
                .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
            merges.push(pair);
        }
        Self::new(merges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string())
    }
}

/// Learns word-internal merges from the token types of `corpus`.
pub fn bpe_train(corpus: &Corpus, target_vocab_size: usize) -> Result<MergeList> {
    bpe_train_counts(&count_types(corpus), target_vocab_size)
}

/// Learns merges from word frequencies until the induced vocabulary reaches
/// `target_vocab_size` or no adjacent pair remains. The most frequent pair
/// wins; ties go to the lexicographically smallest `(left, right)`.
pub fn bpe_train_counts(
    word_counts: &HashMap<String, u64>,
    target_vocab_size: usize,
) -> Result<MergeList> {
    let charset: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    if target_vocab_size < charset.len() {
        return Err(Error::Argument(format!(
            "target vocabulary size {target_vocab_size} is below the {} distinct characters in the corpus",
            charset.len()
        )));
    }

    let mut pieces: Vec<String> = Vec::new();
    let mut piece_ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: String, pieces: &mut Vec<String>| -> u32 {
        *piece_ids.entry(s.clone()).or_insert_with(|| {
            pieces.push(s);
            (pieces.len() - 1) as u32
        })
    };

    let mut sorted: Vec<(&String, u64)> = word_counts.iter().map(|(w, &c)| (w, c)).collect();
    sorted.sort_unstable();
    let mut words: Vec<(Vec<u32>, u64)> = sorted
        .into_iter()
        .filter(|&(_, c)| c > 0)
        .map(|(w, c)| {
            let ids = w
                .chars()
                .map(|ch| intern(ch.to_string(), &mut pieces))
                .collect();
            (ids, c)
        })
        .collect();

    let mut vocab: HashSet<u32> = (0..pieces.len() as u32).collect();
    let mut merges = Vec::new();
    while vocab.len() < target_vocab_size {
        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (ids, count) in &words {
            for w in ids.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_default() += count;
            }
        }
        let best = pair_counts.into_iter().max_by_key(|&((l, r), c)| {
            (
                c,
                Reverse((pieces[l as usize].clone(), pieces[r as usize].clone())),
            )
        });
        let Some(((left, right), _)) = best else {
            break;
        };
        let product = intern(
            format!("{}{}", pieces[left as usize], pieces[right as usize]),
            &mut pieces,
        );
        for (ids, _) in &mut words {
            merge_pair(ids, left, right, product);
        }
        vocab.insert(product);
        merges.push((
            Token::from_valid(pieces[left as usize].clone()),
            Token::from_valid(pieces[right as usize].clone()),
        ));
    }
    MergeList::new(merges)
}

/// Replaces non-overlapping occurrences of `(left, right)`, scanning left to
/// right.
fn merge_pair<T: PartialEq + Clone>(seq: &mut Vec<T>, left: T, right: T, product: T) {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
            out.push(product.clone());
            i += 2;
        } else {
            out.push(seq[i].clone());
            i += 1;
        }
    }
    *seq = out;
}

/// Splits `word` into characters and applies the merges in list order.
pub fn bpe_segment(word: &str, merges: &MergeList) -> Vec<Token> {
    let mut seq: Vec<Token> = word
        .chars()
        .map(|c| Token::from_valid(c.to_string()))
        .collect();
    // Applying rule `r` only after every applicable rule below it has run is
    // the same as walking the list in order, skipping rules with no match.
    let mut cursor = 0;
    loop {
        let next = seq
            .windows(2)
            .filter_map(|w| merges.ranks.get(&(w[0].clone(), w[1].clone())).copied())
            .filter(|&r| r >= cursor)
            .min();
        let Some(rank) = next else {
            break;
        };
        let (l, r) = &merges.merges[rank];
        let product = Token::from_valid(format!("{l}{r}"));
        merge_pair(&mut seq, l.clone(), r.clone(), product);
        cursor = rank + 1;
    }
    seq
}
