//! Subword bigram model distilled from segmented text, with beam-search and
//! exact segmentation.
//!
//! With `|S|` subwords, `c(prev, next)` bigram counts and `c(prev)` the
//! number of bigrams starting at `prev`:
//!
//! * known `prev` (including the start symbol):
//!   `P(next | prev) = (c(prev, next) + 1) / (c(prev) + |S|)`
//! * unknown `prev`, known `next`: `(c(next) + 1) / (total + |S|)`
//! * both unknown: `1 / |S|`
//!
//! Single characters are always admissible pieces, so every string has a
//! segmentation.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexseg::{candidate_order, char_bounds, ScoredSegmentation};
use crate::scalar::grid_round;
use crate::subspace::SubwordVocabulary;
use crate::textio::{open_reader, write_atomic, SegmentedText, Token};

pub const START_SYMBOL: &str = "###";
pub const DEFAULT_BEAM: usize = 5;

const MAGIC: &str = "LEGROS-BIGRAM v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigramModel {
    subwords: SubwordVocabulary,
    /// Occurrences of each subword as a token.
    unigrams: Vec<u64>,
    /// Keyed by `(context, next)`; context `|S|` is the start symbol.
    bigrams: HashMap<(u32, u32), u64>,
    /// Bigrams leaving each context, start symbol last.
    contexts: Vec<u64>,
    total: u64,
    max_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamHypothesis {
    pub subwords: Vec<Token>,
    /// Sum of [`BigramModel::step_score`] along the segmentation.
    pub log_score: f64,
}

/// Counts subword unigrams and within-word bigrams, each word starting from
/// the start symbol.
pub fn distill<'a>(words: impl IntoIterator<Item = &'a [Token]>) -> Result<BigramModel> {
    distill_weighted(words.into_iter().map(|w| (w, 1)))
}

pub fn distill_text(text: &SegmentedText) -> Result<BigramModel> {
    distill(text.words())
}

/// Like [`distill`], with each word counted `weight` times.
pub fn distill_weighted<'a>(
    words: impl IntoIterator<Item = (&'a [Token], u64)>,
) -> Result<BigramModel> {
    let words: Vec<(&[Token], u64)> = words
        .into_iter()
        .filter(|(w, c)| !w.is_empty() && *c > 0)
        .collect();
    if words.is_empty() {
        return Err(Error::Argument("cannot distill an empty corpus".into()));
    }
    if let Some(t) = words
        .iter()
        .flat_map(|(w, _)| w.iter())
        .find(|t| t.as_str() == START_SYMBOL)
    {
        return Err(Error::Validation(format!(
            "subword {:?} is reserved for the start symbol",
            t.as_str()
        )));
    }

    type Counts<'t> = (HashMap<&'t str, u64>, HashMap<(&'t str, &'t str), u64>);
    let (unigram_text, bigram_text): Counts<'_> = words
        .par_chunks(4096)
        .map(|chunk| {
            let mut uni: HashMap<&str, u64> = HashMap::new();
            let mut bi: HashMap<(&str, &str), u64> = HashMap::new();
            for &(word, weight) in chunk {
                let mut prev = START_SYMBOL;
                for piece in word {
                    *uni.entry(piece.as_str()).or_default() += weight;
                    *bi.entry((prev, piece.as_str())).or_default() += weight;
                    prev = piece.as_str();
                }
            }
            (uni, bi)
        })
        .reduce(
            || (HashMap::new(), HashMap::new()),
            |(mut ua, mut ba), (ub, bb)| {
                for (k, v) in ub {
                    *ua.entry(k).or_default() += v;
                }
                for (k, v) in bb {
                    *ba.entry(k).or_default() += v;
                }
                (ua, ba)
            },
        );

    let mut inventory: Vec<Token> = Vec::new();
    for piece in unigram_text.keys() {
        inventory.push(Token::from_valid(*piece));
        inventory.extend(piece.chars().map(|c| Token::from_valid(c.to_string())));
    }
    let subwords = SubwordVocabulary::new(inventory);
    let unigrams = subwords
        .tokens()
        .iter()
        .map(|t| unigram_text.get(t.as_str()).copied().unwrap_or(0))
        .collect();
    let start = subwords.len() as u32;
    let bigrams = bigram_text
        .into_iter()
        .map(|((p, n), c)| {
            let ctx = if p == START_SYMBOL {
                start
            } else {
                subwords.id(p).unwrap()
            };
            ((ctx, subwords.id(n).unwrap()), c)
        })
        .collect();
    BigramModel::from_parts(subwords, unigrams, bigrams)
}

impl BigramModel {
    fn from_parts(
        subwords: SubwordVocabulary,
        unigrams: Vec<u64>,
        bigrams: HashMap<(u32, u32), u64>,
    ) -> Result<Self> {
        if subwords.is_empty() {
            return Err(Error::Validation(
                "bigram model has an empty subword vocabulary".into(),
            ));
        }
        let mut contexts = vec![0u64; subwords.len() + 1];
        for (&(ctx, _), &c) in &bigrams {
            contexts[ctx as usize] += c;
        }
        let total = unigrams.iter().sum();
        let max_len = subwords.max_chars();
        Ok(BigramModel {
            subwords,
            unigrams,
            bigrams,
            contexts,
            total,
            max_len,
        })
    }

    pub fn subwords(&self) -> &SubwordVocabulary {
        &self.subwords
    }

    pub fn vocab_size(&self) -> usize {
        self.subwords.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn max_subword_length(&self) -> usize {
        self.max_len
    }

    pub fn contains(&self, subword: &str) -> bool {
        self.subwords.contains(subword)
    }

    pub fn unigram_count(&self, subword: &str) -> u64 {
        self.subwords
            .id(subword)
            .map_or(0, |i| self.unigrams[i as usize])
    }

    pub fn bigram_count(&self, prev: &str, next: &str) -> u64 {
        match (self.context_id(prev), self.subwords.id(next)) {
            (Some(c), Some(n)) => self.bigrams.get(&(c, n)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn context_count(&self, prev: &str) -> u64 {
        self.context_id(prev)
            .map_or(0, |c| self.contexts[c as usize])
    }

    pub fn bigram_entries(&self) -> usize {
        self.bigrams.len()
    }

    fn context_id(&self, prev: &str) -> Option<u32> {
        if prev == START_SYMBOL {
            Some(self.subwords.len() as u32)
        } else {
            self.subwords.id(prev)
        }
    }

    fn prob_ids(&self, ctx: Option<u32>, next: Option<u32>) -> f64 {
        let s = self.subwords.len() as f64;
        match (ctx, next) {
            (Some(c), n) => {
                let count = n
                    .and_then(|n| self.bigrams.get(&(c, n)))
                    .copied()
                    .unwrap_or(0);
                (count as f64 + 1.0) / (self.contexts[c as usize] as f64 + s)
            }
            (None, Some(n)) => (self.unigrams[n as usize] as f64 + 1.0) / (self.total as f64 + s),
            (None, None) => 1.0 / s,
        }
    }

    fn log_prob_ids(&self, ctx: Option<u32>, next: Option<u32>) -> f64 {
        self.prob_ids(ctx, next).ln()
    }

    /// Smoothed `P(next | prev)`; pass [`START_SYMBOL`] as `prev` at the
    /// start of a word.
    pub fn prob(&self, next: &str, prev: &str) -> f64 {
        self.prob_ids(self.context_id(prev), self.subwords.id(next))
    }

    /// Natural log of [`prob`](Self::prob).
    pub fn log_prob(&self, next: &str, prev: &str) -> f64 {
        self.log_prob_ids(self.context_id(prev), self.subwords.id(next))
    }

    /// [`log_prob`](Self::log_prob) rounded by [`grid_round`]; segmentation
    /// scores are sums of step scores.
    pub fn step_score(&self, next: &str, prev: &str) -> f64 {
        self.step_ids(self.context_id(prev), self.subwords.id(next))
    }

    fn step_ids(&self, ctx: Option<u32>, next: Option<u32>) -> f64 {
        grid_round(self.log_prob_ids(ctx, next))
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(
            w,
            "|S|={} total={} maxlen={}",
            self.vocab_size(),
            self.total,
            self.max_len
        )?;
        writeln!(w, "#UNIGRAMS")?;
        for (t, c) in self.subwords.tokens().iter().zip(&self.unigrams) {
            writeln!(w, "{t}\t{c}")?;
        }
        writeln!(w, "#BIGRAMS")?;
        let name = |ctx: u32| {
            if ctx as usize == self.subwords.len() {
                START_SYMBOL
            } else {
                self.subwords.token(ctx).as_str()
            }
        };
        let sorted: BTreeMap<(&str, &str), u64> = self
            .bigrams
            .iter()
            .map(|(&(c, n), &v)| ((name(c), self.subwords.token(n).as_str()), v))
            .collect();
        for ((p, n), c) in sorted {
            writeln!(w, "{p}\t{n}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            lines.push(line.map_err(|e| Error::io(format!("{source_name}: line {}", i + 1), e))?);
        }
        let err = |line: usize, msg: &str| Error::parse(source_name, line, msg.to_owned());
        if lines.first().map(String::as_str) != Some(MAGIC) {
            return Err(err(1, &format!("expected header {MAGIC:?}")));
        }
        let header = lines.get(1).ok_or_else(|| err(2, "missing size line"))?;
        let fields: HashMap<&str, u64> = header
            .split(' ')
            .filter_map(|f| f.split_once('='))
            .filter_map(|(k, v)| Some((k, v.parse().ok()?)))
            .collect();
        let (Some(&n), Some(&total), Some(&maxlen), 3) = (
            fields.get("|S|"),
            fields.get("total"),
            fields.get("maxlen"),
            fields.len(),
        ) else {
            return Err(err(2, "expected `|S|=<n> total=<t> maxlen=<m>`"));
        };
        if lines.get(2).map(String::as_str) != Some("#UNIGRAMS") {
            return Err(err(3, "expected #UNIGRAMS"));
        }

        let mut idx = 3;
        let mut uni_entries = Vec::new();
        while idx < lines.len() && lines[idx] != "#BIGRAMS" {
            let (t, c) = lines[idx]
                .split_once('\t')
                .ok_or_else(|| err(idx + 1, "expected subword<TAB>count"))?;
            let t = Token::new(t).map_err(|e| err(idx + 1, &e.to_string()))?;
            if t.as_str() == START_SYMBOL {
                return Err(err(idx + 1, "start symbol listed as a subword"));
            }
            let c: u64 = c.parse().map_err(|_| err(idx + 1, "bad count"))?;
            uni_entries.push((t, c, idx + 1));
            idx += 1;
        }
        if idx == lines.len() {
            return Err(err(idx + 1, "missing #BIGRAMS"));
        }
        let subwords = SubwordVocabulary::new(uni_entries.iter().map(|(t, _, _)| t.clone()));
        if subwords.len() != uni_entries.len() {
            return Err(Error::Validation(format!(
                "{source_name}: duplicate unigram entry"
            )));
        }
        let mut unigrams = vec![0u64; subwords.len()];
        for (t, c, _) in &uni_entries {
            unigrams[subwords.id(t).unwrap() as usize] = *c;
        }

        let start = subwords.len() as u32;
        let mut bigrams = HashMap::new();
        let mut incoming = vec![0u64; subwords.len()];
        for (i, line) in lines.iter().enumerate().skip(idx + 1) {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [p, nx, c] = fields[..] else {
                return Err(err(lineno, "expected prev<TAB>next<TAB>count"));
            };
            let ctx = if p == START_SYMBOL {
                start
            } else {
                subwords
                    .id(p)
                    .ok_or_else(|| err(lineno, &format!("unknown context {p:?}")))?
            };
            let next = subwords
                .id(nx)
                .ok_or_else(|| err(lineno, &format!("unknown or reserved continuation {nx:?}")))?;
            let c: u64 = c.parse().map_err(|_| err(lineno, "bad count"))?;
            if c == 0 {
                return Err(err(lineno, "bigram count must be positive"));
            }
            if bigrams.insert((ctx, next), c).is_some() {
                return Err(err(lineno, "duplicate bigram"));
            }
            incoming[next as usize] += c;
        }

        let model = Self::from_parts(subwords, unigrams, bigrams)?;
        if model.vocab_size() as u64 != n || model.total != total || model.max_len as u64 != maxlen
        {
            return Err(Error::Validation(format!(
                "{source_name}: header says |S|={n} total={total} maxlen={maxlen}, contents give |S|={} total={} maxlen={}",
                model.vocab_size(),
                model.total,
                model.max_len
            )));
        }
        // every token occurrence follows exactly one context
        for (i, (&u, &inc)) in model.unigrams.iter().zip(&incoming).enumerate() {
            if u != inc {
                return Err(Error::Validation(format!(
                    "{source_name}: count of {:?} is {u} but its bigrams sum to {inc}",
                    model.subwords.token(i as u32).as_str()
                )));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(open_reader(path)?, &path.display().to_string())
    }
}

#[derive(Clone)]
struct Hyp<'w> {
    pieces: Vec<&'w str>,
    score: f64,
}

fn hyp_order(a: &Hyp<'_>, b: &Hyp<'_>) -> std::cmp::Ordering {
    candidate_order((a.score, &a.pieces[..]), (b.score, &b.pieces[..]))
}

fn keep_better<'w>(slot: &mut Option<Hyp<'w>>, cand: Hyp<'w>) {
    if slot.as_ref().is_none_or(|w| hyp_order(&cand, w).is_lt()) {
        *slot = Some(cand);
    }
}

fn check_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::Argument("cannot segment an empty word".into()));
    }
    Ok(())
}

/// Piece ids for every admissible `(start, end)` span, or `None` for
/// inadmissible spans.
struct Lattice<'w> {
    word: &'w str,
    bounds: Vec<usize>,
    max_len: usize,
}

impl<'w> Lattice<'w> {
    fn new(word: &'w str, model: &BigramModel) -> Self {
        Lattice {
            word,
            bounds: char_bounds(word),
            max_len: model.max_len.max(1),
        }
    }

    fn n(&self) -> usize {
        self.bounds.len() - 1
    }

    fn piece(&self, start: usize, end: usize) -> &'w str {
        &self.word[self.bounds[start]..self.bounds[end]]
    }

    /// `Some(id)` for admissible spans; the inner id is `None` for an
    /// out-of-vocabulary single character.
    fn admissible(&self, model: &BigramModel, start: usize, end: usize) -> Option<Option<u32>> {
        let id = model.subwords.id(self.piece(start, end));
        (id.is_some() || end - start == 1).then_some(id)
    }
}

/// All hypotheses surviving at the end of the word, best first.
#[allow(clippy::needless_range_loop)]
pub fn beam_search(
    word: &str,
    model: &BigramModel,
    beam_size: usize,
) -> Result<Vec<BeamHypothesis>> {
    check_word(word)?;
    if beam_size == 0 {
        return Err(Error::Argument("beam size must be at least 1".into()));
    }
    let lattice = Lattice::new(word, model);
    let n = lattice.n();
    let mut lists: Vec<Vec<Hyp<'_>>> = vec![Vec::new(); n + 1];
    lists[0].push(Hyp {
        pieces: Vec::new(),
        score: 0.0,
    });
    for start in 0..n {
        let mut current = std::mem::take(&mut lists[start]);
        current.sort_by(hyp_order);
        current.truncate(beam_size);
        for end in start + 1..=(start + lattice.max_len).min(n) {
            let Some(next) = lattice.admissible(model, start, end) else {
                continue;
            };
            let piece = lattice.piece(start, end);
            for hyp in &current {
                let ctx = match hyp.pieces.last() {
                    None => model.context_id(START_SYMBOL),
                    Some(p) => model.subwords.id(p),
                };
                let mut pieces = hyp.pieces.clone();
                pieces.push(piece);
                lists[end].push(Hyp {
                    pieces,
                    score: hyp.score + model.step_ids(ctx, next),
                });
            }
        }
        lists[start] = current;
    }
    let mut last = std::mem::take(&mut lists[n]);
    last.sort_by(hyp_order);
    last.truncate(beam_size);
    if last.is_empty() {
        return Err(Error::Invariant(format!(
            "no complete hypothesis for {word:?}"
        )));
    }
    Ok(last
        .into_iter()
        .map(|h| BeamHypothesis {
            subwords: h.pieces.into_iter().map(Token::from_valid).collect(),
            log_score: h.score,
        })
        .collect())
}

/// Best segmentation found with `beam_size` hypotheses per end position.
pub fn beam_segment(
    word: &str,
    model: &BigramModel,
    beam_size: usize,
) -> Result<ScoredSegmentation<f64>> {
    let best = beam_search(word, model, beam_size)?.swap_remove(0);
    Ok(ScoredSegmentation {
        subwords: best.subwords,
        score: best.log_score,
    })
}

/// Exact best segmentation by dynamic programming over
/// `(end position, last piece)` states.
pub fn exact_segment(word: &str, model: &BigramModel) -> Result<ScoredSegmentation<f64>> {
    check_word(word)?;
    let lattice = Lattice::new(word, model);
    let n = lattice.n();
    let max_len = lattice.max_len;
    // best[end][len - 1]: best hypothesis whose last piece spans (end - len, end)
    let mut best: Vec<Vec<Option<Hyp<'_>>>> = vec![vec![None; max_len]; n + 1];
    for end in 1..=n {
        for len in 1..=max_len.min(end) {
            let start = end - len;
            let Some(next) = lattice.admissible(model, start, end) else {
                continue;
            };
            let piece = lattice.piece(start, end);
            let mut winner: Option<Hyp<'_>> = None;
            if start == 0 {
                keep_better(
                    &mut winner,
                    Hyp {
                        pieces: vec![piece],
                        score: model.step_ids(model.context_id(START_SYMBOL), next),
                    },
                );
            } else {
                for prev in best[start].iter().flatten() {
                    let ctx = model.subwords.id(prev.pieces.last().unwrap());
                    let mut pieces = prev.pieces.clone();
                    pieces.push(piece);
                    keep_better(
                        &mut winner,
                        Hyp {
                            pieces,
                            score: prev.score + model.step_ids(ctx, next),
                        },
                    );
                }
            }
            best[end][len - 1] = winner;
        }
    }
    let top = best[n]
        .iter()
        .flatten()
        .min_by(|a, b| hyp_order(a, b))
        .ok_or_else(|| Error::Invariant(format!("no segmentation of {word:?}")))?;
    Ok(ScoredSegmentation {
        subwords: top.pieces.iter().map(|p| Token::from_valid(*p)).collect(),
        score: top.score,
    })
}

/// Segments every word of `text` with the beam (or exactly when `beam_size`
/// is `None`).
pub fn segment_text(
    corpus: &crate::textio::Corpus,
    model: &BigramModel,
    beam_size: Option<usize>,
) -> Result<SegmentedText> {
    let mut cache: HashMap<&str, Vec<Token>> = HashMap::new();
    let mut types: Vec<&str> = corpus.tokens().collect();
    types.sort_unstable();
    types.dedup();
    let segs = types
        .par_iter()
        .map(|w| match beam_size {
            Some(b) => beam_segment(w, model, b),
            None => exact_segment(w, model),
        })
        .collect::<Result<Vec<_>>>()?;
    for (w, s) in types.into_iter().zip(segs) {
        cache.insert(w, s.subwords);
    }
    let lines = corpus
        .lines()
        .iter()
        .map(|l| l.split_whitespace().map(|w| cache[w].clone()).collect())
        .collect();
    Ok(SegmentedText::new(lines))
}
