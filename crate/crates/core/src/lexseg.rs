//! Word segmentation by embedding similarity, and the alternating refinement
//! of a segmentation with the subword vectors it induces.
//!
//! A segmentation `s1 .. sn` of word `x` scores
//! `sum_i (cos(E(x), E_s(s_i)) - alpha)`, each term rounded by
//! [`grid_round`] so totals add exactly. The best segmentation is found by
//! dynamic programming over prefix lengths. Ties go to fewer subwords, then
//! to the lexicographically smallest subword sequence.

use std::cmp::Ordering;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cooccur::CooccurrenceCounts;
use crate::error::{Error, Result};
use crate::scalar::{cosine, grid_round, Scalar};
use crate::subspace::{
    build_segmentation_matrix, embed_with, EmbeddingTable, Ridge, RightInverse, SegmentationMatrix,
    SubwordSource,
};
use crate::textio::{Corpus, SegmentedLexicon, SegmentedText, Token};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSegmentation<S> {
    pub subwords: Vec<Token>,
    pub score: S,
}

/// Orders candidates best-first: higher score, then fewer pieces, then the
/// lexicographically smaller sequence.
pub fn candidate_order<S: PartialOrd, T: Ord>(a: (S, &[T]), b: (S, &[T])) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(b.1))
}

/// Byte offsets of character boundaries, including both ends.
pub(crate) fn char_bounds(word: &str) -> Vec<usize> {
    word.char_indices()
        .map(|(i, _)| i)
        .chain([word.len()])
        .collect()
}

/// Score contributed by one piece with vector `subword_vec`.
pub fn piece_score<S: Scalar>(word_vec: &[S], subword_vec: &[S], alpha: S) -> f64 {
    grid_round(
        (cosine(word_vec, subword_vec) - alpha)
            .to_f64()
            .unwrap_or(f64::NAN),
    )
}

/// Best segmentation of `word` whose pieces all have subword vectors.
pub fn embedding_segment<S: Scalar>(
    word: &str,
    word_vec: &[S],
    subwords: &EmbeddingTable<S>,
    alpha: S,
) -> Result<ScoredSegmentation<S>> {
    if word.is_empty() {
        return Err(Error::Argument("cannot segment an empty word".into()));
    }
    if word_vec.len() != subwords.dim() {
        return Err(Error::Argument(format!(
            "word vector has dimension {} but subword vectors have {}",
            word_vec.len(),
            subwords.dim()
        )));
    }
    if let Some(c) = word
        .chars()
        .find(|c| !subwords.contains(c.encode_utf8(&mut [0; 4])))
    {
        return Err(Error::Coverage {
            word: word.to_owned(),
            character: c,
        });
    }

    let bounds = char_bounds(word);
    let n = bounds.len() - 1;
    let max_len = subwords.max_token_chars().max(1);
    // best[i] = (score, pieces, start of last piece) for the prefix of i chars
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n + 1];
    best[0] = Some((0.0, 0, 0));
    let pieces_of = |best: &[Option<(f64, usize, usize)>], mut end: usize| {
        let mut out = Vec::new();
        while end > 0 {
            let start = best[end].expect("reachable prefix").2;
            out.push(&word[bounds[start]..bounds[end]]);
            end = start;
        }
        out.reverse();
        out
    };

    for i in 1..=n {
        for j in i.saturating_sub(max_len)..i {
            let Some((prefix_score, prefix_count, _)) = best[j] else {
                continue;
            };
            let piece = &word[bounds[j]..bounds[i]];
            let Some(vec) = subwords.get(piece) else {
                continue;
            };
            let score = prefix_score + piece_score(word_vec, vec, alpha);
            let count = prefix_count + 1;
            let better = match best[i] {
                None => true,
                Some((cur_score, cur_count, cur_start)) => {
                    if score != cur_score {
                        score > cur_score
                    } else if count != cur_count {
                        count < cur_count
                    } else {
                        let mut mine = pieces_of(&best, j);
                        mine.push(piece);
                        let mut theirs = pieces_of(&best, cur_start);
                        theirs.push(&word[bounds[cur_start]..bounds[i]]);
                        mine < theirs
                    }
                }
            };
            if better {
                best[i] = Some((score, count, j));
            }
        }
    }

    let (score, _, _) =
        best[n].ok_or_else(|| Error::Invariant(format!("no segmentation of {word:?}")))?;
    let subwords = pieces_of(&best, n)
        .into_iter()
        .map(Token::from_valid)
        .collect();
    Ok(ScoredSegmentation {
        subwords,
        score: S::from_f64(score).unwrap_or_else(S::nan),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig<S> {
    pub alpha: S,
    pub lambda: S,
    pub ridge: Ridge<S>,
    pub max_iters: usize,
}

impl<S: Scalar> Default for RefineConfig<S> {
    fn default() -> Self {
        RefineConfig {
            alpha: S::lit(DEFAULT_ALPHA),
            lambda: S::lit(crate::subspace::DEFAULT_LAMBDA),
            ridge: Ridge::Auto,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationStats {
    pub iteration: usize,
    pub changed_words: usize,
    pub subword_count: usize,
}

#[derive(Clone, Debug)]
pub struct RefinementState<S> {
    pub iteration: usize,
    pub converged: bool,
    pub initial_subword_count: usize,
    pub matrix: SegmentationMatrix,
    pub subword_embeddings: EmbeddingTable<S>,
    pub lexicon: SegmentedLexicon,
    pub history: Vec<IterationStats>,
}

/// Re-segments every lexicon word against `subwords`, preserving lexicon order.
pub fn resegment<S: Scalar>(
    lexicon: &SegmentedLexicon,
    word_embeddings: &EmbeddingTable<S>,
    subwords: &EmbeddingTable<S>,
    alpha: S,
) -> Result<SegmentedLexicon> {
    let words: Vec<&Token> = lexicon.words().collect();
    let segs = words
        .par_iter()
        .map(|w| {
            let vec = word_embeddings.get(w).ok_or_else(|| {
                Error::Validation(format!("word {:?} has no embedding", w.as_str()))
            })?;
            embedding_segment(w, vec, subwords, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SegmentedLexicon::new();
    for (w, seg) in words.into_iter().zip(segs) {
        out.insert(w.clone(), seg.subwords)?;
    }
    Ok(out)
}

/// Alternates solving subword vectors for the current segmentation and
/// re-segmenting every lexicon word with them, until no segmentation changes
/// or `max_iters` is reached.
///
/// Rows of `word_embeddings` and `output_rows` must follow the id order of
/// `counts`. Single characters stay in the inventory even when unused, so
/// every word remains segmentable.
pub fn refine<S: Scalar>(
    lexicon0: &SegmentedLexicon,
    word_embeddings: &EmbeddingTable<S>,
    counts: &CooccurrenceCounts,
    output_rows: &EmbeddingTable<S>,
    config: &RefineConfig<S>,
) -> Result<RefinementState<S>> {
    refine_observed(
        lexicon0,
        word_embeddings,
        counts,
        output_rows,
        config,
        |_| {},
    )
}

/// [`refine`], reporting each iteration's statistics as it completes.
pub fn refine_observed<S: Scalar>(
    lexicon0: &SegmentedLexicon,
    word_embeddings: &EmbeddingTable<S>,
    counts: &CooccurrenceCounts,
    output_rows: &EmbeddingTable<S>,
    config: &RefineConfig<S>,
    mut observe: impl FnMut(&IterationStats),
) -> Result<RefinementState<S>> {
    if config.max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    if word_embeddings.tokens() != output_rows.tokens() {
        return Err(Error::Validation(
            "input and output embedding tables list different words".into(),
        ));
    }
    if word_embeddings.dim() != output_rows.dim() {
        return Err(Error::Validation(format!(
            "input vectors have dimension {} but output vectors have {}",
            word_embeddings.dim(),
            output_rows.dim()
        )));
    }
    if let Some(w) = lexicon0.words().find(|w| !word_embeddings.contains(w)) {
        return Err(Error::Validation(format!(
            "lexicon word {:?} has no embedding",
            w.as_str()
        )));
    }
    let words = word_embeddings.tokens();
    let ridge = config.ridge.resolve(output_rows.vectors().view());
    let inverse = RightInverse::new(output_rows.vectors().view(), ridge)?;

    let mut lexicon = lexicon0.clone();
    let mut matrix = build_segmentation_matrix(SubwordSource::Lexicon(&lexicon), words)?;
    let initial_subword_count = matrix.num_subwords();
    let mut history = Vec::new();
    for iteration in 1..=config.max_iters {
        let embeddings = embed_with(&matrix, counts, &inverse, config.lambda)?;
        let next = resegment(&lexicon, word_embeddings, &embeddings, config.alpha)?;
        let changed_words = next
            .iter()
            .zip(lexicon.iter())
            .filter(|((_, a), (_, b))| a != b)
            .count();
        if changed_words > 0 {
            lexicon = next;
            matrix = build_segmentation_matrix(SubwordSource::Lexicon(&lexicon), words)?;
        }
        let stats = IterationStats {
            iteration,
            changed_words,
            subword_count: matrix.num_subwords(),
        };
        observe(&stats);
        history.push(stats);
        if changed_words == 0 {
            return Ok(RefinementState {
                iteration,
                converged: true,
                initial_subword_count,
                matrix,
                subword_embeddings: embeddings,
                lexicon,
                history,
            });
        }
    }
    let subword_embeddings = embed_with(&matrix, counts, &inverse, config.lambda)?;
    Ok(RefinementState {
        iteration: config.max_iters,
        converged: false,
        initial_subword_count,
        matrix,
        subword_embeddings,
        lexicon,
        history,
    })
}

/// What to emit for a word missing from the segmentation map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OovPolicy {
    Error,
    Whole,
    Char,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "error" => Ok(OovPolicy::Error),
            "whole" => Ok(OovPolicy::Whole),
            "char" => Ok(OovPolicy::Char),
            _ => Err(format!(
                "unknown OOV policy {s:?}; expected error, whole or char"
            )),
        }
    }
}

/// Applies a word-type segmentation map to running text.
pub fn segment_corpus(
    corpus: &Corpus,
    map: &SegmentedLexicon,
    policy: OovPolicy,
) -> Result<SegmentedText> {
    let lines: Vec<Result<Vec<Vec<Token>>>> = corpus
        .lines()
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|word| match map.get(word) {
                    Some(seg) => Ok(seg.to_vec()),
                    None => match policy {
                        OovPolicy::Error => Err(Error::OutOfVocabulary {
                            word: word.to_owned(),
                            line: i + 1,
                        }),
                        OovPolicy::Whole => Ok(vec![Token::from_valid(word)]),
                        OovPolicy::Char => Ok(word
                            .chars()
                            .map(|c| Token::from_valid(c.to_string()))
                            .collect()),
                    },
                })
                .collect()
        })
        .collect();
    // first error in line order, independent of scheduling
    let lines = lines.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SegmentedText::new(lines))
}

/// Embedding segmentation of every distinct word in `words` that has a
/// vector; words without one are skipped.
pub fn embedding_lexicon<'a, S: Scalar>(
    words: impl IntoIterator<Item = &'a str>,
    word_embeddings: &EmbeddingTable<S>,
    subwords: &EmbeddingTable<S>,
    alpha: S,
) -> Result<SegmentedLexicon> {
    let mut types: Vec<&str> = words
        .into_iter()
        .filter(|w| word_embeddings.contains(w))
        .collect();
    types.sort_unstable();
    types.dedup();
    let segs = types
        .par_iter()
        .map(|w| embedding_segment(w, word_embeddings.get(w).unwrap(), subwords, alpha))
        .collect::<Result<Vec<_>>>()?;
    let mut lex = SegmentedLexicon::new();
    for (w, seg) in types.into_iter().zip(segs) {
        lex.insert(Token::from_valid(w), seg.subwords)?;
    }
    Ok(lex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn table(entries: &[(&str, Vec<f64>)]) -> EmbeddingTable<f64> {
        let dim = entries[0].1.len();
        let data = entries.iter().flat_map(|(_, v)| v.clone()).collect();
        EmbeddingTable::new(
            entries.iter().map(|(t, _)| tok(t)).collect(),
            Array2::from_shape_vec((entries.len(), dim), data).unwrap(),
        )
        .unwrap()
    }

    /// Scores every split of `word` and keeps the best under the documented
    /// tie-breaking.
    pub(crate) fn brute_force(
        word: &str,
        vec: &[f64],
        subwords: &EmbeddingTable<f64>,
        alpha: f64,
    ) -> (Vec<String>, f64) {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        let mut best: Option<(f64, Vec<String>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut pieces = Vec::new();
            let mut start = 0;
            for i in 1..=n {
                if i == n || mask & (1 << (i - 1)) != 0 {
                    pieces.push(chars[start..i].iter().collect::<String>());
                    start = i;
                }
            }
            if !pieces.iter().all(|p| subwords.contains(p)) {
                continue;
            }
            let mut score = 0.0;
            for p in &pieces {
                score += piece_score(vec, subwords.get(p).unwrap(), alpha);
            }
            let replace = match &best {
                None => true,
                Some((s, b)) => {
                    candidate_order((score, &pieces[..]), (*s, &b[..])) == Ordering::Less
                }
            };
            if replace {
                best = Some((score, pieces));
            }
        }
        let (s, b) = best.unwrap();
        (b, s)
    }

    #[test]
    fn single_character_word() {
        let t = table(&[("a", vec![1.0, 0.0])]);
        let seg = embedding_segment("a", &[1.0, 1.0], &t, 1.0).unwrap();
        assert_eq!(seg.subwords, vec![tok("a")]);
        let expected = cosine(&[1.0, 1.0], &[1.0, 0.0]) - 1.0;
        assert!((seg.score - expected).abs() < 1e-10);
        assert_eq!(seg.score, grid_round(expected));
    }

    #[test]
    fn missing_character_is_a_coverage_error() {
        let t = table(&[("a", vec![1.0])]);
        let err = embedding_segment("ab", &[1.0], &t, 1.0).unwrap_err();
        assert!(
            matches!(err, Error::Coverage { character: 'b', .. }),
            "{err}"
        );
    }

    #[test]
    fn zero_word_vector_scores_neutral() {
        let t = table(&[("a", vec![1.0]), ("b", vec![1.0]), ("ab", vec![-1.0])]);
        let seg = embedding_segment("ab", &[0.0], &t, 1.0).unwrap();
        // all cosines are 0, so the single piece wins on count
        assert_eq!(seg.subwords, vec![tok("ab")]);
        assert_eq!(seg.score, -1.0);
    }

    #[test]
    fn ties_prefer_fewer_then_lexicographic() {
        // cos = alpha = 1 for every piece, so all splits score 0
        let t = table(&[
            ("a", vec![1.0]),
            ("b", vec![1.0]),
            ("ab", vec![1.0]),
            ("ba", vec![1.0]),
        ]);
        let seg = embedding_segment("aba", &[1.0], &t, 1.0).unwrap();
        // two-piece splits beat a|b|a; ["a", "ba"] sorts before ["ab", "a"]
        assert_eq!(seg.subwords, vec![tok("a"), tok("ba")]);
        assert_eq!(brute_force("aba", &[1.0], &t, 1.0).0, vec!["a", "ba"]);
    }

    #[test]
    fn matches_brute_force_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=9);
            let word: String = (0..n)
                .map(|_| ['a', 'b', 'c'][rng.gen_range(0..3)])
                .collect();
            let mut entries: Vec<(String, Vec<f64>)> = ["a", "b", "c"]
                .iter()
                .map(|c| {
                    (
                        c.to_string(),
                        (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    )
                })
                .collect();
            for _ in 0..8 {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(i + 1..=n);
                let sub: String = word.chars().skip(i).take(j - i).collect();
                if !entries.iter().any(|(t, _)| *t == sub) {
                    entries.push((sub, (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()));
                }
            }
            let refs: Vec<(&str, Vec<f64>)> = entries
                .iter()
                .map(|(t, v)| (t.as_str(), v.clone()))
                .collect();
            let t = table(&refs);
            let vec: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let alpha = rng.gen_range(0.0..1.5);
            let got = embedding_segment(&word, &vec, &t, alpha).unwrap();
            let (expected, score) = brute_force(&word, &vec, &t, alpha);
            let got_text: Vec<&str> = got.subwords.iter().map(Token::as_str).collect();
            assert_eq!(got_text, expected);
            assert_eq!(got.score, score);
            assert!(got.score <= got.subwords.len() as f64 * (1.0 - alpha) + 1e-12);
        }
    }

    #[test]
    fn oov_policies() {
        let map: SegmentedLexicon = [(tok("ab"), vec![tok("a"), tok("b")])]
            .into_iter()
            .collect();
        let corpus = Corpus::from_text("ab ab\nab zzz");
        let out = segment_corpus(&corpus, &map, OovPolicy::Char).unwrap();
        assert_eq!(out.lines()[1][1], vec![tok("z"), tok("z"), tok("z")]);
        let out = segment_corpus(&corpus, &map, OovPolicy::Whole).unwrap();
        assert_eq!(out.lines()[1][1], vec![tok("zzz")]);
        let err = segment_corpus(&corpus, &map, OovPolicy::Error).unwrap_err();
        assert!(
            matches!(&err, Error::OutOfVocabulary { word, line: 2 } if word == "zzz"),
            "{err}"
        );

        let in_lex = segment_corpus(&Corpus::from_text("ab"), &map, OovPolicy::Error).unwrap();
        assert!(in_lex
            .words()
            .flatten()
            .all(|t| t.as_str() == "a" || t.as_str() == "b"));
        assert!("bogus".parse::<OovPolicy>().is_err());
    }
}
