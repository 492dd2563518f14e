//! Subword vectors in the word-embedding space.
//!
//! A binary segmentation matrix `A` (subwords x words) turns word
//! co-occurrence rows into subword co-occurrence rows `AC`. Their smoothed,
//! row-normalized logarithm is mapped through the right inverse of the
//! output matrix to give one vector per subword.

mod embedding;
mod solve;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use rayon::prelude::*;

pub use embedding::EmbeddingTable;
pub use solve::{Ridge, RightInverse};

use crate::cooccur::CooccurrenceCounts;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textio::{SegmentedLexicon, Token};

pub const DEFAULT_DIM: usize = 200;
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Subword inventory with contiguous ids in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubwordVocabulary {
    tokens: Vec<Token>,
    index: HashMap<Token, u32>,
}

impl SubwordVocabulary {
    pub fn new(tokens: impl IntoIterator<Item = Token>) -> Self {
        let set: BTreeSet<Token> = tokens.into_iter().collect();
        let tokens: Vec<Token> = set.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        SubwordVocabulary { tokens, index }
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

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &Token {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn max_chars(&self) -> usize {
        self.tokens.iter().map(Token::char_len).max().unwrap_or(0)
    }
}

/// Binary subword x word incidence. Rows with no incidence are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMatrix {
    subwords: SubwordVocabulary,
    words: Vec<Token>,
    /// `rows[s]` lists the word ids containing subword `s`, sorted.
    rows: Vec<Vec<u32>>,
}

/// Where the subword inventory comes from.
#[derive(Clone, Copy, Debug)]
pub enum SubwordSource<'a> {
    /// Subwords used by an existing segmentation, plus every single character.
    Lexicon(&'a SegmentedLexicon),
    /// Every substring of every word up to `max_len` characters.
    Substrings { max_len: usize },
}

pub fn build_segmentation_matrix(
    source: SubwordSource<'_>,
    words: &[Token],
) -> Result<SegmentationMatrix> {
    let mut incidence: BTreeMap<Token, BTreeSet<u32>> = BTreeMap::new();
    match source {
        SubwordSource::Lexicon(lexicon) => {
            let ids: HashMap<&str, u32> = words
                .iter()
                .enumerate()
                .map(|(i, w)| (w.as_str(), i as u32))
                .collect();
            for (word, seg) in lexicon.iter() {
                let x = *ids.get(word.as_str()).ok_or_else(|| {
                    Error::Validation(format!(
                        "lexicon word {:?} is not in the vocabulary",
                        word.as_str()
                    ))
                })?;
                for piece in seg {
                    incidence.entry(piece.clone()).or_default().insert(x);
                }
            }
            for (x, word) in words.iter().enumerate() {
                for c in word.chars() {
                    incidence
                        .entry(Token::from_valid(c.to_string()))
                        .or_default()
                        .insert(x as u32);
                }
            }
        }
        SubwordSource::Substrings { max_len } => {
            if max_len == 0 {
                return Err(Error::Argument("max_len must be at least 1".into()));
            }
            for (x, word) in words.iter().enumerate() {
                let bounds: Vec<usize> = word
                    .char_indices()
                    .map(|(i, _)| i)
                    .chain([word.len()])
                    .collect();
                let n = bounds.len() - 1;
                for start in 0..n {
                    for end in start + 1..=(start + max_len).min(n) {
                        incidence
                            .entry(Token::from_valid(&word[bounds[start]..bounds[end]]))
                            .or_default()
                            .insert(x as u32);
                    }
                }
            }
        }
    }
    SegmentationMatrix::from_incidence(words, incidence)
}

impl SegmentationMatrix {
    /// Builds the matrix from explicit `(subword -> word ids)` incidences.
    /// Every pair must satisfy "subword is a substring of word"; subwords with
    /// no words are dropped.
    pub fn from_incidence(
        words: &[Token],
        incidence: BTreeMap<Token, BTreeSet<u32>>,
    ) -> Result<Self> {
        let incidence: Vec<(Token, BTreeSet<u32>)> = incidence
            .into_iter()
            .filter(|(_, ws)| !ws.is_empty())
            .collect();
        for (s, ws) in &incidence {
            for &x in ws {
                let word = words.get(x as usize).ok_or_else(|| {
                    Error::Validation(format!("word id {x} out of range for |V|={}", words.len()))
                })?;
                if !word.contains(s.as_str()) {
                    return Err(Error::Validation(format!(
                        "subword {:?} is not a substring of word {:?}",
                        s.as_str(),
                        word.as_str()
                    )));
                }
            }
        }
        let subwords = SubwordVocabulary::new(incidence.iter().map(|(s, _)| s.clone()));
        let rows = incidence
            .into_iter()
            .map(|(_, ws)| ws.into_iter().collect())
            .collect();
        Ok(SegmentationMatrix {
            subwords,
            words: words.to_vec(),
            rows,
        })
    }

    /// Each word as its own sole subword.
    pub fn identity(words: &[Token]) -> Result<Self> {
        let incidence = words
            .iter()
            .enumerate()
            .map(|(x, w)| (w.clone(), BTreeSet::from([x as u32])))
            .collect::<BTreeMap<_, _>>();
        if incidence.len() != words.len() {
            return Err(Error::Validation("duplicate word in vocabulary".into()));
        }
        Self::from_incidence(words, incidence)
    }

    pub fn subwords(&self) -> &SubwordVocabulary {
        &self.subwords
    }

    pub fn words(&self) -> &[Token] {
        &self.words
    }

    pub fn num_subwords(&self) -> usize {
        self.rows.len()
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn row(&self, s: u32) -> &[u32] {
        &self.rows[s as usize]
    }

    pub fn contains(&self, s: u32, x: u32) -> bool {
        self.rows[s as usize].binary_search(&x).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

fn check_dims(a: &SegmentationMatrix, c: &CooccurrenceCounts) -> Result<()> {
    if a.num_words() != c.vocab_size() {
        return Err(Error::Argument(format!(
            "segmentation matrix covers {} words but co-occurrence counts cover {}",
            a.num_words(),
            c.vocab_size()
        )));
    }
    Ok(())
}

/// Fills `out` with row `s` of `log(norm(AC + lambda))`.
pub fn target_row<S: Scalar>(
    a: &SegmentationMatrix,
    c: &CooccurrenceCounts,
    s: u32,
    lambda: S,
    out: &mut [S],
) -> Result<()> {
    let mut acc = vec![0u64; c.vocab_size()];
    for &x in a.row(s) {
        for &(y, count) in c.row(x) {
            acc[y as usize] += count;
        }
    }
    let total: u64 = acc.iter().sum();
    let denom = S::from_count(total) + lambda * S::from_usize(acc.len()).unwrap();
    for (y, (o, &v)) in out.iter_mut().zip(&acc).enumerate() {
        if v == 0 && lambda == S::zero() {
            return Err(Error::Numerical(format!(
                "subword {:?} never co-occurs with word {:?}; use a positive lambda",
                a.subwords.token(s).as_str(),
                a.words[y].as_str()
            )));
        }
        *o = ((S::from_count(v) + lambda) / denom).ln();
    }
    Ok(())
}

/// Dense `|S| x |V|` matrix of `log(norm(AC))` with additive smoothing.
pub fn smoothed_log_target<S: Scalar>(
    a: &SegmentationMatrix,
    c: &CooccurrenceCounts,
    lambda: S,
) -> Result<Array2<S>> {
    check_dims(a, c)?;
    check_lambda(lambda)?;
    let mut t = Array2::zeros((a.num_subwords(), a.num_words()));
    for (s, mut row) in t.rows_mut().into_iter().enumerate() {
        target_row(a, c, s as u32, lambda, row.as_slice_mut().unwrap())?;
    }
    Ok(t)
}

fn check_lambda<S: Scalar>(lambda: S) -> Result<()> {
    if !lambda.is_finite() || lambda < S::zero() {
        return Err(Error::Argument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Solves `E_s W ~ targets` row by row.
pub fn right_inverse_solve<S: Scalar>(
    targets: &Array2<S>,
    w_rows: &EmbeddingTable<S>,
    ridge: Ridge<S>,
) -> Result<Array2<S>> {
    if targets.ncols() != w_rows.len() {
        return Err(Error::Argument(format!(
            "targets have {} columns but the output matrix has {} words",
            targets.ncols(),
            w_rows.len()
        )));
    }
    let inverse = RightInverse::new(
        w_rows.vectors().view(),
        ridge.resolve(w_rows.vectors().view()),
    )?;
    Ok(inverse.solve(targets.view()))
}

/// Subword vectors `E_s = log(norm(AC)) W_right^-1`.
pub fn compute_subword_embeddings<S: Scalar>(
    a: &SegmentationMatrix,
    c: &CooccurrenceCounts,
    w_rows: &EmbeddingTable<S>,
    lambda: S,
    ridge: Ridge<S>,
) -> Result<EmbeddingTable<S>> {
    if w_rows.len() != c.vocab_size() {
        return Err(Error::Argument(format!(
            "output matrix has {} rows but co-occurrence counts cover {} words",
            w_rows.len(),
            c.vocab_size()
        )));
    }
    let inverse = RightInverse::new(
        w_rows.vectors().view(),
        ridge.resolve(w_rows.vectors().view()),
    )?;
    embed_with(a, c, &inverse, lambda)
}

/// Same as [`compute_subword_embeddings`] with a precomputed right inverse.
///
/// Rows are solved independently, each from a scratch target of length
/// `|V|`, so memory stays proportional to the number of worker threads.
pub fn embed_with<S: Scalar>(
    a: &SegmentationMatrix,
    c: &CooccurrenceCounts,
    inverse: &RightInverse<S>,
    lambda: S,
) -> Result<EmbeddingTable<S>> {
    check_dims(a, c)?;
    check_lambda(lambda)?;
    if inverse.words() != a.num_words() {
        return Err(Error::Argument(
            "right inverse does not match the word vocabulary".into(),
        ));
    }
    let d = inverse.dim();
    let rows: Vec<Vec<S>> = (0..a.num_subwords() as u32)
        .into_par_iter()
        .map_init(
            || vec![S::zero(); a.num_words()],
            |target, s| {
                target_row(a, c, s, lambda, target)?;
                let mut out = vec![S::zero(); d];
                inverse.apply(target, &mut out);
                if let Some(v) = out.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite value {v} in the vector of subword {:?}",
                        a.subwords.token(s).as_str()
                    )));
                }
                Ok(out)
            },
        )
        .collect::<Result<_>>()?;
    let vectors = Array2::from_shape_vec((rows.len(), d), rows.concat())
        .map_err(|e| Error::Invariant(e.to_string()))?;
    EmbeddingTable::new(a.subwords.tokens().to_vec(), vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toks(names: &[&str]) -> Vec<Token> {
        names.iter().map(|n| Token::new(*n).unwrap()).collect()
    }

    fn lexicon(entries: &[(&str, &[&str])]) -> SegmentedLexicon {
        entries
            .iter()
            .map(|(w, s)| (Token::new(*w).unwrap(), toks(s)))
            .collect()
    }

    #[test]
    fn lexicon_mode_adds_characters() {
        let words = toks(&["ab"]);
        let a = build_segmentation_matrix(
            SubwordSource::Lexicon(&lexicon(&[("ab", &["a", "b"])])),
            &words,
        )
        .unwrap();
        let sv = a.subwords();
        assert_eq!(sv.len(), 2);
        assert!(a.contains(sv.id("a").unwrap(), 0));
        assert!(a.contains(sv.id("b").unwrap(), 0));
    }

    #[test]
    fn lexicon_mode_is_binary() {
        let words = toks(&["aba"]);
        let a = build_segmentation_matrix(
            SubwordSource::Lexicon(&lexicon(&[("aba", &["ab", "a"])])),
            &words,
        )
        .unwrap();
        let s = a.subwords().id("a").unwrap();
        assert_eq!(a.row(s), &[0]);
        assert_eq!(a.subwords().tokens(), &toks(&["a", "ab", "b"])[..]);
    }

    #[test]
    fn lexicon_word_missing_from_vocabulary() {
        let err = build_segmentation_matrix(
            SubwordSource::Lexicon(&lexicon(&[("zz", &["zz"])])),
            &toks(&["ab"]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn substring_enumeration() {
        // oracle: all substrings of "ab" up to length 2
        let words = toks(&["ab"]);
        let mut expected = BTreeSet::new();
        let w: Vec<char> = "ab".chars().collect();
        for i in 0..w.len() {
            for j in i + 1..=w.len() {
                expected.insert(w[i..j].iter().collect::<String>());
            }
        }
        let a =
            build_segmentation_matrix(SubwordSource::Substrings { max_len: 2 }, &words).unwrap();
        let got: BTreeSet<String> = a
            .subwords()
            .tokens()
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(got, expected);
        assert_eq!(a.nnz(), 3);
        assert!(
            build_segmentation_matrix(SubwordSource::Substrings { max_len: 0 }, &words).is_err()
        );
    }

    #[test]
    fn non_substring_incidence_is_rejected() {
        let inc = BTreeMap::from([(Token::new("zz").unwrap(), BTreeSet::from([0u32]))]);
        assert!(SegmentationMatrix::from_incidence(&toks(&["ab"]), inc).is_err());
    }

    fn counts(dense: &[&[u64]]) -> CooccurrenceCounts {
        let mut entries = Vec::new();
        for (x, row) in dense.iter().enumerate() {
            for (y, &c) in row.iter().enumerate() {
                if y >= x {
                    entries.push((x as u32, y as u32, c));
                }
            }
        }
        CooccurrenceCounts::from_upper_triangle(5, dense.len(), entries).unwrap()
    }

    #[test]
    fn single_column_target_is_zero() {
        let words = toks(&["a"]);
        let a = SegmentationMatrix::identity(&words).unwrap();
        let t = smoothed_log_target(&a, &counts(&[&[4]]), 0.0f64).unwrap();
        assert_eq!(t, array![[0.0]]);
    }

    #[test]
    fn target_normalization_by_hand() {
        // subword "x" in both words: AC row = C[0] + C[1] = (3, 1)
        let words = toks(&["xa", "xb"]);
        let inc = BTreeMap::from([(Token::new("x").unwrap(), BTreeSet::from([0u32, 1]))]);
        let a = SegmentationMatrix::from_incidence(&words, inc).unwrap();
        let c = counts(&[&[2, 1], &[1, 0]]);
        let t = smoothed_log_target(&a, &c, 0.0f64).unwrap();
        assert_eq!(t.row(0).to_vec(), vec![0.75f64.ln(), 0.25f64.ln()]);

        // AC row (3, 0) with lambda 1
        let c = counts(&[&[3, 0], &[0, 0]]);
        let t = smoothed_log_target(&a, &c, 1.0f64).unwrap();
        assert_eq!(
            t.row(0).to_vec(),
            vec![(4.0f64 / 5.0).ln(), (1.0f64 / 5.0).ln()]
        );

        let err = smoothed_log_target(&a, &c, 0.0f64).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Numerical);
        assert!(err.to_string().contains("\"x\"") && err.to_string().contains("\"xb\""));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = SegmentationMatrix::identity(&toks(&["a", "b"])).unwrap();
        assert!(smoothed_log_target(&a, &counts(&[&[1]]), 0.1f64).is_err());
    }
}
