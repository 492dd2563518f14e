//! Intrinsic evaluation: morpheme-boundary precision/recall/F1 and Rényi
//! efficiency of a token distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textio::{SegmentedLexicon, Token};

pub const DEFAULT_RENYI_ALPHA: f64 = 2.5;

/// Micro-averaged boundary scores. Precision is 1 when nothing is predicted,
/// recall is 1 when the gold standard has no boundaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryReport {
    pub true_positives: u64,
    pub predicted_boundaries: u64,
    pub gold_boundaries: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BoundaryReport {
    pub fn from_counts(tp: u64, predicted: u64, gold: u64) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        BoundaryReport {
            true_positives: tp,
            predicted_boundaries: predicted,
            gold_boundaries: gold,
            precision,
            recall,
            f1,
        }
    }

    pub fn machine_line(&self) -> String {
        format!("P={} R={} F1={}", self.precision, self.recall, self.f1)
    }
}

impl fmt::Display for BoundaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "boundaries: {} predicted, {} gold, {} correct",
            self.predicted_boundaries, self.gold_boundaries, self.true_positives
        )?;
        writeln!(f, "precision: {:.4}", self.precision)?;
        writeln!(f, "recall:    {:.4}", self.recall)?;
        write!(f, "F1:        {:.4}", self.f1)
    }
}

/// Character offsets inside the word where a piece ends.
pub fn boundaries(pieces: &[Token]) -> BTreeSet<usize> {
    let mut offset = 0;
    let mut out = BTreeSet::new();
    for p in &pieces[..pieces.len().saturating_sub(1)] {
        offset += p.char_len();
        out.insert(offset);
    }
    out
}

pub fn boundary_prf(
    predicted: &SegmentedLexicon,
    gold: &SegmentedLexicon,
) -> Result<BoundaryReport> {
    let missing_pred: Vec<&str> = gold
        .words()
        .filter(|w| !predicted.contains(w))
        .map(|w| w.as_str())
        .collect();
    let missing_gold: Vec<&str> = predicted
        .words()
        .filter(|w| !gold.contains(w))
        .map(|w| w.as_str())
        .collect();
    if !missing_pred.is_empty() || !missing_gold.is_empty() {
        return Err(Error::Validation(format!(
            "word lists differ; missing from predictions: {missing_pred:?}; missing from gold: {missing_gold:?}"
        )));
    }
    let (mut tp, mut pred_total, mut gold_total) = (0u64, 0u64, 0u64);
    for (word, gold_seg) in gold.iter() {
        let p = boundaries(predicted.get(word).expect("key sets match"));
        let g = boundaries(gold_seg);
        tp += p.intersection(&g).count() as u64;
        pred_total += p.len() as u64;
        gold_total += g.len() as u64;
    }
    Ok(BoundaryReport::from_counts(tp, pred_total, gold_total))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenyiReport<S> {
    pub alpha: S,
    /// Nats.
    pub entropy: S,
    /// `ln(vocab_size)`.
    pub max_entropy: S,
    pub efficiency: S,
}

impl<S: Scalar> RenyiReport<S> {
    pub fn machine_line(&self) -> String {
        format!(
            "H={} Hmax={} EFF={}",
            self.entropy, self.max_entropy, self.efficiency
        )
    }
}

impl<S: Scalar> fmt::Display for RenyiReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Renyi entropy (alpha={}): {} nats",
            self.alpha, self.entropy
        )?;
        writeln!(f, "maximum entropy: {} nats", self.max_entropy)?;
        write!(f, "efficiency: {}", self.efficiency)
    }
}

/// Rényi entropy in nats of the distribution given by `counts`; `alpha == 1`
/// gives Shannon entropy.
pub fn renyi_entropy<S: Scalar>(counts: &[u64], alpha: S) -> Result<S> {
    if !alpha.is_finite() || alpha <= S::zero() {
        return Err(Error::Argument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Argument("token frequencies are empty".into()));
    }
    let total = S::from_count(total);
    let probs = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| S::from_count(c) / total);
    if alpha == S::one() {
        Ok(probs.map(|p| -p * p.ln()).sum())
    } else {
        let mass: S = probs.map(|p| p.powf(alpha)).sum();
        Ok(mass.ln() / (S::one() - alpha))
    }
}

/// Rényi entropy of the token distribution over `ln(vocab_size)`.
pub fn renyi_efficiency<S: Scalar>(
    counts: impl IntoIterator<Item = u64>,
    vocab_size: usize,
    alpha: S,
) -> Result<RenyiReport<S>> {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let entropy = renyi_entropy(&counts, alpha)?;
    if vocab_size < counts.len() {
        return Err(Error::Argument(format!(
            "vocabulary size {vocab_size} is below the {} observed token types",
            counts.len()
        )));
    }
    let max_entropy = S::from_usize(vocab_size).unwrap().ln();
    // a one-type vocabulary is trivially used to capacity
    let efficiency = if vocab_size == 1 {
        S::one()
    } else {
        entropy / max_entropy
    };
    Ok(RenyiReport {
        alpha,
        entropy,
        max_entropy,
        efficiency,
    })
}

pub fn token_frequencies<'a>(tokens: impl IntoIterator<Item = &'a str>) -> BTreeMap<&'a str, u64> {
    let mut freqs = BTreeMap::new();
    for t in tokens {
        *freqs.entry(t).or_default() += 1;
    }
    freqs
}
