use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

/// Real scalar used by the embedding algebra and the metrics.
///
/// Implemented for `f32` and `f64`. `Display` must print the shortest
/// representation that parses back to the same value, which holds for both.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + FromStr
    + Send
    + Sync
    + Default
    + 'static
{
    /// Converts an `f64` constant, panicking only for values no float can hold.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("scalar literal out of range")
    }

    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("count not representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = S::zero();
    let mut na = S::zero();
    let mut nb = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == S::zero() || nb == S::zero() {
        return S::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// `2^36`.
const SCORE_GRID: f64 = 68_719_476_736.0;

/// Rounds a per-piece segmentation score to a multiple of `2^-36`. Sums of
/// such values are exact while their magnitude stays below `2^17`, so a
/// segmentation's total does not depend on the order of addition and
/// dynamic programs rank prefixes exactly as full enumeration would.
pub fn grid_round(x: f64) -> f64 {
    (x * SCORE_GRID).round() / SCORE_GRID
}
