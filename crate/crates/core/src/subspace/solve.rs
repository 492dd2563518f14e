//! Ridge-regularized right inverse of the output matrix.
//!
//! For output rows `W_rows` (`|V| x d`, one row per word) and a target row
//! `t` (length `|V|`), the solution `x` (length `d`) minimizes
//! `|x W - t|^2 + ridge |x|^2`. Writing `B = [W_rows; sqrt(ridge) I]` and
//! `B = Q R`, the minimizer is `x = t Q_top R^-T`, where `Q_top` is the first
//! `|V|` rows of the thin `Q`. The map `M = Q_top R^-T` is formed once and
//! applied to every target row.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ridge strength for the right-inverse solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge<S> {
    /// `1e-6 * trace(W W^T) / d`.
    Auto,
    Fixed(S),
}

impl<S: Scalar> Ridge<S> {
    pub fn resolve(self, w_rows: ArrayView2<'_, S>) -> S {
        match self {
            Ridge::Fixed(r) => r,
            Ridge::Auto => {
                let trace: S = w_rows.iter().map(|&v| v * v).sum();
                S::lit(1e-6) * trace / S::from_usize(w_rows.ncols()).unwrap()
            }
        }
    }
}

impl<S: Scalar> std::str::FromStr for Ridge<S> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Ridge::Auto);
        }
        match s.parse::<S>() {
            Ok(v) if v.is_finite() && v >= S::zero() => Ok(Ridge::Fixed(v)),
            _ => Err(format!(
                "ridge must be `auto` or a nonnegative number, got {s:?}"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RightInverse<S> {
    /// `|V| x d`, row-major.
    map: Array2<S>,
    ridge: S,
}

impl<S: Scalar> RightInverse<S> {
    pub fn new(w_rows: ArrayView2<'_, S>, ridge: S) -> Result<Self> {
        let (n, d) = w_rows.dim();
        if !ridge.is_finite() || ridge < S::zero() {
            return Err(Error::Argument(format!(
                "ridge must be finite and nonnegative, got {ridge}"
            )));
        }
        if d == 0 || d > n {
            return Err(Error::Argument(format!(
                "output matrix has {n} rows of dimension {d}; need 0 < d <= |V|"
            )));
        }
        let m = n + d;
        // column-major copy of B = [W_rows; sqrt(ridge) I]
        let mut a = vec![S::zero(); m * d];
        for j in 0..d {
            let col = &mut a[j * m..(j + 1) * m];
            for i in 0..n {
                col[i] = w_rows[(i, j)];
            }
            col[n + j] = ridge.sqrt();
        }

        let mut reflectors: Vec<Vec<S>> = Vec::with_capacity(d);
        let mut diag = Vec::with_capacity(d);
        for k in 0..d {
            let rest = &mut a[k * m..];
            let colk = &mut rest[..m];
            let norm = colk[k..].iter().map(|&v| v * v).sum::<S>().sqrt();
            let alpha = if colk[k] > S::zero() { -norm } else { norm };
            let mut v: Vec<S> = colk[k..].to_vec();
            v[0] -= alpha;
            let vnorm2: S = v.iter().map(|&x| x * x).sum();
            if vnorm2 > S::zero() {
                for j in k..d {
                    let col = &mut rest[(j - k) * m + k..(j - k + 1) * m];
                    reflect(&v, vnorm2, col);
                }
            }
            diag.push(rest[k]);
            reflectors.push(if vnorm2 > S::zero() { v } else { Vec::new() });
        }

        let scale = diag.iter().fold(S::zero(), |acc, r| acc.max(r.abs()));
        let tol = S::epsilon() * scale * S::from_usize(m).unwrap();
        if let Some(k) = diag.iter().position(|r| r.abs() <= tol) {
            return Err(Error::Numerical(format!(
                "W W^T is rank-deficient (pivot {k} vanishes with ridge {ridge}); use a positive ridge"
            )));
        }

        // upper-triangular R, row-major d x d
        let mut r = vec![S::zero(); d * d];
        for j in 0..d {
            for i in 0..=j {
                r[i * d + j] = a[j * m + i];
            }
        }

        // M = Q_top R^-T: build each column of thin Q, keep its top n rows,
        // then back-substitute row-wise through R.
        let mut map = Array2::<S>::zeros((n, d));
        let mut e = vec![S::zero(); m];
        for j in 0..d {
            e.iter_mut().for_each(|x| *x = S::zero());
            e[j] = S::one();
            for k in (0..d).rev() {
                let v = &reflectors[k];
                if !v.is_empty() {
                    let vnorm2: S = v.iter().map(|&x| x * x).sum();
                    reflect(v, vnorm2, &mut e[k..]);
                }
            }
            for i in 0..n {
                map[(i, j)] = e[i];
            }
        }
        // each row q of Q_top solves R m^T = q^T
        for mut row in map.rows_mut() {
            let q = row.to_vec();
            for i in (0..d).rev() {
                let mut acc = q[i];
                for k in i + 1..d {
                    acc -= r[i * d + k] * row[k];
                }
                row[i] = acc / r[i * d + i];
            }
        }
        Ok(RightInverse { map, ridge })
    }

    pub fn ridge(&self) -> S {
        self.ridge
    }

    pub fn words(&self) -> usize {
        self.map.nrows()
    }

    pub fn dim(&self) -> usize {
        self.map.ncols()
    }

    /// Writes the solution for target row `t` into `out`.
    pub fn apply(&self, t: &[S], out: &mut [S]) {
        assert_eq!(t.len(), self.words());
        assert_eq!(out.len(), self.dim());
        out.iter_mut().for_each(|x| *x = S::zero());
        for (&ti, mrow) in t.iter().zip(self.map.rows()) {
            if ti == S::zero() {
                continue;
            }
            for (o, &mv) in out.iter_mut().zip(mrow) {
                *o += ti * mv;
            }
        }
    }

    /// Solves every row of `targets` (`rows x |V|`).
    pub fn solve(&self, targets: ArrayView2<'_, S>) -> Array2<S> {
        let mut out = Array2::zeros((targets.nrows(), self.dim()));
        for (t, mut o) in targets.rows().into_iter().zip(out.rows_mut()) {
            let t = t.to_vec();
            self.apply(&t, o.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

/// Applies `I - 2 v v^T / (v^T v)` to `x` in place.
fn reflect<S: Scalar>(v: &[S], vnorm2: S, x: &mut [S]) {
    let dot: S = v.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
    let f = (dot + dot) / vnorm2;
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
