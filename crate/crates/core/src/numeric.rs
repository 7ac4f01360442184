//! Scalar-generic numeric kernels shared across stages.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floating-point scalar accepted by the numeric kernels.
pub trait Real: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {}

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("statistic requested over an empty sample")]
    Empty,
    #[error("sample contains a NaN")]
    NaN,
    #[error("share {0} is negative")]
    NegativeShare(String),
    #[error("quantile level {0} outside [0, 1]")]
    QuantileLevel(String),
}

/// Median with lower and upper quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles<T> {
    pub median: T,
    pub q1: T,
    pub q3: T,
}

/// Type-7 (linear interpolation) quantile of an ascending-sorted slice.
pub fn quantile_sorted<T: Real>(sorted: &[T], level: T) -> Result<T, NumericError> {
    if sorted.is_empty() {
        return Err(NumericError::Empty);
    }
    if !(level >= T::zero() && level <= T::one()) {
        return Err(NumericError::QuantileLevel(level.to_string()));
    }
    let h = T::from_count(sorted.len() - 1) * level;
    let lo = h.floor();
    let idx = lo.to_usize().unwrap_or(0);
    if idx + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    let frac = h - lo;
    Ok(sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]))
}

/// Median and IQR bounds of an unsorted sample.
pub fn median_iqr<T: Real>(values: &[T]) -> Result<Quartiles<T>, NumericError> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(NumericError::NaN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    Ok(Quartiles {
        median: quantile_sorted(&sorted, T::lit(0.5))?,
        q1: quantile_sorted(&sorted, T::lit(0.25))?,
        q3: quantile_sorted(&sorted, T::lit(0.75))?,
    })
}

/// Herfindahl concentration `Σ p²` over category shares.
///
/// With `normalized`, rescales to `(H − 1/N) / (1 − 1/N)` so that a uniform
/// split maps to 0; a single category is defined as 1.
pub fn herfindahl<T: Real>(shares: &[T], normalized: bool) -> Result<T, NumericError> {
    if shares.is_empty() {
        return Err(NumericError::Empty);
    }
    if let Some(bad) = shares.iter().find(|s| **s < T::zero()) {
        return Err(NumericError::NegativeShare(bad.to_string()));
    }
    let h: T = shares.iter().map(|p| *p * *p).sum();
    if !normalized {
        return Ok(h);
    }
    let n = shares.len();
    if n == 1 {
        return Ok(T::one());
    }
    let inv_n = T::one() / T::from_count(n);
    Ok((h - inv_n) / (T::one() - inv_n))
}

/// Midpoint-rule integral of `f` over `[a, b]` with (approximately) the given
/// step; the step is adjusted so an integral number of cells covers the range.
pub fn midpoint_integral<T: Real>(f: impl Fn(T) -> T, a: T, b: T, step: T) -> T {
    if b <= a {
        return T::zero();
    }
    let cells = ((b - a) / step).round().max(T::one());
    let n = cells.to_usize().unwrap_or(1);
    let width = (b - a) / cells;
    let half = T::lit(0.5);
    (0..n)
        .map(|i| f(a + (T::from_count(i) + half) * width) * width)
        .sum()
}
