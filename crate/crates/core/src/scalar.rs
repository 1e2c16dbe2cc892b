//! Numeric kernel, generic over the scalar type.
//!
//! Everything here is pure scalar math shared by the scoring and training
//! paths: cosine similarity, overflow-safe softmax, proximity-weighted
//! density, the density-to-distinctiveness map, and group-relative
//! advantage normalization. Functions are generic over [`Scalar`] so the
//! kernel works at `f32` or `f64`; the engine instantiates `f64` via
//! [`crate::Real`].

use num_traits::Float;

/// Float capabilities the kernel needs. Implemented for `f32` and `f64`.
pub trait Scalar: Float + num_traits::FromPrimitive + std::fmt::Debug + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Errors from vector-shaped inputs.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("empty input")]
    EmptyInput,
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> Result<F, NumericError> {
    if a.len() != b.len() {
        return Err(NumericError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y))
}

pub fn l2_norm<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Scale `v` to unit norm in place. Errors on the zero vector.
pub fn l2_normalize<F: Scalar>(v: &mut [F]) -> Result<(), NumericError> {
    let norm = l2_norm(v);
    if norm == F::zero() {
        return Err(NumericError::ZeroVector);
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    Ok(())
}

/// Cosine similarity `dot(a,b) / (|a||b|)`.
pub fn cosine_similarity<F: Scalar>(a: &[F], b: &[F]) -> Result<F, NumericError> {
    let d = dot(a, b)?;
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == F::zero() || nb == F::zero() {
        return Err(NumericError::ZeroVector);
    }
    Ok(d / (na * nb))
}

/// Softmax with max-subtraction so large inputs cannot overflow.
///
/// Outputs are positive and sum to 1 for any non-empty input.
pub fn softmax<F: Scalar>(xs: &[F]) -> Result<Vec<F>, NumericError> {
    if xs.is_empty() {
        return Err(NumericError::EmptyInput);
    }
    let max = xs.iter().cloned().fold(xs[0], F::max);
    let exps: Vec<F> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total = exps.iter().fold(F::zero(), |acc, &e| acc + e);
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Temperature-softmax proximity weights: `softmax(sims / temperature)`.
pub fn proximity_weights<F: Scalar>(sims: &[F], temperature: F) -> Result<Vec<F>, NumericError> {
    let scaled: Vec<F> = sims.iter().map(|&s| s / temperature).collect();
    softmax(&scaled)
}

/// Proportional weights `w_j = s_j / sum(s)`, the alternative weighting
/// scheme selectable via config. Falls back to uniform weights when the
/// similarities sum to zero (e.g. an all-orthogonal batch).
pub fn proportional_weights<F: Scalar>(sims: &[F]) -> Result<Vec<F>, NumericError> {
    if sims.is_empty() {
        return Err(NumericError::EmptyInput);
    }
    let total = sims.iter().fold(F::zero(), |acc, &s| acc + s);
    if total == F::zero() {
        let n = F::from_usize(sims.len()).expect("length fits in scalar");
        return Ok(vec![F::one() / n; sims.len()]);
    }
    Ok(sims.iter().map(|&s| s / total).collect())
}

/// Weighted local density: dot product of weights and similarities.
pub fn local_density<F: Scalar>(sims: &[F], weights: &[F]) -> Result<F, NumericError> {
    dot(sims, weights)
}

/// Map a local density to a distinctiveness score `min(1, exp(-decay * density))`.
///
/// Negative densities (anti-correlated neighbors) would push the raw value
/// above 1; the clamp keeps the score inside `(0, 1]`.
pub fn distinctiveness<F: Scalar>(density: F, decay: F) -> F {
    (-decay * density).exp().min(F::one())
}

pub fn mean<F: Scalar>(xs: &[F]) -> Result<F, NumericError> {
    if xs.is_empty() {
        return Err(NumericError::EmptyInput);
    }
    let n = F::from_usize(xs.len()).expect("length fits in scalar");
    Ok(xs.iter().fold(F::zero(), |acc, &x| acc + x) / n)
}

/// Population standard deviation (divides by n, not n-1).
pub fn population_std<F: Scalar>(xs: &[F]) -> Result<F, NumericError> {
    let m = mean(xs)?;
    let n = F::from_usize(xs.len()).expect("length fits in scalar");
    let var = xs
        .iter()
        .fold(F::zero(), |acc, &x| acc + (x - m) * (x - m))
        / n;
    Ok(var.sqrt())
}

/// Subtract the mean from every element.
pub fn center<F: Scalar>(xs: &[F]) -> Result<Vec<F>, NumericError> {
    let m = mean(xs)?;
    Ok(xs.iter().map(|&x| x - m).collect())
}

/// Clamp into `[lo, hi]`.
pub fn clamp<F: Scalar>(x: F, lo: F, hi: F) -> F {
    x.max(lo).min(hi)
}

/// Clamp into the unit interval.
pub fn clamp01<F: Scalar>(x: F) -> F {
    clamp(x, F::zero(), F::one())
}
