//! Wrap-safe statistics on angles.

use crate::error::{CalibError, Result};
use crate::geom::wrap_angle;
use crate::real::Real;

fn resultant<T: Real>(angles: &[T]) -> (T, T) {
    angles.iter().fold((T::zero(), T::zero()), |(s, c), &a| {
        let (sa, ca) = a.sin_cos();
        (s + sa, c + ca)
    })
}

/// `atan2(sum sin, sum cos)`, in `(-pi, pi]`. Identical inputs give their
/// common value exactly.
pub fn circular_mean<T: Real>(angles: &[T]) -> Result<T> {
    let Some(&first) = angles.first() else {
        return Err(CalibError::EmptyInput("circular mean of no angles"));
    };
    if angles.iter().all(|&a| a == first) {
        return Ok(wrap_angle(first));
    }
    let (s, c) = resultant(angles);
    let r = (s * s + c * c).sqrt() / T::from_count(angles.len());
    if r < T::floor_tol(1e-9) {
        return Err(CalibError::DegenerateMean(r.to_f64_lossy()));
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Mean resultant length in `[0, 1]`.
pub fn mean_resultant_length<T: Real>(angles: &[T]) -> Result<T> {
    if angles.is_empty() {
        return Err(CalibError::EmptyInput("resultant length of no angles"));
    }
    let (s, c) = resultant(angles);
    Ok(((s * s + c * c).sqrt() / T::from_count(angles.len())).min(T::one()))
}

/// `sqrt(-2 ln R)` with `R` the mean resultant length. Needs two angles.
pub fn circular_std<T: Real>(angles: &[T]) -> Result<T> {
    if angles.len() < 2 {
        return Err(CalibError::EmptyInput(
            "circular std needs at least two angles",
        ));
    }
    let Ok(mu) = circular_mean(angles) else {
        return Ok(T::infinity());
    };
    // About the mean direction R = mean(cos d) = 1 - mean(2 sin^2(d/2)); the
    // half-angle form keeps small spreads (and identical inputs) exact.
    let two = T::lit(2.0);
    let m = angles
        .iter()
        .map(|&a| two * (wrap_angle(a - mu) / two).sin().powi(2))
        .sum::<T>()
        / T::from_count(angles.len());
    if m >= T::one() {
        return Ok(T::infinity());
    }
    Ok((-two * (-m).ln_1p()).max(T::zero()).sqrt())
}

/// Weighted average of angles, computed linearly on the deviations from the
/// weighted resultant direction. Matches the plain weighted average whenever
/// the inputs lie within half a turn of each other.
pub fn weighted_angle_mean<T: Real>(angles: &[T], weights: &[T]) -> Result<T> {
    if angles.is_empty() || angles.len() != weights.len() {
        return Err(CalibError::EmptyInput(
            "weighted mean needs matching non-empty inputs",
        ));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
        return Err(CalibError::InvalidInput(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: T = weights.iter().copied().sum();
    if total <= T::zero() {
        return Err(CalibError::ZeroConfidence);
    }
    let (s, c) = angles
        .iter()
        .zip(weights)
        .fold((T::zero(), T::zero()), |(s, c), (&a, &w)| {
            let (sa, ca) = a.sin_cos();
            (s + w * sa, c + w * ca)
        });
    if (s * s + c * c).sqrt() / total < T::floor_tol(1e-9) {
        return Err(CalibError::DegenerateMean(0.0));
    }
    let reference = s.atan2(c);
    let shift = angles.iter().zip(weights).fold(T::zero(), |acc, (&a, &w)| {
        acc + w * wrap_angle(a - reference)
    });
    Ok(wrap_angle(reference + shift / total))
}

/// Unwraps a sequence so consecutive differences stay within `(-pi, pi]`.
pub fn unwrap_angles<T: Real>(angles: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prev: Option<(T, T)> = None;
    for &a in angles {
        let u = match prev {
            None => a,
            Some((raw, unwrapped)) => unwrapped + wrap_angle(a - raw),
        };
        out.push(u);
        prev = Some((a, u));
    }
    out
}
