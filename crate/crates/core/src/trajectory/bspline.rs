use crate::error::{CalibError, Result};
use crate::linalg::BandMatrix;
use crate::real::Real;

/// Clamped scalar B-spline.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline<T> {
    degree: usize,
    knots: Vec<T>,
    coeffs: Vec<T>,
}

impl<T: Real> BSpline<T> {
    pub fn new(degree: usize, knots: Vec<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() <= degree || knots.len() != coeffs.len() + degree + 1 {
            return Err(CalibError::InvalidInput(format!(
                "{} knots do not match {} coefficients of degree {}",
                knots.len(),
                coeffs.len(),
                degree
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(CalibError::InvalidInput(
                "knots must be non-decreasing".into(),
            ));
        }
        Ok(Self {
            degree,
            knots,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn domain(&self) -> (T, T) {
        (self.knots[self.degree], self.knots[self.coeffs.len()])
    }

    /// Knot span index `k` with `knots[k] <= t < knots[k+1]`, the last
    /// non-empty span for the right end.
    fn span(&self, t: T) -> usize {
        let n = self.coeffs.len();
        let p = self.degree;
        if t >= self.knots[n] {
            let mut k = n - 1;
            while k > p && self.knots[k] >= self.knots[n] {
                k -= 1;
            }
            return k;
        }
        if t <= self.knots[p] {
            let mut k = p;
            while k + 1 < n && self.knots[k + 1] <= self.knots[p] {
                k += 1;
            }
            return k;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Non-zero basis values at `t` and the span they start from.
    fn basis(&self, t: T) -> (usize, Vec<T>) {
        let p = self.degree;
        let k = self.span(t);
        let mut n = vec![T::zero(); p + 1];
        let mut left = vec![T::zero(); p + 1];
        let mut right = vec![T::zero(); p + 1];
        n[0] = T::one();
        for j in 1..=p {
            left[j] = t - self.knots[k + 1 - j];
            right[j] = self.knots[k + j] - t;
            let mut saved = T::zero();
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = if denom == T::zero() {
                    T::zero()
                } else {
                    n[r] / denom
                };
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        (k - p, n)
    }

    /// Evaluates the spline. `t` is clamped to the domain.
    pub fn eval(&self, t: T) -> T {
        let (first, basis) = self.basis(t);
        basis
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, b)| acc + *b * self.coeffs[first + i])
    }

    /// First derivative as a spline of one lower degree.
    pub fn derivative(&self) -> Self {
        let p = self.degree;
        if p == 0 {
            return Self {
                degree: 0,
                knots: self.knots.clone(),
                coeffs: vec![T::zero(); self.coeffs.len()],
            };
        }
        let pf = T::from_count(p);
        let coeffs = (0..self.coeffs.len() - 1)
            .map(|i| {
                let dk = self.knots[i + p + 1] - self.knots[i + 1];
                if dk == T::zero() {
                    T::zero()
                } else {
                    pf * (self.coeffs[i + 1] - self.coeffs[i]) / dk
                }
            })
            .collect();
        Self {
            degree: p - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            coeffs,
        }
    }
}

/// Clamped knot vector with interior knots averaged over the parameters,
/// which keeps the collocation system well posed.
pub(crate) fn averaged_knots<T: Real>(params: &[T], degree: usize) -> Vec<T> {
    let n = params.len();
    let mut knots = Vec::with_capacity(n + degree + 1);
    knots.extend(std::iter::repeat_n(params[0], degree + 1));
    let inv = T::one() / T::from_count(degree.max(1));
    for j in 1..n - degree {
        let s: T = params[j..j + degree].iter().copied().sum();
        knots.push(if degree == 0 { params[j] } else { s * inv });
    }
    knots.extend(std::iter::repeat_n(params[n - 1], degree + 1));
    knots
}

/// Solves for coefficients reproducing `values` at `params`, either exactly
/// (`lambda == None`) or with a second-difference roughness penalty.
pub(crate) fn fit_coefficients<T: Real>(
    params: &[T],
    values: &[T],
    degree: usize,
    lambda: Option<T>,
) -> Result<BSpline<T>> {
    let n = params.len();
    let knots = averaged_knots(params, degree);
    let shape = BSpline {
        degree,
        knots: knots.clone(),
        coeffs: vec![T::zero(); n],
    };
    let rows: Vec<(usize, Vec<T>)> = params.iter().map(|&t| shape.basis(t)).collect();
    let coeffs = match lambda {
        None => {
            let mut a = BandMatrix::zeros(n, degree, degree);
            for (i, (first, basis)) in rows.iter().enumerate() {
                for (k, b) in basis.iter().enumerate() {
                    a.add(i, first + k, *b);
                }
            }
            let mut rhs = values.to_vec();
            a.solve(&mut rhs)?;
            rhs
        }
        Some(lambda) => {
            let bw = degree.max(2);
            let mut a = BandMatrix::zeros(n, bw, bw);
            let mut rhs = vec![T::zero(); n];
            for ((first, basis), &y) in rows.iter().zip(values) {
                for (k, bk) in basis.iter().enumerate() {
                    rhs[first + k] = rhs[first + k] + *bk * y;
                    for (l, bl) in basis.iter().enumerate() {
                        a.add(first + k, first + l, *bk * *bl);
                    }
                }
            }
            let d2 = [T::one(), -T::lit(2.0), T::one()];
            for i in 0..n.saturating_sub(2) {
                for (k, dk) in d2.iter().enumerate() {
                    for (l, dl) in d2.iter().enumerate() {
                        a.add(i + k, i + l, lambda * *dk * *dl);
                    }
                }
            }
            a.solve(&mut rhs)?;
            rhs
        }
    };
    BSpline::new(degree, knots, coeffs)
}
