//! Exact lagged moments `E(f * U^n h)`.
//!
//! While the windows of `f` and `U^n h` overlap the product is tabulated
//! directly. Once `U^n h` lies strictly to the right of `f` the moment is
//! `A_f^T P^gap B_h`, and successive lags cost one vector-matrix product.

use crate::cylinder::{self, check_compatible, left_vector, right_vector, CylinderFunction};
use crate::error::Result;
use crate::markov::TransitionModel;

/// `E(f * U^lag h)` for any integer lag.
pub fn cross_moment(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction, lag: i64) -> Result<f64> {
    check_compatible(model, f)?;
    check_compatible(model, h)?;
    if f.is_constant() {
        return Ok(f.values()[0] * cylinder::expectation(model, h));
    }
    if h.is_constant() {
        return Ok(h.values()[0] * cylinder::expectation(model, f));
    }
    let hs = h.shifted(lag);
    let (left, right) = if hs.offset() >= f.end() {
        (f, &hs)
    } else if f.offset() >= hs.end() {
        (&hs, f)
    } else {
        // Overlapping windows; the union is at most the two spans.
        let prod = cylinder::combine(model, f, &hs, cylinder::CombineOp::Mul, 1.0, 1.0)?;
        return Ok(cylinder::expectation(model, &prod));
    };
    let mut a = left_vector(model, left);
    for _ in 0..(right.offset() - (left.end() - 1)) {
        a = model.push_forward(&a);
    }
    Ok(dot(&a, &right_vector(model, right)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Iterator over `E(f * U^n h)` for `n = 0, 1, 2, ...`.
pub struct LaggedMoments<'a> {
    model: &'a TransitionModel,
    f: CylinderFunction,
    h: CylinderFunction,
    lag: i64,
    mode: Mode,
}

enum Mode {
    /// One factor is constant: every moment beyond lag 0 is the same product.
    Constant(f64),
    Direct { a: Vec<f64>, b: Vec<f64> },
    Propagating { row: Vec<f64>, b: Vec<f64> },
}

impl<'a> LaggedMoments<'a> {
    pub fn new(model: &'a TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> Result<Self> {
        check_compatible(model, f)?;
        check_compatible(model, h)?;
        let mode = if f.is_constant() || h.is_constant() {
            Mode::Constant(cross_moment(model, f, h, 0)?)
        } else {
            Mode::Direct { a: left_vector(model, f), b: right_vector(model, h) }
        };
        Ok(Self { model, f: f.clone(), h: h.clone(), lag: 0, mode })
    }

    fn advance(&mut self) -> Result<f64> {
        let lag = self.lag;
        let mut switch = None;
        let value = match &mut self.mode {
            Mode::Constant(c) => *c,
            Mode::Propagating { row, b } => {
                *row = self.model.push_forward(row);
                dot(row, b)
            }
            Mode::Direct { a, b } => {
                let start = self.h.offset() + lag;
                if start >= self.f.end() {
                    let mut row = a.clone();
                    for _ in 0..(start - (self.f.end() - 1)) {
                        row = self.model.push_forward(&row);
                    }
                    let value = dot(&row, b);
                    switch = Some(Mode::Propagating { row, b: std::mem::take(b) });
                    value
                } else {
                    cross_moment(self.model, &self.f, &self.h, lag)?
                }
            }
        };
        if let Some(mode) = switch {
            self.mode = mode;
        }
        self.lag += 1;
        Ok(value)
    }
}

impl Iterator for LaggedMoments<'_> {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.advance())
    }
}

/// `E(f * U^n h)` for `n = 0..=max_lag`.
pub fn lagged_moments(
    model: &TransitionModel,
    f: &CylinderFunction,
    h: &CylinderFunction,
    max_lag: usize,
) -> Result<Vec<f64>> {
    LaggedMoments::new(model, f, h)?.take(max_lag + 1).collect()
}

/// Autocovariances `gamma_n = E(f * U^n f)` for `n = 0..=max_lag` (raw second moments).
pub fn autocovariances(model: &TransitionModel, f: &CylinderFunction, max_lag: usize) -> Result<Vec<f64>> {
    lagged_moments(model, f, f, max_lag)
}

/// Pairwise summation; result is independent of how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{combine, expectation, koopman_pow, CombineOp};
    use crate::markov::{build_shift, Sidedness};
    use approx::assert_abs_diff_eq;

    fn gap() -> TransitionModel {
        build_shift(&[vec![0.9, 0.1], vec![0.2, 0.8]], Sidedness::OneSided).unwrap()
    }

    #[test]
    fn geometric_autocovariances_of_centered_indicator() {
        let model = gap();
        let f = CylinderFunction::new(2, 0, 1, vec![1.0 / 3.0, -2.0 / 3.0]).unwrap();
        let gammas = autocovariances(&model, &f, 40).unwrap();
        for (n, g) in gammas.iter().enumerate() {
            // gamma_n = pi_0 pi_1 (1 - p - q)^n
            assert_abs_diff_eq!(*g, (2.0 / 9.0) * 0.7f64.powi(n as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn propagation_matches_direct_products() {
        let model = build_shift(
            &[vec![0.3, 0.3, 0.4], vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3]],
            Sidedness::TwoSided,
        )
        .unwrap();
        let f = CylinderFunction::from_fn(3, -1, 2, |w| w[0] as f64 - 2.0 * w[1] as f64 + 0.5).unwrap();
        let h = CylinderFunction::from_fn(3, 1, 3, |w| (w[0] * w[2]) as f64 - w[1] as f64).unwrap();
        let streamed = lagged_moments(&model, &f, &h, 7).unwrap();
        for (n, v) in streamed.iter().enumerate() {
            let prod = combine(&model, &f, &koopman_pow(&h, n as i64), CombineOp::Mul, 1.0, 1.0).unwrap();
            assert_abs_diff_eq!(*v, expectation(&model, &prod), epsilon = 1e-13);
        }
        for lag in -8..0 {
            let prod = combine(&model, &f, &koopman_pow(&h, lag), CombineOp::Mul, 1.0, 1.0).unwrap();
            assert_abs_diff_eq!(cross_moment(&model, &f, &h, lag).unwrap(), expectation(&model, &prod), epsilon = 1e-13);
        }
    }

    #[test]
    fn constants_factor_out() {
        let model = gap();
        let c = CylinderFunction::constant(2, 2.0);
        let e0 = CylinderFunction::indicator(2, 0, 0);
        let v = lagged_moments(&model, &c, &e0, 3).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 4.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pairwise_sum_agrees_with_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert_abs_diff_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>(), epsilon = 1e-10);
    }
}
