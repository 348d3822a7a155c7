//! Forward-filtration martingale approximation on two-sided shifts.
//!
//! With the increasing filtration `F_k = sigma(w_j : j <= k)` the increments
//! `x_r = E(U^r f | F_0) - E(U^r f | F_{-1})` live in `H_0 ⊖ H_{-1}`, and their
//! sum `Y_0` generates a stationary martingale difference sequence
//! `Y_j = U^j Y_0` whose variance matches the long-run variance of `f`.

use serde::{Deserialize, Serialize};

use crate::conditions::{envelope_ratio, tail_oscillation, ConditionReport, Evidence, Verdict, STALL_RATIO};
use crate::cylinder::{
    check_compatible, combine, conditional_past, expectation, koopman_pow, l2_norm, project_sk, CombineOp,
    CylinderFunction,
};
use crate::error::{Error, Result};
use crate::gordin::CENTERING_TOL;
use crate::markov::{Sidedness, TransitionModel};
use crate::moments::{autocovariances, pairwise_sum, LaggedMoments};

fn require_two_sided(model: &TransitionModel) -> Result<()> {
    if model.sidedness() != Sidedness::TwoSided {
        return Err(Error::SidednessMismatch { expected: "two_sided" });
    }
    Ok(())
}

/// `x_r = P_{S_{-1}} U^r f`.
pub fn x_r(model: &TransitionModel, f: &CylinderFunction, r: i64) -> Result<CylinderFunction> {
    require_two_sided(model)?;
    check_compatible(model, f)?;
    let shifted = koopman_pow(f, r);
    if shifted.is_constant() || shifted.end() <= 0 {
        // F_{-1}-measurable: both conditionals coincide.
        return Ok(CylinderFunction::zero(f.alphabet()));
    }
    project_sk(model, &shifted, -1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardApproximant {
    pub y0: CylinderFunction,
    /// `E(Y_0^2)`.
    pub sigma2: f64,
    /// Inclusive range of `r` summed.
    pub r_range: (i64, i64),
    /// `L^2` norm of the first omitted positive-side increment.
    pub tail_norm: f64,
    /// `||E(Y_0 | F_{-1})||_2`.
    pub orthogonality_defect: f64,
}

/// `Y_0 = sum_r x_r`. Increments with `r <= -(a + L)` vanish exactly, so only
/// the positive tail is truncated, once three consecutive increments past the
/// window have `L^2` norm below `tol`.
pub fn y0_sum(model: &TransitionModel, f: &CylinderFunction, r_max: usize, tol: f64) -> Result<ForwardApproximant> {
    require_two_sided(model)?;
    check_compatible(model, f)?;
    let zero = CylinderFunction::zero(f.alphabet());
    if f.is_constant() {
        return Ok(ForwardApproximant { y0: zero, sigma2: 0.0, r_range: (0, 0), tail_norm: 0.0, orthogonality_defect: 0.0 });
    }
    let r_lo = 1 - f.end();
    let mut y0 = zero;
    let mut r = r_lo;
    let mut small = 0usize;
    let tail_norm = loop {
        if r > r_max as i64 {
            return Err(Error::NonSummable { steps: (r - r_lo) as usize, last_term: l2_norm(model, &x_r(model, f, r)?) });
        }
        let x = x_r(model, f, r)?;
        let norm = l2_norm(model, &x);
        if norm < tol && f.offset() + r > 0 {
            small += 1;
            if small >= 3 {
                break norm;
            }
        } else {
            small = 0;
        }
        y0 = combine(model, &y0, &x, CombineOp::Add, 1.0, 1.0)?;
        r += 1;
    };
    let y0 = y0.canonical();
    Ok(ForwardApproximant {
        sigma2: expectation(model, &y0.map(|v| v * v)),
        r_range: (r_lo, r),
        tail_norm,
        orthogonality_defect: l2_norm(model, &conditional_past(model, &y0, -1)?),
        y0,
    })
}

/// Exact `n^{-1} E(S_n^2) = sum_{|j|<n} (1 - |j|/n) E(f U^j f)` for each `n` in the grid.
pub fn variance_profile(model: &TransitionModel, f: &CylinderFunction, n_grid: &[usize]) -> Result<Vec<f64>> {
    let n_top = n_grid.iter().copied().max().unwrap_or(0);
    if n_top == 0 {
        return Err(Error::InvalidArgument("n_grid must contain positive sizes".into()));
    }
    if n_grid.contains(&0) {
        return Err(Error::InvalidArgument("n_grid entries must be >= 1".into()));
    }
    let gamma = autocovariances(model, f, n_top - 1)?;
    let mut weighted = vec![0.0; n_top];
    Ok(n_grid
        .iter()
        .map(|&n| {
            let nf = n as f64;
            weighted[0] = gamma[0];
            for j in 1..n {
                weighted[j] = 2.0 * (1.0 - j as f64 / nf) * gamma[j];
            }
            pairwise_sum(&weighted[..n])
        })
        .collect())
}

/// Richardson step `2 V(2n) - V(n)`, which cancels the `1/n` term of the profile.
pub fn extrapolated_variance(model: &TransitionModel, f: &CylinderFunction, n: usize) -> Result<f64> {
    let v = variance_profile(model, f, &[n, 2 * n])?;
    Ok(2.0 * v[1] - v[0])
}

/// `sum_{|j| <= radius} E(Y_0 U^j f)`.
pub fn cross_identity(model: &TransitionModel, y0: &CylinderFunction, f: &CylinderFunction, radius: i64) -> Result<f64> {
    let terms: Vec<f64> = (-radius..=radius)
        .map(|j| crate::moments::cross_moment(model, y0, f, j))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// `n^{-1} E[(sum_{k<n} U^k (f - g))^2]` for each `n` in the grid.
pub fn approximation_defect(
    model: &TransitionModel,
    f: &CylinderFunction,
    g: &CylinderFunction,
    n_grid: &[usize],
) -> Result<Vec<f64>> {
    require_two_sided(model)?;
    let d = combine(model, f, g, CombineOp::Sub, 1.0, 1.0)?.canonical();
    variance_profile(model, &d, n_grid)
}

/// Hypotheses of the forward-filtration CLT with `X_k = U^k f` and
/// `c(k, n) = E(X_k E(X_n | F_0))` for `1 <= k <= k_max`, `0 <= n <= k_max`.
pub fn check_thm5_conditions(
    model: &TransitionModel,
    f: &CylinderFunction,
    k_max: usize,
    tol: f64,
) -> Result<ConditionReport> {
    require_two_sided(model)?;
    check_compatible(model, f)?;
    if k_max < 4 {
        return Err(Error::InvalidArgument(format!("k_max must be >= 4, got {k_max}")));
    }
    let mut report = ConditionReport::default();

    let mean = expectation(model, f);
    let measurability = l2_norm(model, &combine(model, &conditional_past(model, f, 0)?, f, CombineOp::Sub, 1.0, 1.0)?);
    report.push(
        "thm5.measurability",
        "E(f) = 0 and f is F_0-measurable",
        if mean.abs() <= CENTERING_TOL && measurability <= 1e-12 { Verdict::Pass } else { Verdict::Fail },
        vec![Evidence::new("mean", mean), Evidence::new("measurability_defect", measurability)],
    );

    // rows[n][k - 1] = c(k, n)
    let mut rows = Vec::with_capacity(k_max + 1);
    for n in 0..=k_max as i64 {
        let h = conditional_past(model, &koopman_pow(f, n), 0)?;
        let row: Vec<f64> = LaggedMoments::new(model, &h, f)?.skip(1).take(k_max).collect::<Result<_>>()?;
        rows.push(row);
    }

    let half = k_max / 2;
    let mut worst_oscillation = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for row in &rows {
        worst_oscillation = worst_oscillation.max(tail_oscillation(row, half));
        worst_ratio = worst_ratio.max(envelope_ratio(row).unwrap_or(0.0));
    }
    let verdict = if worst_oscillation <= tol {
        Verdict::Pass
    } else if worst_ratio >= STALL_RATIO {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    let n0_sum = pairwise_sum(&rows[0]);
    report.push(
        "thm5.cond1",
        "sum_k E(X_k E(X_n | F_0)) converges for each n",
        verdict,
        vec![
            Evidence::new("max_tail_oscillation", worst_oscillation),
            Evidence::new("max_decay_ratio", worst_ratio),
            Evidence::new("n0_partial_sum", n0_sum),
            Evidence::new("n_tested", rows.len() as f64),
            Evidence::new("k_max", k_max as f64),
        ],
    );

    // Uniform tails: sup_n |sum_{k > K} c(k, n)|, truncated at k_max.
    let uniform_tail = |from: usize| -> f64 {
        rows.iter()
            .map(|row| pairwise_sum(&row[from.min(row.len())..]).abs())
            .fold(0.0f64, f64::max)
    };
    let quarter_tail = uniform_tail(k_max / 4);
    let half_tail = uniform_tail(half);
    let sup_oscillation = rows.iter().map(|row| tail_oscillation(row, half)).fold(0.0f64, f64::max);
    let shrink = if quarter_tail > 0.0 { half_tail / quarter_tail } else { 0.0 };
    let verdict = if half_tail <= tol && sup_oscillation <= tol {
        Verdict::Pass
    } else if shrink >= STALL_RATIO || worst_ratio >= STALL_RATIO {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    report.push(
        "thm5.cond2",
        "tails of sum_k E(X_k E(X_n | F_0)) vanish uniformly in n",
        verdict,
        vec![
            Evidence::new("sup_tail_from_quarter", quarter_tail),
            Evidence::new("sup_tail_from_half", half_tail),
            Evidence::new("tail_shrink_ratio", shrink),
        ],
    );
    Ok(report)
}
