//! Monte-Carlo check of the normal limit of `S_n / sqrt(n)`.
//!
//! Orbits start from the stationary law and each sample uses its own
//! counter-based stream, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cylinder::{check_compatible, encode_word, CylinderFunction};
use crate::error::{Error, Result};
use crate::markov::{cumulative_of, orbit_rng, sample_index, Sidedness, TransitionModel};
use crate::moments::pairwise_sum;

pub const DEGENERACY_TOL: f64 = 1e-8;
pub const KS_CONSTANT_5PCT: f64 = 1.358;
pub const MIN_VERDICT_SAMPLES: usize = 500;
pub const DEFAULT_T_GRID: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// `sum_{i<n} f(T^i w)` along one stationary path, rolling the window index.
fn birkhoff_sum<R: rand::Rng>(model: &TransitionModel, f: &CylinderFunction, n: usize, rng: &mut R) -> f64 {
    let len = f.length();
    let m = model.alphabet_size();
    let values = f.values();
    let modulus = m.pow(len as u32 - 1);
    let mut state = model.sample_initial(rng);
    let mut idx = state;
    for _ in 1..len {
        state = model.sample_next(rng, state);
        idx = idx * m + state;
    }
    let mut acc = values[idx];
    for _ in 1..n {
        state = model.sample_next(rng, state);
        idx = (idx % modulus) * m + state;
        acc += values[idx];
    }
    acc
}

/// `m` independent draws of `S_n / sqrt(n)`; sample `j` uses stream `j` of `seed`.
pub fn simulate_birkhoff(model: &TransitionModel, f: &CylinderFunction, n: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    check_compatible(model, f)?;
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 1 and m >= 1, got n = {n}, m = {m}")));
    }
    let root_n = (n as f64).sqrt();
    if f.is_constant() {
        return Ok(vec![f.values()[0] * n as f64 / root_n; m]);
    }
    Ok((0..m as u64)
        .into_par_iter()
        .map(|j| birkhoff_sum(model, f, n, &mut orbit_rng(seed, j)) / root_n)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub threshold_5pct: f64,
}

fn normal(sigma2: f64) -> Result<Normal> {
    Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Kolmogorov-Smirnov distance to `N(0, sigma2)`.
pub fn ks_statistic(samples: &[f64], sigma2: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if !(sigma2 >= DEGENERACY_TOL) {
        return Err(Error::DegenerateSigma(sigma2));
    }
    let law = normal(sigma2)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let distance = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let cdf = law.cdf(x);
        d.max((i + 1) as f64 / m - cdf).max(cdf - i as f64 / m)
    });
    Ok(KsResult { distance, threshold_5pct: KS_CONSTANT_5PCT / m.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiPoint {
    pub t: f64,
    pub deviation: f64,
}

/// `|exp(sigma2 t^2 / 2) * mean_j exp(i t x_j) - 1|` for each `t`.
pub fn cf_diagnostic(samples: &[f64], sigma2: f64, t_grid: &[f64]) -> Vec<PsiPoint> {
    let m = samples.len().max(1) as f64;
    t_grid
        .iter()
        .map(|&t| {
            let re: Vec<f64> = samples.iter().map(|x| (t * x).cos()).collect();
            let im: Vec<f64> = samples.iter().map(|x| (t * x).sin()).collect();
            let scale = (sigma2 * t * t / 2.0).exp();
            let re = scale * pairwise_sum(&re) / m - 1.0;
            let im = scale * pairwise_sum(&im) / m;
            PsiPoint { t, deviation: re.hypot(im) }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Bias-adjusted excess kurtosis; `None` for constant samples or `m < 4`.
    pub excess_kurtosis: Option<f64>,
}

pub fn moment_summary(samples: &[f64]) -> MomentSummary {
    let m = samples.len();
    if m == 0 {
        return MomentSummary { mean: f64::NAN, variance: f64::NAN, excess_kurtosis: None };
    }
    let mf = m as f64;
    let mean = pairwise_sum(samples) / mf;
    let dev2: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
    let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
    let m2 = pairwise_sum(&dev2) / mf;
    let m4 = pairwise_sum(&dev4) / mf;
    let variance = if m > 1 { m2 * mf / (mf - 1.0) } else { 0.0 };
    let excess_kurtosis = (m >= 4 && m2 > 0.0).then(|| {
        let g2 = m4 / (m2 * m2) - 3.0;
        ((mf + 1.0) * g2 + 6.0) * (mf - 1.0) / ((mf - 2.0) * (mf - 3.0))
    });
    MomentSummary { mean, variance, excess_kurtosis }
}

/// Monte-Carlo estimate of `P(|g(T^n w) - g(w) + f(w)| / sqrt(n) > eps)` for each `n`.
///
/// Only the coordinates the two windows need are drawn; the gap between them
/// is bridged with a row of `P^k`.
pub fn remainder_probability(
    model: &TransitionModel,
    f: &CylinderFunction,
    g: &CylinderFunction,
    n_grid: &[usize],
    eps: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if model.sidedness() != Sidedness::OneSided {
        return Err(Error::SidednessMismatch { expected: "one_sided" });
    }
    check_compatible(model, f)?;
    check_compatible(model, g)?;
    if m == 0 || n_grid.contains(&0) {
        return Err(Error::InvalidArgument("need m >= 1 and n >= 1".into()));
    }
    let k = model.alphabet_size();
    let head_len = f.end().max(g.end()).max(1) as usize;
    n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let later_start = n + g.offset() as usize;
            let later_end = n + g.end() as usize;
            // Jump rows when the shifted window starts beyond the head.
            let jump = (later_start > head_len).then(|| {
                let power = model.transition_power((later_start - (head_len - 1)) as u64);
                (0..k).map(|i| cumulative_of(&power[i * k..(i + 1) * k])).collect::<Vec<_>>()
            });
            let threshold = eps * (n as f64).sqrt();
            let hits: usize = (0..m as u64)
                .into_par_iter()
                .map(|j| {
                    let mut rng = orbit_rng(seed, ((gi as u64) << 32) | j);
                    let mut path = Vec::with_capacity(head_len.max(later_end));
                    path.push(model.sample_initial(&mut rng));
                    let head_value;
                    let tail_value;
                    match &jump {
                        None => {
                            model.extend_path(&mut rng, &mut path, head_len.max(later_end));
                            head_value = window_value(f, &path, 0) - window_value(g, &path, 0);
                            tail_value = window_value(g, &path, n);
                        }
                        Some(rows) => {
                            model.extend_path(&mut rng, &mut path, head_len);
                            head_value = window_value(f, &path, 0) - window_value(g, &path, 0);
                            let last = *path.last().expect("non-empty head");
                            let mut later = vec![sample_index(&mut rng, &rows[last])];
                            model.extend_path(&mut rng, &mut later, later_end - later_start);
                            tail_value = word_value(g, &later);
                        }
                    }
                    usize::from((tail_value + head_value).abs() > threshold)
                })
                .sum();
            Ok(hits as f64 / m as f64)
        })
        .collect()
}

/// `f(T^start w)` where `path[i]` holds `w_i`; needs a non-negative offset.
fn window_value(f: &CylinderFunction, path: &[usize], start: usize) -> f64 {
    word_value(f, &path[start + f.offset().max(0) as usize..])
}

/// `f` on the word whose first symbol is the first coordinate of its window.
fn word_value(f: &CylinderFunction, word: &[usize]) -> f64 {
    if f.is_constant() {
        return f.values()[0];
    }
    f.values()[encode_word(&word[..f.length()], f.alphabet())]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltVerdict {
    Consistent,
    Inconsistent,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltOptions {
    pub t_grid: Vec<f64>,
    pub degeneracy_tol: f64,
    /// Bound on `|S_n| / sqrt(n)` checked when the variance is degenerate,
    /// typically `(||f|| + 2||g||) / sqrt(n)` from a coboundary witness `g`.
    pub coboundary_bound: Option<f64>,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self { t_grid: DEFAULT_T_GRID.to_vec(), degeneracy_tol: DEGENERACY_TOL, coboundary_bound: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub sigma2_theory: f64,
    pub sample_variance: f64,
    /// Allowed `|sample_variance - sigma2_theory|`: `4 sigma2 sqrt(2/m)`.
    pub variance_band: f64,
    /// `None` when the variance is degenerate.
    pub ks_distance: Option<f64>,
    pub ks_threshold: f64,
    pub psi_deviation: Vec<PsiPoint>,
    pub moments: MomentSummary,
    pub max_abs_sample: f64,
    /// Filled in by callers that also estimate the remainder term.
    pub remainder_prob: Option<Vec<(usize, f64)>>,
    /// Degenerate case only: whether every sample respects the coboundary bound.
    pub bound_check: Option<bool>,
    pub verdict: CltVerdict,
}

/// Judges already simulated samples of `S_n / sqrt(n)` against `N(0, sigma2_theory)`.
pub fn assess(samples: &[f64], sigma2_theory: f64, n: usize, seed: u64, options: &CltOptions) -> Result<CltReport> {
    let m = samples.len();
    if m < MIN_VERDICT_SAMPLES {
        return Err(Error::InvalidArgument(format!("verdicts need at least {MIN_VERDICT_SAMPLES} samples, got {m}")));
    }
    let moments = moment_summary(samples);
    let max_abs_sample = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let ks_threshold = KS_CONSTANT_5PCT / (m as f64).sqrt();
    let variance_band = 4.0 * sigma2_theory * (2.0 / m as f64).sqrt();
    let psi_deviation = cf_diagnostic(samples, sigma2_theory.max(0.0), &options.t_grid);
    let degenerate = sigma2_theory < options.degeneracy_tol;
    let (ks_distance, bound_check, verdict) = if degenerate {
        let check = options.coboundary_bound.map(|b| max_abs_sample <= b);
        (None, check, CltVerdict::Degenerate)
    } else {
        let ks = ks_statistic(samples, sigma2_theory)?;
        let ok = ks.distance < ks.threshold_5pct && (moments.variance - sigma2_theory).abs() < variance_band;
        (Some(ks.distance), None, if ok { CltVerdict::Consistent } else { CltVerdict::Inconsistent })
    };
    Ok(CltReport {
        n,
        samples: m,
        seed,
        sigma2_theory,
        sample_variance: moments.variance,
        variance_band,
        ks_distance,
        ks_threshold,
        psi_deviation,
        moments,
        max_abs_sample,
        remainder_prob: None,
        bound_check,
        verdict,
    })
}

/// Simulates `m` draws of `S_n / sqrt(n)` and judges them with [`assess`].
pub fn verdict(
    model: &TransitionModel,
    f: &CylinderFunction,
    sigma2_theory: f64,
    n: usize,
    m: usize,
    seed: u64,
    options: &CltOptions,
) -> Result<CltReport> {
    if m < MIN_VERDICT_SAMPLES {
        return Err(Error::InvalidArgument(format!("verdicts need at least {MIN_VERDICT_SAMPLES} samples, got {m}")));
    }
    let samples = simulate_birkhoff(model, f, n, m, seed)?;
    assess(&samples, sigma2_theory, n, seed, options)
}

/// `N(0, sigma2)` quantiles at `(i - 1/2) / m`, a deterministic stand-in for normal samples.
pub fn normal_quantile_samples(m: usize, sigma2: f64) -> Result<Vec<f64>> {
    let law = normal(sigma2)?;
    Ok((1..=m).map(|i| law.inverse_cdf((i as f64 - 0.5) / m as f64)).collect())
}
