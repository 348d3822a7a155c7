//! Finite-alphabet stationary Markov shifts.
//!
//! A [`TransitionModel`] is the concrete measure-preserving system used by
//! every other module: the sequence space `{0..m}^N` (one-sided) or
//! `{0..m}^Z` (two-sided) with the stationary Markov measure of a row-stochastic
//! matrix `P`, and the left shift as the dynamics. Bernoulli product measures
//! are the special case of identical rows. The doubling map `x -> 2x mod 1`
//! with Lebesgue measure is measure-isomorphic to the one-sided Bernoulli(1/2, 1/2)
//! shift through the binary expansion of `x`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows must sum to one within this tolerance on ingest.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Above this alphabet size the stationary law is found by power iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 64;

/// Default cap on the number of entries of a cylinder value table (`2^20`).
pub const DEFAULT_TABLE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Non-invertible shift on `{0..m}^N`; filtration `F_k = sigma(w_j : j >= k)` decreases.
    OneSided,
    /// Invertible shift on `{0..m}^Z`; filtration `F_k = sigma(w_j : j <= k)` increases.
    TwoSided,
}

impl Sidedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Sidedness::OneSided => "one_sided",
            Sidedness::TwoSided => "two_sided",
        }
    }
}

impl std::str::FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sided" => Ok(Sidedness::OneSided),
            "two_sided" => Ok(Sidedness::TwoSided),
            other => Err(Error::InvalidArgument(format!("unknown sidedness `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErgodicClass {
    pub irreducible: bool,
    /// Period of the chain; only meaningful when `irreducible`.
    pub period: usize,
}

impl ErgodicClass {
    pub fn is_mixing(&self) -> bool {
        self.irreducible && self.period == 1
    }
}

/// An irreducible stationary Markov shift. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    m: usize,
    transition: Vec<f64>,
    cumulative: Vec<f64>,
    stationary: Vec<f64>,
    sidedness: Sidedness,
    ergodic_class: ErgodicClass,
    table_cap: usize,
}

/// A sampled stretch `w_0 .. w_{len-1}` of a stationary orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSample {
    pub symbols: Vec<usize>,
    pub seed: u64,
}

fn validate_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if m < 2 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::BadShape { rows: m, cols });
    }
    let mut flat = Vec::with_capacity(m * m);
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NotStochastic {
                row: i,
                reason: format!("entry {j} is {} (must be finite and >= 0)", row[j]),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NotStochastic {
                row: i,
                reason: format!("sums to {sum} (expected 1)"),
            });
        }
        flat.extend(row.iter().map(|x| x / sum));
    }
    Ok(flat)
}

/// Irreducibility and period of the positive-entry digraph of `P`.
///
/// The period is the gcd of `level(u) + 1 - level(v)` over all edges `u -> v`,
/// where levels are BFS distances from state 0; this equals the gcd of the
/// lengths of cycles through state 0.
pub fn classify(rows: &[Vec<f64>]) -> ErgodicClass {
    let m = rows.len();
    let reach = |forward: bool| -> Vec<Option<usize>> {
        let mut level = vec![None; m];
        level[0] = Some(0);
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..m {
                let w = if forward { rows[u][v] } else { rows[v][u] };
                if w > 0.0 && level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let forward = reach(true);
    let backward = reach(false);
    let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);
    if !irreducible {
        return ErgodicClass { irreducible, period: 1 };
    }
    let mut period = 0usize;
    for u in 0..m {
        for v in 0..m {
            if rows[u][v] > 0.0 {
                let lu = forward[u].unwrap() as i64;
                let lv = forward[v].unwrap() as i64;
                period = gcd(period, (lu + 1 - lv).unsigned_abs() as usize);
            }
        }
    }
    ErgodicClass { irreducible, period: period.max(1) }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The unique stationary law of an irreducible row-stochastic `P`.
pub fn stationary_distribution(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let flat = validate_rows(rows)?;
    if !classify(rows).irreducible {
        return Err(Error::Reducible);
    }
    Ok(solve_stationary(&flat, rows.len()))
}

fn solve_stationary(p: &[f64], m: usize) -> Vec<f64> {
    let mut pi = if m <= DIRECT_SOLVE_MAX_STATES {
        // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = p[j * m + i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..m {
            a[(m - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 1] = 1.0;
        match a.lu().solve(&b) {
            Some(x) => x.iter().copied().collect(),
            None => power_iteration(p, m),
        }
    } else {
        power_iteration(p, m)
    };
    for x in pi.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    pi
}

// Iterates the lazy chain (P + I)/2, which shares the stationary law and is aperiodic.
fn power_iteration(p: &[f64], m: usize) -> Vec<f64> {
    let mut pi = vec![1.0 / m as f64; m];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                next[j] += pi[i] * p[i * m + j];
            }
        }
        let mut delta = 0.0;
        for j in 0..m {
            next[j] = 0.5 * (next[j] + pi[j]);
            delta += (next[j] - pi[j]).abs();
        }
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

/// Builds the ergodic Markov shift of `P`. Rows within `1e-9` of summing to
/// one are renormalized exactly. Periodic chains are accepted; check
/// [`ErgodicClass::period`].
pub fn build_shift(rows: &[Vec<f64>], sidedness: Sidedness) -> Result<TransitionModel> {
    let transition = validate_rows(rows)?;
    let m = rows.len();
    let ergodic_class = classify(rows);
    if !ergodic_class.irreducible {
        return Err(Error::Reducible);
    }
    let stationary = solve_stationary(&transition, m);
    let mut cumulative = vec![0.0; m * m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += transition[i * m + j];
            cumulative[i * m + j] = acc;
        }
        cumulative[i * m + m - 1] = 1.0;
    }
    Ok(TransitionModel {
        m,
        transition,
        cumulative,
        stationary,
        sidedness,
        ergodic_class,
        table_cap: DEFAULT_TABLE_CAP,
    })
}

/// Counter-based stream `stream` of the generator keyed by `seed`.
pub fn orbit_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, cumulative: &[f64]) -> usize {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

fn cumulate(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

impl TransitionModel {
    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn ergodic_class(&self) -> ErgodicClass {
        self.ergodic_class
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn table_cap(&self) -> usize {
        self.table_cap
    }

    /// `P[i][j]`.
    #[inline]
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.m + j]
    }

    #[inline]
    pub fn pi(&self, i: usize) -> f64 {
        self.stationary[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.transition[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.row(i).to_vec()).collect()
    }

    /// Reverse-chain probability `P(w_{t-1} = j | w_t = i) = pi_j P[j][i] / pi_i`.
    #[inline]
    pub fn reverse_weight(&self, j: usize, i: usize) -> f64 {
        self.stationary[j] * self.p(j, i) / self.stationary[i]
    }

    /// Same chain and law, viewed with the other filtration convention.
    pub fn with_sidedness(&self, sidedness: Sidedness) -> Self {
        Self { sidedness, ..self.clone() }
    }

    pub fn with_table_cap(&self, table_cap: usize) -> Self {
        Self { table_cap, ..self.clone() }
    }

    /// Row vector times `P`.
    pub fn push_forward(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                for (o, p) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * p;
                }
            }
        }
        out
    }

    /// `P` times column vector.
    pub fn pull_back(&self, h: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().zip(h).map(|(p, x)| p * x).sum())
            .collect()
    }

    /// Dense `P^k`, row-major.
    pub fn transition_power(&self, k: u64) -> Vec<f64> {
        let m = self.m;
        let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
            let mut c = vec![0.0; m * m];
            for i in 0..m {
                for l in 0..m {
                    let ail = a[i * m + l];
                    if ail != 0.0 {
                        for j in 0..m {
                            c[i * m + j] += ail * b[l * m + j];
                        }
                    }
                }
            }
            c
        };
        let mut result: Vec<f64> = (0..m * m).map(|x| if x / m == x % m { 1.0 } else { 0.0 }).collect();
        let mut base = self.transition.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = mul(&result, &base);
            }
            base = mul(&base, &base);
            k >>= 1;
        }
        result
    }

    pub(crate) fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // Stationary cumulative computed on the fly; m is small.
        sample_index(rng, &cumulate(&self.stationary))
    }

    #[inline]
    pub(crate) fn sample_next<R: Rng + ?Sized>(&self, rng: &mut R, state: usize) -> usize {
        sample_index(rng, &self.cumulative[state * self.m..(state + 1) * self.m])
    }

    /// Fills `out` with a stationary path continuing from `first`.
    pub(crate) fn extend_path<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<usize>, len: usize) {
        while out.len() < len {
            let last = *out.last().expect("path seeded");
            out.push(self.sample_next(rng, last));
        }
    }
}

/// Samples `w_0 .. w_{length-1}` with `w_0 ~ pi`. Pure in `(model, length, seed)`.
pub fn sample_orbit(model: &TransitionModel, length: usize, seed: u64) -> OrbitSample {
    let mut rng = orbit_rng(seed, 0);
    let mut symbols = Vec::with_capacity(length);
    if length > 0 {
        symbols.push(model.sample_initial(&mut rng));
        model.extend_path(&mut rng, &mut symbols, length);
    }
    OrbitSample { symbols, seed }
}

/// Cumulative sums of a probability vector, last entry pinned to one.
pub(crate) fn cumulative_of(probs: &[f64]) -> Vec<f64> {
    cumulate(probs)
}
