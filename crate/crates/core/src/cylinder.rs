//! Exact algebra of cylinder observables on a Markov shift.
//!
//! A [`CylinderFunction`] depends on the coordinates `[offset, offset + length)`
//! and stores its values as a dense table over words, in lexicographic order
//! with the first coordinate most significant. Every operator below is an
//! exact finite computation against the stationary Markov measure:
//!
//! * `U` ([`koopman`]) moves the window one step right.
//! * `U*` ([`transfer`]) is the `L^2` adjoint; on one-sided shifts it averages
//!   over preimages with reverse-chain weights, on two-sided shifts it is
//!   `U^{-1}` ([`koopman_inverse`]).
//! * `E(.|F_k)` ([`conditional`]) uses the filtration of the model's sidedness.
//!   One-sided: `F_k = sigma(w_j : j >= k)`, so `F_0` is the full sigma-algebra
//!   and every observable with `offset >= 0` is `F_0`-measurable.
//!   Two-sided: `F_k = sigma(w_j : j <= k)`.
//!
//! Results of conditioning are trimmed to the smallest window carrying the
//! dependency, and constants are stored with `length = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{Sidedness, TransitionModel};

/// Relative tolerance under which a coordinate is treated as irrelevant when trimming.
const TRIM_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    alphabet: usize,
    offset: i64,
    length: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Sub,
    Mul,
}

fn table_len(m: usize, length: usize, cap: usize) -> Result<usize> {
    let requested = (m as u128).checked_pow(length as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::CapExceeded { requested, cap });
    }
    Ok(requested as usize)
}

impl CylinderFunction {
    pub fn new(alphabet: usize, offset: i64, length: usize, values: Vec<f64>) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidArgument("alphabet size must be at least 2".into()));
        }
        let expected = (alphabet as u128).checked_pow(length as u32).unwrap_or(u128::MAX);
        if values.len() as u128 != expected {
            return Err(Error::InvalidArgument(format!(
                "table for length {length} over {alphabet} symbols needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        let offset = if length == 0 { 0 } else { offset };
        Ok(Self { alphabet, offset, length, values })
    }

    pub fn constant(alphabet: usize, c: f64) -> Self {
        Self { alphabet, offset: 0, length: 0, values: vec![c] }
    }

    pub fn zero(alphabet: usize) -> Self {
        Self::constant(alphabet, 0.0)
    }

    /// Tabulates `f(word)` where `word[i]` is the symbol at coordinate `offset + i`.
    pub fn from_fn(
        alphabet: usize,
        offset: i64,
        length: usize,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self> {
        let n = table_len(alphabet, length, crate::markov::DEFAULT_TABLE_CAP)?;
        let mut word = vec![0usize; length];
        let values = (0..n)
            .map(|idx| {
                decode_word(idx, alphabet, &mut word);
                f(&word)
            })
            .collect();
        Self::new(alphabet, offset, length, values)
    }

    /// `1{w_offset = symbol}`.
    pub fn indicator(alphabet: usize, offset: i64, symbol: usize) -> Self {
        let mut values = vec![0.0; alphabet];
        values[symbol] = 1.0;
        Self { alphabet, offset, length: 1, values }
    }

    /// `+1` on symbol 0 and `-1` on symbol 1 at coordinate `offset` (binary alphabet).
    pub fn rademacher(offset: i64) -> Self {
        Self { alphabet: 2, offset, length: 1, values: vec![1.0, -1.0] }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// One past the last coordinate of the window.
    pub fn end(&self) -> i64 {
        self.offset + self.length as i64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.length == 0
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    /// Same table, window moved by `delta` coordinates.
    pub fn shifted(&self, delta: i64) -> Self {
        if self.is_constant() {
            return self.clone();
        }
        Self { offset: self.offset + delta, ..self.clone() }
    }

    /// Value on the word given by `word[i] = w_{offset + i}`.
    pub fn value_at(&self, word: &[usize]) -> f64 {
        self.values[encode_word(word, self.alphabet)]
    }

    /// Drops leading and trailing coordinates the table does not depend on.
    pub fn canonical(&self) -> Self {
        let m = self.alphabet;
        let mut f = self.clone();
        let scale = f.sup_norm();
        let tol = TRIM_TOLERANCE * scale;
        while f.length > 0 {
            let inner = f.values.len() / m;
            let leading_free = (0..inner)
                .all(|s| (1..m).all(|d| (f.values[d * inner + s] - f.values[s]).abs() <= tol));
            if !leading_free {
                break;
            }
            f.values = (0..inner)
                .map(|s| (0..m).map(|d| f.values[d * inner + s]).sum::<f64>() / m as f64)
                .collect();
            f.length -= 1;
            f.offset += 1;
        }
        while f.length > 0 {
            let inner = f.values.len() / m;
            let trailing_free = (0..inner)
                .all(|p| (1..m).all(|d| (f.values[p * m + d] - f.values[p * m]).abs() <= tol));
            if !trailing_free {
                break;
            }
            f.values = (0..inner)
                .map(|p| f.values[p * m..(p + 1) * m].iter().sum::<f64>() / m as f64)
                .collect();
            f.length -= 1;
        }
        if f.length == 0 {
            f.offset = 0;
        }
        f
    }
}

pub(crate) fn decode_word(mut idx: usize, m: usize, word: &mut [usize]) {
    for slot in word.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
}

pub(crate) fn encode_word(word: &[usize], m: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * m + s)
}

pub(crate) fn check_compatible(model: &TransitionModel, f: &CylinderFunction) -> Result<()> {
    if f.alphabet != model.alphabet_size() {
        return Err(Error::Incompatible(format!(
            "observable over {} symbols, model over {}",
            f.alphabet,
            model.alphabet_size()
        )));
    }
    if model.sidedness() == Sidedness::OneSided && !f.is_constant() && f.offset < 0 {
        return Err(Error::Incompatible(format!(
            "offset {} is negative on a one-sided shift",
            f.offset
        )));
    }
    Ok(())
}

/// Evaluates `f` on the coordinates `[window_offset, window_offset + symbols.len())`.
pub fn evaluate(f: &CylinderFunction, window_offset: i64, symbols: &[usize]) -> Result<f64> {
    if f.is_constant() {
        return Ok(f.values[0]);
    }
    let start = f.offset - window_offset;
    if start < 0 || f.end() > window_offset + symbols.len() as i64 {
        return Err(Error::WindowMismatch { start: f.offset, end: f.end() });
    }
    let start = start as usize;
    let word = &symbols[start..start + f.length];
    if word.iter().any(|&s| s >= f.alphabet) {
        return Err(Error::InvalidArgument("symbol outside the alphabet".into()));
    }
    Ok(f.value_at(word))
}

/// Re-expresses `f` on the larger window `[start, end)`.
pub fn lift(model: &TransitionModel, f: &CylinderFunction, start: i64, end: i64) -> Result<CylinderFunction> {
    check_compatible(model, f)?;
    let m = f.alphabet;
    if f.is_constant() {
        let len = (end - start).max(0) as usize;
        let n = table_len(m, len, model.table_cap())?;
        return CylinderFunction::new(m, start, len, vec![f.values[0]; n]);
    }
    if start > f.offset || end < f.end() {
        return Err(Error::WindowMismatch { start: f.offset, end: f.end() });
    }
    let len = (end - start) as usize;
    let n = table_len(m, len, model.table_cap())?;
    let trailing = m.pow((end - f.end()) as u32);
    let inner = f.values.len();
    let values = (0..n).map(|idx| f.values[(idx / trailing) % inner]).collect();
    CylinderFunction::new(m, start, len, values)
}

/// Pointwise `alpha*f (op) beta*h` on the union of the two windows.
pub fn combine(
    model: &TransitionModel,
    f: &CylinderFunction,
    h: &CylinderFunction,
    op: CombineOp,
    alpha: f64,
    beta: f64,
) -> Result<CylinderFunction> {
    check_compatible(model, f)?;
    check_compatible(model, h)?;
    let (start, end) = match (f.is_constant(), h.is_constant()) {
        (true, true) => (0, 0),
        (false, true) => (f.offset, f.end()),
        (true, false) => (h.offset, h.end()),
        (false, false) => (f.offset.min(h.offset), f.end().max(h.end())),
    };
    let lf = lift(model, f, start, end)?;
    let lh = lift(model, h, start, end)?;
    let values = lf
        .values
        .iter()
        .zip(&lh.values)
        .map(|(&x, &y)| match op {
            CombineOp::Add => alpha * x + beta * y,
            CombineOp::Sub => alpha * x - beta * y,
            CombineOp::Mul => (alpha * x) * (beta * y),
        })
        .collect();
    CylinderFunction::new(f.alphabet, start, lf.length, values)
}

pub fn add(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> Result<CylinderFunction> {
    combine(model, f, h, CombineOp::Add, 1.0, 1.0)
}

pub fn sub(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> Result<CylinderFunction> {
    combine(model, f, h, CombineOp::Sub, 1.0, 1.0)
}

pub fn mul(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> Result<CylinderFunction> {
    combine(model, f, h, CombineOp::Mul, 1.0, 1.0)
}

/// Sums out the last coordinate against the forward kernel.
fn contract_last(model: &TransitionModel, values: &[f64]) -> Vec<f64> {
    let m = model.alphabet_size();
    (0..values.len() / m)
        .map(|p| {
            let row = model.row(p % m);
            values[p * m..(p + 1) * m].iter().zip(row).map(|(v, q)| v * q).sum()
        })
        .collect()
}

/// Sums out the first coordinate of an already `pi`-weighted table.
fn contract_first(model: &TransitionModel, values: &[f64], length: usize) -> Vec<f64> {
    let m = model.alphabet_size();
    let inner = values.len() / m;
    let lead = m.pow(length as u32 - 2);
    (0..inner)
        .map(|s| {
            let next = s / lead;
            (0..m).map(|d| values[d * inner + s] * model.p(d, next)).sum()
        })
        .collect()
}

/// `B[j] = E(f | w_offset = j)`, for a non-constant `f`.
pub(crate) fn right_vector(model: &TransitionModel, f: &CylinderFunction) -> Vec<f64> {
    let mut v = f.values.clone();
    for _ in 1..f.length {
        v = contract_last(model, &v);
    }
    v
}

/// `A[i] = E(f ; w_{end-1} = i)`, for a non-constant `f`.
pub(crate) fn left_vector(model: &TransitionModel, f: &CylinderFunction) -> Vec<f64> {
    let m = model.alphabet_size();
    let inner = f.values.len() / m;
    let mut v: Vec<f64> = f
        .values
        .iter()
        .enumerate()
        .map(|(idx, x)| x * model.pi(idx / inner))
        .collect();
    let mut len = f.length;
    while len > 1 {
        v = contract_first(model, &v, len);
        len -= 1;
    }
    v
}

/// `E(f) = sum_w pi(w_0) prod P(w_i, w_{i+1}) f(w)`.
pub fn expectation(model: &TransitionModel, f: &CylinderFunction) -> f64 {
    if f.is_constant() {
        return f.values[0];
    }
    right_vector(model, f).iter().zip(model.stationary()).map(|(b, p)| b * p).sum()
}

pub fn inner_product(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> Result<f64> {
    Ok(expectation(model, &mul(model, f, h)?))
}

/// `||f||_2 = sqrt(E(f^2))`.
pub fn l2_norm(model: &TransitionModel, f: &CylinderFunction) -> f64 {
    expectation(model, &f.map(|v| v * v)).max(0.0).sqrt()
}

/// `||f||_1 = E|f|`.
pub fn l1_norm(model: &TransitionModel, f: &CylinderFunction) -> f64 {
    expectation(model, &f.map(f64::abs))
}

/// `Uf = f o T`.
pub fn koopman(f: &CylinderFunction) -> CylinderFunction {
    f.shifted(1)
}

/// `U^n f`.
pub fn koopman_pow(f: &CylinderFunction, n: i64) -> CylinderFunction {
    f.shifted(n)
}

/// `U^{-1} f = f o T^{-1}`, two-sided shifts only.
pub fn koopman_inverse(model: &TransitionModel, f: &CylinderFunction) -> Result<CylinderFunction> {
    if model.sidedness() != Sidedness::TwoSided {
        return Err(Error::SidednessMismatch { expected: "two_sided" });
    }
    check_compatible(model, f)?;
    Ok(f.shifted(-1))
}

/// `E(f | sigma(w_j : j >= k))`, any sidedness.
pub fn conditional_future(model: &TransitionModel, f: &CylinderFunction, k: i64) -> Result<CylinderFunction> {
    check_compatible(model, f)?;
    if f.is_constant() || f.offset >= k {
        return Ok(f.clone());
    }
    let m = model.alphabet_size();
    if f.end() > k {
        // Reverse-chain weights pi(w_a) prod P(w_t, w_{t+1}) / pi(w_k) over w_a..w_{k-1}.
        let inner = f.values.len() / m;
        let mut v: Vec<f64> = f
            .values
            .iter()
            .enumerate()
            .map(|(idx, x)| x * model.pi(idx / inner))
            .collect();
        let mut len = f.length;
        for _ in 0..(k - f.offset) {
            v = contract_first(model, &v, len);
            len -= 1;
        }
        let lead = m.pow(len as u32 - 1);
        let values = v.iter().enumerate().map(|(s, x)| x / model.pi(s / lead)).collect();
        return Ok(CylinderFunction::new(m, k, len, values)?.canonical());
    }
    let mut a = left_vector(model, f);
    for _ in 0..(k - (f.end() - 1)) {
        a = model.push_forward(&a);
    }
    let values = a.iter().enumerate().map(|(j, x)| x / model.pi(j)).collect();
    Ok(CylinderFunction::new(m, k, 1, values)?.canonical())
}

/// `E(f | sigma(w_j : j <= k))`, any sidedness.
pub fn conditional_past(model: &TransitionModel, f: &CylinderFunction, k: i64) -> Result<CylinderFunction> {
    check_compatible(model, f)?;
    if f.is_constant() || f.end() - 1 <= k {
        return Ok(f.clone());
    }
    let m = model.alphabet_size();
    if f.offset <= k {
        let mut v = f.values.clone();
        for _ in 0..(f.end() - 1 - k) {
            v = contract_last(model, &v);
        }
        let len = (k + 1 - f.offset) as usize;
        return Ok(CylinderFunction::new(m, f.offset, len, v)?.canonical());
    }
    let mut b = right_vector(model, f);
    for _ in 0..(f.offset - k) {
        b = model.pull_back(&b);
    }
    Ok(CylinderFunction::new(m, k, 1, b)?.canonical())
}

/// `E(f | F_k)` for the model's filtration.
pub fn conditional(model: &TransitionModel, f: &CylinderFunction, k: i64) -> Result<CylinderFunction> {
    match model.sidedness() {
        Sidedness::OneSided => {
            if k < 0 {
                return Err(Error::InvalidIndex(k));
            }
            conditional_future(model, f, k)
        }
        Sidedness::TwoSided => conditional_past(model, f, k),
    }
}

/// The transfer operator `U*` of a one-sided shift:
/// `(U* f)(w) = sum_j b(j | w_0) f(j w)` with reverse-chain weights `b`.
pub fn transfer(model: &TransitionModel, f: &CylinderFunction) -> Result<CylinderFunction> {
    if model.sidedness() != Sidedness::OneSided {
        return Err(Error::SidednessMismatch { expected: "one_sided" });
    }
    // U U* = E(.|F_1) on the one-sided shift, so U* f is E(f|F_1) moved back one step.
    Ok(conditional_future(model, f, 1)?.shifted(-1))
}

/// `P_{S_k} h = E(h|F_{k+1}) - E(h|F_k)`, two-sided shifts only.
pub fn project_sk(model: &TransitionModel, h: &CylinderFunction, k: i64) -> Result<CylinderFunction> {
    if model.sidedness() != Sidedness::TwoSided {
        return Err(Error::SidednessMismatch { expected: "two_sided" });
    }
    let upper = conditional_past(model, h, k + 1)?;
    let lower = conditional_past(model, h, k)?;
    Ok(sub(model, &upper, &lower)?.canonical())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::build_shift;
    use approx::assert_abs_diff_eq;

    fn coin(s: Sidedness) -> TransitionModel {
        build_shift(&[vec![0.5, 0.5], vec![0.5, 0.5]], s).unwrap()
    }

    fn gap(s: Sidedness) -> TransitionModel {
        build_shift(&[vec![0.9, 0.1], vec![0.2, 0.8]], s).unwrap()
    }

    // Brute-force oracle: sum over all words of the window with explicit path weights.
    fn brute_expectation(model: &TransitionModel, f: &CylinderFunction) -> f64 {
        let m = model.alphabet_size();
        if f.is_constant() {
            return f.values()[0];
        }
        let mut word = vec![0; f.length()];
        (0..f.values().len())
            .map(|idx| {
                decode_word(idx, m, &mut word);
                let mut w = model.pi(word[0]);
                for t in 1..word.len() {
                    w *= model.p(word[t - 1], word[t]);
                }
                w * f.values()[idx]
            })
            .sum()
    }

    #[test]
    fn evaluate_lookups() {
        let c = CylinderFunction::constant(2, 3.5);
        assert_eq!(evaluate(&c, 0, &[1, 0]).unwrap(), 3.5);
        let r = CylinderFunction::rademacher(0);
        assert_eq!(evaluate(&r, 0, &[0]).unwrap(), 1.0);
        let f = CylinderFunction::new(2, 0, 2, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(evaluate(&f, 0, &[0, 1]).unwrap(), 2.0);
        assert_eq!(evaluate(&f, 1, &[0, 1]), Err(Error::WindowMismatch { start: 0, end: 2 }));
    }

    #[test]
    fn combine_examples() {
        let model = coin(Sidedness::OneSided);
        let r = CylinderFunction::rademacher(0);
        let zero = combine(&model, &r, &r, CombineOp::Add, 1.0, -1.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(zero.canonical().is_constant());
        let sq = mul(&model, &r, &r).unwrap();
        assert_eq!((sq.offset(), sq.length(), sq.values()), (0, 1, &[1.0, 1.0][..]));
        let cob = sub(&model, &r, &koopman(&r)).unwrap();
        assert_eq!(cob.values(), &[0.0, 2.0, -2.0, 0.0]);
    }

    #[test]
    fn table_size_is_checked() {
        assert!(CylinderFunction::new(2, 0, 2, vec![1.0; 3]).is_err());
        let model = coin(Sidedness::OneSided).with_table_cap(16);
        let f = CylinderFunction::rademacher(0);
        let far = koopman_pow(&f, 10);
        assert!(matches!(mul(&model, &f, &far), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn expectation_examples() {
        let coin = coin(Sidedness::OneSided);
        assert_eq!(expectation(&coin, &CylinderFunction::rademacher(0)), 0.0);
        let gap = gap(Sidedness::OneSided);
        assert_abs_diff_eq!(expectation(&gap, &CylinderFunction::indicator(2, 0, 0)), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(expectation(&gap, &CylinderFunction::constant(2, -4.0)), -4.0);
    }

    #[test]
    fn expectation_matches_path_enumeration() {
        let model = build_shift(
            &[vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]],
            Sidedness::OneSided,
        )
        .unwrap();
        let f = CylinderFunction::from_fn(3, 2, 4, |w| (w[0] * 7 + w[1] * 3 + w[2] * w[3]) as f64 - 4.0).unwrap();
        assert_abs_diff_eq!(expectation(&model, &f), brute_expectation(&model, &f), epsilon = 1e-13);
    }

    #[test]
    fn inner_product_examples() {
        let coin = coin(Sidedness::OneSided);
        let r = CylinderFunction::rademacher(0);
        assert_eq!(inner_product(&coin, &r, &r).unwrap(), 1.0);
        assert_eq!(inner_product(&coin, &r, &koopman(&r)).unwrap(), 0.0);
        let gap = gap(Sidedness::OneSided);
        let e0 = CylinderFunction::indicator(2, 0, 0);
        let v = inner_product(&gap, &e0, &koopman(&e0)).unwrap();
        assert_abs_diff_eq!(v, 0.6, epsilon = 1e-14);
    }

    #[test]
    fn koopman_moves_windows() {
        let c = CylinderFunction::constant(2, 1.5);
        assert_eq!(koopman(&c), c);
        assert_eq!(koopman(&CylinderFunction::rademacher(0)).offset(), 1);
        let f = CylinderFunction::rademacher(2);
        assert_eq!(koopman_pow(&f, 3).offset(), 5);
    }

    #[test]
    fn transfer_examples() {
        let coin = coin(Sidedness::OneSided);
        let t = transfer(&coin, &CylinderFunction::rademacher(0)).unwrap();
        assert!(t.is_constant());
        assert_eq!(t.values(), &[0.0]);

        let gap = gap(Sidedness::OneSided);
        let t = transfer(&gap, &CylinderFunction::indicator(2, 0, 0)).unwrap();
        assert_eq!((t.offset(), t.length()), (0, 1));
        assert_abs_diff_eq!(t.values()[0], 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(t.values()[1], 0.2, epsilon = 1e-14);

        let t = transfer(&gap, &CylinderFunction::constant(2, 2.5)).unwrap();
        assert_eq!(t, CylinderFunction::constant(2, 2.5));

        assert_eq!(
            transfer(&gap.with_sidedness(Sidedness::TwoSided), &CylinderFunction::rademacher(0)),
            Err(Error::SidednessMismatch { expected: "one_sided" })
        );
    }

    #[test]
    fn conditional_examples() {
        let coin = coin(Sidedness::OneSided);
        let c = conditional(&coin, &CylinderFunction::rademacher(0), 1).unwrap();
        assert_eq!(c, CylinderFunction::zero(2));

        let gap = gap(Sidedness::OneSided);
        let c = conditional(&gap, &CylinderFunction::indicator(2, 0, 0), 1).unwrap();
        assert_eq!((c.offset(), c.length()), (1, 1));
        assert_abs_diff_eq!(c.values()[0], 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(c.values()[1], 0.2, epsilon = 1e-14);

        let f = CylinderFunction::from_fn(2, 3, 2, |w| (w[0] + 2 * w[1]) as f64).unwrap();
        assert_eq!(conditional(&gap, &f, 2).unwrap(), f);
        assert_eq!(conditional(&gap, &f, -1), Err(Error::InvalidIndex(-1)));
    }

    #[test]
    fn conditional_preserves_expectation() {
        let gap = gap(Sidedness::TwoSided);
        let f = CylinderFunction::from_fn(2, -2, 4, |w| (w[0] + 3 * w[1] * w[3]) as f64 - w[2] as f64).unwrap();
        let e = expectation(&gap, &f);
        for k in -6..6 {
            assert_abs_diff_eq!(expectation(&gap, &conditional_past(&gap, &f, k).unwrap()), e, epsilon = 1e-12);
            assert_abs_diff_eq!(expectation(&gap, &conditional_future(&gap, &f, k).unwrap()), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn koopman_inverse_examples() {
        let two = coin(Sidedness::TwoSided);
        let f = CylinderFunction::from_fn(2, 1, 2, |w| (w[0] * 2 + w[1]) as f64).unwrap();
        assert_eq!(koopman_inverse(&two, &koopman(&f)).unwrap(), f);
        assert_eq!(koopman_inverse(&two, &CylinderFunction::rademacher(0)).unwrap().offset(), -1);
        assert!(koopman_inverse(&coin(Sidedness::OneSided), &f).is_err());
    }

    #[test]
    fn projection_examples() {
        let two = coin(Sidedness::TwoSided);
        let r = CylinderFunction::rademacher(0);
        assert_eq!(project_sk(&two, &r, -1).unwrap(), r);
        assert_eq!(project_sk(&two, &r, 5).unwrap(), CylinderFunction::zero(2));
        let c = CylinderFunction::constant(2, 3.0);
        assert_eq!(project_sk(&two, &c, 0).unwrap(), CylinderFunction::zero(2));
    }

    #[test]
    fn one_sided_rejects_negative_offsets() {
        let coin = coin(Sidedness::OneSided);
        let f = CylinderFunction::rademacher(-1);
        assert!(matches!(conditional(&coin, &f, 0), Err(Error::Incompatible(_))));
    }

    #[test]
    fn canonical_trims_both_ends() {
        let f = CylinderFunction::from_fn(2, 0, 4, |w| w[1] as f64).unwrap().canonical();
        assert_eq!((f.offset(), f.length(), f.values()), (1, 1, &[0.0, 1.0][..]));
    }
}
