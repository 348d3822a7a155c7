//! Verdict types shared by the hypothesis checkers, plus the decay
//! diagnostics they use as evidence.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

/// A named number backing a verdict. Non-finite values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub label: String,
    pub value: Option<f64>,
}

impl Evidence {
    pub fn new(label: impl Into<String>, value: f64) -> Self {
        Self { label: label.into(), value: value.is_finite().then_some(value) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: String,
    pub description: String,
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn push(&mut self, name: &str, description: &str, verdict: Verdict, evidence: Vec<Evidence>) {
        debug_assert!(self.get(name).is_none(), "condition {name} checked twice");
        self.entries.push(ConditionEntry {
            name: name.to_string(),
            description: description.to_string(),
            verdict,
            evidence,
        });
    }

    pub fn get(&self, name: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.get(name).map(|e| e.verdict)
    }

    pub fn any_fail(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Pass)
    }

    pub fn extend(&mut self, other: ConditionReport) {
        for e in other.entries {
            self.entries.push(e);
        }
    }
}

/// Envelope ratios at or above this count as "not decaying".
pub const STALL_RATIO: f64 = 1.0 - 1e-6;

/// Per-step geometric decay rate of `|terms|` over the trailing window.
///
/// Compares the maximum modulus over the two halves of the last `2w` terms,
/// so oscillating sequences are judged by their envelope. Returns `Some(0.0)`
/// when the sequence has vanished and `None` when there are too few terms.
pub fn envelope_ratio(terms: &[f64]) -> Option<f64> {
    let w = (terms.len() / 2).min(50);
    if w == 0 {
        return None;
    }
    let tail = &terms[terms.len() - 2 * w..];
    let first = tail[..w].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let second = tail[w..].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if first == 0.0 {
        return Some(0.0);
    }
    Some((second / first).powf(1.0 / w as f64))
}

/// Largest `|sum_{k=i}^{j} terms[k]|` over index pairs inside `terms[from..]`.
pub fn tail_oscillation(terms: &[f64], from: usize) -> f64 {
    let mut best = 0.0f64;
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut acc = 0.0f64;
    for t in &terms[from.min(terms.len())..] {
        acc += t;
        best = best.max((acc - lo).abs()).max((acc - hi).abs()).max(acc.abs());
        lo = lo.min(acc);
        hi = hi.max(acc);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_geometric_and_alternating() {
        let geo: Vec<f64> = (0..60).map(|n| 0.7f64.powi(n)).collect();
        assert!((envelope_ratio(&geo).unwrap() - 0.7).abs() < 1e-12);
        let alt: Vec<f64> = (0..60).map(|n| if n % 2 == 0 { 0.25 } else { -0.25 }).collect();
        assert_eq!(envelope_ratio(&alt), Some(1.0));
        assert_eq!(envelope_ratio(&[1.0, 0.0, 0.0, 0.0]), Some(0.0));
        assert_eq!(envelope_ratio(&[1.0]), None);
    }

    #[test]
    fn oscillation_of_partial_sums() {
        let alt: Vec<f64> = (0..20).map(|n| if n % 2 == 0 { 0.25 } else { -0.25 }).collect();
        assert_eq!(tail_oscillation(&alt, 10), 0.25);
        assert_eq!(tail_oscillation(&[0.0; 5], 0), 0.0);
    }

    #[test]
    fn evidence_drops_non_finite() {
        assert_eq!(Evidence::new("x", f64::INFINITY).value, None);
        assert_eq!(Evidence::new("x", 2.0).value, Some(2.0));
    }
}
