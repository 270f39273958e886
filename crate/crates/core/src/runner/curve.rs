use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("completion curve decreases at step {step}")]
    NotMonotone { step: usize },
    #[error("completion curve has no points")]
    Empty,
    #[error("step {k} is beyond the last recorded step {last}")]
    OutOfRange { k: usize, last: usize },
    #[error("curve point {index} is labelled step {step}")]
    Gap { index: usize, step: usize },
}

/// State after one loop step; step 0 is the partition itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    /// Facts proposed to the verifier in this step.
    pub candidates: usize,
    /// Facts accepted in this step.
    pub accepted: usize,
    /// `|F_known|` after the step.
    pub known: usize,
    pub completion_ratio: f64,
}

/// Completion ratio `|F_known| / total` per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCurve {
    /// `|F_known| + |F_un|` at the start.
    pub total: usize,
    pub points: Vec<CurvePoint>,
    /// The candidate space ran dry before the planned number of steps.
    pub truncated: bool,
}

impl CompletionCurve {
    pub fn new(known: usize, total: usize) -> Self {
        CompletionCurve {
            total,
            points: vec![CurvePoint {
                step: 0,
                candidates: 0,
                accepted: 0,
                known,
                completion_ratio: ratio(known, total),
            }],
            truncated: false,
        }
    }

    pub fn push(&mut self, candidates: usize, accepted: usize) {
        let last = *self.points.last().expect("curve starts with step 0");
        let known = last.known + accepted;
        self.points.push(CurvePoint {
            step: last.step + 1,
            candidates,
            accepted,
            known,
            completion_ratio: ratio(known, self.total),
        });
    }

    pub fn initial_known(&self) -> usize {
        self.points.first().map_or(0, |p| p.known)
    }

    pub fn rho(&self) -> f64 {
        self.points.first().map_or(0.0, |p| p.completion_ratio)
    }

    pub fn last_step(&self) -> usize {
        self.points.last().map_or(0, |p| p.step)
    }

    /// Checks step labels are `0, 1, 2, …` and `known` never drops.
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.points.is_empty() {
            return Err(MetricError::Empty);
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.step != i {
                return Err(MetricError::Gap { index: i, step: p.step });
            }
            if i > 0 && p.known < self.points[i - 1].known {
                return Err(MetricError::NotMonotone { step: p.step });
            }
        }
        Ok(())
    }

    /// `known` at steps `0..=n_s`, holding the last value past the end.
    fn known_series(&self, n_s: usize) -> Vec<usize> {
        (0..=n_s)
            .map(|i| self.points.get(i).or(self.points.last()).map_or(0, |p| p.known))
            .collect()
    }

    pub const CSV_HEADER: &'static str = "step,candidates,accepted,known,completion_ratio";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            writeln!(w, "{},{},{},{},{:.9}", p.step, p.candidates, p.accepted, p.known, p.completion_ratio)?;
        }
        Ok(())
    }
}

fn ratio(known: usize, total: usize) -> f64 {
    if total == 0 { 0.0 } else { known as f64 / total as f64 }
}

/// `known` along the oracle curve: every step verifies `min(n_c, remaining)`
/// true facts.
pub fn ideal_known(initial_known: usize, total: usize, n_c: usize, n_s: usize) -> Vec<usize> {
    (0..=n_s)
        .map(|i| initial_known + n_c.saturating_mul(i).min(total - initial_known))
        .collect()
}

/// Twice the trapezoid area above the initial level, in fact counts.
fn doubled_area(series: &[usize]) -> u128 {
    let base = series[0] as u128;
    series.windows(2).map(|w| w[0] as u128 + w[1] as u128 - 2 * base).sum()
}

/// Area ratio of the actual curve to the ideal curve over steps `[0, n_s]`,
/// both measured above the initial ratio. A curve shorter than `n_s` is held
/// flat at its last value. Zero when the ideal area is zero.
pub fn moar(curve: &CompletionCurve, n_s: usize, n_c: usize) -> Result<f64, MetricError> {
    curve.validate()?;
    if n_s == 0 {
        return Ok(0.0);
    }
    let actual = curve.known_series(n_s);
    let ideal = ideal_known(curve.initial_known(), curve.total.max(curve.initial_known()), n_c, n_s);
    let (a, b) = (doubled_area(&actual), doubled_area(&ideal));
    if b == 0 {
        return Ok(0.0);
    }
    Ok(a as f64 / b as f64)
}

/// Completion ratio at step `k`.
pub fn cr_at_k(curve: &CompletionCurve, k: usize) -> Result<f64, MetricError> {
    curve.validate()?;
    curve
        .points
        .get(k)
        .map(|p| p.completion_ratio)
        .ok_or(MetricError::OutOfRange { k, last: curve.last_step() })
}
