//! Type-I rescaling of blowup snapshots and the decay-exponent fit.

use serde::{Deserialize, Serialize};

use super::mesh::Point;
use super::monitors::TraceRow;
use super::Snapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RescaledSnapshot {
    pub step: usize,
    pub t: f64,
    /// `λ = max |H|`
    pub lambda: f64,
    pub center_vertex: usize,
    /// `max (|Å|² + 2γ|K⊥|) / λ²`
    pub max_pinch: f64,
    /// `max |Å|² / λ²`
    pub max_acirc2: f64,
    #[serde(skip)]
    pub vertices: Vec<Point>,
    /// Per-vertex `|Å|²/|H|²`.
    #[serde(skip)]
    pub acirc2_over_h2: Vec<f64>,
}

/// Recentres each snapshot at its max-`|H|` vertex and scales by `λ = max |H|`.
pub fn type_i_rescale(snapshots: &[Snapshot], gamma: f64, stop_a2: f64) -> Result<Vec<RescaledSnapshot>> {
    let last = snapshots.last().map_or(0.0, |s| s.max_a2);
    if !(last >= 0.5 * stop_a2) {
        return Err(Error::NoBlowupDetected {
            last_max_a2: last,
            required: 0.5 * stop_a2,
        });
    }
    Ok(snapshots
        .iter()
        .map(|s| {
            let (center, lambda) = s
                .fields
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bh), (i, f)| if f.h > bh { (i, f.h) } else { (bi, bh) });
            let c = s.vertices[center];
            let l2 = lambda * lambda;
            RescaledSnapshot {
                step: s.step,
                t: s.t,
                lambda,
                center_vertex: center,
                max_pinch: s.fields.iter().map(|f| f.pinch(gamma)).fold(0.0, f64::max) / l2,
                max_acirc2: s.fields.iter().map(|f| f.acirc2).fold(0.0, f64::max) / l2,
                vertices: s.vertices.iter().map(|v| (v - c) * lambda).collect(),
                acirc2_over_h2: s.fields.iter().map(|f| f.acirc2 / (f.h * f.h)).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayFit {
    pub c0: f64,
    pub delta: f64,
    /// Trace rows used by the fit.
    pub window: usize,
    /// `δ` reported as 2 because the pinching numerator vanishes to rounding.
    pub capped: bool,
}

pub const MIN_FIT_SAMPLES: usize = 20;
/// Below `ROUND_FLOOR·max|H|²` on every row the numerator is treated as recovery noise.
pub const ROUND_FLOOR: f64 = 1e-4;
pub const MIN_FIT_DECADES: f64 = 2.0;

/// Fits `max(|Å|² + 2γ|K⊥|) ≈ c₀ (max |H|)^{2−δ}` over the upper half (in `log max|A|²`)
/// of the trace.
pub fn decay_exponent_fit(trace: &[TraceRow]) -> Result<DecayFit> {
    let a2: Vec<f64> = trace.iter().map(|r| r.max_a2).filter(|x| *x > 0.0).collect();
    let lo = a2.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a2.iter().copied().fold(0.0, f64::max);
    let decades = if a2.is_empty() { 0.0 } else { (hi / lo).log10() };
    if trace.len() < MIN_FIT_SAMPLES || !(decades >= MIN_FIT_DECADES) {
        return Err(Error::InsufficientDynamicRange {
            samples: trace.len(),
            decades,
        });
    }
    if trace.iter().all(|r| !(r.max_pinch > ROUND_FLOOR * r.max_h2)) {
        return Ok(DecayFit {
            c0: 0.0,
            delta: 2.0,
            window: 0,
            capped: true,
        });
    }
    let cut = (lo * hi).sqrt();
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|r| r.max_a2 >= cut && r.max_pinch > 0.0 && r.max_h2 > 0.0)
        .map(|r| (0.5 * r.max_h2.ln(), r.max_pinch.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientDynamicRange {
            samples: pts.len(),
            decades,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        c0: (my - slope * mx).exp(),
        delta: 2.0 - slope,
        window: pts.len(),
        capped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(max_a2: f64, max_pinch: f64) -> TraceRow {
        TraceRow {
            step: 0,
            t: 0.0,
            dt: 0.0,
            min_h: 0.0,
            max_a2,
            max_q: 0.0,
            max_fsigma: 0.0,
            area: 0.0,
            int_fsigma_p: 0.0,
            pos_bound_slack: 0.0,
            z_ratio_min: 0.0,
            poincare_slack: 0.0,
            rescaled_max_acirc2: 0.0,
            max_h2: 2.0 * max_a2,
            max_pinch,
        }
    }

    #[test]
    fn recovers_power_law() {
        let trace: Vec<TraceRow> = (0..40)
            .map(|i| {
                let a2 = 10f64.powf(i as f64 / 10.0);
                let h = (2.0 * a2).sqrt();
                row(a2, 0.3 * h.powf(1.5))
            })
            .collect();
        let fit = decay_exponent_fit(&trace).unwrap();
        assert!((fit.delta - 0.5).abs() < 1e-10);
        assert!((fit.c0 - 0.3).abs() < 1e-10);
    }

    #[test]
    fn round_data_caps_and_short_traces_fail() {
        let trace: Vec<TraceRow> = (0..40).map(|i| row(10f64.powf(i as f64 / 10.0), 0.0)).collect();
        assert!(decay_exponent_fit(&trace).unwrap().capped);
        let noisy: Vec<TraceRow> = trace.iter().map(|r| row(r.max_a2, 0.5 * ROUND_FLOOR * r.max_h2)).collect();
        assert!(decay_exponent_fit(&noisy).unwrap().capped);
        let pinched: Vec<TraceRow> = trace.iter().map(|r| row(r.max_a2, 2.0 * ROUND_FLOOR * r.max_h2)).collect();
        assert!(!decay_exponent_fit(&pinched).unwrap().capped);
        assert!(matches!(
            decay_exponent_fit(&trace[..10]),
            Err(Error::InsufficientDynamicRange { .. })
        ));
        assert!(matches!(
            decay_exponent_fit(&trace[..15]),
            Err(Error::InsufficientDynamicRange { .. })
        ));
    }

    #[test]
    fn rescale_needs_blowup() {
        assert!(matches!(type_i_rescale(&[], 0.0, 1.0), Err(Error::NoBlowupDetected { .. })));
    }
}
