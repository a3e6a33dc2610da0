//! Sampling certificate for the sign of the pinching-quantity reaction term at a
//! first zero of `Q = |A|² + 2γ|K⊥| − k|H|² + ε`.
//!
//! At `Q = 0` the mean curvature is eliminated through
//! `(k − ½)|H|² = |Å|² + 2γ|K⊥| + ε`, which leaves a function of the traceless
//! components `(a, b, c)` alone. With `ε = 0` it is homogeneous of degree four, so
//! the unit sphere decides its sign.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointwise::SpecialFrameState;
use crate::sampling::par_chunks;

/// Tolerance for the non-positivity verdict on the unit sphere.
pub const NONPOS_TOL: f64 = 1e-12;
pub const MIN_GRID: usize = 64;
const WORST_KEPT: usize = 100;

/// `γ = 1 − 4k/3 − δ`.
pub fn default_gamma(k: f64, delta: f64) -> f64 {
    1.0 - 4.0 * k / 3.0 - delta
}

/// A point on the `Q = 0` constraint surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub k: f64,
    pub gamma: f64,
}

impl ConeSample {
    pub fn new(a: f64, b: f64, c: f64, eps: f64, k: f64, gamma: f64) -> Result<Self> {
        if !(k > 0.5) {
            return Err(Error::InvalidK { k });
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be non-negative")));
        }
        Ok(Self { a, b, c, eps, k, gamma })
    }

    pub fn norm_acirc1_2(&self) -> f64 {
        2.0 * self.a * self.a
    }

    pub fn norm_acirc2_2(&self) -> f64 {
        2.0 * (self.b * self.b + self.c * self.c)
    }

    pub fn abs_kperp(&self) -> f64 {
        (2.0 * self.a * self.c).abs()
    }

    /// `|H|²` forced by `Q = 0`.
    pub fn h_squared(&self) -> f64 {
        let num = self.norm_acirc1_2()
            + self.norm_acirc2_2()
            + 2.0 * self.gamma * self.abs_kperp()
            + self.eps;
        num / (self.k - 0.5)
    }

    /// The point as a canonical special-frame state with `|H|` from the constraint.
    pub fn special_frame(&self) -> SpecialFrameState {
        SpecialFrameState::new(self.h_squared().max(0.0).sqrt(), self.a, self.b, self.c).canonical()
    }
}

/// Coefficients `(−1/(k−½) + 2, −3/(k−½) + 6, −(1+2γ²)/(k−½) + 6, 1/(k−½))`.
fn coefficients(k: f64, gamma: f64) -> (f64, f64, f64, f64) {
    let m = 1.0 / (k - 0.5);
    (2.0 - m, 6.0 - 3.0 * m, 6.0 - (1.0 + 2.0 * gamma * gamma) * m, m)
}

fn reaction_unchecked(s: &ConeSample) -> f64 {
    let (c1, c3, ck, m) = coefficients(s.k, s.gamma);
    let (a, b) = (s.a, s.b);
    let n1 = s.norm_acirc1_2();
    let n2 = s.norm_acirc2_2();
    let kp = s.abs_kperp();
    let (g, e) = (s.gamma, s.eps);
    c1 * 4.0 * a * a * b * b + c1 * g * kp * n1 + c3 * g * kp * n2 + c1 * n2 * n2 + ck * kp * kp
        - e * (2.0 + m) * n1
        - 2.0 * e * m * n2
        - 3.0 * e * g * kp * m
        - e * e * m
}

/// Reduced reaction expression at `Q = 0`.
pub fn reaction_at_zero_q(s: &ConeSample) -> Result<f64> {
    if !(s.k > 0.5) {
        return Err(Error::InvalidK { k: s.k });
    }
    Ok(reaction_unchecked(s))
}

/// `2R₁ + 2γR₃ − 2kR₂` on the special-frame state with `|H|²` from the constraint.
pub fn reaction_unreduced(s: &ConeSample) -> Result<f64> {
    if !(s.k > 0.5) {
        return Err(Error::InvalidK { k: s.k });
    }
    let sc = s.special_frame().scalars();
    Ok(2.0 * sc.r1 + 2.0 * s.gamma * sc.r3 - 2.0 * s.k * sc.r2)
}

/// The two bracket forms of the grouped bound, as functions of `(a, c)`.
fn brackets(k: f64, gamma: f64, eta1: f64, eta2: f64, a: f64, c: f64) -> (f64, f64) {
    let (c1, c3, ck, _) = coefficients(k, gamma);
    let ac = (a * c).abs();
    let first = c1 * c * c + eta1 * c3 * gamma * ac + eta2 * ck * a * a;
    let second = c1 * gamma * a * a + (1.0 - eta2) * ck * ac + (1.0 - eta1) * c3 * gamma * c * c;
    (first, second)
}

fn check_eta(eta1: f64, eta2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta1) || !(0.0..=1.0).contains(&eta2) {
        return Err(Error::InvalidParameter(format!(
            "grouping weights ({eta1}, {eta2}) must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// `4c²·{first} + 4|ac|·{second}` with the `ε` terms and the `b`-dependent terms dropped.
pub fn grouped_form_value(s: &ConeSample, eta1: f64, eta2: f64) -> Result<f64> {
    if !(s.k > 0.5) {
        return Err(Error::InvalidK { k: s.k });
    }
    check_eta(eta1, eta2)?;
    let (first, second) = brackets(s.k, s.gamma, eta1, eta2, s.a, s.c);
    Ok(4.0 * s.c * s.c * first + 4.0 * (s.a * s.c).abs() * second)
}

/// Maxima of the two brackets over the quarter circle `a, c ≥ 0`, `a² + c² = 1`.
pub fn grouped_bracket_maxima(k: f64, gamma: f64, eta1: f64, eta2: f64) -> Result<(f64, f64)> {
    if !(k > 0.5) {
        return Err(Error::InvalidK { k });
    }
    check_eta(eta1, eta2)?;
    const N: usize = 1024;
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..=N {
        let t = std::f64::consts::FRAC_PI_2 * i as f64 / N as f64;
        let (first, second) = brackets(k, gamma, eta1, eta2, t.cos(), t.sin());
        best.0 = best.0.max(first);
        best.1 = best.1.max(second);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub eta1: f64,
    pub eta2: f64,
    /// Larger of the two bracket maxima; negative means both brackets are negative definite
    /// on the quarter circle.
    pub worst_bracket: f64,
}

/// Grid search over `[0, 1]²` for the weights that make the worse bracket most negative.
pub fn best_grouping(k: f64, gamma: f64, steps: usize) -> Result<Grouping> {
    let steps = steps.max(1);
    let mut best = Grouping {
        eta1: 0.0,
        eta2: 0.0,
        worst_bracket: f64::INFINITY,
    };
    for i in 0..=steps {
        for j in 0..=steps {
            let (eta1, eta2) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let (m1, m2) = grouped_bracket_maxima(k, gamma, eta1, eta2)?;
            let worst = m1.max(m2);
            if worst < best.worst_bracket {
                best = Grouping { eta1, eta2, worst_bracket: worst };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub k: f64,
    pub delta: f64,
    /// Points per angular axis of the octant grid.
    pub grid: usize,
    pub random_samples: usize,
    pub seed: u64,
    /// Replaces `1 − 4k/3 − δ` when set.
    pub gamma_override: Option<f64>,
}

impl CertifyOptions {
    pub fn new(k: f64) -> Self {
        Self {
            k,
            delta: 0.0,
            grid: 256,
            random_samples: 1_000_000,
            seed: 42,
            gamma_override: None,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_override.unwrap_or_else(|| default_gamma(self.k, self.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub random_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateReport {
    pub k: f64,
    pub gamma: f64,
    pub delta: f64,
    pub max_value: f64,
    pub argmax: ConeSample,
    pub sample_count: usize,
    pub grid: GridSpec,
    pub strictly_negative: bool,
    pub non_positive: bool,
    /// Largest values seen, in decreasing order.
    #[serde(skip)]
    pub worst: Vec<ScoredSample>,
}

impl CertificateReport {
    pub fn worst_csv(&self) -> String {
        let mut out = String::from("a,b,c,value\n");
        for s in &self.worst {
            out.push_str(&format!("{},{},{},{}\n", s.a, s.b, s.c, s.value));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    count: usize,
    worst: Vec<ScoredSample>,
}

impl Tally {
    fn push(&mut self, s: ScoredSample) {
        self.count += 1;
        self.worst.push(s);
        if self.worst.len() >= 4 * WORST_KEPT {
            self.trim();
        }
    }

    fn trim(&mut self) {
        // Stable sort keeps the earliest sample among equal values.
        self.worst.sort_by(|x, y| y.value.total_cmp(&x.value));
        self.worst.truncate(WORST_KEPT);
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.worst.extend(other.worst);
        self.trim();
        self
    }
}

/// Octant of the unit sphere `a, b, c ≥ 0`; the expression depends on `b` only through `b²`
/// and is invariant under the canonical sign changes of `a` and `c`.
fn octant_point(i: usize, j: usize, n: usize) -> (f64, f64, f64) {
    let step = std::f64::consts::FRAC_PI_2 / (n - 1) as f64;
    let (theta, phi) = (i as f64 * step, j as f64 * step);
    (theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
}

/// Maximum of the `ε = 0` reaction expression over the unit sphere.
pub fn certify_negativity(opts: &CertifyOptions) -> Result<CertificateReport> {
    if !(opts.k > 0.5 && opts.k <= 1.0) {
        return Err(Error::InvalidK { k: opts.k });
    }
    if opts.grid < MIN_GRID {
        return Err(Error::ResolutionTooCoarse { grid: opts.grid, min: MIN_GRID });
    }
    let (k, gamma) = (opts.k, opts.gamma());
    let eval = |a: f64, b: f64, c: f64| {
        let s = ConeSample { a, b, c, eps: 0.0, k, gamma };
        ScoredSample { a, b, c, value: reaction_unchecked(&s) }
    };
    let n = opts.grid;
    let mut tally = Tally::default();
    for i in 0..n {
        for j in 0..n {
            let (a, b, c) = octant_point(i, j, n);
            tally.push(eval(a, b, c));
        }
    }
    tally.trim();
    let random = par_chunks(
        opts.seed,
        opts.random_samples,
        |rng, count| {
            let mut t = Tally::default();
            for _ in 0..count {
                let x: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r == 0.0 {
                    continue;
                }
                t.push(eval(x[0].abs() / r, x[1].abs() / r, x[2].abs() / r));
            }
            t.trim();
            t
        },
        Tally::default(),
        Tally::merge,
    );
    let tally = tally.merge(random);
    let top = tally.worst[0];
    Ok(CertificateReport {
        k,
        gamma,
        delta: opts.delta,
        max_value: top.value,
        argmax: ConeSample { a: top.a, b: top.b, c: top.c, eps: 0.0, k, gamma },
        sample_count: tally.count,
        grid: GridSpec {
            resolution: n,
            random_samples: opts.random_samples,
            seed: opts.seed,
        },
        strictly_negative: top.value < 0.0,
        non_positive: top.value <= NONPOS_TOL,
        worst: tally.worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdReport {
    pub k_star: f64,
    /// Largest `k` certified non-positive.
    pub k_low: f64,
    /// Smallest `k` with a positive witness.
    pub k_high: f64,
    pub evaluations: usize,
}

/// Bisects for the largest `k` at which the expression stays non-positive.
pub fn threshold_scan(k_low: f64, k_high: f64, tol_k: f64, base: &CertifyOptions) -> Result<ThresholdReport> {
    if !(tol_k > 0.0) || !(k_low < k_high) {
        return Err(Error::InvalidParameter(format!(
            "need k_low < k_high and tol_k > 0, got ({k_low}, {k_high}, {tol_k})"
        )));
    }
    let holds = |k: f64| -> Result<bool> {
        let opts = CertifyOptions { k, ..base.clone() };
        Ok(certify_negativity(&opts)?.non_positive)
    };
    let low_ok = holds(k_low)?;
    let high_ok = !holds(k_high)?;
    if !(low_ok && high_ok) {
        return Err(Error::BracketInvalid { low_ok, high_ok });
    }
    let (mut lo, mut hi) = (k_low, k_high);
    let mut evaluations = 2;
    while hi - lo > tol_k {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdReport {
        k_star: 0.5 * (lo + hi),
        k_low: lo,
        k_high: hi,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsilonZReport {
    pub gamma: f64,
    pub pinch_fraction: f64,
    pub min_ratio: f64,
    pub argmin: SpecialFrameState,
    pub sample_count: usize,
}

/// Radii, as fractions of the boundary radius, sampled along every direction.
const RADIUS_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Sampled minimum of `Z / ((|Å|² + 2γ|K⊥|)|H|²)` over `|A|² ≤ f|H|²` with `|H| = 1`.
///
/// The same directions are used for every `f`, so the result is monotone in `f`.
pub fn epsilon_z_scan(gamma: f64, pinch_fraction: f64, grid: usize, random_samples: usize, seed: u64) -> Result<EpsilonZReport> {
    if !(pinch_fraction > 0.5 && pinch_fraction < 5.0 / 6.0) {
        return Err(Error::InvalidParameter(format!(
            "pinch fraction {pinch_fraction} must lie in (1/2, 5/6)"
        )));
    }
    if grid < 2 {
        return Err(Error::ResolutionTooCoarse { grid, min: 2 });
    }
    // |Å|² = 2(a² + b² + c²) ≤ f − 1/2 at h = 1.
    let boundary = ((pinch_fraction - 0.5) / 2.0).sqrt();
    let eval = |dir: (f64, f64, f64), best: &mut (f64, SpecialFrameState, usize)| {
        for frac in RADIUS_FRACTIONS {
            let r = frac * boundary;
            let s = SpecialFrameState::new(1.0, r * dir.0, r * dir.1, r * dir.2);
            if let Ok(v) = s.z_lower_bound_ratio(gamma) {
                best.2 += 1;
                if v < best.0 {
                    best.0 = v;
                    best.1 = s;
                }
            }
        }
    };
    let empty = || (f64::INFINITY, SpecialFrameState::new(1.0, 0.0, 0.0, 0.0), 0usize);
    let mut best = empty();
    for i in 0..grid {
        for j in 0..grid {
            eval(octant_point(i, j, grid), &mut best);
        }
    }
    let random = par_chunks(
        seed,
        random_samples,
        |rng, count| {
            let mut b = empty();
            for _ in 0..count {
                let x: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r > 0.0 {
                    eval((x[0].abs() / r, x[1].abs() / r, x[2].abs() / r), &mut b);
                }
            }
            b
        },
        empty(),
        |x, y| {
            let count = x.2 + y.2;
            if y.0 < x.0 {
                (y.0, y.1, count)
            } else {
                (x.0, x.1, count)
            }
        },
    );
    let count = best.2 + random.2;
    let best = if random.0 < best.0 { random } else { best };
    Ok(EpsilonZReport {
        gamma,
        pinch_fraction,
        min_ratio: best.0,
        argmin: best.1,
        sample_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const K: f64 = 29.0 / 40.0;

    fn sample(a: f64, b: f64, c: f64, eps: f64) -> ConeSample {
        ConeSample::new(a, b, c, eps, K, default_gamma(K, 0.0)).unwrap()
    }

    #[test]
    fn flat_point_values() {
        assert_eq!(reaction_at_zero_q(&sample(0.0, 0.0, 0.0, 0.0)).unwrap(), 0.0);
        for k in [0.6, K, 1.0] {
            let s = ConeSample::new(0.0, 0.0, 0.0, 1.0, k, 0.2).unwrap();
            assert_relative_eq!(reaction_at_zero_q(&s).unwrap(), -1.0 / (k - 0.5), max_relative = 1e-15);
        }
    }

    #[test]
    fn invalid_k_is_rejected() {
        assert!(matches!(ConeSample::new(1.0, 0.0, 0.0, 0.0, 0.5, 0.0), Err(Error::InvalidK { .. })));
        let bad = ConeSample { a: 1.0, b: 0.0, c: 0.0, eps: 0.0, k: 0.4, gamma: 0.0 };
        assert!(matches!(reaction_at_zero_q(&bad), Err(Error::InvalidK { .. })));
        assert!(matches!(grouped_form_value(&bad, 0.5, 0.5), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn reduced_matches_unreduced_on_fixed_points() {
        for (a, b, c, eps) in [(1.0, 0.0, 0.3, 0.0), (0.4, -0.7, 0.2, 0.5), (-0.3, 0.5, -0.9, 2.0)] {
            let s = sample(a, b, c, eps);
            let reduced = reaction_at_zero_q(&s).unwrap();
            let full = reaction_unreduced(&s).unwrap();
            assert_relative_eq!(reduced, full, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn grouped_form_on_b_zero_slice_matches_hand_expansion() {
        let s = sample(0.6, 0.0, 0.8, 0.0);
        let (c1, c3, ck, _) = coefficients(K, s.gamma);
        let (a, c, g) = (0.6, 0.8, s.gamma);
        let hand = 4.0 * c * c * (c1 * c * c + 0.5 * c3 * g * a * c + 0.5 * ck * a * a)
            + 4.0 * a * c * (c1 * g * a * a + 0.5 * ck * a * c + 0.5 * c3 * g * c * c);
        assert_relative_eq!(grouped_form_value(&s, 0.5, 0.5).unwrap(), hand, max_relative = 1e-14);
        // With b = 0 and ε = 0 nothing is discarded.
        assert_relative_eq!(hand, reaction_at_zero_q(&s).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn grouped_form_is_zero_at_origin_and_on_c_axis_with_a_zero() {
        assert_eq!(grouped_form_value(&sample(0.0, 0.3, 0.0, 0.0), 0.2, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn grid_guard() {
        let opts = CertifyOptions { grid: 32, ..CertifyOptions::new(K) };
        assert!(matches!(certify_negativity(&opts), Err(Error::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn positive_witness_at_three_quarters() {
        let opts = CertifyOptions { grid: 64, random_samples: 10_000, ..CertifyOptions::new(0.75) };
        let r = certify_negativity(&opts).unwrap();
        assert!(r.max_value > 0.0);
        assert!(r.argmax.a > r.argmax.c && r.argmax.c > 0.0);
        assert_eq!(r.worst.len(), WORST_KEPT);
        assert!(r.worst.windows(2).all(|w| w[0].value >= w[1].value));
    }

    #[test]
    fn remark_case_is_non_positive() {
        let opts = CertifyOptions {
            grid: 64,
            random_samples: 10_000,
            gamma_override: Some(1.0),
            ..CertifyOptions::new(1.0)
        };
        assert!(certify_negativity(&opts).unwrap().non_positive);
    }

    #[test]
    fn bracket_check_for_invalid_scan() {
        let base = CertifyOptions { grid: 64, random_samples: 1000, ..CertifyOptions::new(0.6) };
        let err = threshold_scan(0.51, 0.6, 1e-2, &base).unwrap_err();
        assert!(matches!(err, Error::BracketInvalid { low_ok: true, high_ok: false }));
    }

    #[test]
    fn epsilon_z_slice_and_monotonicity() {
        let g = 1.0 / 30.0;
        let s = SpecialFrameState::new(1.0, 0.2, 0.0, 0.0);
        assert_relative_eq!(s.z_lower_bound_ratio(g).unwrap(), 2.0 * s.gauss_k(), max_relative = 1e-14);
        let lo = epsilon_z_scan(g, 0.7, 32, 1000, 1).unwrap();
        let hi = epsilon_z_scan(g, 0.8, 32, 1000, 1).unwrap();
        assert!(hi.min_ratio > 0.0);
        assert!(lo.min_ratio >= hi.min_ratio);
        assert!(epsilon_z_scan(g, 0.9, 32, 0, 1).is_err());
    }
}
