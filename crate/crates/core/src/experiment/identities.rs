//! Randomised sweep of the pointwise identities and gradient inequalities.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gradient::{
    GradientState, check_gradient_inequalities, decompose_ef, min_slack_8c_exact, norm_grad_a2,
    norm_grad_h2, sweep_gradient_inequalities,
};
use crate::pointwise::{CurvatureScalars, ShapeTensor, SpecialFrameState, reflection, rotation};
use crate::sampling::par_chunks;

/// Relative tolerance for algebraic identities between two evaluation routes.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative tolerance for scalars recomputed after a frame change and re-reduction.
pub const FRAME_TOL: f64 = 1e-10;
/// Inequalities pass when the normalised slack is at least `-INEQUALITY_TOL`.
pub const INEQUALITY_TOL: f64 = 1e-12;

/// Function table for the routes under test; swapping an entry lets tests check
/// that the sweep catches a broken kernel.
#[derive(Clone, Copy)]
pub struct Kernels {
    pub simons_z_closed: fn(&SpecialFrameState) -> f64,
    pub simons_z_tensor: fn(&ShapeTensor) -> f64,
    pub scalars_closed: fn(&SpecialFrameState) -> CurvatureScalars,
    pub scalars_tensor: fn(&ShapeTensor) -> CurvatureScalars,
}

impl Default for Kernels {
    fn default() -> Self {
        Self {
            simons_z_closed: SpecialFrameState::simons_z,
            simons_z_tensor: ShapeTensor::simons_z,
            scalars_closed: SpecialFrameState::scalars,
            scalars_tensor: ShapeTensor::scalars,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    /// `worst` is the largest relative discrepancy; passes when `worst ≤ tolerance`.
    Identity,
    /// `worst` is the smallest normalised slack; passes when `worst ≥ −tolerance`.
    Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub property: String,
    pub kind: PropertyKind,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Vec<f64>,
}

impl PropertyRecord {
    fn new(property: &str, kind: PropertyKind, worst: f64, tolerance: f64, witness: Vec<f64>) -> Self {
        let passed = match kind {
            PropertyKind::Identity => worst <= tolerance,
            PropertyKind::Inequality => worst >= -tolerance,
        };
        Self {
            property: property.to_string(),
            kind,
            worst,
            tolerance,
            passed,
            witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub count: usize,
    pub passed: bool,
    pub properties: Vec<PropertyRecord>,
}

impl IdentityReport {
    pub fn failures(&self) -> impl Iterator<Item = &PropertyRecord> {
        self.properties.iter().filter(|p| !p.passed)
    }
}

/// Per-property running extreme over the pointwise sample.
#[derive(Debug, Clone)]
struct Extreme {
    value: f64,
    witness: Vec<f64>,
}

impl Extreme {
    fn offer(&mut self, value: f64, larger_is_worse: bool, witness: &[f64]) {
        let worse = if larger_is_worse { value > self.value } else { value < self.value };
        if worse || value.is_nan() && !self.value.is_nan() {
            self.value = value;
            self.witness = witness.to_vec();
        }
    }

    fn merge(self, other: Self, larger_is_worse: bool) -> Self {
        let take_other = if self.value.is_nan() {
            false
        } else if other.value.is_nan() {
            true
        } else if larger_is_worse {
            other.value > self.value
        } else {
            other.value < self.value
        };
        if take_other { other } else { self }
    }
}

struct Pointwise {
    name: &'static str,
    kind: PropertyKind,
    tolerance: f64,
}

const POINTWISE: [Pointwise; 8] = [
    Pointwise { name: "simons_z", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "scalars_closed_vs_tensor", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "frame_invariance", kind: PropertyKind::Identity, tolerance: FRAME_TOL },
    Pointwise { name: "gauss_identity", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "rm_perp_identity", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "traceless_product_identity", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "homogeneity", kind: PropertyKind::Identity, tolerance: IDENTITY_TOL },
    Pointwise { name: "r2_cauchy_schwarz", kind: PropertyKind::Inequality, tolerance: INEQUALITY_TOL },
];

const GRADIENT_IDENTITIES: [&str; 3] = ["ef_orthogonal_split", "e_norm_identity", "8a_equality_witness"];

fn larger_is_worse(kind: PropertyKind) -> bool {
    kind == PropertyKind::Identity
}

fn rel(x: f64, y: f64, scale: f64) -> f64 {
    (x - y).abs() / scale.max(f64::MIN_POSITIVE)
}

fn scalar_list(s: &CurvatureScalars) -> [f64; 8] {
    [
        s.norm_a2,
        s.norm_acirc2,
        s.gauss_k,
        s.normal_kperp.abs(),
        s.norm_rm_perp2,
        s.r1,
        s.r2,
        s.r3.abs(),
    ]
}

fn max_scalar_rel(x: &CurvatureScalars, y: &CurvatureScalars, s2: f64) -> f64 {
    let scales = [s2, s2, s2, s2, s2 * s2, s2 * s2, s2 * s2, s2 * s2];
    scalar_list(x)
        .iter()
        .zip(scalar_list(y))
        .zip(scales)
        .map(|((a, b), s)| rel(*a, b, s))
        .fold(0.0, f64::max)
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

/// Evaluates every pointwise property at `s` under the frame change `(tangent, normal)`.
fn pointwise_values(kernels: &Kernels, s: &SpecialFrameState, tangent: [[f64; 2]; 2], normal: [[f64; 2]; 2], lambda: f64) -> [f64; 8] {
    let SpecialFrameState { h, a, b, c } = *s;
    let closed = (kernels.scalars_closed)(s);
    let s2 = h * h + closed.norm_a2;
    let s4 = s2 * s2;
    let moved = s.lift().transformed(tangent, normal);

    let z = rel((kernels.simons_z_closed)(s), (kernels.simons_z_tensor)(&moved), s4);
    let tensor = max_scalar_rel(&closed, &(kernels.scalars_tensor)(&moved), s2);
    let frame = match moved.to_special_frame() {
        Ok(back) => max_scalar_rel(&(kernels.scalars_closed)(&back), &(kernels.scalars_closed)(&s.canonical()), s2),
        Err(_) => f64::NAN,
    };
    let gauss = rel(closed.norm_a2 + 2.0 * closed.gauss_k, h * h, s2);
    let rm = rel(closed.norm_rm_perp2, 4.0 * closed.normal_kperp * closed.normal_kperp, s4);
    let product = rel(
        2.0 * a * a * (2.0 * b * b + 2.0 * c * c),
        4.0 * a * a * b * b + closed.normal_kperp * closed.normal_kperp,
        s4,
    );
    let scaled = (kernels.scalars_closed)(&s.scaled(lambda));
    let l2 = lambda * lambda;
    let l4 = l2 * l2;
    let homog = [
        rel(scaled.norm_a2, l2 * closed.norm_a2, l2 * s2),
        rel(scaled.gauss_k, l2 * closed.gauss_k, l2 * s2),
        rel(scaled.normal_kperp, l2 * closed.normal_kperp, l2 * s2),
        rel(scaled.r1, l4 * closed.r1, l4 * s4),
        rel(scaled.r2, l4 * closed.r2, l4 * s4),
        rel(scaled.r3, l4 * closed.r3, l4 * s4),
        rel((kernels.simons_z_closed)(&s.scaled(lambda)), l4 * (kernels.simons_z_closed)(s), l4 * s4),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let cs = (closed.norm_a2 * h * h - closed.r2) / s4.max(f64::MIN_POSITIVE);
    [z, tensor, frame, gauss, rm, product, homog, cs]
}

fn gaussian_state(rng: &mut impl Rng) -> SpecialFrameState {
    SpecialFrameState::new(
        rng.sample::<f64, _>(StandardNormal).abs(),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

type PointwiseWorst = (Vec<Extreme>, Vec<Extreme>);

fn empty_worst() -> PointwiseWorst {
    let init = |kind: PropertyKind| Extreme {
        value: if larger_is_worse(kind) { f64::NEG_INFINITY } else { f64::INFINITY },
        witness: Vec::new(),
    };
    (
        POINTWISE.iter().map(|p| init(p.kind)).collect(),
        GRADIENT_IDENTITIES.iter().map(|_| init(PropertyKind::Identity)).collect(),
    )
}

fn merge_worst(a: PointwiseWorst, b: PointwiseWorst) -> PointwiseWorst {
    let p = a
        .0
        .into_iter()
        .zip(b.0)
        .zip(&POINTWISE)
        .map(|((x, y), entry)| x.merge(y, larger_is_worse(entry.kind)))
        .collect();
    let g = a.1.into_iter().zip(b.1).map(|(x, y)| x.merge(y, true)).collect();
    (p, g)
}

fn gradient_identity_values(g: &GradientState) -> [f64; 2] {
    let a2 = norm_grad_a2(g);
    let (e, f) = decompose_ef(g);
    let split = rel(e.inner(&e) + f.inner(&f), a2, a2).max(e.inner(&f).abs() / a2);
    let e_norm = rel(e.inner(&e), 0.75 * norm_grad_h2(g), a2);
    [split, e_norm]
}

/// Runs every pointwise identity on `count` Gaussian states with random frame
/// changes and scale factors, plus the gradient inequality sweep on `count`
/// gradient samples and its deterministic grid. `count = 0` yields an empty report.
pub fn run_identities(seed: u64, count: usize, kernels: &Kernels) -> IdentityReport {
    if count == 0 {
        return IdentityReport {
            seed,
            count,
            passed: true,
            properties: Vec::new(),
        };
    }
    let (pointwise, gradient_ids) = par_chunks(
        seed,
        count,
        |rng, n| {
            let mut w = empty_worst();
            for _ in 0..n {
                let s = gaussian_state(rng);
                let mut tangent = rotation(rng.random_range(0.0..std::f64::consts::TAU));
                if rng.random_bool(0.5) {
                    tangent = mul(reflection(), tangent);
                }
                let mut normal = rotation(rng.random_range(0.0..std::f64::consts::TAU));
                if rng.random_bool(0.5) {
                    normal = mul(reflection(), normal);
                }
                let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
                let witness = [s.h, s.a, s.b, s.c];
                let values = pointwise_values(kernels, &s, tangent, normal, lambda);
                for ((slot, entry), v) in w.0.iter_mut().zip(&POINTWISE).zip(values) {
                    slot.offer(v, larger_is_worse(entry.kind), &witness);
                }
                let x: [f64; 8] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let g = GradientState::from_slice(&x);
                for (slot, v) in w.1.iter_mut().zip(gradient_identity_values(&g)) {
                    slot.offer(v, true, &x);
                }
            }
            w
        },
        empty_worst(),
        merge_worst,
    );

    let mut properties: Vec<PropertyRecord> = POINTWISE
        .iter()
        .zip(pointwise)
        .map(|(entry, e)| PropertyRecord::new(entry.name, entry.kind, e.value, entry.tolerance, e.witness))
        .collect();

    let hand = SpecialFrameState::new(4.0, 1.0, 0.0, 1.0);
    let hand_z = (kernels.simons_z_closed)(&hand);
    let hand_err = rel(hand_z, 8.0, 8.0).max(rel((kernels.simons_z_tensor)(&hand.lift()), 8.0, 8.0));
    properties.push(PropertyRecord::new(
        "simons_z_hand_point",
        PropertyKind::Identity,
        hand_err,
        IDENTITY_TOL,
        vec![4.0, 1.0, 0.0, 1.0, hand_z],
    ));

    let witness = GradientState::new([0.75, 0.0, 0.25, 0.0], [0.0; 4]);
    let mut ids: Vec<Extreme> = gradient_ids;
    ids[2] = Extreme {
        value: check_gradient_inequalities(&witness).slack_8a.abs(),
        witness: witness.to_array().to_vec(),
    };
    for (name, e) in GRADIENT_IDENTITIES.iter().zip(ids) {
        let tol = if *name == "8a_equality_witness" { 0.0 } else { IDENTITY_TOL };
        properties.push(PropertyRecord::new(name, PropertyKind::Identity, e.value, tol, e.witness));
    }

    for r in sweep_gradient_inequalities(count, seed.wrapping_add(1), true) {
        properties.push(PropertyRecord::new(&r.inequality, PropertyKind::Inequality, r.slack_min, INEQUALITY_TOL, r.witness));
    }
    properties.push(PropertyRecord::new(
        "8c_exact_minimum",
        PropertyKind::Inequality,
        min_slack_8c_exact(),
        INEQUALITY_TOL,
        Vec::new(),
    ));

    IdentityReport {
        seed,
        count,
        passed: properties.iter().all(|p| p.passed),
        properties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kernels_pass() {
        let r = run_identities(42, 20_000, &Kernels::default());
        for p in &r.properties {
            assert!(p.passed, "{p:?}");
        }
        assert!(r.passed);
    }

    #[test]
    fn count_zero_is_empty() {
        let r = run_identities(42, 0, &Kernels::default());
        assert!(r.passed && r.properties.is_empty());
    }

    #[test]
    fn sign_flip_in_closed_z_is_caught() {
        let kernels = Kernels {
            simons_z_closed: |s| -s.simons_z(),
            ..Kernels::default()
        };
        let r = run_identities(42, 1000, &kernels);
        assert!(!r.passed);
        let failed: Vec<_> = r.failures().map(|p| p.property.as_str()).collect();
        assert!(failed.contains(&"simons_z"), "{failed:?}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = run_identities(7, 5000, &Kernels::default());
        let b = run_identities(7, 5000, &Kernels::default());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
