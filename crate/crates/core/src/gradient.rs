//! First covariant derivative of the second fundamental form in flat R⁴.
//!
//! With flat ambient space the Codazzi equation makes `∇_i h_{jkα}` totally
//! symmetric in `(i, j, k)`, so each normal direction has four independent
//! components, indexed by how many tangent indices equal 2:
//! `x₀ = ∇₁h₁₁`, `x₁ = ∇₂h₁₁`, `x₂ = ∇₁h₂₂`, `x₃ = ∇₂h₂₂`.

use nalgebra::{SMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::pointwise::SpecialFrameState;
use crate::sampling::par_chunks;

/// Multiplicity of each independent component in the full tensor.
const MULTIPLICITY: [f64; 4] = [1.0, 3.0, 3.0, 1.0];

/// Full derivative tensor `[α][q][i][j] = ∇_q h_{ijα}`.
pub type FullGradient = [[[[f64; 2]; 2]; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradientState {
    /// Components for `α = 1`.
    pub u: [f64; 4],
    /// Components for `α = 2`.
    pub v: [f64; 4],
}

impl GradientState {
    pub fn new(u: [f64; 4], v: [f64; 4]) -> Self {
        Self { u, v }
    }

    pub fn from_slice(x: &[f64; 8]) -> Self {
        Self {
            u: [x[0], x[1], x[2], x[3]],
            v: [x[4], x[5], x[6], x[7]],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        let (u, v) = (self.u, self.v);
        [u[0], u[1], u[2], u[3], v[0], v[1], v[2], v[3]]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: self.u.map(|x| s * x),
            v: self.v.map(|x| s * x),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            u: std::array::from_fn(|i| f(self.u[i], other.u[i])),
            v: std::array::from_fn(|i| f(self.v[i], other.v[i])),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Inner product induced by the full tensor, `Σ_{qijα} S_{qijα} T_{qijα}`.
    pub fn inner(&self, other: &Self) -> f64 {
        (0..4)
            .map(|i| MULTIPLICITY[i] * (self.u[i] * other.u[i] + self.v[i] * other.v[i]))
            .sum()
    }

    pub fn full(&self) -> FullGradient {
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for (alpha, comps) in [self.u, self.v].iter().enumerate() {
            for q in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        out[alpha][q][i][j] = comps[q + i + j];
                    }
                }
            }
        }
        out
    }

    /// `∇_i H_α = Σ_k ∇_i h_{kkα}`, as `[α][i]`.
    pub fn grad_h(&self) -> [[f64; 2]; 2] {
        let g = |x: [f64; 4]| [x[0] + x[2], x[1] + x[3]];
        [g(self.u), g(self.v)]
    }
}

/// `|∇A|²`.
pub fn norm_grad_a2(g: &GradientState) -> f64 {
    g.inner(g)
}

/// `|∇H|²`.
pub fn norm_grad_h2(g: &GradientState) -> f64 {
    g.grad_h().iter().flatten().map(|x| x * x).sum()
}

/// Orthogonal split `∇A = E + F` with
/// `E_{ijk} = (g_{ij}∇_kH + g_{ik}∇_jH + g_{jk}∇_iH)/4`.
pub fn decompose_ef(g: &GradientState) -> (GradientState, GradientState) {
    let e_of = |[h1, h2]: [f64; 2]| [0.75 * h1, 0.25 * h2, 0.25 * h1, 0.75 * h2];
    let [gh1, gh2] = g.grad_h();
    let e = GradientState::new(e_of(gh1), e_of(gh2));
    let f = g.sub(&e);
    (e, f)
}

/// `∇_evol K⊥ = Σ_{p,q} (∇_q h_{1p1} ∇_q h_{2p2} − ∇_q h_{2p1} ∇_q h_{1p2})` after
/// applying Codazzi symmetry.
pub fn nabla_evol_kperp(g: &GradientState) -> f64 {
    let (u, v) = (g.u, g.v);
    u[0] * v[1] - v[0] * u[1] + 2.0 * u[1] * v[2] - 2.0 * u[2] * v[1] + u[2] * v[3] - v[2] * u[3]
}

/// Same quantity evaluated as the raw double sum over the full tensor.
pub fn nabla_evol_kperp_raw(g: &GradientState) -> f64 {
    let s = g.full();
    let mut total = 0.0;
    for p in 0..2 {
        for q in 0..2 {
            total += s[0][q][0][p] * s[1][q][1][p] - s[0][q][1][p] * s[1][q][0][p];
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSlacks {
    pub norm_grad_a2: f64,
    pub norm_grad_h2: f64,
    /// `|∇A|² − (3/4)|∇H|²`
    pub slack_8a: f64,
    /// `|∇A|² − |∇H|²/2 − |∇A|²/3`
    pub slack_8b: f64,
    /// `|∇A|² − 2|∇_evol K⊥|`
    pub slack_8c: f64,
}

pub fn check_gradient_inequalities(g: &GradientState) -> GradientSlacks {
    let a2 = norm_grad_a2(g);
    let h2 = norm_grad_h2(g);
    GradientSlacks {
        norm_grad_a2: a2,
        norm_grad_h2: h2,
        slack_8a: a2 - 0.75 * h2,
        slack_8b: a2 - 0.5 * h2 - a2 / 3.0,
        slack_8c: a2 - 2.0 * nabla_evol_kperp(g).abs(),
    }
}

/// `∇_q K⊥` by the product rule applied to `Σ_p (h_{1p1}h_{2p2} − h_{2p1}h_{1p2})`.
pub fn grad_kperp(s: &SpecialFrameState, g: &GradientState) -> [f64; 2] {
    let h = *s.lift().components();
    let d = g.full();
    std::array::from_fn(|q| {
        (0..2)
            .map(|p| {
                d[0][q][0][p] * h[1][1][p] + h[0][0][p] * d[1][q][1][p]
                    - d[0][q][1][p] * h[1][0][p]
                    - h[0][1][p] * d[1][q][0][p]
            })
            .sum()
    })
}

/// Returns `(|∇K⊥|, 4|Å||∇A|)`.
pub fn grad_kperp_bound(s: &SpecialFrameState, g: &GradientState) -> (f64, f64) {
    let [d1, d2] = grad_kperp(s, g);
    (
        d1.hypot(d2),
        4.0 * s.norm_acirc2().sqrt() * norm_grad_a2(g).sqrt(),
    )
}

/// Exact minimum of `|∇A|² − 2∇_evol K⊥` over the unit `|∇A|` sphere, from the
/// symmetric 8×8 eigenproblem.
pub fn min_slack_8c_exact() -> f64 {
    let mut b = SMatrix::<f64, 8, 8>::zeros();
    // Coefficients of ∇_evol K⊥ on x = (u, v).
    let terms = [(0, 5, 1.0), (4, 1, -1.0), (1, 6, 2.0), (2, 5, -2.0), (2, 7, 1.0), (6, 3, -1.0)];
    for (i, j, c) in terms {
        b[(i, j)] += c / 2.0;
        b[(j, i)] += c / 2.0;
    }
    let w: [f64; 8] = std::array::from_fn(|i| MULTIPLICITY[i % 4]);
    let m = SMatrix::<f64, 8, 8>::from_fn(|i, j| {
        let diag = if i == j { w[i] } else { 0.0 };
        (diag - 2.0 * b[(i, j)]) / (w[i] * w[j]).sqrt()
    });
    SymmetricEigen::new(m).eigenvalues.min()
}

/// One row of the certification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub inequality: String,
    /// Minimum slack after normalising each sample to unit scale.
    pub slack_min: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Worst {
    slack: f64,
    witness: Vec<f64>,
}

impl Worst {
    fn none() -> Self {
        Self {
            slack: f64::INFINITY,
            witness: Vec::new(),
        }
    }

    fn offer(&mut self, slack: f64, witness: impl FnOnce() -> Vec<f64>) {
        if slack < self.slack || slack.is_nan() {
            self.slack = slack;
            self.witness = witness();
        }
    }

    fn merge(self, other: Self) -> Self {
        if other.slack < self.slack {
            other
        } else {
            self
        }
    }
}

fn evaluate(g: &GradientState, s: &SpecialFrameState, worst: &mut [Worst; 4]) {
    let a2 = norm_grad_a2(g);
    if a2 <= 0.0 {
        return;
    }
    let unit = g.scaled(1.0 / a2.sqrt());
    let sl = check_gradient_inequalities(&unit);
    worst[0].offer(sl.slack_8a, || unit.to_array().to_vec());
    worst[1].offer(sl.slack_8b, || unit.to_array().to_vec());
    worst[2].offer(sl.slack_8c, || unit.to_array().to_vec());
    let acirc = s.norm_acirc2().sqrt();
    if acirc > 0.0 {
        let (lhs, rhs) = grad_kperp_bound(s, &unit);
        worst[3].offer((rhs - lhs) / acirc, || {
            let mut w = vec![s.h, s.a, s.b, s.c];
            w.extend(unit.to_array());
            w
        });
    }
}

/// Sweeps (8a)–(8c) and the `|∇K⊥| ≤ 4|Å||∇A|` bound over `samples` Gaussian
/// gradient states plus a deterministic grid `{−1, −½, 0, ½, 1}⁸` on the unit sphere.
pub fn sweep_gradient_inequalities(samples: usize, seed: u64, with_grid: bool) -> Vec<InequalityRecord> {
    let identity = || [Worst::none(), Worst::none(), Worst::none(), Worst::none()];
    let merge = |a: [Worst; 4], b: [Worst; 4]| {
        let [a0, a1, a2, a3] = a;
        let [b0, b1, b2, b3] = b;
        [a0.merge(b0), a1.merge(b1), a2.merge(b2), a3.merge(b3)]
    };
    let mut worst = par_chunks(
        seed,
        samples,
        |rng, n| {
            let mut w = identity();
            for _ in 0..n {
                let x: [f64; 8] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let s = SpecialFrameState::new(
                    rng.sample::<f64, _>(StandardNormal).abs(),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                evaluate(&GradientState::from_slice(&x), &s, &mut w);
            }
            w
        },
        identity(),
        merge,
    );
    if with_grid {
        let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let states = [
            SpecialFrameState::new(1.0, 0.3, 0.2, 0.4),
            SpecialFrameState::new(0.0, 1.0, 0.0, 1.0),
        ];
        let mut idx = [0usize; 8];
        loop {
            let x: [f64; 8] = std::array::from_fn(|i| levels[idx[i]]);
            for s in &states {
                evaluate(&GradientState::from_slice(&x), s, &mut worst);
            }
            let mut d = 0;
            while d < 8 {
                idx[d] += 1;
                if idx[d] < levels.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == 8 {
                break;
            }
        }
    }
    let names = ["8a", "8b", "8c", "grad_kperp"];
    names
        .iter()
        .zip(worst)
        .map(|(name, w)| InequalityRecord {
            inequality: name.to_string(),
            slack_min: w.slack,
            witness: w.witness,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const WITNESS: GradientState = GradientState {
        u: [0.75, 0.0, 0.25, 0.0],
        v: [0.0; 4],
    };

    #[test]
    fn norms_on_reference_states() {
        let e1 = GradientState::new([1.0, 0.0, 0.0, 0.0], [0.0; 4]);
        assert_eq!(norm_grad_a2(&e1), 1.0);
        assert_eq!(norm_grad_h2(&e1), 1.0);
        assert_eq!(norm_grad_a2(&WITNESS), 0.75);
        assert_eq!(norm_grad_h2(&WITNESS), 1.0);
        assert_eq!(norm_grad_a2(&GradientState::default()), 0.0);
        let trace_free = GradientState::new([1.0, 0.0, -1.0, 0.0], [0.0; 4]);
        assert_eq!(norm_grad_h2(&trace_free), 0.0);
    }

    #[test]
    fn full_tensor_reproduces_expansion() {
        let g = GradientState::new([0.3, -1.2, 0.8, 0.1], [-0.4, 0.9, 0.2, -0.7]);
        let full: f64 = g.full().iter().flatten().flatten().flatten().map(|x| x * x).sum();
        assert_relative_eq!(full, norm_grad_a2(&g), max_relative = 1e-15);
    }

    #[test]
    fn decomposition_edge_cases() {
        let (e, f) = decompose_ef(&WITNESS);
        assert_eq!(e, WITNESS);
        assert_eq!(f, GradientState::default());
        let trace_free = GradientState::new([1.0, 0.0, -1.0, 0.0], [0.0; 4]);
        let (e, f) = decompose_ef(&trace_free);
        assert_eq!(e, GradientState::default());
        assert_eq!(f, trace_free);
    }

    #[test]
    fn nabla_evol_examples() {
        let g = GradientState::new([0.3, -1.2, 0.8, 0.1], [0.0; 4]);
        assert_eq!(nabla_evol_kperp(&g), 0.0);
        let g = GradientState::new([1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(nabla_evol_kperp(&g), 1.0);
        assert_eq!(nabla_evol_kperp_raw(&g), 1.0);
    }

    #[test]
    fn nabla_evol_is_antisymmetric_in_normal_swap() {
        let g = GradientState::new([0.3, -1.2, 0.8, 0.1], [-0.4, 0.9, 0.2, -0.7]);
        let swapped = GradientState::new(g.v, g.u);
        assert_relative_eq!(nabla_evol_kperp(&g), -nabla_evol_kperp(&swapped), epsilon = 1e-15);
    }

    #[test]
    fn equality_witness_for_8a() {
        let s = check_gradient_inequalities(&WITNESS);
        assert_eq!(s.slack_8a, 0.0);
        let zero = check_gradient_inequalities(&GradientState::default());
        assert_eq!((zero.slack_8a, zero.slack_8b, zero.slack_8c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exact_8c_minimum_is_zero() {
        let m = min_slack_8c_exact();
        assert!(m.abs() < 1e-12, "{m}");
    }

    #[test]
    fn grad_kperp_vanishes_at_umbilic_points_and_zero_gradient() {
        let g = GradientState::new([0.3, -1.2, 0.8, 0.1], [-0.4, 0.9, 0.2, -0.7]);
        let (lhs, rhs) = grad_kperp_bound(&SpecialFrameState::new(3.0, 0.0, 0.0, 0.0), &g);
        assert_eq!((lhs, rhs), (0.0, 0.0));
        let s = SpecialFrameState::new(3.0, 0.4, -0.2, 0.9);
        assert_eq!(grad_kperp_bound(&s, &GradientState::default()), (0.0, 0.0));
    }

    #[test]
    fn small_sweep_has_nonnegative_slack() {
        for rec in sweep_gradient_inequalities(20_000, 3, false) {
            assert!(rec.slack_min >= -1e-12, "{} {}", rec.inequality, rec.slack_min);
        }
    }
}
