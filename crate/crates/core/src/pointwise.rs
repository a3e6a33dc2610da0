//! Pointwise algebra of the second fundamental form of a surface in R⁴.
//!
//! A surface of codimension two carries, at every point, two symmetric 2×2
//! matrices `A₁`, `A₂` (one per normal direction). [`ShapeTensor`] stores them in
//! an arbitrary orthonormal frame; [`SpecialFrameState`] is the reduced form
//! obtained by taking `ν₁ = H/|H|` and diagonalising `A₁`:
//!
//! ```text
//! A₁ = diag(h/2 + a, h/2 − a),    A₂ = [[b, c], [c, −b]]
//! ```
//!
//! Every scalar invariant is available through two independent routes: tensor
//! sums over an arbitrary frame ([`ShapeTensor`] methods) and closed forms in the
//! reduced variables ([`SpecialFrameState`] methods). The closed forms are the
//! production path; the tensor sums are kept as cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |H| the special-frame reduction refuses.
pub const TOL_H: f64 = 1e-12;

/// Relative threshold (in units of |A| + |H|) under which `A₁` is treated as umbilic.
pub const TOL_FRAME_REL: f64 = 1e-9;

type Mat2 = [[f64; 2]; 2];

/// Second fundamental form `h_{ijα}` in an arbitrary orthonormal frame, stored as
/// `components[α][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeTensor {
    components: [Mat2; 2],
}

impl ShapeTensor {
    /// Builds a tensor from the two normal components; both must be symmetric.
    pub fn new(a1: Mat2, a2: Mat2) -> Result<Self> {
        for (normal, m) in [a1, a2].iter().enumerate() {
            let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if (m[0][1] - m[1][0]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::AsymmetricTensor { normal });
            }
        }
        Ok(Self {
            components: [a1, a2],
        })
    }

    /// Builds a tensor from `(h11, h12, h22)` per normal direction.
    pub fn from_entries(first: [f64; 3], second: [f64; 3]) -> Self {
        let m = |e: [f64; 3]| [[e[0], e[1]], [e[1], e[2]]];
        Self {
            components: [m(first), m(second)],
        }
    }

    pub fn components(&self) -> &[Mat2; 2] {
        &self.components
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, alpha: usize) -> f64 {
        self.components[alpha][i][j]
    }

    /// `H_α = Σ_i h_{iiα}`.
    pub fn mean_curvature(&self) -> [f64; 2] {
        let [a1, a2] = &self.components;
        [a1[0][0] + a1[1][1], a2[0][0] + a2[1][1]]
    }

    pub fn norm_h2(&self) -> f64 {
        let [h1, h2] = self.mean_curvature();
        h1 * h1 + h2 * h2
    }

    /// Trace-free part `Å_{ijα} = h_{ijα} − (H_α/2) δ_{ij}`.
    pub fn traceless(&self) -> Self {
        let hm = self.mean_curvature();
        let mut out = self.components;
        for (alpha, m) in out.iter_mut().enumerate() {
            m[0][0] -= hm[alpha] / 2.0;
            m[1][1] -= hm[alpha] / 2.0;
        }
        Self { components: out }
    }

    /// Re-expresses the tensor in the frame `e'_i = Σ_k T_ik e_k`,
    /// `ν'_α = Σ_β N_αβ ν_β`. Both matrices must be orthogonal.
    pub fn transformed(&self, tangent: Mat2, normal: Mat2) -> Self {
        let mut out = [[[0.0; 2]; 2]; 2];
        for (alpha, out_alpha) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for beta in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                s += normal[alpha][beta]
                                    * tangent[i][k]
                                    * tangent[j][l]
                                    * self.components[beta][k][l];
                            }
                        }
                    }
                    out_alpha[i][j] = s;
                }
            }
        }
        Self { components: out }
    }

    pub fn norm_a2(&self) -> f64 {
        self.components.iter().flatten().flatten().map(|x| x * x).sum()
    }

    pub fn norm_acirc2(&self) -> f64 {
        self.traceless().norm_a2()
    }

    /// Gauss equation in flat ambient space: `K = Σ_α det A_α`.
    pub fn gauss_k(&self) -> f64 {
        self.components
            .iter()
            .map(|m| m[0][0] * m[1][1] - m[0][1] * m[1][0])
            .sum()
    }

    /// `K⊥ = Σ_p (h_{1p1} h_{2p2} − h_{2p1} h_{1p2})`; the sign depends on orientation.
    pub fn normal_kperp(&self) -> f64 {
        let [a1, a2] = &self.components;
        (0..2).map(|p| a1[0][p] * a2[1][p] - a1[1][p] * a2[0][p]).sum()
    }

    /// `|Rm⊥|² = Σ_{ijαβ} (Σ_p h_{ipα} h_{jpβ} − h_{jpα} h_{ipβ})²`.
    pub fn norm_rm_perp2(&self) -> f64 {
        let h = &self.components;
        let mut total = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for alpha in 0..2 {
                    for beta in 0..2 {
                        let r: f64 = (0..2)
                            .map(|p| h[alpha][i][p] * h[beta][j][p] - h[alpha][j][p] * h[beta][i][p])
                            .sum();
                        total += r * r;
                    }
                }
            }
        }
        total
    }

    fn normal_gram(&self) -> Mat2 {
        let h = &self.components;
        let mut g = [[0.0; 2]; 2];
        for (alpha, row) in g.iter_mut().enumerate() {
            for (beta, entry) in row.iter_mut().enumerate() {
                *entry = (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| h[alpha][i][j] * h[beta][i][j])
                    .sum();
            }
        }
        g
    }

    /// `R₁ = Σ_{αβ} (Σ_{ij} h_{ijα} h_{ijβ})² + |Rm⊥|²`.
    pub fn r1(&self) -> f64 {
        let g = self.normal_gram();
        g.iter().flatten().map(|x| x * x).sum::<f64>() + self.norm_rm_perp2()
    }

    /// `R₂ = Σ_{ij} (Σ_α H_α h_{ijα})²`.
    pub fn r2(&self) -> f64 {
        let hm = self.mean_curvature();
        let mut total = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|a| hm[a] * self.components[a][i][j]).sum();
                total += s * s;
            }
        }
        total
    }

    /// Reaction term of the normal curvature, `K⊥(|A|² + 2|Å|²)`.
    pub fn r3(&self) -> f64 {
        self.normal_kperp() * (self.norm_a2() + 2.0 * self.norm_acirc2())
    }

    /// Nonlinearity of the contracted Simons identity by direct tensor sums:
    /// `Σ H_α h_{ipα} h_{ijβ} h_{pjβ} − Σ_{αβ} (Σ h_{ijα} h_{ijβ})² − |Rm⊥|²`.
    pub fn simons_z(&self) -> f64 {
        let h = &self.components;
        let hm = self.mean_curvature();
        let mut cubic = 0.0;
        for alpha in 0..2 {
            for beta in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        for p in 0..2 {
                            cubic += hm[alpha] * h[alpha][i][p] * h[beta][i][j] * h[beta][p][j];
                        }
                    }
                }
            }
        }
        let g = self.normal_gram();
        let quartic: f64 = g.iter().flatten().map(|x| x * x).sum();
        cubic - quartic - self.norm_rm_perp2()
    }

    /// All scalar invariants computed by tensor sums in the stored frame.
    pub fn scalars(&self) -> CurvatureScalars {
        let kperp = self.normal_kperp();
        CurvatureScalars {
            norm_a2: self.norm_a2(),
            norm_acirc2: self.norm_acirc2(),
            gauss_k: self.gauss_k(),
            normal_kperp: kperp,
            norm_rm_perp2: self.norm_rm_perp2(),
            r1: self.r1(),
            r2: self.r2(),
            r3: self.r3(),
        }
    }

    /// Reduces to the special orthonormal frame.
    ///
    /// Rotates the normal frame so that `ν₁ = H/|H|`, rotates the tangent frame to
    /// diagonalise `A₁` with the larger eigenvalue first, and flips `ν₂` so that
    /// `c ≥ 0`. When `A₁` is umbilic to within [`TOL_FRAME_REL`] the tangent frame
    /// diagonalises `A₂` instead and `c = 0`.
    pub fn to_special_frame(&self) -> Result<SpecialFrameState> {
        let [h1, h2] = self.mean_curvature();
        let norm_h = h1.hypot(h2);
        if !(norm_h > TOL_H) {
            return Err(Error::DegenerateMeanCurvature { norm_h });
        }
        let (n1, n2) = (h1 / norm_h, h2 / norm_h);
        let [m1, m2] = &self.components;
        let mut first = [[0.0; 2]; 2];
        let mut second = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                first[i][j] = n1 * m1[i][j] + n2 * m2[i][j];
                second[i][j] = -n2 * m1[i][j] + n1 * m2[i][j];
            }
        }
        // Traceless parts written as [[x, y], [y, −x]].
        let (x1, y1) = ((first[0][0] - first[1][1]) / 2.0, (first[0][1] + first[1][0]) / 2.0);
        let (x2, y2) = ((second[0][0] - second[1][1]) / 2.0, (second[0][1] + second[1][0]) / 2.0);
        let a = x1.hypot(y1);

        let tol_frame = TOL_FRAME_REL * (self.norm_a2().sqrt() + norm_h);
        let (b, c) = if a >= tol_frame {
            // Rotating the tangent frame by θ turns (x, y) by −2θ; choose 2θ = atan2(y1, x1).
            let (sin2, cos2) = (y1 / a, x1 / a);
            let b = x2 * cos2 + y2 * sin2;
            let c = -x2 * sin2 + y2 * cos2;
            if c < 0.0 {
                (-b, -c)
            } else {
                (b, c)
            }
        } else {
            (x2.hypot(y2), 0.0)
        };
        Ok(SpecialFrameState { h: norm_h, a, b, c })
    }
}

/// Second fundamental form in the special orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialFrameState {
    /// |H|
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SpecialFrameState {
    pub fn new(h: f64, a: f64, b: f64, c: f64) -> Self {
        Self { h, a, b, c }
    }

    /// Applies the sign convention `a ≥ 0`, `c ≥ 0` (tangent swap and `ν₂` flip).
    pub fn canonical(self) -> Self {
        let Self { h, mut a, mut b, mut c } = self;
        if a < 0.0 {
            a = -a;
            b = -b;
        }
        if c < 0.0 {
            b = -b;
            c = -c;
        }
        Self { h: h.abs(), a, b, c }
    }

    pub fn scaled(self, lambda: f64) -> Self {
        Self {
            h: lambda * self.h,
            a: lambda * self.a,
            b: lambda * self.b,
            c: lambda * self.c,
        }
    }

    /// The tensor this state represents, written in the special frame itself.
    pub fn lift(&self) -> ShapeTensor {
        let Self { h, a, b, c } = *self;
        ShapeTensor::from_entries([h / 2.0 + a, 0.0, h / 2.0 - a], [b, c, -b])
    }

    pub fn norm_a2(&self) -> f64 {
        self.h * self.h / 2.0 + self.norm_acirc2()
    }

    pub fn norm_acirc2(&self) -> f64 {
        2.0 * (self.a * self.a + self.b * self.b + self.c * self.c)
    }

    pub fn gauss_k(&self) -> f64 {
        self.h * self.h / 4.0 - self.a * self.a - self.b * self.b - self.c * self.c
    }

    pub fn normal_kperp(&self) -> f64 {
        2.0 * self.a * self.c
    }

    pub fn scalars(&self) -> CurvatureScalars {
        let Self { h, a, b, c } = *self;
        let h2 = h * h;
        let norm_a2 = self.norm_a2();
        let norm_acirc2 = self.norm_acirc2();
        let kperp = self.normal_kperp();
        let c11 = h2 / 2.0 + 2.0 * a * a;
        let c12 = 2.0 * a * b;
        let c22 = 2.0 * b * b + 2.0 * c * c;
        let rm = 16.0 * a * a * c * c;
        CurvatureScalars {
            norm_a2,
            norm_acirc2,
            gauss_k: self.gauss_k(),
            normal_kperp: kperp,
            norm_rm_perp2: rm,
            r1: c11 * c11 + 2.0 * c12 * c12 + c22 * c22 + rm,
            r2: h2 * c11,
            r3: kperp * (norm_a2 + 2.0 * norm_acirc2),
        }
    }

    /// Closed form of the Simons nonlinearity, `Z = 2K|Å|² − 2(K⊥)²`.
    pub fn simons_z(&self) -> f64 {
        let kperp = self.normal_kperp();
        2.0 * self.gauss_k() * self.norm_acirc2() - 2.0 * kperp * kperp
    }

    /// Lower bound `2|Å|²(K − |Å|²/4)` obtained from `|K⊥| ≤ |Å|²/2`.
    pub fn simons_z_simple_bound(&self) -> f64 {
        let acirc2 = self.norm_acirc2();
        2.0 * acirc2 * (self.gauss_k() - acirc2 / 4.0)
    }

    /// Pinching quantity `Q = |A|² + 2γ|K⊥| − k|H|² + ε`.
    pub fn pinch_q(&self, k: f64, gamma: f64, eps: f64) -> f64 {
        self.norm_a2() + 2.0 * gamma * self.normal_kperp().abs() - k * self.h * self.h + eps
    }

    /// `f_σ = (|Å|² + 2γ|K⊥|) / |H|^{2(1−σ)}`.
    pub fn f_sigma(&self, sigma: f64, gamma: f64) -> Result<f64> {
        if !(self.h > TOL_H) {
            return Err(Error::DegenerateMeanCurvature { norm_h: self.h });
        }
        let num = self.norm_acirc2() + 2.0 * gamma * self.normal_kperp().abs();
        Ok(num / self.h.powf(2.0 * (1.0 - sigma)))
    }

    /// Pointwise ε_Z certificate `Z / ((|Å|² + 2γ|K⊥|)|H|²)`.
    pub fn z_lower_bound_ratio(&self, gamma: f64) -> Result<f64> {
        if !(self.h > TOL_H) {
            return Err(Error::DegenerateMeanCurvature { norm_h: self.h });
        }
        let pinch = self.norm_acirc2() + 2.0 * gamma * self.normal_kperp().abs();
        let scale = self.h * self.h;
        if !(pinch > 1e-300 && pinch > f64::EPSILON * f64::EPSILON * scale) {
            return Err(Error::UmbilicPoint);
        }
        Ok(self.simons_z() / (pinch * scale))
    }

    /// JSON-ready record of the state and all its scalars.
    pub fn dump(&self) -> PointDump {
        PointDump {
            h: self.h,
            a: self.a,
            b: self.b,
            c: self.c,
            scalars: self.scalars(),
            simons_z: self.simons_z(),
        }
    }
}

/// Frame-invariant (up to the sign of `K⊥`) scalars of the second fundamental form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvatureScalars {
    pub norm_a2: f64,
    pub norm_acirc2: f64,
    pub gauss_k: f64,
    pub normal_kperp: f64,
    pub norm_rm_perp2: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointDump {
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(flatten)]
    pub scalars: CurvatureScalars,
    #[serde(rename = "simonsZ")]
    pub simons_z: f64,
}

/// Rotation (det = +1) of the plane by `theta`, as a frame-change matrix.
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

/// Reflection swapping orientation of the second basis vector.
pub fn reflection() -> Mat2 {
    [[1.0, 0.0], [0.0, -1.0]]
}
