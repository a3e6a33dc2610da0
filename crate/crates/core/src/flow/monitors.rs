use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{Geometry, VertexGeometry};
use super::mesh::{Point, SurfaceMesh};
use super::FlowConfig;
use crate::error::{Error, Result};
use crate::pointwise::{ShapeTensor, TOL_H};

/// Relative excess of the Poincaré left side tolerated by the trace column.
pub const POINCARE_SLACK_TOL: f64 = 0.25;

/// Per-vertex scalar fields of a recovered mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexFields {
    pub h: f64,
    pub a2: f64,
    pub acirc2: f64,
    pub kperp: f64,
    pub gauss_k: f64,
    pub q: f64,
    pub fsigma: f64,
}

impl VertexFields {
    pub fn new(shape: &ShapeTensor, cfg: &FlowConfig) -> Self {
        let h2 = shape.norm_h2();
        let a2 = shape.norm_a2();
        let kperp = shape.normal_kperp().abs();
        let gamma = cfg.gamma();
        let h = h2.sqrt();
        let numerator = shape.norm_acirc2() + 2.0 * gamma * kperp;
        Self {
            h,
            a2,
            acirc2: shape.norm_acirc2(),
            kperp,
            gauss_k: shape.gauss_k(),
            q: a2 + 2.0 * gamma * kperp - cfg.k * h2 + cfg.eps,
            fsigma: if h > TOL_H {
                numerator / h.powf(2.0 * (1.0 - cfg.sigma))
            } else {
                f64::NAN
            },
        }
    }

    /// `|Å|² + 2γ|K⊥|`
    pub fn pinch(&self, gamma: f64) -> f64 {
        self.acirc2 + 2.0 * gamma * self.kperp
    }
}

pub fn vertex_fields(geom: &Geometry, cfg: &FlowConfig) -> Vec<VertexFields> {
    geom.vertices.iter().map(|v| VertexFields::new(&v.shape, cfg)).collect()
}

/// One sample of the flow trace. The first thirteen fields are the CSV columns, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    #[serde(rename = "minH")]
    pub min_h: f64,
    #[serde(rename = "maxA2")]
    pub max_a2: f64,
    #[serde(rename = "maxQ")]
    pub max_q: f64,
    pub max_fsigma: f64,
    pub area: f64,
    #[serde(rename = "intFsigmaP")]
    pub int_fsigma_p: f64,
    pub pos_bound_slack: f64,
    pub z_ratio_min: f64,
    pub poincare_slack: f64,
    #[serde(rename = "rescaledMaxAcirc2")]
    pub rescaled_max_acirc2: f64,
    /// `max |H|²`
    #[serde(rename = "maxH2")]
    pub max_h2: f64,
    /// `max (|Å|² + 2γ|K⊥|)`
    pub max_pinch: f64,
}

impl TraceRow {
    pub const COLUMNS: [&'static str; 15] = [
        "step",
        "t",
        "dt",
        "minH",
        "maxA2",
        "maxQ",
        "maxFsigma",
        "area",
        "intFsigmaP",
        "posBoundSlack",
        "zRatioMin",
        "poincareSlack",
        "rescaledMaxAcirc2",
        "maxH2",
        "maxPinch",
    ];

    pub fn values(&self) -> [f64; 15] {
        [
            self.step as f64,
            self.t,
            self.dt,
            self.min_h,
            self.max_a2,
            self.max_q,
            self.max_fsigma,
            self.area,
            self.int_fsigma_p,
            self.pos_bound_slack,
            self.z_ratio_min,
            self.poincare_slack,
            self.rescaled_max_acirc2,
            self.max_h2,
            self.max_pinch,
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != 15 {
            return None;
        }
        Some(Self {
            step: v[0] as usize,
            t: v[1],
            dt: v[2],
            min_h: v[3],
            max_a2: v[4],
            max_q: v[5],
            max_fsigma: v[6],
            area: v[7],
            int_fsigma_p: v[8],
            pos_bound_slack: v[9],
            z_ratio_min: v[10],
            poincare_slack: v[11],
            rescaled_max_acirc2: v[12],
            max_h2: v[13],
            max_pinch: v[14],
        })
    }

    /// Names of columns holding NaN.
    pub fn nan_columns(&self) -> Vec<&'static str> {
        Self::COLUMNS
            .iter()
            .zip(self.values())
            .filter(|(_, v)| v.is_nan())
            .map(|(c, _)| *c)
            .collect()
    }
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

pub struct MonitorContext {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    /// Squared radius of the initial enclosing ball about the origin.
    pub r0_2: f64,
    pub eps_z: f64,
}

pub fn monitors(mesh: &SurfaceMesh, geom: &Geometry, cfg: &FlowConfig, ctx: &MonitorContext) -> TraceRow {
    let gamma = cfg.gamma();
    let fields = vertex_fields(geom, cfg);
    let areas: Vec<f64> = geom.vertices.iter().map(|v| v.area).collect();
    let max_h2 = max_of(fields.iter().map(|f| f.h * f.h));
    let max_pinch = max_of(fields.iter().map(|f| f.pinch(gamma)));
    let z_ratio_min = geom
        .vertices
        .iter()
        .zip(&fields)
        .filter(|(_, f)| f.a2 < 5.0 / 6.0 * f.h * f.h && f.pinch(gamma) > 1e-14 * f.a2)
        .map(|(v, f)| v.shape.simons_z() / (f.pinch(gamma) * f.h * f.h))
        .fold(f64::NAN, f64::min);
    let poincare_slack = match poincare_check(mesh, geom, cfg.p, cfg.poincare_eta, cfg.sigma, gamma, ctx.eps_z) {
        Ok((lhs, rhs)) => (1.0 + POINCARE_SLACK_TOL) * rhs - lhs,
        Err(_) => f64::NAN,
    };
    TraceRow {
        step: ctx.step,
        t: ctx.t,
        dt: ctx.dt,
        min_h: fields.iter().map(|f| f.h).fold(f64::INFINITY, f64::min),
        max_a2: max_of(fields.iter().map(|f| f.a2)),
        max_q: max_of(fields.iter().map(|f| f.q)),
        max_fsigma: max_of(fields.iter().map(|f| f.fsigma)),
        area: mesh.total_area(),
        int_fsigma_p: fields.iter().zip(&areas).map(|(f, a)| f.fsigma.powf(cfg.p) * a).sum(),
        pos_bound_slack: ctx.r0_2 - 4.0 * ctx.t - mesh.max_norm2(),
        z_ratio_min,
        poincare_slack,
        rescaled_max_acirc2: max_pinch / max_h2,
        max_h2,
        max_pinch,
    }
}

fn polar(m: Matrix2<f64>) -> Matrix2<f64> {
    let svd = m.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Frame change taking components at `q` to the frame at `p`, as `(tangent, normal)`
/// matrices for [`ShapeTensor::transformed`].
fn alignment(p: &VertexGeometry, q: &VertexGeometry) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let overlap = |a: &[Point; 2], b: &[Point; 2]| Matrix2::from_fn(|k, i| b[k].dot(&a[i]));
    // Row k of the polar factor expresses the k-th vector at q in the basis at p; its
    // transpose re-expresses the basis at p through the basis at q.
    let t = polar(overlap(&p.tangent, &q.tangent)).transpose();
    let n = polar(overlap(&p.normal, &q.normal)).transpose();
    let arr = |m: Matrix2<f64>| [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
    (arr(t), arr(n))
}

/// Least-squares tangential gradient of per-neighbour differences `d_q ≈ g·x_q`.
fn ls_gradient<const N: usize>(coords: &[Vector2<f64>], diffs: &[[f64; N]]) -> Option<[Vector2<f64>; N]> {
    let mut m = Matrix2::zeros();
    let mut rhs = [Vector2::zeros(); N];
    for (x, d) in coords.iter().zip(diffs) {
        m += x * x.transpose();
        for c in 0..N {
            rhs[c] += x * d[c];
        }
    }
    let inv = m.try_inverse()?;
    Some(rhs.map(|r| inv * r))
}

fn tangent_coords(mesh: &SurfaceMesh, geom: &Geometry, v: usize) -> Vec<Vector2<f64>> {
    let p = &geom.vertices[v];
    mesh.topology().one_ring[v]
        .iter()
        .map(|&q| {
            let d = mesh.vertices[q] - mesh.vertices[v];
            Vector2::new(p.tangent[0].dot(&d), p.tangent[1].dot(&d))
        })
        .collect()
}

fn flatten(s: &ShapeTensor) -> [f64; 8] {
    let c = s.components();
    [
        c[0][0][0], c[0][0][1], c[0][1][0], c[0][1][1], c[1][0][0], c[1][0][1], c[1][1][0], c[1][1][1],
    ]
}

/// Per-vertex `|∇A|²` from 1-ring differences of frame-aligned shape tensors.
pub fn grad_a2(mesh: &SurfaceMesh, geom: &Geometry) -> Vec<f64> {
    (0..mesh.vertices.len())
        .into_par_iter()
        .map(|v| {
            let p = &geom.vertices[v];
            let base = flatten(&p.shape);
            let diffs: Vec<[f64; 8]> = mesh.topology().one_ring[v]
                .iter()
                .map(|&q| {
                    let qg = &geom.vertices[q];
                    let (t, n) = alignment(p, qg);
                    let moved = flatten(&qg.shape.transformed(t, n));
                    std::array::from_fn(|c| moved[c] - base[c])
                })
                .collect();
            match ls_gradient(&tangent_coords(mesh, geom, v), &diffs) {
                Some(g) => g.iter().map(|x| x.norm_squared()).sum(),
                None => f64::NAN,
            }
        })
        .collect()
}

/// Per-vertex `|∇f|` for a vertex scalar field.
pub fn grad_norm(mesh: &SurfaceMesh, geom: &Geometry, f: &[f64]) -> Vec<f64> {
    (0..mesh.vertices.len())
        .map(|v| {
            let diffs: Vec<[f64; 1]> = mesh.topology().one_ring[v].iter().map(|&q| [f[q] - f[v]]).collect();
            match ls_gradient(&tangent_coords(mesh, geom, v), &diffs) {
                Some([g]) => g.norm(),
                None => f64::NAN,
            }
        })
        .collect()
}

/// Both sides of the weighted Poincaré-type inequality
/// `∫f^p|H|² ≤ ((4pη + 10)/ε_Z)∫f^{p−1}|∇A|²/|H|^{2(1−σ)} + (3(p−1)/(ε_Z η))∫f^{p−2}|∇f|²`.
pub fn poincare_check(
    mesh: &SurfaceMesh,
    geom: &Geometry,
    p: f64,
    eta: f64,
    sigma: f64,
    gamma: f64,
    eps_z: f64,
) -> Result<(f64, f64)> {
    if !(eps_z > 0.0) {
        return Err(Error::EpsilonZNotPositive { eps_z });
    }
    if !(p >= 2.0 && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("need p ≥ 2 and η > 0, got ({p}, {eta})")));
    }
    let h: Vec<f64> = geom.vertices.iter().map(|v| v.shape.norm_h2().sqrt()).collect();
    let min_h = h.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_h > TOL_H) {
        return Err(Error::DegenerateMeanCurvature { norm_h: min_h });
    }
    let f: Vec<f64> = geom
        .vertices
        .iter()
        .zip(&h)
        .map(|(v, &hv)| {
            let n = v.shape.norm_acirc2() + 2.0 * gamma * v.shape.normal_kperp().abs();
            n / hv.powf(2.0 * (1.0 - sigma))
        })
        .collect();
    let ga2 = grad_a2(mesh, geom);
    let gf = grad_norm(mesh, geom, &f);
    let (mut lhs, mut i1, mut i2) = (0.0, 0.0, 0.0);
    for v in 0..f.len() {
        let a = geom.vertices[v].area;
        lhs += f[v].powf(p) * h[v] * h[v] * a;
        i1 += f[v].powf(p - 1.0) * ga2[v] / h[v].powf(2.0 * (1.0 - sigma)) * a;
        if gf[v] > 0.0 {
            i2 += f[v].powf(p - 2.0) * gf[v] * gf[v] * a;
        }
    }
    let rhs = (4.0 * p * eta + 10.0) / eps_z * i1 + 3.0 * (p - 1.0) / (eps_z * eta) * i2;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::super::geometry::recover_geometry;
    use super::super::mesh::{ellipsoid_plus_bump, icosphere, product_torus};
    use super::*;

    #[test]
    fn sphere_monitors() {
        let m = icosphere(1.0, 3).unwrap();
        let g = recover_geometry(&m).unwrap();
        let cfg = FlowConfig::default();
        let ctx = MonitorContext { step: 0, t: 0.0, dt: 0.0, r0_2: m.max_norm2(), eps_z: 0.3 };
        let row = monitors(&m, &g, &cfg, &ctx);
        assert!((row.max_q + 0.9).abs() < 0.01, "{}", row.max_q);
        assert_eq!(row.pos_bound_slack, 0.0);
        assert!(row.rescaled_max_acirc2 < 1e-6);
        let (lhs, rhs) = poincare_check(&m, &g, 10.0, 1.0, 0.05, cfg.gamma(), 0.3).unwrap();
        assert!(lhs < 1e-30 && rhs < 1e-12);
    }

    #[test]
    fn torus_violates_pinching() {
        let m = product_torus(1.0, 1.0, 48, 48).unwrap();
        let g = recover_geometry(&m).unwrap();
        let cfg = FlowConfig::default();
        let ctx = MonitorContext { step: 0, t: 0.0, dt: 0.0, r0_2: 2.0, eps_z: 0.3 };
        let row = monitors(&m, &g, &cfg, &ctx);
        assert!((row.max_q - (1.0 - cfg.k) * 2.0).abs() < 0.02, "{}", row.max_q);
    }

    #[test]
    fn grad_a2_vanishes_on_sphere_and_not_on_ellipsoid() {
        let m = icosphere(1.0, 3).unwrap();
        let g = recover_geometry(&m).unwrap();
        let sphere = grad_a2(&m, &g).iter().cloned().fold(0.0, f64::max);
        let m = ellipsoid_plus_bump(1.2, 1.0, 0.9, 0.1, 3).unwrap();
        let g = recover_geometry(&m).unwrap();
        let ellipsoid = grad_a2(&m, &g).iter().cloned().fold(0.0, f64::max);
        assert!(sphere < 1e-3 && ellipsoid > 1e3 * sphere, "{sphere} {ellipsoid}");
    }

    #[test]
    fn poincare_rhs_is_affine_in_p_coefficient() {
        let m = ellipsoid_plus_bump(1.2, 1.0, 0.9, 0.1, 2).unwrap();
        let g = recover_geometry(&m).unwrap();
        let gamma = 1.0 / 30.0;
        assert!(matches!(
            poincare_check(&m, &g, 2.0, 1.0, 0.05, gamma, 0.0),
            Err(Error::EpsilonZNotPositive { .. })
        ));
        let (lhs, rhs) = poincare_check(&m, &g, 2.0, 1.0, 0.05, gamma, 0.3).unwrap();
        assert!(lhs <= rhs);
    }
}
