//! Per-vertex curvature recovery.
//!
//! Two independent discretisations are computed. The flow velocity is the cotangent
//! Laplacian of the position (`Δ_g F = H`) with mixed Voronoi areas. The curvature
//! monitors come from a least-squares quadratic jet fitted to the two normal offset
//! coordinates over the 2-ring (3-ring at low valence), in a frame refined until the fitted linear terms
//! vanish.

use nalgebra::{Matrix4, SMatrix, SVector, SymmetricEigen};
use rayon::prelude::*;

use super::mesh::{Point, SurfaceMesh};
use crate::error::{Error, Result};
use crate::pointwise::{ShapeTensor, SpecialFrameState};

const FRAME_REFINEMENTS: usize = 1;

#[derive(Debug, Clone)]
pub struct VertexGeometry {
    /// Mixed Voronoi area.
    pub area: f64,
    pub tangent: [Point; 2],
    pub normal: [Point; 2],
    /// Jet-fitted second fundamental form in `(tangent, normal)`.
    pub shape: ShapeTensor,
    /// `None` where `|H|` is below the reduction tolerance.
    pub special: Option<SpecialFrameState>,
    /// Cotangent-Laplacian mean curvature vector.
    pub h_cotan: Point,
}

impl VertexGeometry {
    /// Mean curvature vector of the jet fit, `Σ_α H_α ν_α`.
    pub fn h_jet(&self) -> Point {
        let [h1, h2] = self.shape.mean_curvature();
        self.normal[0] * h1 + self.normal[1] * h2
    }
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub vertices: Vec<VertexGeometry>,
}

impl Geometry {
    pub fn max_a2(&self) -> f64 {
        self.vertices.iter().map(|v| v.shape.norm_a2()).fold(0.0, f64::max)
    }

    pub fn min_area(&self) -> f64 {
        self.vertices.iter().map(|v| v.area).fold(f64::INFINITY, f64::min)
    }
}

/// Mixed Voronoi vertex areas and cotangent mean curvature vectors.
pub fn cotan_mean_curvature(mesh: &SurfaceMesh) -> (Vec<f64>, Vec<Point>) {
    let n = mesh.vertices.len();
    let mut area = vec![0.0; n];
    let mut lap = vec![Point::zeros(); n];
    for &tri in &mesh.triangles {
        let p = tri.map(|i| mesh.vertices[i]);
        let e: [Point; 3] = std::array::from_fn(|c| p[(c + 2) % 3] - p[(c + 1) % 3]);
        let twice_area = super::mesh::wedge_norm2(&e[0], &e[1]).sqrt();
        if twice_area == 0.0 {
            continue;
        }
        // cot of the corner angle at c, from the two edges leaving it.
        let cot: [f64; 3] = std::array::from_fn(|c| {
            let u = p[(c + 1) % 3] - p[c];
            let v = p[(c + 2) % 3] - p[c];
            u.dot(&v) / twice_area
        });
        for c in 0..3 {
            let (i, j) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
            let w = 0.5 * cot[c];
            let d = mesh.vertices[j] - mesh.vertices[i];
            lap[i] += d * w;
            lap[j] -= d * w;
        }
        let tri_area = 0.5 * twice_area;
        let obtuse = (0..3).find(|&c| cot[c] < 0.0);
        for c in 0..3 {
            area[tri[c]] += match obtuse {
                Some(o) if o == c => tri_area / 2.0,
                Some(_) => tri_area / 4.0,
                None => {
                    let l_next = (p[(c + 1) % 3] - p[c]).norm_squared();
                    let l_prev = (p[(c + 2) % 3] - p[c]).norm_squared();
                    (l_next * cot[(c + 2) % 3] + l_prev * cot[(c + 1) % 3]) / 8.0
                }
            };
        }
    }
    let h = lap.iter().zip(&area).map(|(l, &a)| if a > 0.0 { l / a } else { Point::zeros() }).collect();
    (area, h)
}

/// Tangential part of `α(x̄ − x)`, where `x̄` is the 1-ring centroid and the tangent
/// plane is spanned by the top two eigenvectors of the area-weighted sum of incident
/// triangle-plane projectors. Moving by it reparametrises the surface without
/// changing its shape to first order.
pub fn tangential_relaxation(mesh: &SurfaceMesh, alpha: f64) -> Vec<Point> {
    let projectors: Vec<Matrix4<f64>> = mesh
        .triangles
        .iter()
        .map(|&[i, j, k]| {
            let u = mesh.vertices[j] - mesh.vertices[i];
            let v = mesh.vertices[k] - mesh.vertices[i];
            let e1 = u.normalize();
            let w = v - e1 * e1.dot(&v);
            let area = 0.5 * u.norm() * w.norm();
            if !(area > 0.0) {
                return Matrix4::zeros();
            }
            let e2 = w.normalize();
            (e1 * e1.transpose() + e2 * e2.transpose()) * area
        })
        .collect();
    let topo = mesh.topology();
    (0..mesh.vertices.len())
        .into_par_iter()
        .map(|vi| {
            let ring = &topo.one_ring[vi];
            if alpha == 0.0 || ring.is_empty() {
                return Point::zeros();
            }
            let x = mesh.vertices[vi];
            let centroid = ring.iter().map(|&j| mesh.vertices[j]).sum::<Point>() / ring.len() as f64;
            let d = (centroid - x) * alpha;
            let sum: Matrix4<f64> = topo.vertex_triangles[vi].iter().map(|&t| projectors[t]).sum();
            let eig = SymmetricEigen::new(sum);
            let mut order = [0, 1, 2, 3];
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            order[..2]
                .iter()
                .map(|&c| {
                    let t = eig.eigenvectors.column(c).into_owned();
                    t * t.dot(&d)
                })
                .sum()
        })
        .collect()
}

fn gram_schmidt(vs: [Point; 4]) -> [Point; 4] {
    let mut out = [Point::zeros(); 4];
    for i in 0..4 {
        let mut v = vs[i];
        for u in &out[..i] {
            v -= u * u.dot(&v);
        }
        out[i] = v.normalize();
    }
    out
}

type Frame = ([Point; 2], [Point; 2]);

struct Jet {
    /// `∂_i z_α`
    linear: [[f64; 2]; 2],
    /// `(∂₁₁, ∂₁₂, ∂₂₂) z_α`
    quadratic: [[f64; 3]; 2],
}

/// Quartic jet; only the quadratic coefficients are kept, the higher terms absorb the
/// bias a pure quadratic fit picks up from the fourth-order part of the surface.
const JET_TERMS: usize = 15;

/// Monomials `x^i y^j / (i! j!)` with `i + j ≤ 4`, ordered by total degree.
fn monomials(x: f64, y: f64) -> SVector<f64, JET_TERMS> {
    let (x2, y2) = (x * x, y * y);
    SVector::<f64, JET_TERMS>::from([
        1.0,
        x,
        y,
        0.5 * x2,
        x * y,
        0.5 * y2,
        x2 * x / 6.0,
        0.5 * x2 * y,
        0.5 * x * y2,
        y2 * y / 6.0,
        x2 * x2 / 24.0,
        x2 * x * y / 6.0,
        0.25 * x2 * y2,
        x * y2 * y / 6.0,
        y2 * y2 / 24.0,
    ])
}

fn fit_jet(offsets: &[Point], frame: &Frame, vertex: usize) -> Result<Jet> {
    let rho = offsets.iter().map(|d| d.norm()).fold(0.0, f64::max);
    if !(rho > 0.0) || offsets.len() + 1 < JET_TERMS {
        return Err(Error::DegenerateNeighborhood { vertex });
    }
    let (t, nrm) = frame;
    let mut m = SMatrix::<f64, JET_TERMS, JET_TERMS>::zeros();
    let mut rhs = [SVector::<f64, JET_TERMS>::zeros(); 2];
    // The vertex itself contributes the row (1, 0, …, 0) with zero offset.
    m[(0, 0)] = 1.0;
    for d in offsets {
        let row = monomials(t[0].dot(d) / rho, t[1].dot(d) / rho);
        m.ger(1.0, &row, &row, 1.0);
        for a in 0..2 {
            rhs[a] += row * nrm[a].dot(d);
        }
    }
    let chol = m.cholesky().ok_or(Error::DegenerateNeighborhood { vertex })?;
    let mut jet = Jet {
        linear: [[0.0; 2]; 2],
        quadratic: [[0.0; 3]; 2],
    };
    for a in 0..2 {
        let c = chol.solve(&rhs[a]);
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateNeighborhood { vertex });
        }
        jet.linear[a] = [c[1] / rho, c[2] / rho];
        jet.quadratic[a] = [c[3] / (rho * rho), c[4] / (rho * rho), c[5] / (rho * rho)];
    }
    Ok(jet)
}

fn initial_frame(offsets: &[Point], vertex: usize) -> Result<Frame> {
    let mut cov = Matrix4::<f64>::zeros();
    for d in offsets {
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if !(eig.eigenvalues[order[1]] > 1e-12 * eig.eigenvalues[order[0]]) {
        return Err(Error::DegenerateNeighborhood { vertex });
    }
    let col = |i: usize| -> Point { eig.eigenvectors.column(order[i]).into() };
    let f = gram_schmidt([col(0), col(1), col(2), col(3)]);
    Ok(([f[0], f[1]], [f[2], f[3]]))
}

fn recover_vertex(mesh: &SurfaceMesh, v: usize) -> Result<(Frame, ShapeTensor)> {
    let ring = &mesh.topology().fit_ring[v];
    if ring.len() + 1 < JET_TERMS {
        return Err(Error::DegenerateNeighborhood { vertex: v });
    }
    let p = mesh.vertices[v];
    let offsets: Vec<Point> = ring.iter().map(|&q| mesh.vertices[q] - p).collect();
    let mut frame = initial_frame(&offsets, v)?;
    let mut jet = fit_jet(&offsets, &frame, v)?;
    for _ in 0..FRAME_REFINEMENTS {
        let (t, n) = frame;
        let tilt = |i: usize| t[i] + n[0] * jet.linear[0][i] + n[1] * jet.linear[1][i];
        let f = gram_schmidt([tilt(0), tilt(1), n[0], n[1]]);
        frame = ([f[0], f[1]], [f[2], f[3]]);
        jet = fit_jet(&offsets, &frame, v)?;
    }
    let [q1, q2] = jet.quadratic;
    let shape = ShapeTensor::from_entries(q1, q2);
    Ok((frame, shape))
}

fn vertex_geometry(mesh: &SurfaceMesh, v: usize, area: f64, h_cotan: Point) -> Result<VertexGeometry> {
    let ((tangent, normal), shape) = recover_vertex(mesh, v)?;
    Ok(VertexGeometry {
        area,
        tangent,
        normal,
        special: shape.to_special_frame().ok(),
        shape,
        h_cotan,
    })
}

/// Fills all per-vertex caches.
pub fn recover_geometry(mesh: &SurfaceMesh) -> Result<Geometry> {
    let (area, h_cotan) = cotan_mean_curvature(mesh);
    let vertices = (0..mesh.vertices.len())
        .into_par_iter()
        .map(|v| vertex_geometry(mesh, v, area[v], h_cotan[v]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Geometry { vertices })
}

/// Recovers the interior vertices of a mesh with boundary; boundary slots are `None`.
pub fn recover_interior(mesh: &SurfaceMesh) -> Result<Vec<Option<VertexGeometry>>> {
    let (area, h_cotan) = cotan_mean_curvature(mesh);
    (0..mesh.vertices.len())
        .into_par_iter()
        .map(|v| {
            if mesh.topology().boundary_vertex[v] {
                Ok(None)
            } else {
                vertex_geometry(mesh, v, area[v], h_cotan[v]).map(Some)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::mesh::{icosphere, planar_patch, product_torus};
    use super::*;

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    }

    #[test]
    fn frames_are_orthonormal() {
        let m = icosphere(1.0, 2).unwrap();
        let g = recover_geometry(&m).unwrap();
        for v in &g.vertices {
            let f = [v.tangent[0], v.tangent[1], v.normal[0], v.normal[1]];
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((f[i].dot(&f[j]) - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sphere_areas_sum_to_mesh_area() {
        let m = icosphere(2.0, 3).unwrap();
        let (area, _) = cotan_mean_curvature(&m);
        let total: f64 = area.iter().sum();
        assert!((total - m.total_area()).abs() < 1e-10 * total);
    }

    #[test]
    fn torus_cotan_curvature_is_exact_for_inscribed_polygons() {
        let (r1, r2) = (1.0, 0.6);
        let m = product_torus(r1, r2, 24, 20).unwrap();
        let (_, h) = cotan_mean_curvature(&m);
        for (p, hv) in m.vertices.iter().zip(&h) {
            let want = Point::new(-p[0] / (r1 * r1), -p[1] / (r1 * r1), -p[2] / (r2 * r2), -p[3] / (r2 * r2));
            assert!((hv - want).norm() < 1e-9, "{hv:?} vs {want:?}");
        }
    }

    #[test]
    fn planar_patch_interior_is_flat() {
        let m = planar_patch(9, 0.1).unwrap();
        let g = recover_interior(&m).unwrap();
        assert_eq!(g.iter().flatten().count(), 49);
        for vg in g.iter().flatten() {
            assert!(vg.shape.norm_a2() < 1e-20);
            assert!(vg.h_cotan.norm() < 1e-10);
            assert!(vg.special.is_none());
        }
    }

    #[test]
    fn jet_and_cotan_agree_on_sphere() {
        let m = icosphere(1.0, 3).unwrap();
        let g = recover_geometry(&m).unwrap();
        let rel: Vec<f64> = g
            .vertices
            .iter()
            .map(|v| (v.h_jet() - v.h_cotan).norm() / v.h_cotan.norm())
            .collect();
        let med = median(rel);
        assert!(med < 0.02, "{med}");
    }
}
