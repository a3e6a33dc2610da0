//! Closed-form solutions used as oracles.

use super::mesh::SurfaceMesh;

/// Shrinking round 2-sphere: `r(t) = √(r₀² − 4t)`.
pub fn sphere_radius(r0: f64, t: f64) -> f64 {
    (r0 * r0 - 4.0 * t).max(0.0).sqrt()
}

/// Each circle factor of a product torus: `r(t) = √(r₀² − 2t)`.
pub fn torus_factor_radius(r0: f64, t: f64) -> f64 {
    (r0 * r0 - 2.0 * t).max(0.0).sqrt()
}

fn weighted_mean(areas: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let total: f64 = areas.iter().sum();
    areas.iter().zip(values).map(|(a, v)| a * v).sum::<f64>() / total
}

/// Area-weighted mean distance from the centroid.
pub fn mesh_sphere_radius(mesh: &SurfaceMesh, areas: &[f64]) -> f64 {
    let c = mesh.centroid();
    weighted_mean(areas, mesh.vertices.iter().map(|v| (v - c).norm()))
}

/// Area-weighted mean radii of the `(x₁, x₂)` and `(x₃, x₄)` projections.
pub fn mesh_torus_radii(mesh: &SurfaceMesh, areas: &[f64]) -> (f64, f64) {
    (
        weighted_mean(areas, mesh.vertices.iter().map(|v| v[0].hypot(v[1]))),
        weighted_mean(areas, mesh.vertices.iter().map(|v| v[2].hypot(v[3]))),
    )
}

#[cfg(test)]
mod tests {
    use super::super::geometry::cotan_mean_curvature;
    use super::super::mesh::{icosphere, product_torus};
    use super::*;

    #[test]
    fn radii_of_builders() {
        let m = icosphere(0.7, 2).unwrap();
        let (a, _) = cotan_mean_curvature(&m);
        assert!((mesh_sphere_radius(&m, &a) - 0.7).abs() < 1e-12);
        let m = product_torus(1.0, 0.4, 10, 12).unwrap();
        let (a, _) = cotan_mean_curvature(&m);
        let (r1, r2) = mesh_torus_radii(&m, &a);
        assert!((r1 - 1.0).abs() < 1e-12 && (r2 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn closed_forms() {
        assert!((sphere_radius(1.0, 0.24) - 0.2).abs() < 1e-12);
        assert!((torus_factor_radius(1.0, 0.455) - 0.3).abs() < 1e-12);
        assert_eq!(sphere_radius(1.0, 1.0), 0.0);
    }
}
