use std::collections::HashMap;

use nalgebra::Vector4;

use crate::error::{Error, Result};

pub type Point = Vector4<f64>;

pub const FIT_RING_MIN: usize = 18;

#[derive(Debug, Clone)]
pub struct Topology {
    /// Unique undirected edges with `e[0] < e[1]`.
    pub edges: Vec<[usize; 2]>,
    /// Triangles incident to each edge.
    pub edge_triangles: Vec<Vec<usize>>,
    /// Sorted 1-ring neighbour indices.
    pub one_ring: Vec<Vec<usize>>,
    /// Sorted neighbours at combinatorial distance 1 or 2.
    pub two_ring: Vec<Vec<usize>>,
    /// Jet-fit neighbourhood: the 2-ring, widened to the 3-ring where the 2-ring has
    /// fewer than [`FIT_RING_MIN`] vertices.
    pub fit_ring: Vec<Vec<usize>>,
    pub vertex_triangles: Vec<Vec<usize>>,
    pub boundary_vertex: Vec<bool>,
}

/// Triangle mesh immersed in R⁴.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    topology: Topology,
}

impl SurfaceMesh {
    /// Builds the mesh and its adjacency. Boundary edges are allowed; edges with more
    /// than two incident triangles are not.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::NonManifoldMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::NonManifoldMesh(format!("triangle {t} is degenerate")));
            }
        }
        let topology = build_topology(n, &triangles)?;
        Ok(Self { vertices, triangles, topology })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn with_vertices(&self, vertices: Vec<Point>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            triangles: self.triangles.clone(),
            topology: self.topology.clone(),
        }
    }

    pub fn is_closed(&self) -> bool {
        !self.topology.boundary_vertex.iter().any(|&b| b)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.topology.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        let (p, q, r) = (self.vertices[i], self.vertices[j], self.vertices[k]);
        0.5 * wedge_norm2(&(q - p), &(r - p)).sqrt()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut best = f64::INFINITY;
        for &[i, j, k] in &self.triangles {
            let p = [self.vertices[i], self.vertices[j], self.vertices[k]];
            for c in 0..3 {
                let u = p[(c + 1) % 3] - p[c];
                let v = p[(c + 2) % 3] - p[c];
                best = best.min(angle(&u, &v));
            }
        }
        best
    }

    pub fn centroid(&self) -> Point {
        self.vertices.iter().sum::<Point>() / self.vertices.len() as f64
    }

    pub fn max_norm2(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm_squared()).fold(0.0, f64::max)
    }
}

/// `|u ∧ v|² = |u|²|v|² − (u·v)²`.
pub fn wedge_norm2(u: &Point, v: &Point) -> f64 {
    (u.norm_squared() * v.norm_squared() - u.dot(v).powi(2)).max(0.0)
}

/// `⟨a ∧ b, c ∧ d⟩ = (a·c)(b·d) − (a·d)(b·c)`.
pub fn wedge_inner(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    a.dot(c) * b.dot(d) - a.dot(d) * b.dot(c)
}

pub fn angle(u: &Point, v: &Point) -> f64 {
    wedge_norm2(u, v).sqrt().atan2(u.dot(v))
}

fn build_topology(n: usize, triangles: &[[usize; 3]]) -> Result<Topology> {
    let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
    let mut vertex_triangles = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for c in 0..3 {
            vertex_triangles[tri[c]].push(t);
            let (i, j) = (tri[c], tri[(c + 1) % 3]);
            let key = [i.min(j), i.max(j)];
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push(key);
                edge_triangles.push(Vec::new());
                edges.len() - 1
            });
            edge_triangles[e].push(t);
        }
    }
    let mut boundary_vertex = vec![false; n];
    for (e, tris) in edge_triangles.iter().enumerate() {
        match tris.len() {
            1 => {
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
            2 => {}
            m => {
                return Err(Error::NonManifoldMesh(format!(
                    "edge ({}, {}) has {m} incident triangles",
                    edges[e][0], edges[e][1]
                )))
            }
        }
    }
    let mut one_ring = vec![Vec::new(); n];
    for &[i, j] in &edges {
        one_ring[i].push(j);
        one_ring[j].push(i);
    }
    for ring in &mut one_ring {
        ring.sort_unstable();
    }
    let widen = |v: usize, ring: &[usize]| {
        let mut r: Vec<usize> = ring
            .iter()
            .flat_map(|&w| one_ring[w].iter().copied().chain(std::iter::once(w)))
            .filter(|&w| w != v)
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let two_ring: Vec<Vec<usize>> = (0..n).map(|v| widen(v, &one_ring[v])).collect();
    let fit_ring = (0..n)
        .map(|v| {
            if two_ring[v].len() < FIT_RING_MIN {
                widen(v, &two_ring[v])
            } else {
                two_ring[v].clone()
            }
        })
        .collect();
    Ok(Topology {
        edges,
        edge_triangles,
        one_ring,
        two_ring,
        fit_ring,
        vertex_triangles,
        boundary_vertex,
    })
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

fn normalize3(p: [f64; 3]) -> [f64; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

/// Unit icosphere in R³ after `subdivisions` rounds of 4-to-1 midpoint splitting.
pub fn unit_icosphere(subdivisions: u32) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let (v, mut faces) = icosahedron();
    let mut verts: Vec<[f64; 3]> = v.into_iter().map(normalize3).collect();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
        let mut mid = |i: usize, j: usize, verts: &mut Vec<[f64; 3]>| {
            *midpoint.entry([i.min(j), i.max(j)]).or_insert_with(|| {
                let (a, b) = (verts[i], verts[j]);
                verts.push(normalize3([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Round sphere of radius `r` in `R³ × {0}`.
pub fn icosphere(r: f64, subdivisions: u32) -> Result<SurfaceMesh> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("sphere radius {r} must be positive")));
    }
    let (v, f) = unit_icosphere(subdivisions);
    let verts = v.iter().map(|p| Point::new(r * p[0], r * p[1], r * p[2], 0.0)).collect();
    SurfaceMesh::new(verts, f)
}

/// Ellipsoid with semi-axes `(a1, a2, a3)` lifted by the fourth coordinate
/// `w = eps4·x₁x₂` of the unit-sphere parameter point.
pub fn ellipsoid_plus_bump(a1: f64, a2: f64, a3: f64, eps4: f64, subdivisions: u32) -> Result<SurfaceMesh> {
    if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0) {
        return Err(Error::InvalidParameter("ellipsoid semi-axes must be positive".into()));
    }
    let (v, f) = unit_icosphere(subdivisions);
    let verts = v
        .iter()
        .map(|p| Point::new(a1 * p[0], a2 * p[1], a3 * p[2], eps4 * p[0] * p[1]))
        .collect();
    SurfaceMesh::new(verts, f)
}

/// `S¹(r1) × S¹(r2) ⊂ R² × R²` on an `n1 × n2` grid, each quad split along one diagonal.
pub fn product_torus(r1: f64, r2: f64, n1: usize, n2: usize) -> Result<SurfaceMesh> {
    if !(r1 > 0.0 && r2 > 0.0) || n1 < 3 || n2 < 3 {
        return Err(Error::InvalidParameter(format!(
            "torus needs positive radii and at least 3 segments per factor, got ({r1}, {r2}, {n1}, {n2})"
        )));
    }
    let tau = std::f64::consts::TAU;
    let mut verts = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        let th = tau * i as f64 / n1 as f64;
        for j in 0..n2 {
            let ph = tau * j as f64 / n2 as f64;
            verts.push(Point::new(r1 * th.cos(), r1 * th.sin(), r2 * ph.cos(), r2 * ph.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % n1) * n2 + (j % n2);
    let mut tris = Vec::with_capacity(2 * n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SurfaceMesh::new(verts, tris)
}

/// Flat `n × n` grid of spacing `h` in the `x₁x₂`-plane, centred at the origin.
pub fn planar_patch(n: usize, h: f64) -> Result<SurfaceMesh> {
    if n < 2 {
        return Err(Error::InvalidParameter("planar patch needs at least 2 points per side".into()));
    }
    let off = 0.5 * (n - 1) as f64 * h;
    let mut verts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            verts.push(Point::new(i as f64 * h - off, j as f64 * h - off, 0.0, 0.0));
        }
    }
    let mut tris = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let a = i * n + j;
            tris.push([a, a + n, a + n + 1]);
            tris.push([a, a + n + 1, a + 1]);
        }
    }
    SurfaceMesh::new(verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_topology() {
        for s in 0..4 {
            let m = icosphere(1.0, s).unwrap();
            assert_eq!(m.vertices.len(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_closed());
        }
    }

    #[test]
    fn torus_topology_and_placement() {
        let m = product_torus(1.0, 0.5, 8, 6).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.is_closed());
        for v in &m.vertices {
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-15);
            assert!(((v[2] * v[2] + v[3] * v[3]).sqrt() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn patch_has_boundary() {
        let m = planar_patch(5, 0.1).unwrap();
        assert!(!m.is_closed());
        assert_eq!(m.euler_characteristic(), 1);
        assert!((m.total_area() - 0.16).abs() < 1e-12);
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let v = vec![Point::zeros(), Point::x(), Point::y(), Point::z(), Point::w()];
        let err = SurfaceMesh::new(v, vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, Error::NonManifoldMesh(_)));
    }

    #[test]
    fn wedge_identities() {
        let a = Point::new(1.0, 2.0, 0.0, -1.0);
        let b = Point::new(0.0, 1.0, 3.0, 0.5);
        assert!((wedge_inner(&a, &b, &a, &b) - wedge_norm2(&a, &b)).abs() < 1e-12);
        assert!((wedge_inner(&a, &b, &b, &a) + wedge_norm2(&a, &b)).abs() < 1e-12);
    }
}
