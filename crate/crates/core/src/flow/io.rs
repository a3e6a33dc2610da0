//! Mesh and trace file formats.
//!
//! OFF4 is OFF with four coordinates per vertex line and an `OFF4` header:
//!
//! ```text
//! OFF4
//! <vertices> <faces> <edges>
//! x1 x2 x3 x4
//! 3 i j k
//! ```
//!
//! Blank lines and text after `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::{Point, SurfaceMesh};
use super::monitors::{TraceRow, VertexFields};
use crate::error::{Error, Result};

/// Shortest round-trip decimal.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_off4(mesh: &SurfaceMesh) -> String {
    let mut s = format!("OFF4\n{} {} 0\n", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {} {}", num(v[0]), num(v[1]), num(v[2]), num(v[3]));
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn parse_off4(text: &str, path: &Path) -> Result<SurfaceMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if header != "OFF4" {
        return Err(err(ln, format!("expected OFF4 header, found {header:?}")));
    }
    let (ln, counts) = lines.next().ok_or_else(|| err(ln + 1, "missing counts line".into()))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| err(ln, format!("bad count {x:?}"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(err(ln, "counts line needs vertex and face counts".into()));
    }
    let mut vertices = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, "unexpected end of vertex list".into()))?;
        let x: Vec<f64> = l
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| err(ln, format!("bad coordinate {x:?}"))))
            .collect::<Result<_>>()?;
        if x.len() != 4 {
            return Err(err(ln, format!("expected 4 coordinates, found {}", x.len())));
        }
        vertices.push(Point::new(x[0], x[1], x[2], x[3]));
    }
    let mut triangles = Vec::with_capacity(counts[1]);
    for _ in 0..counts[1] {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, "unexpected end of face list".into()))?;
        let x: Vec<usize> = l
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| err(ln, format!("bad index {x:?}"))))
            .collect::<Result<_>>()?;
        if x.len() != 4 || x[0] != 3 {
            return Err(err(ln, "only triangles (3 i j k) are supported".into()));
        }
        triangles.push([x[1], x[2], x[3]]);
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn read_off4(path: &Path) -> Result<SurfaceMesh> {
    parse_off4(&fs::read_to_string(path)?, path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshDump {
    pub vertices: Vec<[f64; 4]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn mesh_json(mesh: &SurfaceMesh) -> Result<String> {
    let dump = MeshDump {
        vertices: mesh.vertices.iter().map(|v| [v[0], v[1], v[2], v[3]]).collect(),
        triangles: mesh.triangles.clone(),
    };
    Ok(serde_json::to_string(&dump)?)
}

pub fn mesh_from_json(text: &str) -> Result<SurfaceMesh> {
    let d: MeshDump = serde_json::from_str(text)?;
    SurfaceMesh::new(d.vertices.iter().map(|v| Point::from(*v)).collect(), d.triangles)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = TraceRow::COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let vals = r.values();
        let _ = write!(s, "{}", r.step);
        for v in &vals[1..] {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    s
}

pub fn parse_trace_csv(text: &str, path: &Path) -> Result<Vec<TraceRow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TraceRow::COLUMNS.join(",") => {}
        _ => return Err(err(1, "unexpected trace header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.parse().map_err(|_| err(i + 1, format!("bad number {x:?}"))))
                .collect::<Result<_>>()?;
            TraceRow::from_values(&v).ok_or_else(|| err(i + 1, format!("expected 15 columns, found {}", v.len())))
        })
        .collect()
}

/// Whitespace-separated columns with a `#` header, one row per sample.
pub fn trace_gnuplot(rows: &[TraceRow]) -> String {
    let mut s = format!("# {}\n", TraceRow::COLUMNS.join(" "));
    for r in rows {
        let vals: Vec<String> = r.values().iter().map(|v| num(*v)).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

pub const SNAPSHOT_COLUMNS: &str = "vertex,H,A2,Acirc2,Q,fsigma,K,Kperp";

pub fn snapshot_csv(fields: &[VertexFields]) -> String {
    let mut s = format!("{SNAPSHOT_COLUMNS}\n");
    for (i, f) in fields.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{}",
            num(f.h),
            num(f.a2),
            num(f.acirc2),
            num(f.q),
            num(f.fsigma),
            num(f.gauss_k),
            num(f.kperp)
        );
    }
    s
}

pub fn parse_snapshot_csv(text: &str, path: &Path) -> Result<Vec<VertexFields>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SNAPSHOT_COLUMNS => {}
        _ => return Err(err(1, "unexpected snapshot header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.parse().map_err(|_| err(i + 1, format!("bad number {x:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != 8 {
                return Err(err(i + 1, format!("expected 8 columns, found {}", v.len())));
            }
            Ok(VertexFields {
                h: v[1],
                a2: v[2],
                acirc2: v[3],
                q: v[4],
                fsigma: v[5],
                gauss_k: v[6],
                kperp: v[7],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::mesh::{ellipsoid_plus_bump, product_torus};
    use super::*;

    #[test]
    fn off4_round_trip_is_exact() {
        let m = ellipsoid_plus_bump(1.2, 1.0, 0.9, 0.1, 1).unwrap();
        let text = write_off4(&m);
        let back = parse_off4(&text, Path::new("m.off")).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        let back = mesh_from_json(&mesh_json(&m).unwrap()).unwrap();
        assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn off4_errors_carry_line_numbers() {
        let text = "OFF4\n# comment\n2 0 0\n1 2 3 4\n1 2 3\n";
        match parse_off4(text, Path::new("bad.off")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_off4("OFF\n", Path::new("x")), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn trace_csv_round_trip() {
        let m = product_torus(1.0, 1.0, 12, 12).unwrap();
        let mut sim = super::super::Simulation::new(
            m,
            super::super::FlowConfig { max_steps: 3, ..Default::default() },
        )
        .unwrap();
        sim.run(|_| {}).unwrap();
        let text = trace_csv(sim.trace());
        assert!(text.starts_with("step,t,dt,minH,maxA2,maxQ,maxFsigma,area,intFsigmaP,posBoundSlack,zRatioMin,poincareSlack,rescaledMaxAcirc2"));
        let back = parse_trace_csv(&text, Path::new("t.csv")).unwrap();
        assert_eq!(back.len(), sim.trace().len());
        for (a, b) in back.iter().zip(sim.trace()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
        let fields = super::super::monitors::vertex_fields(sim.geometry(), sim.config());
        let back = parse_snapshot_csv(&snapshot_csv(&fields), Path::new("s.csv")).unwrap();
        assert_eq!(back.len(), fields.len());
        assert_eq!(back[3].h.to_bits(), fields[3].h.to_bits());
    }
}
