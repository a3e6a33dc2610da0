//! Subcommand implementations. Each writes its outputs into a directory it owns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::identities::{IdentityReport, Kernels, run_identities};
use super::scenario::{Scenario, SurfaceSpec};
use crate::certifier::{CertificateReport, CertifyOptions, ThresholdReport, certify_negativity, threshold_scan};
use crate::error::{Error, Result};
use crate::flow::exact::{mesh_sphere_radius, mesh_torus_radii, sphere_radius, torus_factor_radius};
use crate::flow::geometry::recover_geometry;
use crate::flow::io::{parse_snapshot_csv, snapshot_csv, trace_csv, trace_gnuplot, write_off4, read_off4};
use crate::flow::mesh::SurfaceMesh;
use crate::flow::monitors::{POINCARE_SLACK_TOL, poincare_check};
use crate::flow::rescale::{DecayFit, RescaledSnapshot, decay_exponent_fit, type_i_rescale};
use crate::flow::{Simulation, Snapshot, StopReason};

/// Process exit status for an error: 2 for usage, configuration and I/O problems,
/// 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. }
        | Error::StepTooLarge { .. }
        | Error::DegenerateMeanCurvature { .. }
        | Error::DegenerateNeighborhood { .. }
        | Error::UmbilicPoint
        | Error::EpsilonZNotPositive { .. } => 3,
        _ => 2,
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, text)
}

pub fn cmd_identities(seed: u64, count: usize, out: &Path, kernels: &Kernels) -> Result<IdentityReport> {
    let report = run_identities(seed, count, kernels);
    write_json(out, "identities.json", &report)?;
    Ok(report)
}

pub fn cmd_certify(opts: &CertifyOptions, out: &Path) -> Result<CertificateReport> {
    let report = certify_negativity(opts)?;
    write_json(out, "certificate.json", &report)?;
    write(out, "worst_samples.csv", report.worst_csv())?;
    Ok(report)
}

pub fn cmd_scan(k_low: f64, k_high: f64, tol_k: f64, base: &CertifyOptions, out: &Path) -> Result<ThresholdReport> {
    let report = threshold_scan(k_low, k_high, tol_k, base)?;
    write_json(out, "scan.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PinchingCheck {
    /// `maxQ < 0` at `t = 0`.
    pub hypothesis_holds: bool,
    pub initial_max_q: f64,
    pub initial_min_q: f64,
    /// `0.05·|minQ(0)|`
    pub band: f64,
    pub run_max_q: f64,
    /// `maxQ < band` on every trace row.
    pub preserved: bool,
}

/// Radius of the exact solution versus the mesh, on every trace row until the exact
/// radius falls below `limit_fraction·r₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RadiusCheck {
    pub kind: String,
    pub limit_fraction: f64,
    pub rows: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoincareRow {
    pub step: usize,
    pub t: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs ≤ (1 + tol)·rhs`
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowSummary {
    pub name: String,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub t_final: f64,
    pub initial_max_a2: f64,
    pub final_max_a2: f64,
    pub stop_a2: f64,
    pub gamma: f64,
    pub eps_z: f64,
    pub pos_bound_tolerance: f64,
    pub pinching: PinchingCheck,
    /// Largest step-to-step relative increase of `∫f_σ^p dμ`.
    pub int_fsigma_p_max_rel_increase: f64,
    pub radius: Option<RadiusCheck>,
    pub rescaled: Vec<RescaledSnapshot>,
    pub rescale_error: Option<String>,
    pub decay_fit: Option<DecayFit>,
    pub decay_fit_error: Option<String>,
    pub poincare: Vec<PoincareRow>,
}

/// A finished run with its summary.
pub struct FlowRun {
    pub scenario: Scenario,
    pub sim: Simulation,
    pub summary: FlowSummary,
}

enum RadiusOracle {
    Sphere { r0: f64 },
    Torus { r1: f64, r2: f64 },
}

impl RadiusOracle {
    fn for_surface(s: &SurfaceSpec) -> Option<Self> {
        match *s {
            SurfaceSpec::Icosphere { radius, .. } => Some(Self::Sphere { r0: radius }),
            SurfaceSpec::ProductTorus { r1, r2, .. } => Some(Self::Torus { r1, r2 }),
            _ => None,
        }
    }

    /// Relative error at time `t`, or `None` once past the comparison window.
    fn error(&self, mesh: &SurfaceMesh, areas: &[f64], t: f64) -> Option<f64> {
        match *self {
            Self::Sphere { r0 } => {
                let exact = sphere_radius(r0, t);
                (exact >= 0.2 * r0).then(|| (mesh_sphere_radius(mesh, areas) - exact).abs() / exact)
            }
            Self::Torus { r1, r2 } => {
                let (e1, e2) = (torus_factor_radius(r1, t), torus_factor_radius(r2, t));
                if e1 < 0.3 * r1 || e2 < 0.3 * r2 {
                    return None;
                }
                let (m1, m2) = mesh_torus_radii(mesh, areas);
                Some(((m1 - e1).abs() / e1).max((m2 - e2).abs() / e2))
            }
        }
    }

    fn describe(&self) -> (String, f64) {
        match self {
            Self::Sphere { .. } => ("sphere".into(), 0.2),
            Self::Torus { .. } => ("product_torus".into(), 0.3),
        }
    }
}

fn snapshot_mesh(template: &SurfaceMesh, s: &Snapshot) -> SurfaceMesh {
    template.with_vertices(s.vertices.clone())
}

/// Poincaré-type inequality on every snapshot for each `p` in `ps`.
pub fn poincare_rows(sim: &Simulation, template: &SurfaceMesh, ps: &[f64]) -> Result<Vec<PoincareRow>> {
    let cfg = sim.config();
    let mut rows = Vec::new();
    for s in sim.snapshots() {
        let mesh = snapshot_mesh(template, s);
        let geom = recover_geometry(&mesh)?;
        for &p in ps {
            let (lhs, rhs) = poincare_check(&mesh, &geom, p, cfg.poincare_eta, cfg.sigma, cfg.gamma(), sim.eps_z())?;
            rows.push(PoincareRow {
                step: s.step,
                t: s.t,
                p,
                lhs,
                rhs,
                holds: lhs <= (1.0 + POINCARE_SLACK_TOL) * rhs,
            });
        }
    }
    Ok(rows)
}

/// Runs a scenario to its stop condition and evaluates every monitor.
pub fn run_flow(scenario: &Scenario) -> Result<FlowRun> {
    let mesh = scenario.build_mesh()?;
    let mut sim = Simulation::new(mesh.clone(), scenario.flow.clone())?;
    let oracle = RadiusOracle::for_surface(&scenario.surface);
    let mut radius_errors = Vec::new();
    let mut seen = 0;
    loop {
        if sim.trace().len() > seen {
            seen = sim.trace().len();
            if let Some(e) = oracle.as_ref().and_then(|o| o.error(sim.mesh(), sim.vertex_areas(), sim.time())) {
                radius_errors.push(e);
            }
        }
        if sim.step()?.is_none() {
            break;
        }
    }
    let trace = sim.trace();
    let first = &sim.snapshots()[0];
    let initial_min_q = first.fields.iter().map(|f| f.q).fold(f64::INFINITY, f64::min);
    let band = 0.05 * initial_min_q.abs();
    let run_max_q = trace.iter().map(|r| r.max_q).fold(f64::NEG_INFINITY, f64::max);
    let pinching = PinchingCheck {
        hypothesis_holds: trace[0].max_q < 0.0,
        initial_max_q: trace[0].max_q,
        initial_min_q,
        band,
        run_max_q,
        preserved: trace.iter().all(|r| r.max_q < band),
    };
    let int_fsigma_p_max_rel_increase = trace
        .windows(2)
        .filter(|w| w[0].int_fsigma_p > 0.0)
        .map(|w| (w[1].int_fsigma_p - w[0].int_fsigma_p) / w[0].int_fsigma_p)
        .fold(f64::NEG_INFINITY, f64::max);
    let radius = oracle.map(|o| {
        let (kind, limit_fraction) = o.describe();
        RadiusCheck {
            kind,
            limit_fraction,
            rows: radius_errors.len(),
            max_rel_error: radius_errors.iter().copied().fold(0.0, f64::max),
        }
    });
    let gamma = sim.config().gamma();
    let (rescaled, rescale_error) = match type_i_rescale(sim.snapshots(), gamma, sim.stop_a2()) {
        Ok(r) => (r, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let (decay_fit, decay_fit_error) = match decay_exponent_fit(trace) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let poincare = if pinching.hypothesis_holds {
        poincare_rows(&sim, &mesh, &[2.0, sim.config().p])?
    } else {
        Vec::new()
    };
    let last = trace.last().expect("trace has the initial row");
    let summary = FlowSummary {
        name: scenario.name.clone(),
        stop_reason: sim.stop_reason().expect("run finished"),
        steps: sim.steps(),
        t_final: sim.time(),
        initial_max_a2: sim.initial_max_a2(),
        final_max_a2: last.max_a2,
        stop_a2: sim.stop_a2(),
        gamma,
        eps_z: sim.eps_z(),
        pos_bound_tolerance: sim.pos_bound_tolerance(),
        pinching,
        int_fsigma_p_max_rel_increase,
        radius,
        rescaled,
        rescale_error,
        decay_fit,
        decay_fit_error,
        poincare,
    };
    Ok(FlowRun {
        scenario: scenario.clone(),
        sim,
        summary,
    })
}

/// Snapshot metadata written next to the per-snapshot files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunIndex {
    pub name: String,
    pub gamma: f64,
    pub stop_a2: f64,
    pub snapshots: Vec<Snapshot>,
}

fn snapshot_stem(i: usize) -> String {
    format!("snapshot_{i:03}")
}

fn write_rescaled(dir: &Path, template: &SurfaceMesh, rescaled: &[RescaledSnapshot]) -> Result<()> {
    for (i, r) in rescaled.iter().enumerate() {
        let stem = format!("rescaled_{i:03}");
        write(dir, &format!("{stem}.off4"), write_off4(&template.with_vertices(r.vertices.clone())))?;
        let mut csv = String::from("vertex,Acirc2_over_H2\n");
        for (v, x) in r.acirc2_over_h2.iter().enumerate() {
            csv.push_str(&format!("{v},{x:?}\n"));
        }
        write(dir, &format!("{stem}.csv"), csv)?;
    }
    write_json(dir, "rescaled.json", &rescaled)?;
    Ok(())
}

/// Runs a scenario and writes trace, snapshots, rescaled snapshots and summary into
/// its output directory. Returns the run and the directory.
pub fn cmd_flow(scenario: &Scenario, out: &Path) -> Result<(FlowRun, PathBuf)> {
    let dir = scenario.output_dir(out);
    fs::create_dir_all(&dir)?;
    write(&dir, "scenario.toml", scenario.to_toml())?;
    let run = run_flow(scenario)?;
    let template = scenario.build_mesh()?;
    write(&dir, "trace.csv", trace_csv(run.sim.trace()))?;
    write(&dir, "trace.dat", trace_gnuplot(run.sim.trace()))?;
    let snap_dir = dir.join("snapshots");
    for (i, s) in run.sim.snapshots().iter().enumerate() {
        write(&snap_dir, &format!("{}.off4", snapshot_stem(i)), write_off4(&snapshot_mesh(&template, s)))?;
        write(&snap_dir, &format!("{}.csv", snapshot_stem(i)), snapshot_csv(&s.fields))?;
    }
    let index = RunIndex {
        name: scenario.name.clone(),
        gamma: run.summary.gamma,
        stop_a2: run.summary.stop_a2,
        snapshots: run.sim.snapshots().to_vec(),
    };
    write_json(&snap_dir, "index.json", &index)?;
    write_rescaled(&dir.join("rescaled"), &template, &run.summary.rescaled)?;
    if let Some(c) = &scenario.certifier {
        cmd_certify(&c.options(scenario.seed), &dir)?;
    }
    write_json(&dir, "summary.json", &run.summary)?;
    Ok((run, dir))
}

/// Rebuilds the type-I rescaling of a finished run from its snapshot files.
pub fn cmd_rescale(run_dir: &Path, out: &Path) -> Result<Vec<RescaledSnapshot>> {
    let snap_dir = run_dir.join("snapshots");
    let index_path = snap_dir.join("index.json");
    let index: RunIndex = serde_json::from_str(&fs::read_to_string(&index_path)?)?;
    let mut snapshots = Vec::with_capacity(index.snapshots.len());
    let mut template = None;
    for (i, meta) in index.snapshots.iter().enumerate() {
        let mesh = read_off4(&snap_dir.join(format!("{}.off4", snapshot_stem(i))))?;
        let csv_path = snap_dir.join(format!("{}.csv", snapshot_stem(i)));
        let fields = parse_snapshot_csv(&fs::read_to_string(&csv_path)?, &csv_path)?;
        if fields.len() != mesh.vertices.len() {
            return Err(Error::Parse {
                path: csv_path,
                line: 0,
                message: format!("{} rows for {} vertices", fields.len(), mesh.vertices.len()),
            });
        }
        snapshots.push(Snapshot {
            vertices: mesh.vertices.clone(),
            fields,
            ..meta.clone()
        });
        template.get_or_insert(mesh);
    }
    let rescaled = type_i_rescale(&snapshots, index.gamma, index.stop_a2)?;
    if let Some(t) = template {
        write_rescaled(out, &t, &rescaled)?;
    }
    Ok(rescaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowConfig;
    use std::path::PathBuf;

    fn small_sphere() -> Scenario {
        Scenario {
            name: "small".into(),
            seed: 1,
            output_dir: None,
            surface: SurfaceSpec::Icosphere { radius: 1.0, subdivisions: 2 },
            flow: FlowConfig {
                stop_factor: 100.0,
                output_every: 5,
                snapshots: 4,
                ..FlowConfig::default()
            },
            certifier: None,
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn flow_outputs_are_byte_identical_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let s = small_sphere();
        let (_, a) = cmd_flow(&Scenario { output_dir: Some(dir.path().join("a")), ..s.clone() }, dir.path()).unwrap();
        let (_, b) = cmd_flow(&Scenario { output_dir: Some(dir.path().join("b")), ..s }, dir.path()).unwrap();
        for f in ["trace.csv", "trace.dat", "snapshots/snapshot_000.csv", "snapshots/snapshot_001.off4", "summary.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn rescale_from_files_matches_in_memory() {
        let dir = tempfile::tempdir().unwrap();
        let (run, run_dir) = cmd_flow(&small_sphere(), dir.path()).unwrap();
        assert_eq!(run.summary.stop_reason, StopReason::Blowup);
        let from_files = cmd_rescale(&run_dir, &dir.path().join("re")).unwrap();
        assert_eq!(from_files.len(), run.summary.rescaled.len());
        for (x, y) in from_files.iter().zip(&run.summary.rescaled) {
            assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
            assert_eq!(x.max_pinch.to_bits(), y.max_pinch.to_bits());
        }
        assert!(dir.path().join("re/rescaled_000.off4").exists());
    }

    #[test]
    fn sphere_summary_checks() {
        let mut s = small_sphere();
        // Forward Euler drift in r² scales with dt; the coarse mesh needs a smaller cfl.
        s.flow.cfl = 0.05;
        let run = run_flow(&s).unwrap();
        let s = &run.summary;
        assert!(s.pinching.hypothesis_holds && s.pinching.preserved);
        let err = s.radius.as_ref().unwrap().max_rel_error;
        assert!(err < 0.05, "{err}");
        let ratio = run.sim.trace().iter().map(|r| r.max_pinch / r.max_h2).fold(0.0, f64::max);
        assert!(s.decay_fit.unwrap().capped, "{ratio} {:?}", s.decay_fit);
        assert!(s.poincare.iter().all(|r| r.holds));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numerical { step: 3, message: String::new() }), 3);
        assert_eq!(exit_code(&Error::StepTooLarge { halvings: 10 }), 3);
        assert_eq!(exit_code(&Error::InvalidParameter(String::new())), 2);
    }

    #[test]
    fn certify_and_scan_write_reports() {
        let dir = tempfile::tempdir().unwrap();
        let opts = CertifyOptions { grid: 64, random_samples: 1000, ..CertifyOptions::new(0.75) };
        let r = cmd_certify(&opts, dir.path()).unwrap();
        assert!(r.max_value > 0.0);
        let csv = fs::read_to_string(dir.path().join("worst_samples.csv")).unwrap();
        assert_eq!(csv.lines().count(), 101);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
        assert!(json["maxValue"].as_f64().unwrap() > 0.0);
        let scan = cmd_scan(0.70, 0.75, 1e-2, &opts, dir.path()).unwrap();
        assert!(scan.k_low <= scan.k_star && scan.k_star <= scan.k_high);
        assert!(dir.path().join("scan.json").exists());
    }
}
