//! Explicit discrete mean curvature flow of closed triangle meshes in R⁴.

pub mod exact;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod monitors;
pub mod rescale;

use serde::{Deserialize, Serialize};

use crate::certifier::{default_gamma, epsilon_z_scan};
use crate::error::{Error, Result};
use geometry::{cotan_mean_curvature, tangential_relaxation, recover_geometry, Geometry};
use mesh::{wedge_inner, Point, SurfaceMesh};
use monitors::{monitors, vertex_fields, MonitorContext, TraceRow, VertexFields};

pub const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub k: f64,
    /// Overrides `1 − 4k/3`.
    pub gamma: Option<f64>,
    pub eps: f64,
    pub sigma: f64,
    pub p: f64,
    pub cfl: f64,
    /// Absolute blowup threshold on `max |A|²`; `stop_factor × initial` when unset.
    pub stop_a2: Option<f64>,
    pub stop_factor: f64,
    pub max_steps: usize,
    /// Geometry is recovered and a trace row emitted every this many steps.
    pub output_every: usize,
    /// Number of snapshots at geometrically spaced `max |A|²` levels.
    pub snapshots: usize,
    /// Constant for the Poincaré monitor; scanned at `|A|² ≤ k|H|²` when unset.
    pub eps_z: Option<f64>,
    pub poincare_eta: f64,
    /// Mesh-quality stop, in degrees.
    pub min_angle_deg: f64,
    /// Weight of the tangential relaxation applied with every step; 0 disables it.
    pub relaxation: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            k: 29.0 / 40.0,
            gamma: None,
            eps: 0.0,
            sigma: 0.05,
            p: 10.0,
            cfl: 0.2,
            stop_a2: None,
            stop_factor: 1e4,
            max_steps: 200_000,
            output_every: 1,
            snapshots: 12,
            eps_z: None,
            poincare_eta: 1.0,
            min_angle_deg: 5.0,
            relaxation: 0.1,
        }
    }
}

impl FlowConfig {
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| default_gamma(self.k, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl = {} must lie in (0, 0.5]", self.cfl));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("sigma = {} must lie in (0, 1)", self.sigma));
        }
        if !(self.p >= 2.0) {
            return bad(format!("p = {} must be at least 2", self.p));
        }
        if !(self.eps >= 0.0) {
            return bad(format!("eps = {} must be non-negative", self.eps));
        }
        if self.output_every == 0 {
            return bad("output_every must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.relaxation) {
            return bad(format!("relaxation = {} must lie in [0, 0.5]", self.relaxation));
        }
        if !(self.stop_factor > 1.0) {
            return bad(format!("stop_factor = {} must exceed 1", self.stop_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Blowup,
    MaxSteps,
    MeshQuality,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub max_a2: f64,
    #[serde(skip)]
    pub vertices: Vec<Point>,
    #[serde(skip)]
    pub fields: Vec<VertexFields>,
}

/// A single flow run. Not shareable between concurrent mutators.
pub struct Simulation {
    cfg: FlowConfig,
    mesh: SurfaceMesh,
    geom: Geometry,
    areas: Vec<f64>,
    velocity: Vec<Point>,
    t: f64,
    step: usize,
    last_dt: f64,
    r0_2: f64,
    euler_excess: f64,
    initial_max_a2: f64,
    stop_a2: f64,
    eps_z: f64,
    thresholds: Vec<f64>,
    trace: Vec<TraceRow>,
    snapshots: Vec<Snapshot>,
    stopped: Option<StopReason>,
}

impl Simulation {
    pub fn new(mesh: SurfaceMesh, cfg: FlowConfig) -> Result<Self> {
        cfg.validate()?;
        if !mesh.is_closed() {
            return Err(Error::NonManifoldMesh("flow needs a closed mesh".into()));
        }
        let chi = mesh.euler_characteristic();
        if chi != 2 && chi != 0 {
            return Err(Error::NonManifoldMesh(format!("Euler characteristic {chi} is neither 2 nor 0")));
        }
        let geom = recover_geometry(&mesh)?;
        let (areas, velocity) = cotan_mean_curvature(&mesh);
        let initial_max_a2 = geom.max_a2();
        let stop_a2 = cfg.stop_a2.unwrap_or(cfg.stop_factor * initial_max_a2);
        let eps_z = match cfg.eps_z {
            Some(e) => e,
            None if cfg.k > 0.5 && cfg.k < 5.0 / 6.0 => epsilon_z_scan(cfg.gamma(), cfg.k, 64, 0, 0)?.min_ratio,
            None => f64::NAN,
        };
        let ratio = stop_a2 / initial_max_a2;
        let n = cfg.snapshots.max(1);
        let thresholds = (1..n).map(|j| initial_max_a2 * ratio.powf(j as f64 / (n - 1).max(1) as f64)).collect();
        let mut sim = Self {
            r0_2: mesh.max_norm2(),
            euler_excess: 0.0,
            cfg,
            mesh,
            geom,
            areas,
            velocity,
            t: 0.0,
            step: 0,
            last_dt: 0.0,
            initial_max_a2,
            stop_a2,
            eps_z,
            thresholds,
            trace: Vec::new(),
            snapshots: Vec::new(),
            stopped: None,
        };
        sim.record();
        sim.take_snapshot();
        Ok(sim)
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    /// Current mixed Voronoi vertex areas.
    pub fn vertex_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn initial_max_a2(&self) -> f64 {
        self.initial_max_a2
    }

    pub fn stop_a2(&self) -> f64 {
        self.stop_a2
    }

    pub fn eps_z(&self) -> f64 {
        self.eps_z
    }

    /// `Σ dt² max|H|²` over accepted steps: the amount by which a forward Euler step
    /// can exceed the smooth enclosing-ball bound `max|F|² ≤ R₀² − 4t`.
    pub fn pos_bound_tolerance(&self) -> f64 {
        self.euler_excess
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stopped
    }

    fn record(&mut self) {
        let ctx = MonitorContext {
            step: self.step,
            t: self.t,
            dt: self.last_dt,
            r0_2: self.r0_2,
            eps_z: self.eps_z,
        };
        let row = monitors(&self.mesh, &self.geom, &self.cfg, &ctx);
        self.trace.push(row);
    }

    fn take_snapshot(&mut self) {
        if self.snapshots.last().is_some_and(|s| s.step == self.step) {
            return;
        }
        self.snapshots.push(Snapshot {
            step: self.step,
            t: self.t,
            max_a2: self.geom.max_a2(),
            vertices: self.mesh.vertices.clone(),
            fields: vertex_fields(&self.geom, &self.cfg),
        });
    }

    fn inverted(&self, moved: &[Point]) -> bool {
        self.mesh.triangles.iter().any(|&[i, j, k]| {
            let (p, q) = (&self.mesh.vertices, moved);
            wedge_inner(&(p[j] - p[i]), &(p[k] - p[i]), &(q[j] - q[i]), &(q[k] - q[i])) <= 0.0
        })
    }

    /// Advances by one accepted step and returns its `dt`, or `None` once stopped.
    pub fn step(&mut self) -> Result<Option<f64>> {
        if self.stopped.is_some() {
            return Ok(None);
        }
        let max_a2 = self.geom.max_a2();
        let min_area = self.areas.iter().copied().fold(f64::INFINITY, f64::min);
        let mut dt = self.cfg.cfl * min_area.min(1.0 / max_a2);
        let area0 = self.mesh.total_area();
        let relax = tangential_relaxation(&self.mesh, self.cfg.relaxation);
        let mut halvings = 0;
        let moved = 'accept: loop {
            for with_relax in [true, false] {
                let moved: Vec<Point> = self
                    .mesh
                    .vertices
                    .iter()
                    .zip(&self.velocity)
                    .zip(&relax)
                    .map(|((x, h), r)| if with_relax { x + h * dt + r } else { x + h * dt })
                    .collect();
                let candidate = self.mesh.with_vertices(moved);
                if candidate.total_area() < area0 && !self.inverted(&candidate.vertices) {
                    break 'accept candidate;
                }
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::StepTooLarge { halvings: MAX_HALVINGS });
            }
            dt *= 0.5;
        };
        if moved.vertices.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numerical {
                step: self.step + 1,
                message: "non-finite vertex position".into(),
            });
        }
        let max_v2 = self.velocity.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
        self.euler_excess += dt * dt * max_v2;
        self.mesh = moved;
        self.t += dt;
        self.step += 1;
        self.last_dt = dt;
        let (areas, velocity) = cotan_mean_curvature(&self.mesh);
        self.areas = areas;
        self.velocity = velocity;
        let quality = self.mesh.min_angle() < self.cfg.min_angle_deg.to_radians();
        if self.step.is_multiple_of(self.cfg.output_every) || quality || self.step >= self.cfg.max_steps {
            self.geom = recover_geometry(&self.mesh).map_err(|e| Error::Numerical {
                step: self.step,
                message: e.to_string(),
            })?;
            self.record();
            if let Some(bad) = self.trace.last().map(|r| r.nan_columns()).filter(|c| c.contains(&"maxA2")) {
                return Err(Error::Numerical {
                    step: self.step,
                    message: format!("NaN in {}", bad.join(", ")),
                });
            }
            let a2 = self.geom.max_a2();
            let crossed = self.thresholds.iter().take_while(|&&th| a2 >= th).count();
            if crossed > 0 {
                self.thresholds.drain(..crossed);
                self.take_snapshot();
            }
            self.stopped = if a2 >= self.stop_a2 {
                Some(StopReason::Blowup)
            } else if quality {
                Some(StopReason::MeshQuality)
            } else if self.step >= self.cfg.max_steps {
                Some(StopReason::MaxSteps)
            } else {
                None
            };
            if self.stopped.is_some() {
                self.take_snapshot();
            }
        }
        Ok(Some(dt))
    }

    /// Runs to a stop condition, calling `observer` on every new trace row.
    pub fn run(&mut self, mut observer: impl FnMut(&TraceRow)) -> Result<StopReason> {
        let mut seen = self.trace.len();
        if seen > 0 {
            observer(&self.trace[0]);
        }
        loop {
            self.step()?;
            for row in &self.trace[seen..] {
                observer(row);
            }
            seen = self.trace.len();
            if let Some(reason) = self.stopped {
                return Ok(reason);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = FlowConfig { cfl: 0.6, ..FlowConfig::default() };
        assert!(bad.validate().is_err());
        assert!((FlowConfig::default().gamma() - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let m = mesh::planar_patch(5, 0.1).unwrap();
        assert!(matches!(Simulation::new(m, FlowConfig::default()), Err(Error::NonManifoldMesh(_))));
    }

    #[test]
    fn first_step_is_consistent_to_first_order() {
        let m = mesh::icosphere(1.0, 2).unwrap();
        let cfg = FlowConfig { relaxation: 0.0, ..FlowConfig::default() };
        let mut sim = Simulation::new(m.clone(), cfg).unwrap();
        let (areas, h) = cotan_mean_curvature(&m);
        let dt = sim.step().unwrap().unwrap();
        let moved = sim.mesh().vertices.iter().zip(&m.vertices).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let max_h = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!((moved - dt * max_h).abs() < 1e-12);
        let rate: f64 = areas.iter().zip(&h).map(|(a, x)| a * x.norm_squared()).sum();
        let da = sim.mesh().total_area() - m.total_area();
        assert!((da + rate * dt).abs() < 0.05 * rate * dt, "{da} vs {}", -rate * dt);
    }

    #[test]
    fn relaxation_keeps_icosphere_quality_and_shape() {
        let m = mesh::icosphere(1.0, 2).unwrap();
        let angle0 = m.min_angle();
        let mut sim = Simulation::new(m, FlowConfig { max_steps: 200, output_every: 50, ..FlowConfig::default() }).unwrap();
        sim.run(|_| {}).unwrap();
        assert!(sim.mesh().min_angle() > 0.95 * angle0);
        let c = sim.mesh().centroid();
        let d: Vec<f64> = sim.mesh().vertices.iter().map(|v| (v - c).norm()).collect();
        let (lo, hi) = d.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        assert!((hi - lo) / hi < 1e-3, "{lo} {hi}");
    }

    #[test]
    fn trace_time_increases_and_area_decreases() {
        let m = mesh::icosphere(1.0, 2).unwrap();
        let cfg = FlowConfig { max_steps: 20, ..FlowConfig::default() };
        let mut sim = Simulation::new(m, cfg).unwrap();
        assert_eq!(sim.run(|_| {}).unwrap(), StopReason::MaxSteps);
        let tr = sim.trace();
        assert_eq!(tr.len(), 21);
        assert!(tr.windows(2).all(|w| w[1].t > w[0].t && w[1].area < w[0].area));
        assert!(tr.last().unwrap().pos_bound_slack < 0.0);
        assert!(tr.iter().all(|r| r.pos_bound_slack >= -sim.pos_bound_tolerance()));
    }
}
