//! C ABI over `pinchflow`.
//!
//! Every function returns a [`PfStatus`]; on failure a message is available from
//! [`pf_last_error_message`] on the same thread. Simulations are opaque handles
//! created by [`pf_simulation_new`] and released with [`pf_simulation_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use pinchflow::certifier::{certify_negativity, reaction_at_zero_q, ConeSample, CertifyOptions};
use pinchflow::error::Error;
use pinchflow::flow::mesh::{Point, SurfaceMesh};
use pinchflow::flow::monitors::TraceRow;
use pinchflow::flow::{FlowConfig, Simulation};
use pinchflow::gradient::{check_gradient_inequalities, GradientState};
use pinchflow::pointwise::{ShapeTensor, SpecialFrameState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// `|H|` below tolerance or an umbilic point where a ratio is undefined.
    Degenerate = 3,
    InvalidMesh = 4,
    /// NaN, step collapse or failed curvature recovery during a flow.
    Numerical = 5,
    /// The simulation has reached its stop condition.
    Stopped = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PfStatus {
    match e {
        Error::DegenerateMeanCurvature { .. } | Error::UmbilicPoint => PfStatus::Degenerate,
        Error::NonManifoldMesh(_) | Error::DegenerateNeighborhood { .. } => PfStatus::InvalidMesh,
        Error::Numerical { .. } | Error::StepTooLarge { .. } => PfStatus::Numerical,
        _ => PfStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PfStatus>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PfStatus::Panic
        }
    }
}

fn fail(e: Error) -> PfStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, PfStatus> {
    // SAFETY: callers pass either null or a valid, writable, aligned pointer.
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error("null output pointer".into());
        PfStatus::NullPointer
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has room for `len` bytes by contract.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfSpecialFrame {
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl From<PfSpecialFrame> for SpecialFrameState {
    fn from(s: PfSpecialFrame) -> Self {
        SpecialFrameState::new(s.h, s.a, s.b, s.c)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfCurvatureScalars {
    pub norm_a2: f64,
    pub norm_acirc2: f64,
    pub gauss_k: f64,
    pub normal_kperp: f64,
    pub norm_rm_perp2: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub simons_z: f64,
}

/// Closed-form scalars of a special-frame state.
#[no_mangle]
pub unsafe extern "C" fn pf_special_frame_scalars(state: PfSpecialFrame, out: *mut PfCurvatureScalars) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        let s = SpecialFrameState::from(state);
        let c = s.scalars();
        *out = PfCurvatureScalars {
            norm_a2: c.norm_a2,
            norm_acirc2: c.norm_acirc2,
            gauss_k: c.gauss_k,
            normal_kperp: c.normal_kperp,
            norm_rm_perp2: c.norm_rm_perp2,
            r1: c.r1,
            r2: c.r2,
            r3: c.r3,
            simons_z: s.simons_z(),
        };
        Ok(())
    })
}

/// Reduces a shape tensor given as `(h11, h12, h22)` per normal direction.
#[no_mangle]
pub unsafe extern "C" fn pf_shape_to_special_frame(
    first: *const [f64; 3],
    second: *const [f64; 3],
    out: *mut PfSpecialFrame,
) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        // SAFETY: non-null pointers to three doubles by contract.
        let (Some(first), Some(second)) = (unsafe { first.as_ref() }, unsafe { second.as_ref() }) else {
            set_error("null shape tensor".into());
            return Err(PfStatus::NullPointer);
        };
        let s = ShapeTensor::from_entries(*first, *second).to_special_frame().map_err(fail)?;
        *out = PfSpecialFrame { h: s.h, a: s.a, b: s.b, c: s.c };
        Ok(())
    })
}

/// Simons nonlinearity by direct tensor sums.
#[no_mangle]
pub unsafe extern "C" fn pf_simons_z_tensor(first: *const [f64; 3], second: *const [f64; 3], out: *mut f64) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        // SAFETY: as above.
        let (Some(first), Some(second)) = (unsafe { first.as_ref() }, unsafe { second.as_ref() }) else {
            set_error("null shape tensor".into());
            return Err(PfStatus::NullPointer);
        };
        *out = ShapeTensor::from_entries(*first, *second).simons_z();
        Ok(())
    })
}

/// `Q = |A|² + 2γ|K⊥| − k|H|² + ε`.
#[no_mangle]
pub unsafe extern "C" fn pf_pinch_q(state: PfSpecialFrame, k: f64, gamma: f64, eps: f64, out: *mut f64) -> PfStatus {
    guard(|| {
        *out_ref(out)? = SpecialFrameState::from(state).pinch_q(k, gamma, eps);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfGradientSlacks {
    pub norm_grad_a2: f64,
    pub norm_grad_h2: f64,
    pub slack_8a: f64,
    pub slack_8b: f64,
    pub slack_8c: f64,
}

/// Gradient inequality slacks for the Codazzi-reduced state `(u₀..u₃, v₀..v₃)`.
#[no_mangle]
pub unsafe extern "C" fn pf_gradient_slacks(x: *const [f64; 8], out: *mut PfGradientSlacks) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        // SAFETY: non-null pointer to eight doubles by contract.
        let Some(x) = (unsafe { x.as_ref() }) else {
            set_error("null gradient state".into());
            return Err(PfStatus::NullPointer);
        };
        let s = check_gradient_inequalities(&GradientState::from_slice(x));
        *out = PfGradientSlacks {
            norm_grad_a2: s.norm_grad_a2,
            norm_grad_h2: s.norm_grad_h2,
            slack_8a: s.slack_8a,
            slack_8b: s.slack_8b,
            slack_8c: s.slack_8c,
        };
        Ok(())
    })
}

/// Reaction expression of `Q` on the cone `Q = 0`.
#[no_mangle]
pub unsafe extern "C" fn pf_reaction_at_zero_q(a: f64, b: f64, c: f64, eps: f64, k: f64, gamma: f64, out: *mut f64) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        let s = ConeSample::new(a, b, c, eps, k, gamma).map_err(fail)?;
        *out = reaction_at_zero_q(&s).map_err(fail)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfCertificate {
    pub k: f64,
    pub gamma: f64,
    pub max_value: f64,
    pub argmax_a: f64,
    pub argmax_b: f64,
    pub argmax_c: f64,
    pub sample_count: usize,
    pub non_positive: bool,
}

/// Samples the reaction expression at `k` with `γ = 1 − 4k/3`.
#[no_mangle]
pub unsafe extern "C" fn pf_certify(k: f64, grid: usize, random_samples: usize, seed: u64, out: *mut PfCertificate) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        let opts = CertifyOptions { grid, random_samples, seed, ..CertifyOptions::new(k) };
        let r = certify_negativity(&opts).map_err(fail)?;
        *out = PfCertificate {
            k: r.k,
            gamma: r.gamma,
            max_value: r.max_value,
            argmax_a: r.argmax.a,
            argmax_b: r.argmax.b,
            argmax_c: r.argmax.c,
            sample_count: r.sample_count,
            non_positive: r.non_positive,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfFlowParams {
    pub k: f64,
    /// Used only when `has_gamma` is set; otherwise `γ = 1 − 4k/3`.
    pub gamma: f64,
    pub has_gamma: bool,
    pub eps: f64,
    pub sigma: f64,
    pub p: f64,
    pub cfl: f64,
    pub stop_factor: f64,
    pub max_steps: usize,
    pub output_every: usize,
}

impl From<&PfFlowParams> for FlowConfig {
    fn from(p: &PfFlowParams) -> Self {
        FlowConfig {
            k: p.k,
            gamma: p.has_gamma.then_some(p.gamma),
            eps: p.eps,
            sigma: p.sigma,
            p: p.p,
            cfl: p.cfl,
            stop_factor: p.stop_factor,
            max_steps: p.max_steps,
            output_every: p.output_every,
            ..FlowConfig::default()
        }
    }
}

/// Fills `out` with the library defaults.
#[no_mangle]
pub unsafe extern "C" fn pf_flow_params_default(out: *mut PfFlowParams) -> PfStatus {
    guard(|| {
        let d = FlowConfig::default();
        *out_ref(out)? = PfFlowParams {
            k: d.k,
            gamma: d.gamma(),
            has_gamma: false,
            eps: d.eps,
            sigma: d.sigma,
            p: d.p,
            cfl: d.cfl,
            stop_factor: d.stop_factor,
            max_steps: d.max_steps,
            output_every: d.output_every,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfTraceRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub min_h: f64,
    pub max_a2: f64,
    pub max_q: f64,
    pub max_fsigma: f64,
    pub area: f64,
    pub int_fsigma_p: f64,
    pub pos_bound_slack: f64,
    pub z_ratio_min: f64,
    pub poincare_slack: f64,
    pub rescaled_max_acirc2: f64,
}

impl From<&TraceRow> for PfTraceRow {
    fn from(r: &TraceRow) -> Self {
        PfTraceRow {
            step: r.step,
            t: r.t,
            dt: r.dt,
            min_h: r.min_h,
            max_a2: r.max_a2,
            max_q: r.max_q,
            max_fsigma: r.max_fsigma,
            area: r.area,
            int_fsigma_p: r.int_fsigma_p,
            pos_bound_slack: r.pos_bound_slack,
            z_ratio_min: r.z_ratio_min,
            poincare_slack: r.poincare_slack,
            rescaled_max_acirc2: r.rescaled_max_acirc2,
        }
    }
}

/// Opaque flow state.
pub struct PfSimulation {
    sim: Simulation,
}

/// Creates a simulation from `n_vertices` points (4 doubles each) and `n_triangles`
/// index triples. On success `*out` owns a handle for [`pf_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_new(
    vertices: *const f64,
    n_vertices: usize,
    triangles: *const u32,
    n_triangles: usize,
    params: *const PfFlowParams,
    out: *mut *mut PfSimulation,
) -> PfStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = std::ptr::null_mut();
        if vertices.is_null() || triangles.is_null() || params.is_null() {
            set_error("null input pointer".into());
            return Err(PfStatus::NullPointer);
        }
        // SAFETY: the arrays hold 4·n_vertices doubles and 3·n_triangles indices by contract.
        let (v, t, params) = unsafe {
            (
                std::slice::from_raw_parts(vertices, 4 * n_vertices),
                std::slice::from_raw_parts(triangles, 3 * n_triangles),
                &*params,
            )
        };
        let points = v.chunks_exact(4).map(|c| Point::new(c[0], c[1], c[2], c[3])).collect();
        let tris = t.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        let mesh = SurfaceMesh::new(points, tris).map_err(fail)?;
        let cfg = FlowConfig::from(params);
        cfg.validate().map_err(fail)?;
        let sim = Simulation::new(mesh, cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(PfSimulation { sim }));
        Ok(())
    })
}

fn sim_mut<'a>(p: *mut PfSimulation) -> Result<&'a mut Simulation, PfStatus> {
    out_ref(p).map(|s| &mut s.sim)
}

/// Advances one accepted step; `PF_STATUS_STOPPED` once a stop condition was reached.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_step(sim: *mut PfSimulation, dt: *mut f64) -> PfStatus {
    guard(|| {
        let sim = sim_mut(sim)?;
        match sim.step().map_err(fail)? {
            Some(step_dt) => {
                if let Some(d) = unsafe { dt.as_mut() } {
                    *d = step_dt;
                }
                Ok(())
            }
            None => Err(PfStatus::Stopped),
        }
    })
}

/// Latest monitor row.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_monitors(sim: *mut PfSimulation, out: *mut PfTraceRow) -> PfStatus {
    guard(|| {
        let sim = sim_mut(sim)?;
        let row = sim.trace().last().expect("trace holds the initial row");
        *out_ref(out)? = PfTraceRow::from(row);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_simulation_vertex_count(sim: *mut PfSimulation, out: *mut usize) -> PfStatus {
    guard(|| {
        let n = sim_mut(sim)?.mesh().vertices.len();
        *out_ref(out)? = n;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_simulation_time(sim: *mut PfSimulation, out: *mut f64) -> PfStatus {
    guard(|| {
        let t = sim_mut(sim)?.time();
        *out_ref(out)? = t;
        Ok(())
    })
}

/// Copies current positions into `out`, which must hold `4·len` doubles with `len`
/// equal to the vertex count.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_copy_vertices(sim: *mut PfSimulation, out: *mut f64, len: usize) -> PfStatus {
    guard(|| {
        let sim = sim_mut(sim)?;
        let verts = &sim.mesh().vertices;
        if len != verts.len() {
            set_error(format!("buffer holds {len} vertices, mesh has {}", verts.len()));
            return Err(PfStatus::InvalidArgument);
        }
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(PfStatus::NullPointer);
        }
        // SAFETY: `out` holds 4·len doubles by contract.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, 4 * len) };
        for (d, v) in dst.chunks_exact_mut(4).zip(verts) {
            d.copy_from_slice(v.as_slice());
        }
        Ok(())
    })
}

/// Releases a handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_free(sim: *mut PfSimulation) {
    if !sim.is_null() {
        // SAFETY: `sim` came from `pf_simulation_new` and is freed once.
        drop(unsafe { Box::from_raw(sim) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_status_mapping() {
        assert_eq!(status_of(&Error::UmbilicPoint), PfStatus::Degenerate);
        assert_eq!(status_of(&Error::StepTooLarge { halvings: 10 }), PfStatus::Numerical);
        assert_eq!(status_of(&Error::NonManifoldMesh(String::new())), PfStatus::InvalidMesh);
        assert_eq!(status_of(&Error::InvalidK { k: 0.1 }), PfStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), PfStatus::Panic);
        let mut buf = [0 as c_char; 4];
        let n = unsafe { pf_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, "internal panic".len());
        assert_eq!(buf[3], 0);
    }
}
