//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line before asserting.

use std::sync::OnceLock;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pinchflow::certifier::{CertifyOptions, certify_negativity, threshold_scan};
use pinchflow::experiment::{FlowRun, Scenario, run_flow};
use pinchflow::flow::exact::{sphere_radius, torus_factor_radius};
use pinchflow::flow::monitors::VertexFields;
use pinchflow::gradient::{GradientState, check_gradient_inequalities, sweep_gradient_inequalities};
use pinchflow::pointwise::{ShapeTensor, SpecialFrameState};

const SEED: u64 = 42;

fn verdict(criterion: u32, passed: bool, detail: &str) -> bool {
    println!("{} criterion {criterion}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn shared(name: &'static str, cell: &'static OnceLock<FlowRun>) -> &'static FlowRun {
    cell.get_or_init(|| run_flow(&Scenario::builtin(name).unwrap()).unwrap())
}

fn pinched() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    shared("pinched_ellipsoid", &RUN)
}

fn clifford() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    shared("clifford_r1", &RUN)
}

fn sphere() -> &'static FlowRun {
    static RUN: OnceLock<FlowRun> = OnceLock::new();
    shared("sphere_r1", &RUN)
}

#[test]
fn criterion_1_certifier_threshold() {
    let started = Instant::now();
    let at_29_40 = certify_negativity(&CertifyOptions::new(29.0 / 40.0)).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let at_3_4 = certify_negativity(&CertifyOptions::new(0.75)).unwrap();
    let tol = 1e-3;
    let base = CertifyOptions::new(0.70);
    let coarse = threshold_scan(0.70, 0.75, tol, &base).unwrap();
    let fine = threshold_scan(0.70, 0.75, tol, &CertifyOptions { grid: 2 * base.grid, ..base }).unwrap();

    let negative = at_29_40.max_value < 0.0;
    let witness = at_3_4.max_value > 0.0;
    let in_range = (0.725..0.75).contains(&coarse.k_star);
    let stable = (coarse.k_star - fine.k_star).abs() <= 2.0 * tol;
    let fast = elapsed < 60.0;
    let passed = verdict(
        1,
        negative && witness && in_range && stable && fast,
        &format!(
            "max at k=29/40 {:.4e} (argmax a={:.4} b={:.4} c={:.4}), max at k=3/4 {:.4e}, \
             k* {:.6} (grid x2: {:.6}), certify {:.2}s",
            at_29_40.max_value,
            at_29_40.argmax.a,
            at_29_40.argmax.b,
            at_29_40.argmax.c,
            at_3_4.max_value,
            coarse.k_star,
            fine.k_star,
            elapsed
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_2_unit_gamma_and_k() {
    let opts = CertifyOptions {
        gamma_override: Some(1.0),
        ..CertifyOptions::new(1.0)
    };
    let r = certify_negativity(&opts).unwrap();
    // Samples lie on the unit sphere in (a, b, c), so the expression has unit scale.
    let passed = verdict(2, r.max_value <= 1e-10, &format!("max {:.4e} over {} samples", r.max_value, r.sample_count));
    assert!(passed);
}

#[test]
fn criterion_3_simons_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..100_000 {
        let e: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let shape = ShapeTensor::from_entries([e[0], e[1], e[2]], [e[3], e[4], e[5]]);
        let Ok(frame) = shape.to_special_frame() else { continue };
        let scale = shape.norm_a2().powi(2);
        worst = worst.max((frame.simons_z() - shape.simons_z()).abs() / scale);
        checked += 1;
    }
    let hand = SpecialFrameState::new(4.0, 1.0, 0.0, 1.0);
    let hand_ok = hand.simons_z() == 8.0 && (hand.lift().simons_z() - 8.0).abs() <= 8e-12;
    let passed = verdict(
        3,
        checked == 100_000 && worst <= 1e-12 && hand_ok,
        &format!("{checked} states, worst relative gap {worst:.3e}, Z(4,1,0,1) = {}", hand.simons_z()),
    );
    assert!(passed);
}

#[test]
fn criterion_4_gradient_inequalities() {
    let records = sweep_gradient_inequalities(1_000_000, SEED, true);
    let worst = records.iter().map(|r| r.slack_min).fold(f64::INFINITY, f64::min);
    let witness = check_gradient_inequalities(&GradientState::from_slice(&[0.75, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]));
    let summary: Vec<String> = records.iter().map(|r| format!("{} {:.3e}", r.inequality, r.slack_min)).collect();
    let passed = verdict(
        4,
        records.len() == 4 && worst >= -1e-12 && witness.slack_8a == 0.0,
        &format!("min slacks [{}], equality witness slack {:e}", summary.join(", "), witness.slack_8a),
    );
    assert!(passed);
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Worst relative error of the snapshot medians of `|H|` and `|A|²` against `(|H|, |A|²)` from `closed`.
fn curvature_error(run: &FlowRun, closed: impl Fn(f64) -> Option<(f64, f64)>) -> (usize, f64) {
    let mut used = 0;
    let mut worst: f64 = 0.0;
    for s in run.sim.snapshots() {
        let Some((h, a2)) = closed(s.t) else { continue };
        let field = |f: fn(&VertexFields) -> f64| median(s.fields.iter().map(f).collect());
        worst = worst.max((field(|v| v.h) - h).abs() / h).max((field(|v| v.a2) - a2).abs() / a2);
        used += 1;
    }
    (used, worst)
}

#[test]
fn criterion_5_exact_solutions() {
    let sphere = sphere();
    let torus = clifford();
    let sr = sphere.summary.radius.as_ref().unwrap();
    let tr = torus.summary.radius.as_ref().unwrap();
    let (sphere_used, sphere_curv) = curvature_error(sphere, |t| {
        let r = sphere_radius(1.0, t);
        (r >= 0.2).then(|| (2.0 / r, 2.0 / (r * r)))
    });
    let (torus_used, torus_curv) = curvature_error(torus, |t| {
        let r = torus_factor_radius(1.0, t);
        (r >= 0.3).then(|| ((2.0 / (r * r)).sqrt(), 2.0 / (r * r)))
    });
    let reached = sphere_radius(1.0, sphere.summary.t_final) <= 0.2 + 1e-2
        && torus_factor_radius(1.0, torus.summary.t_final) <= 0.3 + 1e-2;
    let passed = verdict(
        5,
        reached && sr.max_rel_error < 0.01 && tr.max_rel_error < 0.01 && sphere_curv < 0.01 && torus_curv < 0.01,
        &format!(
            "sphere radius {:.3e} over {} rows, torus radius {:.3e} over {} rows, \
             curvature medians sphere {:.3e} ({} snapshots) torus {:.3e} ({} snapshots)",
            sr.max_rel_error, sr.rows, tr.max_rel_error, tr.rows, sphere_curv, sphere_used, torus_curv, torus_used
        ),
    );
    assert!(passed && sphere_used > 0 && torus_used > 0);
}

#[test]
fn criterion_6_pinching_preservation() {
    let p = &pinched().summary;
    let c = &clifford().summary;
    let reached = p.final_max_a2 >= 1e4 * p.initial_max_a2;
    let passed = verdict(
        6,
        p.pinching.hypothesis_holds && p.pinching.preserved && reached && !c.pinching.hypothesis_holds,
        &format!(
            "pinched: maxQ0 {:.4e}, run max {:.4e} < band {:.4e}, maxA2 x{:.3e} ({:?}); clifford maxQ0 {:.4e}",
            p.pinching.initial_max_q,
            p.pinching.run_max_q,
            p.pinching.band,
            p.final_max_a2 / p.initial_max_a2,
            p.stop_reason,
            c.pinching.initial_max_q
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_7_roundness_at_blowup() {
    let s = &pinched().summary;
    let pinch: Vec<f64> = s.rescaled.iter().map(|r| r.max_pinch).collect();
    let tail = &pinch[pinch.len().saturating_sub(5)..];
    let monotone = pinch.len() >= 5 && tail.windows(2).all(|w| w[1] < w[0]);
    let shrunk = pinch.last().is_some_and(|last| *last < 0.1 * pinch[0]);
    let delta = s.decay_fit.map_or(f64::NAN, |f| f.delta);
    let passed = verdict(
        7,
        monotone && shrunk && delta > 0.0,
        &format!("rescaled max pinch {:?}, fitted delta {delta:.4}", pinch.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()),
    );
    assert!(passed);
}

#[test]
fn criterion_8_poincare_monitor() {
    let s = &pinched().summary;
    let ps_covered = [2.0, 10.0].iter().all(|p| s.poincare.iter().any(|r| r.p == *p));
    let worst = s.poincare.iter().map(|r| r.lhs / r.rhs).fold(f64::NEG_INFINITY, f64::max);
    let all_hold = s.poincare.iter().all(|r| r.lhs <= 1.25 * r.rhs);
    let increase = s.int_fsigma_p_max_rel_increase;
    let passed = verdict(
        8,
        ps_covered && all_hold && increase <= 0.02,
        &format!(
            "{} rows, worst lhs/rhs {worst:.4}, max relative increase of the integral {increase:.3e}",
            s.poincare.len()
        ),
    );
    assert!(passed);
}
