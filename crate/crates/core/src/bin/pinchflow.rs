use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pinchflow::certifier::CertifyOptions;
use pinchflow::error::Result;
use pinchflow::experiment::{Kernels, Scenario, cmd_certify, cmd_flow, cmd_identities, cmd_rescale, cmd_scan, exit_code};

/// Pinching estimates and discrete mean curvature flow for surfaces in R⁴.
///
/// Exit status: 0 success, 1 a checked property failed, 2 usage or configuration
/// error, 3 numerical failure.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Seed for every random sweep.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CertifyArgs {
    /// Grid points per angular axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Extra uniformly distributed samples.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Slack subtracted from the default γ = 1 − 4k/3.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Replaces the default γ.
    #[arg(long)]
    gamma: Option<f64>,
}

impl CertifyArgs {
    fn options(&self, k: f64, seed: u64) -> CertifyOptions {
        CertifyOptions {
            k,
            delta: self.delta,
            grid: self.grid,
            random_samples: self.samples,
            seed,
            gamma_override: self.gamma,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the pointwise identities and gradient inequalities.
    Identities {
        #[arg(long, default_value_t = 100_000)]
        count: usize,
    },
    /// Sample the reaction expression on the pinching cone.
    Certify {
        #[arg(long, default_value_t = 0.725)]
        k: f64,
        #[command(flatten)]
        args: CertifyArgs,
    },
    /// Bisect for the largest k at which the reaction expression is non-positive.
    Scan {
        #[arg(long, default_value_t = 0.70)]
        k_low: f64,
        #[arg(long, default_value_t = 0.75)]
        k_high: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        args: CertifyArgs,
    },
    /// Run a flow scenario: a built-in name (sphere_r1, clifford_r1, pinched_ellipsoid) or a file.
    Flow { scenario: String },
    /// Recompute the type-I rescaling from a finished run directory.
    Rescale { run_dir: PathBuf },
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Identities { count } => {
            let report = cmd_identities(cli.seed, count, &cli.out, &Kernels::default())?;
            for p in &report.properties {
                println!("{:<28} worst {:>12.4e}  {}", p.property, p.worst, if p.passed { "ok" } else { "FAILED" });
            }
            println!("wrote {}", cli.out.join("identities.json").display());
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Certify { k, args } => {
            let r = cmd_certify(&args.options(k, cli.seed), &cli.out)?;
            println!(
                "k = {} gamma = {} max = {:.6e} at (a,b,c) = ({:.4}, {:.4}, {:.4}); non-positive: {}",
                r.k, r.gamma, r.max_value, r.argmax.a, r.argmax.b, r.argmax.c, r.non_positive
            );
            println!("wrote {}", cli.out.join("certificate.json").display());
            Ok(0)
        }
        Command::Scan { k_low, k_high, tol, args } => {
            let r = cmd_scan(k_low, k_high, tol, &args.options(k_low, cli.seed), &cli.out)?;
            println!("k* = {:.6} in [{:.6}, {:.6}] after {} evaluations", r.k_star, r.k_low, r.k_high, r.evaluations);
            Ok(0)
        }
        Command::Flow { scenario } => {
            let scenario = Scenario::resolve(&scenario)?;
            let (run, dir) = cmd_flow(&scenario, &cli.out)?;
            let s = &run.summary;
            println!(
                "{}: {:?} after {} steps, t = {:.6}, maxA2 {:.3e} -> {:.3e}",
                s.name, s.stop_reason, s.steps, s.t_final, s.initial_max_a2, s.final_max_a2
            );
            if !s.pinching.hypothesis_holds {
                println!("pinching hypothesis violated at t = 0: maxQ = {:.4e}", s.pinching.initial_max_q);
            } else {
                println!("pinching preserved: {} (max maxQ {:.4e}, band {:.4e})", s.pinching.preserved, s.pinching.run_max_q, s.pinching.band);
            }
            if let Some(r) = &s.radius {
                println!("{} radius error up to r = {}·r0: {:.3e}", r.kind, r.limit_fraction, r.max_rel_error);
            }
            match (&s.decay_fit, &s.decay_fit_error) {
                (Some(f), _) => println!("decay fit: delta = {:.4}, c0 = {:.4e}", f.delta, f.c0),
                (None, Some(e)) => println!("decay fit: {e}"),
                _ => {}
            }
            println!("wrote {}", dir.display());
            let failed = s.pinching.hypothesis_holds && !s.pinching.preserved || s.poincare.iter().any(|r| !r.holds);
            Ok(if failed { 1 } else { 0 })
        }
        Command::Rescale { run_dir } => {
            let rescaled = cmd_rescale(&run_dir, &cli.out)?;
            for r in &rescaled {
                println!("step {:>7} lambda {:.4e} max pinch {:.4e}", r.step, r.lambda, r.max_pinch);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
