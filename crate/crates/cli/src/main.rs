//! `sigma2-lab`: verification suites, solves, audits and timing dumps.
//!
//! Exit status is 0 on success, 1 when a checked invariant is violated and 2
//! for usage or input errors. Every run writes its artifacts and a
//! `manifest.json` under `--out`.

mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sigma2_core::audit::{ledger, qhat_max, QhatOutcome};
use sigma2_core::geometry::{read_binary, write_binary, FrameField, ScalarField};
use sigma2_core::solver::{history_csv, newton_solve, residual, RhsModel, SolverConfig};

use output::{num, RunDir};

const THREADS_ENV: &str = "SIGMA2_LAB_THREADS";

#[derive(Parser)]
#[command(name = "sigma2-lab", version, about = "Numerical laboratory for the complex σ₂ equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Symfun,
    Concavity,
    Perturb,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Symfun => "symfun",
            Suite::Concavity => "concavity",
            Suite::Perturb => "perturb",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a verification suite and dump one CSV row per sample.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run damped Newton from φ = 0 on a JSON solver configuration.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate the maximum-principle ledger of a binary φ field.
    Audit {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long = "A")]
        a: f64,
        #[arg(long)]
        eps: f64,
        /// Solver configuration supplying χ; defaults to χ = I.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time the core kernels and dump the timings as CSV.
    Bench {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_ENV}={raw:?} is not a nonnegative integer"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_verify(suite: Suite, n: usize, samples: usize, seed: u64, out: &Path) -> Result<bool, String> {
    let mut run = RunDir::create(out)?;
    let table = match suite {
        Suite::Symfun => verify::symfun(n, samples, seed),
        Suite::Concavity => verify::concavity(n, samples, seed),
        Suite::Perturb => verify::perturb(n, samples, seed),
    }?;
    let name = format!("verify_{}.csv", suite.name());
    run.csv(&name, &table.header, &table.rows)?;
    run.json("summary.json", &json!({ "rows": table.rows.len(), "violations": table.violations }))?;
    run.finish("verify", seed, &json!({ "suite": suite.name(), "n": n, "samples": samples }))?;
    eprintln!("{}: {} rows, {} violations", name, table.rows.len(), table.violations);
    Ok(table.violations == 0)
}

fn load_config(run: &mut RunDir, path: &Path) -> Result<SolverConfig, String> {
    let bytes = run.input("config", path)?;
    let cfg: SolverConfig = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    cfg.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, String> {
    serde_json::to_value(v).map_err(|e| e.to_string())
}

fn run_solve(config: &Path, seed: u64, out: &Path) -> Result<bool, String> {
    let mut run = RunDir::create(out)?;
    let cfg = load_config(&mut run, config)?;
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let rep = newton_solve(&cfg, &ScalarField::zeros(grid)).map_err(|e| e.to_string())?;
    run.json("solver_report.json", &rep)?;
    let hist = history_csv(&rep.history);
    let rows: Vec<Vec<String>> = hist.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let header: Vec<String> = hist.lines().next().unwrap_or_default().split(',').map(String::from).collect();
    run.csv("history.csv", &header, &rows)?;
    write_binary(&rep.phi, &run.path("phi.bin")).map_err(|e| format!("{}: {e}", run.path("phi.bin").display()))?;
    run.external("phi.bin");
    run.finish("solve", seed, &to_value(&cfg)?)?;
    eprintln!("solve: converged = {}, iters = {}, residual = {:e}", rep.converged, rep.iters, rep.residual_linf);
    Ok(rep.converged)
}

fn run_audit(phi_path: &Path, a: f64, eps: f64, config: Option<&Path>, seed: u64, out: &Path) -> Result<bool, String> {
    let mut run = RunDir::create(out)?;
    run.input("phi", phi_path)?;
    let phi = read_binary(phi_path).map_err(|e| format!("{}: {e}", phi_path.display()))?;
    let cfg = match config {
        Some(p) => load_config(&mut run, p)?,
        None => SolverConfig::new(phi.grid.n(), phi.grid.res(), RhsModel::Constant { value: 0.0 }),
    };
    let params = json!({ "A": a, "eps": eps, "solver": to_value(&cfg)? });
    let ok = match qhat_max(&phi, a, &FrameField::standard(phi.grid)).map_err(|e| e.to_string())? {
        QhatOutcome::BoundedByZero => {
            run.json("audit_ledger.json", &QhatOutcome::BoundedByZero)?;
            eprintln!("audit: λ₁ ≤ 0 everywhere, nothing to audit");
            true
        }
        QhatOutcome::Interior(_) => {
            let l = ledger(&phi, a, eps, &cfg).map_err(|e| e.to_string())?;
            run.json("audit_ledger.json", &l)?;
            let ok = l.split_defect() <= 1e-10
                && (l.nu_norm_sq() - 1.0).abs() <= 1e-8
                && (l.mu_norm_sq() - 1.0).abs() <= 1e-8
                && l.term_i >= -1e-8
                && l.first_order.holds();
            if l.first_order.discrete_grad_norm.is_none() {
                eprintln!("audit: the gradient stencil leaves the region λ₁ > 0; refine the grid");
            }
            eprintln!("audit: x0 = {}, term_I = {:e}, term_II = {:e}, identities hold: {ok}", l.x0.index, l.term_i, l.term_ii);
            ok
        }
    };
    run.finish("audit", seed, &params)?;
    Ok(ok)
}

fn run_bench(n: usize, samples: usize, seed: u64, out: &Path) -> Result<bool, String> {
    use sigma2_core::concavity::{assemble, det_identity, spectral};
    use sigma2_core::symfun::inequality_slacks;

    let mut run = RunDir::create(out)?;
    let mut rows = Vec::new();
    let mut time = |op: &str, count: usize, f: &mut dyn FnMut() -> Result<(), String>| -> Result<(), String> {
        let t = Instant::now();
        f()?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(vec![op.to_string(), n.to_string(), count.to_string(), num(secs)]);
        Ok(())
    };
    let err = |e: sigma2_core::Error| e.to_string();
    let mut etas = Vec::new();
    time("sample_gamma2", samples, &mut || {
        etas = verify::sample_gamma2(n, samples, seed)?;
        Ok(())
    })?;
    time("inequality_slacks", samples, &mut || etas.iter().try_for_each(|e| inequality_slacks(e).map(drop).map_err(err)))?;
    time("det_identity", samples, &mut || etas.iter().try_for_each(|e| det_identity(e).map(drop).map_err(err)))?;
    time("spectral", samples, &mut || etas.iter().try_for_each(|e| assemble(e).and_then(|m| spectral(&m)).map(drop).map_err(err)))?;
    let cfg = SolverConfig::new(n, 8, RhsModel::Manufactured { delta: 0.5 });
    let grid = cfg.grid().map_err(err)?;
    let phi = ScalarField::from_fn(grid, |x| 0.5 * x[0].cos());
    time("residual_res8", grid.len(), &mut || residual(&phi, &cfg).map(drop).map_err(err))?;
    let header = ["operation", "n", "count", "seconds"].map(String::from).to_vec();
    run.csv("bench.csv", &header, &rows)?;
    run.finish("bench", seed, &json!({ "n": n, "samples": samples }))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Verify { suite, n, samples, seed, out } => run_verify(*suite, *n, *samples, *seed, out),
        Command::Solve { config, seed, out } => run_solve(config, *seed, out),
        Command::Audit { phi, a, eps, config, seed, out } => run_audit(phi, *a, *eps, config.as_deref(), *seed, out),
        Command::Bench { n, samples, seed, out } => run_bench(*n, *samples, *seed, out),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
