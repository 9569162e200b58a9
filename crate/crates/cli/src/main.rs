use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use phasesync::harness::{write_rows_csv, TraceFile};
use phasesync::{
    build_instance, execute_run, load_instance, noise_stats, run_sweep, save_instance,
    verify_run_with_noise, BoundReport64, GpmConfig64, Instance64, NoiseStats64, SpectralConfig,
    StepSize64, SweepConfig, TruthMode, VerifyConfig,
};

/// Phase synchronization by the generalized power method.
///
/// Exit status: 0 when every applicable check passed, 2 when at least one
/// applicable check failed, 1 on any operational error.
#[derive(Parser, Debug)]
#[command(name = "phasesync", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an instance and write it to a JSON file.
    Generate {
        #[command(flatten)]
        spec: InstanceArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve an instance from the eigenvector estimator and verify every bound.
    Solve(SolveArgs),
    /// Run a parameter sweep described by a JSON config.
    Sweep {
        config: PathBuf,
        /// Output directory; overrides `output_dir` of the config.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Worker threads (default: all processors).
        #[arg(long, env = "PHASESYNC_JOBS")]
        jobs: Option<usize>,
    },
    /// Re-verify a stored trace against its instance.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct InstanceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "random-phases")]
    truth: TruthMode,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file written by `generate`.
    #[arg(long, conflicts_with_all = ["n", "sigma", "seed"])]
    instance: Option<PathBuf>,
    #[arg(long, requires_all = ["sigma", "seed"])]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "random-phases")]
    truth: TruthMode,
    /// Step size: a number >= 2, or `inf`.
    #[arg(long, default_value = "4")]
    alpha: StepSize64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    rho_tol: Option<f64>,
    #[arg(long)]
    step_tol: Option<f64>,
    /// Drop stored iterates (disables the checks that need them).
    #[arg(long)]
    no_iterates: bool,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { spec, out } => generate(&spec, &out),
        Command::Solve(args) => solve(&args),
        Command::Sweep { config, out, jobs } => sweep(&config, out, jobs),
        Command::Verify {
            trace,
            instance,
            out,
        } => verify(&trace, &instance, out.as_deref()),
    }
}

fn verdict_code(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn print_noise(noise: &NoiseStats64) {
    let a = noise.assumptions;
    println!("n = {}", noise.n);
    println!("|Delta|_op      = {:.6e}", noise.delta_op);
    println!("|Delta z*|_inf  = {:.6e}", noise.delta_zstar_inf);
    println!(
        "lambda(Delta)   = [{:.6e}, {:.6e}]",
        noise.delta_eig_min, noise.delta_eig_max
    );
    println!(
        "thm1_ok = {}  thm3_ok = {}  prop_ebcrit_ok = {}",
        a.thm1_ok, a.thm3_ok, a.prop_ebcrit_ok
    );
}

fn generate(spec: &InstanceArgs, out: &Path) -> Result<ExitCode> {
    let inst = build_instance::<f64>(spec.n, spec.sigma, spec.seed, spec.truth)
        .context("cannot build instance")?;
    save_instance(&inst, out).with_context(|| format!("cannot write {}", out.display()))?;
    print_noise(&noise_stats(&inst)?);
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn solve_instance(args: &SolveArgs) -> Result<Instance64> {
    if let Some(path) = &args.instance {
        return load_instance(path)
            .with_context(|| format!("cannot load instance {}", path.display()));
    }
    match (args.n, args.sigma, args.seed) {
        (Some(n), Some(sigma), Some(seed)) => {
            Ok(build_instance(n, sigma, seed, args.truth).context("cannot build instance")?)
        }
        _ => bail!("give either --instance or all of --n, --sigma and --seed"),
    }
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let inst = solve_instance(args)?;
    let mut gpm = GpmConfig64 {
        alpha: args.alpha,
        record_iterates: !args.no_iterates,
        ..GpmConfig64::default()
    };
    if let Some(m) = args.max_iter {
        gpm.max_iter = m;
    }
    if args.rho_tol.is_some() {
        gpm.rho_tol = args.rho_tol;
    }
    if args.step_tol.is_some() {
        gpm.step_tol = args.step_tol;
    }
    let out = execute_run(
        0,
        &inst,
        &gpm,
        &SpectralConfig::default(),
        &VerifyConfig::default(),
    )
    .context("solve failed")?;

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    if args.instance.is_none() {
        save_instance(&inst, dir.join("instance.json"))?;
    }
    out.trace.save_csv(dir.join("trace.csv"))?;
    TraceFile {
        noise: out.noise,
        trace: out.trace.clone(),
    }
    .save(&dir.join("trace.json"))?;
    write_report(&out.report, dir)?;
    write_rows_csv(
        std::slice::from_ref(&out.row),
        fs::File::create(dir.join("row.csv"))?,
    )?;

    print!("{}", out.report.summary_text());
    info!("outputs in {}", dir.display());
    Ok(verdict_code(out.report.any_failed()))
}

fn write_report(report: &BoundReport64, dir: &Path) -> Result<()> {
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    fs::write(dir.join("report.txt"), report.summary_text())?;
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<ExitCode> {
    let cfg = SweepConfig::load(config)
        .with_context(|| format!("invalid sweep config {}", config.display()))?;
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .context("no output directory: pass --out or set output_dir")?;
    let report = run_sweep(&cfg, jobs)?;
    report
        .write(&dir)
        .with_context(|| format!("cannot write sweep outputs to {}", dir.display()))?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&cfg)? + "\n",
    )?;

    let s = &report.summary;
    println!(
        "runs: {}  errors: {}  runs with failed checks: {}",
        s.runs, s.errors, s.runs_with_failures
    );
    for g in &s.groups {
        println!(
            "n={:<5} sigma={:<12.6e} alpha={:<4} runs={:<4} thm1_ok={:<4} thm3_ok={:<4} mean d2_final={}",
            g.n,
            g.sigma,
            g.alpha,
            g.runs,
            g.thm1_ok,
            g.thm3_ok,
            g.d2_final.mean.map_or("-".into(), |m| format!("{m:.4e}"))
        );
    }
    println!("wrote {}", dir.display());
    if s.errors > 0 {
        eprintln!(
            "error: {} runs failed; see the error column of rows.csv",
            s.errors
        );
        return Ok(ExitCode::from(1));
    }
    Ok(verdict_code(s.runs_with_failures > 0))
}

fn verify(trace: &Path, instance: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let inst = load_instance(instance)
        .with_context(|| format!("cannot load instance {}", instance.display()))?;
    let stored =
        TraceFile::load(trace).with_context(|| format!("cannot load trace {}", trace.display()))?;
    let noise = noise_stats(&inst)?;
    let report = verify_run_with_noise(&inst, &stored.trace, &noise, &VerifyConfig::default())
        .context("verification failed")?;
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    print!("{}", report.summary_text());
    Ok(verdict_code(report.any_failed()))
}
