use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hedgekit::audit::audit_dir;
use hedgekit::core::measures::{eval_risk, risk_from_regret, MeasureSpec, RandomVariable};
use hedgekit::core::pha::PhaConfig;
use hedgekit::core::problems::{gen_airline_instance, gen_random_instance, ExperimentSpec, InstanceSource};
use hedgekit::exec::Parallel;
use hedgekit::harness::{run_experiment, RunOptions};
use hedgekit::instance::{read_two_stage, write_two_stage};
use hedgekit::summary::{emit_table, TableFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "hedgekit", version, about = "Risk-averse two-stage programs solved by progressive hedging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve repeated instances and print a summary row.
    Run(RunArgs),
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Recompute a run directory's summary from its per-run files.
    Audit { dir: PathBuf },
    /// Compare the trade-off formula against closed-form risks on random variables.
    Duality {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Expectation,
    Cvar,
    Oce,
}

#[derive(Args)]
struct InstanceArgs {
    /// `airline`, `random`, or a JSON instance file.
    #[arg(long, default_value = "airline")]
    instance: String,
    #[arg(long, default_value_t = 4)]
    sn: usize,
    /// First- and second-stage sizes of random instances, as `n1,n2`.
    #[arg(long, default_value = "10,10", value_parser = parse_dims)]
    dims: (usize, usize),
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "expectation")]
    model: Model,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma2: f64,
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Double or halve r when one residual dominates the other tenfold.
    #[arg(long)]
    adaptive_r: bool,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Solve the deterministic equivalent instead of running PHA.
    #[arg(long)]
    oracle: bool,
    /// Directory for per-run logs and summaries.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected n1,n2")?;
    let a = a.trim().parse().map_err(|_| format!("bad n1 {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad n2 {b:?}"))?;
    Ok((a, b))
}

fn source(inst: &InstanceArgs) -> anyhow::Result<InstanceSource> {
    Ok(match inst.instance.as_str() {
        "airline" => InstanceSource::Airline,
        "random" => InstanceSource::Random { n1: inst.dims.0, n2: inst.dims.1 },
        path => {
            let data = read_two_stage(path.as_ref()).with_context(|| format!("loading {path}"))?;
            InstanceSource::Fixed(data)
        }
    })
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let measure = match args.model {
        Model::Expectation => MeasureSpec::expectation(),
        Model::Cvar => MeasureSpec::cvar(args.alpha)?,
        Model::Oce => MeasureSpec::oce(args.gamma1, args.gamma2)?,
    };
    let source = source(&args.inst)?;
    let sn = match &source {
        InstanceSource::Fixed(d) => d.space.len(),
        _ => args.inst.sn,
    };
    let spec = ExperimentSpec {
        measure,
        source,
        sn,
        seed: args.inst.seed,
        pha: PhaConfig {
            r: args.r,
            tol: args.tol,
            max_iter: args.max_iter,
            seed: args.inst.seed,
            adaptive_r: args.adaptive_r,
            ..PhaConfig::default()
        },
    };
    let exec = Parallel::from_env();
    let opts = RunOptions { oracle: args.oracle, out: args.out };
    let result = run_experiment(&spec, args.repeats, &opts, &exec)?;
    print!("{}", emit_table(std::slice::from_ref(&result.summary), TableFormat::Markdown));
    for r in result.runs.iter().filter(|r| !r.error.is_empty()) {
        eprintln!("repeat {} (seed {}): {}", r.repeat, r.seed, r.error);
    }
    Ok(ExitCode::SUCCESS)
}

fn gen(args: GenArgs) -> anyhow::Result<ExitCode> {
    let i = &args.inst;
    let data = match i.instance.as_str() {
        "airline" => gen_airline_instance(i.sn, i.seed)?,
        "random" => gen_random_instance(i.dims.0, i.dims.1, i.sn, i.seed)?,
        other => bail!("can only generate airline or random instances, got {other:?}"),
    };
    write_two_stage(&args.out, &data)?;
    Ok(ExitCode::SUCCESS)
}

fn audit(dir: PathBuf) -> anyhow::Result<ExitCode> {
    let report = audit_dir(&dir)?;
    println!("{} runs, {} logs checked", report.runs, report.logs_checked);
    for m in &report.mismatches {
        println!("MISMATCH {m}");
    }
    Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// Random variables on 8 to 64 atoms with values in [-10, 10].
fn duality(trials: usize, seed: u64) -> anyhow::Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measures = vec![MeasureSpec::expectation()];
    for a in [0.0, 0.25, 0.5, 0.9] {
        measures.push(MeasureSpec::cvar(a)?);
    }
    measures.push(MeasureSpec::oce(2.0, 0.5)?);
    measures.push(MeasureSpec::oce(4.0, 0.0)?);
    for l in [0.25, 0.5, 1.0] {
        measures.push(MeasureSpec::mean_dev(l)?);
    }
    let mut worst = 0.0f64;
    for m in &measures {
        let mut gap = 0.0f64;
        for _ in 0..trials {
            let n = rng.random_range(8..=64);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.05)).collect();
            let total: f64 = weights.iter().sum();
            let xi = RandomVariable::new(values, weights.iter().map(|w| w / total).collect())?;
            let (risk, _) = risk_from_regret(m, &xi, 1e-12)?;
            gap = gap.max((risk - eval_risk(m, &xi)).abs());
        }
        println!("{:<24} max gap {gap:.3e}", hedgekit::summary::measure_label(m));
        worst = worst.max(gap);
    }
    Ok(if worst <= 1e-6 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Audit { dir } => audit(dir),
        Command::Duality { trials, seed } => duality(trials, seed),
    }
}
