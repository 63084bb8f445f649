use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use hyperlab::experiment::{config_schema, ExperimentConfig, Status, EXPERIMENTS};
use hyperlab::report::{write_json, write_tables, Provenance};
use hyperlab::reproduce::{reproduce_all, Tolerances};
use hyperlab::Error;

const EXIT_INTERNAL: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hyperlab",
    version,
    about = "Experiments on induced maps of Morse-Smale systems"
)]
struct Cli {
    /// Directory for JSON reports and CSV tables.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the experiments and their modes, then exit.
    #[arg(long)]
    list_experiments: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Orbit closures, homoclinic orbits, fixed and wandering continua on the circle.
    Recurrence(RecurrenceArgs),
    /// Shadowing falsification on continua and shadowing of finite sets.
    Shadow(ShadowArgs),
    /// Separated-set entropy estimates.
    Entropy(EntropyArgs),
    /// Symbolic codings and their identities.
    Coding(CodingArgs),
    /// Subtree separation, cone coding and the comb conjugacy.
    Dendrite(DendriteArgs),
    /// Periodic and homoclinic continua and non-shadowing on the sphere.
    Sphere(SphereArgs),
    /// Run every acceptance criterion with pinned seeds and write summary.csv.
    ReproduceAll,
    /// Print the JSON Schema of experiment configs.
    Schema,
}

#[derive(Args, Serialize)]
struct RecurrenceArgs {
    #[arg(long)]
    construction: Option<String>,
    #[arg(long)]
    pairs: Option<u32>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    stride: Option<u32>,
    #[arg(long)]
    truncation: Option<u32>,
    #[arg(long)]
    window: Option<u32>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    target: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    grid: Option<f64>,
}

#[derive(Args, Serialize)]
struct ShadowArgs {
    /// falsify-cf, shadow-2f or verify.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    pairs: Option<u32>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long)]
    strands: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    audit_samples: Option<usize>,
    #[arg(long)]
    candidate_csv: Option<bool>,
}

#[derive(Args, Serialize)]
struct EntropyArgs {
    /// circle, rotation, arcs, full-shift or coding.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    pairs: Option<u32>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    angle: Option<f64>,
    #[arg(long)]
    symbols: Option<u8>,
    #[arg(long)]
    r: Option<usize>,
    /// Comma-separated epsilons.
    #[arg(long, value_delimiter = ',')]
    #[serde(rename = "epsilons")]
    eps_schedule: Option<Vec<f64>>,
    /// Comma-separated orbit lengths.
    #[arg(long, value_delimiter = ',')]
    #[serde(rename = "ns")]
    n_schedule: Option<Vec<usize>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args, Serialize)]
struct CodingArgs {
    /// sq, finite-map, cone or phi2f.
    #[arg(long)]
    construction: Option<String>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Serialize)]
struct DendriteArgs {
    /// csigma, fullcone or conjugacy.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    window: Option<i64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    pairwise_csv: Option<bool>,
}

#[derive(Args, Serialize)]
struct SphereArgs {
    /// periodic, homoclinic, conjugacy or nonshadowing.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    period: Option<u32>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    detour_vertices: Option<usize>,
    #[arg(long)]
    beta_height: Option<f64>,
    #[arg(long)]
    mesh_points: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    audit_samples: Option<usize>,
}

/// Builds the config object from the flags that were given.
fn config_from_flags(experiment: &str, args: &impl Serialize) -> Result<String> {
    let mut map = Map::new();
    map.insert("experiment".into(), Value::String(experiment.into()));
    if let Value::Object(flags) = serde_json::to_value(args)? {
        map.extend(flags.into_iter().filter(|(_, v)| !v.is_null()));
    }
    Ok(Value::Object(map).to_string())
}

fn classify(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_invalid_input() => EXIT_INVALID,
        _ => EXIT_INTERNAL,
    }
}

fn run_experiment(text: &str, seed: Option<u64>, out_dir: &Path) -> Result<u8> {
    let mut config = ExperimentConfig::from_json(text)?;
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    let name = config.name();
    let started = Instant::now();
    let outcome = config.run()?;
    let report = config.report(&outcome)?;
    let json_path = out_dir.join(format!("{name}.json"));
    write_json(&json_path, &report)?;
    let mut tables = outcome.tables.clone();
    for t in &mut tables {
        t.name = format!("{name}-{}", t.name);
    }
    let csv_paths = write_tables(out_dir, &tables)?;
    println!("{name}: {:?} in {:.2?}", outcome.status, started.elapsed());
    println!("  {}", json_path.display());
    for p in csv_paths {
        println!("  {}", p.display());
    }
    Ok(match outcome.status {
        Status::Expected => 0,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

#[derive(Serialize)]
struct ReproductionReport<'a> {
    provenance: Provenance,
    all_passed: bool,
    criteria: &'a [hyperlab::reproduce::CriterionResult],
}

fn run_reproduce_all(out_dir: &Path) -> Result<u8> {
    let (tol, overridden) = Tolerances::from_env()?;
    if !overridden.is_empty() {
        eprintln!("tolerance overrides: {}", overridden.join(", "));
    }
    let started = Instant::now();
    let mut last = Instant::now();
    let rep = reproduce_all(&tol, &overridden, |r| {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {mark} ({:.2?}) {} | {}",
            r.id,
            last.elapsed(),
            r.claim,
            r.measured
        );
        last = Instant::now();
    })?;
    rep.write(out_dir)?;
    let report = ReproductionReport {
        provenance: Provenance::of(&tol)?,
        all_passed: rep.all_passed(),
        criteria: &rep.results,
    };
    write_json(&out_dir.join("summary.json"), &report)?;
    let failed: Vec<String> = rep
        .results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    println!(
        "{} criteria in {:.2?}; summary in {}",
        rep.results.len(),
        started.elapsed(),
        out_dir.join("summary.csv").display()
    );
    if failed.is_empty() {
        Ok(0)
    } else {
        println!("failing criteria: {}", failed.join(", "));
        Ok(EXIT_INTERNAL)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(text) = std::env::var("HYPERLAB_THREADS") {
        let n: usize = text
            .trim()
            .parse()
            .with_context(|| format!("HYPERLAB_THREADS={text} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8> {
    configure_threads().map_err(|e| e.context(Error::Config("thread count".into())))?;
    if cli.list_experiments {
        for (kind, modes) in EXPERIMENTS {
            println!("{kind}: {}", modes.join(", "));
        }
        println!("reproduce-all");
        return Ok(0);
    }
    let Some(command) = cli.command else {
        anyhow::bail!(Error::Config("no subcommand given; see --help".into()));
    };
    let out = cli.out_dir.as_path();
    match command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            run_experiment(&text, cli.seed, out)
        }
        Command::Recurrence(a) => run_experiment(&config_from_flags("recurrence", &a)?, cli.seed, out),
        Command::Shadow(a) => run_experiment(&config_from_flags("shadow", &a)?, cli.seed, out),
        Command::Entropy(a) => run_experiment(&config_from_flags("entropy", &a)?, cli.seed, out),
        Command::Coding(a) => run_experiment(&config_from_flags("coding", &a)?, cli.seed, out),
        Command::Dendrite(a) => run_experiment(&config_from_flags("dendrite", &a)?, cli.seed, out),
        Command::Sphere(a) => run_experiment(&config_from_flags("sphere", &a)?, cli.seed, out),
        Command::ReproduceAll => run_reproduce_all(out),
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&config_schema())?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}
