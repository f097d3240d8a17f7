use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gridtrade::checks::{self, Check};
use gridtrade::engine::trace::write_trace;
use gridtrade::engine::Transport;
use gridtrade::engine::{verify_emes, EngineConfig};
use gridtrade::experiments::output::{write_figures, write_stats};
use gridtrade::experiments::{
    compute_figures, monte_carlo_with, reference_spec, replicate_consumers, run_replicate, FigureOptions, ScenarioSpec,
};

#[derive(Parser)]
#[command(
    name = "gridtrade",
    version,
    about = "Stackelberg energy trading between a power station and consumers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of replicates.
    #[arg(long)]
    replicates: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Scenario file (TOML, `ScenarioSpec` field names).
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One leader/follower run with its per-round trace (`trace.csv`).
    Run {
        #[command(flatten)]
        common: Common,
        /// Replicate whose population is used.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Monte Carlo over every point of a scenario (`stats.csv`).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// The four figure studies, one CSV per panel.
    Figures {
        #[command(flatten)]
        common: Common,
    },
    /// Oracle, property and invariant checks; exits non-zero if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn load_scenario(common: &Common) -> Result<ScenarioSpec> {
    let mut spec = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioSpec::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => reference_spec(0, 1, vec![5]),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(replicates) = common.replicates {
        spec.replicates = replicates;
    }
    spec.validate()?;
    Ok(spec)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn run(common: &Common, replicate: u64) -> Result<()> {
    let spec = load_scenario(common)?;
    let point = spec.points()[0];
    let cfg = spec.grid_config(&point);
    let params = replicate_consumers(&spec, replicate, point.n)?;
    let (result, outcome) = run_replicate(&spec, &point, &params, &EngineConfig::default())?;
    let (path, file) = create(&common.out, "trace.csv")?;
    write_trace(&result, &params, file)?;
    let report = verify_emes(&result.energies, &result.prices, &params, &cfg)?;

    println!(
        "N = {}, E_def = {}, P = {}, p_max = {}",
        point.n, point.e_def, point.p, point.p_max
    );
    println!(
        "rounds: {} (fixed point: {})",
        result.outer_iterations,
        result.is_fixed_point()
    );
    println!("messages: {}", result.message_count);
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>12}",
        "ec", "E_n", "e_n", "p_n", "utility"
    );
    for (n, ec) in params.iter().enumerate() {
        println!(
            "{:>4} {:>10.3} {:>10.3} {:>10.4} {:>12.1}",
            ec.id, ec.available_energy, result.energies[n], result.prices[n], result.utilities[n]
        );
    }
    println!(
        "station cost: {:.1} (FIT at {}: {:.1})",
        result.total_cost, spec.fit_tariff, outcome.fit_cost
    );
    println!(
        "equilibrium check: {} (follower gain {:.2e}, leader drop {:.2e})",
        if report.passed() { "passed" } else { "failed" },
        report.follower_gain,
        report.leader_drop
    );
    println!("trace: {}", path.display());
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let spec = load_scenario(common)?;
    let engine = EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    };
    let stats = monte_carlo_with(&spec, &engine, |done, total| eprintln!("point {done}/{total}"))?;
    let (path, file) = create(&common.out, "stats.csv")?;
    write_stats(&stats, file)?;
    println!("{}", path.display());
    Ok(())
}

fn figures(common: &Common) -> Result<()> {
    if common.scenario.is_some() {
        anyhow::bail!("figures uses the built-in figure scenarios; --scenario applies to run and sweep");
    }
    let options = FigureOptions {
        seed: common.seed,
        replicates: common.replicates,
    };
    let data = compute_figures(options, |label, done, total| eprintln!("{label}: point {done}/{total}"))?;
    for path in write_figures(&data, &common.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(check: &Check) -> bool {
    println!(
        "{} {}: {}",
        if check.passed { "PASS" } else { "FAIL" },
        check.name,
        check.detail
    );
    check.passed
}

fn verify(common: &Common) -> Result<bool> {
    let seed = common.seed.unwrap_or(0);
    let runs = common.replicates.unwrap_or(1000);
    let study = checks::convergence_study(seed, runs, 5, 10)?;
    let results = [
        checks::oracle_equivalence(seed, 200)?,
        checks::social_optimality(seed, 20)?,
        checks::pricing_kkt(seed, 100)?,
        checks::convergence_check(&study),
        checks::discrimination_check(&study),
        checks::hygiene_check(seed, 10_000),
    ];
    let mut passed = results.iter().filter(|c| !report(c)).count() == 0;
    let verified = runs.div_ceil(10);
    println!(
        "{} equilibrium stability: {}/{verified} sampled runs pass",
        if study.emes_verified == verified {
            "PASS"
        } else {
            "FAIL"
        },
        study.emes_verified
    );
    passed &= study.emes_verified == verified;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common, replicate } => run(common, *replicate).map(|_| true),
        Command::Sweep { common } => sweep(common).map(|_| true),
        Command::Figures { common } => figures(common).map(|_| true),
        Command::Verify { common } => verify(common),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
