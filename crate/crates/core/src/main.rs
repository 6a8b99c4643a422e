use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Deserialize;

use bessplan::droop::build_requirements;
use bessplan::formulation::{build_model, census, export, summary, ExportFormat, MilpModel};
use bessplan::market::{degradation_costs, parse_market_list};
use bessplan::report::{emit, settle};
use bessplan::scenario::{load_dir, save_scenarios, synthesize_scenarios, SynthParams};
use bessplan::solver::{solve_bb, validate, Engine, SolverOptions, Status, BINARY_GUARDRAIL};
use bessplan::{BessConfig, Error, ScenarioSet};

/// Desk-scale defaults: hourly steps, two day-scenarios.
const DESK_STEP: u32 = 60;
const DESK_DAYS: usize = 2;

#[derive(Parser)]
#[command(name = "bessplan", version, about = "Plan battery bids across FCR-N, FCR-D and spot markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic day-scenarios and write them as CSV.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u64).range(1..=366))]
        days: u64,
        #[arg(long)]
        out: PathBuf,
        /// Step of the written traces in minutes.
        #[arg(long, default_value_t = 1)]
        step: u32,
    },
    /// Build, solve and report.
    Plan {
        #[command(flatten)]
        run: RunArgs,
        /// Write the model as MPS instead of solving.
        #[arg(long)]
        export_only: bool,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Wall-clock limit in seconds (makes the search non-deterministic).
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, value_enum, default_value_t = EngineArg::Decomposition)]
        engine: EngineArg,
    },
    /// Write the model in MPS or LP format.
    Export {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Mps)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    /// Scenario decomposition with per-scenario dynamic programs.
    Decomposition,
    /// LP-based branch and bound on the full model.
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Mps,
    Lp,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with frequency.csv, prices.csv and probabilities.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthesize scenarios with this seed when no data directory is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days: Option<usize>,
    /// Comma-separated subset of N, D, SDCH, SCH (or "none").
    #[arg(long)]
    markets: Option<String>,
    /// Degradation cost, EUR/MWh.
    #[arg(long)]
    cdeg: Option<f64>,
    #[arg(long)]
    step: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// File form of a run; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    data: Option<PathBuf>,
    seed: Option<u64>,
    days: Option<usize>,
    synth: Option<SynthParams>,
    bess: Option<BessConfig>,
    out: Option<PathBuf>,
    /// Allow a run with every market disabled.
    allow_idle_only: bool,
    node_limit: Option<usize>,
    time_limit_s: Option<f64>,
}

struct Run {
    scenarios: ScenarioSet,
    config: BessConfig,
    out: PathBuf,
    node_limit: Option<usize>,
    time_limit: Option<f64>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Refused(msg.into())
}

fn resolve(args: &RunArgs) -> Result<Run, Error> {
    let file: RunConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        None => RunConfig::default(),
    };
    let mut config = match file.bess {
        Some(b) => b,
        None => BessConfig {
            step_minutes: DESK_STEP,
            ..BessConfig::default()
        },
    };
    if let Some(step) = args.step {
        config.step_minutes = step;
    }
    if let Some(c) = args.cdeg {
        config.c_deg = c;
    }
    if let Some(list) = &args.markets {
        config.markets = parse_market_list(list)?;
    }
    if config.markets.is_empty() && !file.allow_idle_only {
        return Err(usage("no market enabled; set allow_idle_only in the config to run idle-only"));
    }
    config.validate()?;

    let data = args.data.clone().or(file.data);
    let scenarios = match data {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::validation("run", "data", format!("{} is not a directory", dir.display())));
            }
            load_dir(&dir)?
        }
        None => {
            let seed = args.seed.or(file.seed).unwrap_or(1);
            let days = args.days.or(file.days).unwrap_or(DESK_DAYS);
            if days == 0 {
                return Err(usage("--days must be at least 1"));
            }
            synthesize_scenarios(seed, days, &file.synth.unwrap_or_default())?
        }
    };
    let scenarios = scenarios.resample(config.step_minutes)?;
    Ok(Run {
        scenarios,
        config,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        node_limit: file.node_limit,
        time_limit: file.time_limit_s,
    })
}

fn build(run: &Run) -> Result<(MilpModel, bessplan::droop::EnergyRequirement, bessplan::market::DegradationSchedule), Error> {
    let req = build_requirements(&run.scenarios, &run.config)?;
    let deg = degradation_costs(&req, &run.config);
    let model = build_model(&run.scenarios, &req, &deg, &run.config)?;
    Ok((model, req, deg))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_census(model: &MilpModel) {
    let c = census(model);
    println!(
        "model: {} variables ({} binary), {} constraints",
        c.total_variables, c.binaries, c.total_constraints
    );
    for (family, n) in &c.constraints {
        println!("  family {family:>3}: {n}");
    }
}

fn cmd_synth(seed: u64, days: u64, out: &Path, step: u32) -> Result<ExitCode, Error> {
    let params = SynthParams {
        step_minutes: step,
        ..SynthParams::default()
    };
    let set = synthesize_scenarios(seed, days as usize, &params)?;
    save_scenarios(&set, out)?;
    println!("wrote {} scenarios to {}", set.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(run: &Run, format: Format) -> Result<ExitCode, Error> {
    let (model, _, _) = build(run)?;
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    let (fmt, name) = match format {
        Format::Mps => (ExportFormat::Mps, "model.mps"),
        Format::Lp => (ExportFormat::Lp, "model.lp"),
    };
    let path = run.out.join(name);
    export(&model, fmt, &path)?;
    write_json(&run.out.join("model_summary.json"), &summary(&model))?;
    print_census(&model);
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(
    run: &Run,
    export_only: bool,
    node_limit: Option<usize>,
    time_limit: Option<f64>,
    engine: EngineArg,
) -> Result<ExitCode, Error> {
    let (model, req, deg) = build(run)?;
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    write_json(&run.out.join("model_summary.json"), &summary(&model))?;
    print_census(&model);

    let n_bin = model.num_binaries();
    if export_only {
        let path = run.out.join("model.mps");
        export(&model, ExportFormat::Mps, &path)?;
        println!("wrote {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }
    if n_bin > BINARY_GUARDRAIL {
        return Err(Error::Solver(format!(
            "{n_bin} binaries exceed the built-in solver limit of {BINARY_GUARDRAIL}; \
             rerun with --export-only (or a coarser --step / fewer days) and solve the MPS file externally"
        )));
    }

    let time_limit = time_limit.or(run.time_limit);
    let opts = SolverOptions {
        engine: match engine {
            EngineArg::Decomposition => Engine::Decomposition,
            EngineArg::Lp => Engine::Lp,
        },
        node_limit: node_limit.or(run.node_limit),
        time_limit: time_limit.map(Duration::from_secs_f64),
        deterministic: time_limit.is_none(),
        ..SolverOptions::default()
    };
    let sol = solve_bb(&model, &opts)?;
    info!("{} nodes in {:.2?}", sol.node_count, sol.wall_time);
    if sol.status == Status::Infeasible {
        let dump = run.out.join("infeasible_model.lp");
        export(&model, ExportFormat::Lp, &dump)?;
        return Err(Error::Consistency(format!(
            "model reported infeasible although the no-bid plan is always feasible; model written to {}",
            dump.display()
        )));
    }
    let violations = validate(&sol, &model);
    write_json(&run.out.join("solution.json"), &sol.to_json(1))?;
    if !violations.is_empty() {
        write_json(&run.out.join("violations.json"), &violations)?;
        return Err(Error::Consistency(format!(
            "{} violations in the returned solution",
            violations.violations.len()
        )));
    }
    let report = settle(&sol, &run.scenarios, &req, &deg, &run.config)?;
    emit(&report, &run.out)?;

    println!("status: {:?}", sol.status);
    println!("expected profit: {:.4} EUR", report.expected_total);
    for t in &report.scenarios {
        println!("  {}: {:.4} EUR, idle {:.1}%", t.scenario_id, t.net, t.pct_idle);
    }
    println!("outputs in {}", run.out.display());
    if sol.status == Status::BoundLimit {
        warn!("search limit reached; gap {:.6}", sol.gap);
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Refused(_) => 2,
        Error::Solver(_) => 4,
        Error::Consistency(_) => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth { seed, days, out, step } => cmd_synth(*seed, *days, out, *step),
        Command::Plan {
            run,
            export_only,
            node_limit,
            time_limit,
            engine,
        } => resolve(run).and_then(|r| cmd_plan(&r, *export_only, *node_limit, *time_limit, *engine)),
        Command::Export { run, format } => resolve(run).and_then(|r| cmd_export(&r, *format)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
