use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bebfleet::depot::events_csv;
use bebfleet::harness::{
    compare, gantt_svg, plan_csv, read_plan_csv, replay, soc_trace_csv, solve, HarnessError,
    LoadedScenario, ReplayConfig, RunReport, SimulateReport, SolveMode,
};
use bebfleet::solver::{
    build_instance, simulate_plan, validate_plan, Budget, Instance, SolveError,
};
use bebfleet::trajectory::{
    build_library, write_library, DepotMap, LibraryEntry, PlannerConfig, VehicleGeometry,
};
use clap::{Args, Parser, Subcommand};

/// Exit codes.
const MALFORMED: u8 = 1;
const INFEASIBLE: u8 = 2;
const INDETERMINATE: u8 = 3;
const VIOLATIONS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "bebfleet",
    version,
    about = "Plan and replay a battery-electric bus day"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign blocks and schedule charging.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a plan through the depot with scaled consumption.
    Simulate {
        scenario: PathBuf,
        plan: PathBuf,
        /// Actual block consumption over predicted.
        #[arg(long, default_value_t = 1.0)]
        error_factor: f64,
        /// Re-solve the rest of the day when a pull-out check fails.
        #[arg(long)]
        replan: bool,
        #[arg(long, default_value = "2000000", value_parser = parse_budget)]
        budget: Budget,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Plan with true and with scaled energy, replay both against the truth.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        plan_factor: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build the maneuver library of a depot map.
    Parking {
        map: PathBuf,
        /// Vehicle geometry JSON; a 40 ft bus when omitted.
        geometry: Option<PathBuf>,
        /// Planner settings JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, conflicts_with = "heuristic")]
    exact: bool,
    #[arg(long)]
    heuristic: bool,
    /// Node count (deterministic) or a duration such as `60s`.
    #[arg(long, default_value = "2000000", value_parser = parse_budget)]
    budget: Budget,
}

impl SolverArgs {
    fn mode(&self) -> SolveMode {
        if self.heuristic {
            SolveMode::Heuristic
        } else {
            SolveMode::Exact
        }
    }
}

fn parse_budget(s: &str) -> Result<Budget, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(Budget::nodes(n));
    }
    humantime::parse_duration(s)
        .map(Budget::time)
        .map_err(|e| format!("`{s}`: {e}"))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Defects(defects) => {
                let lines: Vec<String> = defects.iter().map(|d| format!("  {d}")).collect();
                Failure::new(
                    MALFORMED,
                    format!("{} defect(s):\n{}", defects.len(), lines.join("\n")),
                )
            }
            HarnessError::Solve(e) => e.into(),
            other => Failure::new(MALFORMED, other.to_string()),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::Infeasible => INFEASIBLE,
            SolveError::Indeterminate { .. } | SolveError::HeuristicFailed => INDETERMINATE,
        };
        Failure::new(code, e.to_string())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), contents))
        .map_err(|e| {
            Failure::new(
                MALFORMED,
                format!("cannot write {}: {e}", dir.join(name).display()),
            )
        })
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    write(dir, name, &(text + "\n"))
}

fn load(path: &Path) -> Result<(LoadedScenario, Instance), Failure> {
    let loaded = LoadedScenario::from_file(path)?;
    let inst = build_instance(&loaded.scenario, &loaded.twins).map_err(HarnessError::from)?;
    Ok((loaded, inst))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(MALFORMED, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new(MALFORMED, format!("{}: {e}", path.display())))
}

fn cmd_solve(scenario: &Path, args: &SolverArgs, out: &Path) -> Result<(), Failure> {
    let (_, inst) = load(scenario)?;
    let clock = Instant::now();
    let plan = solve(&inst, args.mode(), args.budget)?;
    let wall = clock.elapsed();
    let violations = validate_plan(&inst, &plan);
    let report = RunReport::new(&inst, &plan, &violations, 0, wall);
    let s = inst.scenario();
    write(out, "plan.csv", &plan_csv(&inst, &plan))?;
    write(out, "soc_trace.csv", &soc_trace_csv(s, &plan.soc_trace))?;
    write(
        out,
        "gantt.svg",
        &gantt_svg(&inst, &plan, &format!("plan, {}", plan.certificate)),
    )?;
    write_json(out, "report.json", &report)?;
    println!(
        "objective {:.3} mi, {} certificate, {} violation(s), {:.2} s",
        plan.objective_miles,
        plan.certificate,
        violations.len(),
        wall.as_secs_f64()
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            VIOLATIONS,
            "solver returned a plan that fails validation",
        ))
    }
}

fn cmd_simulate(
    scenario: &Path,
    plan_path: &Path,
    cfg: ReplayConfig,
    out: &Path,
) -> Result<(), Failure> {
    let (loaded, inst) = load(scenario)?;
    let text = std::fs::read_to_string(plan_path).map_err(|e| {
        Failure::new(
            MALFORMED,
            format!("cannot read {}: {e}", plan_path.display()),
        )
    })?;
    let (decisions, certificate) = read_plan_csv(&loaded.scenario, &text)?;
    let mut plan = simulate_plan(&inst, &decisions, 1.0);
    plan.certificate = certificate;

    let clock = Instant::now();
    let outcome = replay(&inst, &plan, &loaded.layout, &cfg).map_err(HarnessError::from)?;
    let report = SimulateReport::new(&inst, &plan, &outcome, &cfg, clock.elapsed());
    let s = inst.scenario();
    write(
        out,
        "realized_plan.csv",
        &plan_csv(&inst, &outcome.realized),
    )?;
    write(
        out,
        "soc_trace.csv",
        &soc_trace_csv(s, &outcome.realized.soc_trace),
    )?;
    write(out, "events.csv", &events_csv(s, &outcome.events))?;
    write(
        out,
        "gantt.svg",
        &gantt_svg(
            &inst,
            &outcome.realized,
            &format!("realized, error factor {}", cfg.error_factor),
        ),
    )?;
    write_json(out, "report.json", &report)?;
    println!(
        "realized {:.3} of {:.3} mi planned, {} trigger(s), {} replan(s), {} violation(s)",
        outcome.realized_miles(),
        plan.objective_miles,
        outcome.triggers,
        outcome.replans,
        outcome.violations.len()
    );
    if outcome.violations.is_empty() {
        return Ok(());
    }
    for v in outcome.violations.iter().take(20) {
        eprintln!("  {v}");
    }
    if outcome.violations.len() > 20 {
        eprintln!("  ... see report.json");
    }
    if cfg.replan {
        // Replanning ran; the report records the day as degraded.
        eprintln!(
            "warning: degraded day, {} violation(s) after replanning",
            outcome.violations.len()
        );
        return Ok(());
    }
    Err(Failure::new(
        VIOLATIONS,
        format!(
            "{} violation(s) in the realized day",
            outcome.violations.len()
        ),
    ))
}

fn cmd_compare(scenario: &Path, factor: f64, args: &SolverArgs, out: &Path) -> Result<(), Failure> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Failure::new(MALFORMED, "--plan-factor must be positive"));
    }
    let (loaded, inst) = load(scenario)?;
    let report = compare(&inst, &loaded.layout, factor, args.mode(), args.budget)?;
    write_json(out, "compare.json", &report)?;
    println!(
        "realized {:.3} mi (true) vs {:.3} mi (x{factor}), ratio {:.4}",
        report.realized_miles_true, report.realized_miles_scaled, report.utilization_ratio
    );
    Ok(())
}

fn cmd_parking(
    map: &Path,
    geometry: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let map = DepotMap::from_json_file(map).map_err(|e| Failure::new(MALFORMED, e.to_string()))?;
    let geom: VehicleGeometry = match geometry {
        Some(p) => read_json(p)?,
        None => VehicleGeometry::default(),
    };
    geom.validate()
        .map_err(|e| Failure::new(MALFORMED, e.to_string()))?;
    let cfg: PlannerConfig = match config {
        Some(p) => read_json(p)?,
        None => PlannerConfig::default(),
    };
    let clock = Instant::now();
    let lib = build_library(&map, &geom, &cfg);
    write_library(out, &lib)
        .map_err(|e| Failure::new(MALFORMED, format!("cannot write library: {e}")))?;
    let planned = lib
        .entries
        .values()
        .filter(|e| matches!(e, LibraryEntry::Planned(_)))
        .count();
    let blocked = lib
        .entries
        .values()
        .filter(|e| matches!(e, LibraryEntry::Blocked { .. }))
        .count();
    println!(
        "{} key(s): {planned} planned, {blocked} blocked, {:.2} s",
        lib.entries.len(),
        clock.elapsed().as_secs_f64()
    );
    for (key, entry) in &lib.entries {
        if let LibraryEntry::Blocked { reason } = entry {
            println!("  blocked {}: {reason}", key.file_stem());
        }
    }
    let failures = lib.failures();
    if failures.is_empty() {
        return Ok(());
    }
    for key in &failures {
        eprintln!("  failed {}", key.file_stem());
    }
    Err(Failure::new(
        VIOLATIONS,
        format!("{} key(s) failed", failures.len()),
    ))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            scenario,
            solver,
            out,
        } => cmd_solve(&scenario, &solver, &out),
        Command::Simulate {
            scenario,
            plan,
            error_factor,
            replan,
            budget,
            out,
        } => {
            if !(error_factor.is_finite() && error_factor >= 0.0) {
                return Err(Failure::new(
                    MALFORMED,
                    "--error-factor must be non-negative",
                ));
            }
            let cfg = ReplayConfig {
                error_factor,
                replan,
                budget,
            };
            cmd_simulate(&scenario, &plan, cfg, &out)
        }
        Command::Compare {
            scenario,
            plan_factor,
            solver,
            out,
        } => cmd_compare(&scenario, plan_factor, &solver, &out),
        Command::Parking {
            map,
            geometry,
            config,
            out,
        } => cmd_parking(&map, geometry.as_deref(), config.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;

    #[test]
    fn budgets_parse_as_nodes_or_durations() {
        assert_eq!(parse_budget("500").unwrap(), Budget::nodes(500));
        assert_eq!(
            parse_budget("60s").unwrap(),
            Budget::time(Duration::from_secs(60))
        );
        assert!(parse_budget("soon").is_err());
    }
}
