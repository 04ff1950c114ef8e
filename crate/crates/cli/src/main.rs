use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ricci_forge_core::solutions::{family_by_tag, list_families};
use ricci_forge_core::{run_scenario, Error, Report, RunOptions, Scenario};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ricci-forge", version, about = "Mixed scalar curvature scenarios: run, cross-check, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (one scenario or an array) and write report.json plus CSV tables.
    Run(RunArgs),
    /// Like run, with every curvature evaluation taken by finite differences.
    Oracle(RunArgs),
    /// Print the catalog of built-in solution families.
    Families {
        /// Print only the entry with this tag.
        #[arg(long)]
        tag: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory for report.json and the CSV tables.
    #[arg(long, default_value = "ricci-forge-out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Serial evaluation and no timing, for byte-stable reports.
    #[arg(long)]
    deterministic: bool,
    /// Overrides the primary tolerance of the task.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::Run(a) => run(&a, false),
        Command::Oracle(a) => run(&a, true),
        Command::Families { tag } => families(tag.as_deref()),
    })
}

/// Prints a JSON diagnostic on stderr and returns the exit code for `e`.
fn fail(e: &Error, scenario: Option<usize>) -> u8 {
    let mut d = json!({"error": e.kind(), "message": e.to_string()});
    if let Error::Parse { pointer, .. } = e {
        d["pointer"] = json!(pointer);
    }
    if let Some(p) = e.point() {
        d["point"] = json!(p);
    }
    if let Some(i) = scenario {
        d["scenario"] = json!(i);
    }
    eprintln!("{d}");
    if e.is_input_error() {
        2
    } else {
        3
    }
}

fn run(a: &RunArgs, oracle: bool) -> u8 {
    let text = match fs::read_to_string(&a.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}", json!({"error": "io", "message": format!("cannot read {}: {e}", a.scenario.display())}));
            return 2;
        }
    };
    let scenarios = match Scenario::parse_many(&text) {
        Ok(s) => s,
        Err(e) => return fail(&e, None),
    };
    let batch = text.trim_start().starts_with('[');
    let opts = RunOptions {
        seed: a.seed,
        tolerance: a.tol,
        deterministic: a.deterministic,
        oracle,
    };
    let mut reports = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.iter().enumerate() {
        match run_scenario(sc, &opts) {
            Ok(r) => reports.push(r),
            Err(e) => return fail(&e, batch.then_some(i)),
        }
    }
    if let Err(e) = write_outputs(&a.out, &reports, batch) {
        eprintln!("{}", json!({"error": "io", "message": format!("{e:#}")}));
        return 2;
    }
    for r in &reports {
        print_summary(r);
    }
    println!("report: {}", a.out.join("report.json").display());
    if reports.iter().all(|r| r.pass) {
        0
    } else {
        1
    }
}

fn write_outputs(out: &Path, reports: &[Report], batch: bool) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let doc: Value = if batch {
        serde_json::to_value(reports)?
    } else {
        serde_json::to_value(&reports[0])?
    };
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    for (i, r) in reports.iter().enumerate() {
        for t in &r.tables {
            let name = if batch {
                format!("{i}-{}.csv", t.name)
            } else {
                format!("{}.csv", t.name)
            };
            t.write_csv(&out.join(name))?;
        }
    }
    Ok(())
}

fn print_summary(r: &Report) {
    let label = r.name.clone().unwrap_or_else(|| r.task.to_string());
    println!("{label} [{}] {}", r.task, if r.pass { "PASS" } else { "FAIL" });
    for c in &r.checks {
        println!(
            "  {:<30} {:>12.3e} <= {:<10.1e} {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
}

fn families(tag: Option<&str>) -> u8 {
    let out = match tag {
        Some(t) => match family_by_tag(t) {
            Ok(e) => serde_json::to_value(e),
            Err(e) => return fail(&e, None),
        },
        None => serde_json::to_value(list_families()),
    };
    println!("{}", serde_json::to_string_pretty(&out.expect("catalog serializes")).expect("json"));
    0
}
