//! The `tabtext` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::breaklab::{bundled_tables, run_break_suite_with, BreakOptions};
use crate::eval::{emit_report, metric_name, render_report, run_grid, EvalResult, ExperimentSpec, Outcome, ReportEntry};
use crate::ingest::{prepare, DatasetManifest};
use crate::table::Table;
use crate::vetting::{
    assess_fitness, compare_pair, curation_checks, CoverageMatrix, HttpClient, LlmClient, ReplayClient, DEFAULT_API_KEY_ENV,
};

mod config;

pub use config::{BreakConfig, ConfigError, ManifestRef, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INGEST: i32 = 2;
pub const EXIT_EVAL: i32 = 3;
pub const EXIT_BREAK: i32 = 4;
pub const EXIT_VET: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "tabtext", version, about = "Benchmark harness for tables with free-text columns")]
pub struct Cli {
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid and break cells.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and preprocess one dataset, print its report and cache the cleaned table.
    Ingest { manifest: PathBuf },
    /// Run an experiment grid from a TOML config.
    Eval { config: PathBuf },
    /// Run the text-injection scenarios.
    Break { config: Option<PathBuf> },
    /// Curation checks, and feature coverage for the given pairs.
    Vet(VetArgs),
    /// Re-render results.txt from a results directory.
    Report { dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct VetArgs {
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Compare dataset A against dataset B (by name). Repeatable.
    #[arg(long, num_args = 2, value_names = ["A", "B"], action = clap::ArgAction::Append)]
    pub pair: Vec<String>,
    /// Also ask for a green/yellow/red fitness verdict per dataset.
    #[arg(long)]
    pub fitness: bool,
    /// Replay canned responses (default).
    #[arg(long, conflicts_with = "live")]
    pub mock: bool,
    /// Call a chat-completions endpoint.
    #[arg(long)]
    pub live: bool,
    /// Directory of canned responses for --mock.
    #[arg(long, default_value = "llm_fixtures")]
    pub fixtures: PathBuf,
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    pub endpoint: String,
    #[arg(long, default_value = "gpt-4o")]
    pub model: String,
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
    /// Minimum milliseconds between live requests.
    #[arg(long, default_value_t = 1000)]
    pub rate_ms: u64,
    /// Skip the single-column signal test.
    #[arg(long)]
    pub no_signal: bool,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (result, code) = match &cli.command {
        Command::Ingest { manifest } => (cmd_ingest(manifest, &cli), EXIT_INGEST),
        Command::Eval { config } => (cmd_eval(config, &cli), EXIT_EVAL),
        Command::Break { config } => (cmd_break(config.as_deref(), &cli), EXIT_BREAK),
        Command::Vet(args) => (cmd_vet(args, &cli), EXIT_VET),
        Command::Report { dir } => (cmd_report(dir), EXIT_EVAL),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

type CmdResult = Result<(), String>;

fn write(path: &Path, body: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("out"))
}

fn jobs(cli: &Cli, cfg: Option<&RunConfig>) -> usize {
    cli.jobs.or_else(|| cfg.and_then(|c| c.jobs)).unwrap_or(1).max(1)
}

/// Cleaned cells as CSV; MISSING becomes an empty field.
pub fn table_snapshot(table: &Table) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.columns.iter().map(|c| c.name.as_str())).expect("in-memory write");
    for r in 0..table.n_rows {
        w.write_record(table.columns.iter().map(|c| c.values[r].as_label().unwrap_or_default())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn roles_sidecar(table: &Table) -> serde_json::Value {
    let roles: serde_json::Map<String, serde_json::Value> = table
        .columns
        .iter()
        .map(|c| (c.name.clone(), serde_json::to_value(c.role).expect("role serializes")))
        .collect();
    serde_json::json!({
        "dataset": table.name,
        "target": table.target.column,
        "task": table.task(),
        "roles": roles,
    })
}

pub fn cmd_ingest(manifest_path: &Path, cli: &Cli) -> CmdResult {
    let manifest = DatasetManifest::from_file(manifest_path).map_err(|e| e.to_string())?;
    let (table, report) = prepare(&manifest).map_err(|e| e.to_string())?;
    print!("{}", report.to_text());
    let dir = out_dir(cli, None);
    write(&dir.join(format!("{}.csv", table.name)), table_snapshot(&table))?;
    write(&dir.join(format!("{}.roles.json", table.name)), serde_json::to_string_pretty(&roles_sidecar(&table)).expect("json") + "\n")?;
    write(&dir.join(format!("{}.report.json", table.name)), serde_json::to_string_pretty(&report.to_json()).expect("json") + "\n")
}

pub fn cmd_eval(config_path: &Path, cli: &Cli) -> CmdResult {
    let cfg = RunConfig::from_file(config_path).map_err(|e| e.to_string())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let (specs, skipped) = cfg.expand(seed).map_err(|e| format!("config rejected before any run: {e}"))?;
    let results = run_grid(&specs, jobs(cli, Some(&cfg)));
    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut failures = Vec::new();
    for (spec, r) in specs.into_iter().zip(results) {
        match r {
            Ok(res) => entries.push(ReportEntry::done(res)),
            Err(e) => {
                failures.push(format!("{}: {e}", spec.label()));
                entries.push(ReportEntry { spec, outcome: Outcome::Failed(e.to_string()) });
            }
        }
    }
    entries.extend(skipped.into_iter().map(|spec| ReportEntry { spec, outcome: Outcome::Inapplicable }));
    let dir = out_dir(cli, Some(&cfg));
    let report = emit_report(&dir, &entries).map_err(|e| e.to_string())?;
    print!("{}", report.text);
    if entries.iter().any(|e| matches!(e.spec.model, crate::models::ModelKind::External { .. })) {
        println!("note: cells using an external model depend on that program's determinism");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(format!("{} experiment(s) failed:\n  {}", failures.len(), failures.join("\n  ")))
    }
}

pub fn cmd_break(config_path: Option<&Path>, cli: &Cli) -> CmdResult {
    let cfg = config_path.map(RunConfig::from_file).transpose().map_err(|e| e.to_string())?;
    let bc = cfg.as_ref().and_then(|c| c.break_lab.clone()).unwrap_or_default();
    let seed = cli.seed.or_else(|| cfg.as_ref().map(|c| c.seed)).unwrap_or(1);
    let mut tables = bundled_tables(bc.synthetic_tables);
    if let Some(c) = &cfg {
        for m in c.break_manifests().map_err(|e| e.to_string())? {
            tables.push(prepare(&m).map_err(|e| e.to_string())?.0);
        }
    }
    if tables.is_empty() {
        return Err("no tables to inject into".into());
    }
    let opts = BreakOptions { scenarios: bc.scenarios.clone(), subsample: bc.subsample, test_fraction: bc.test_fraction, seed };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs(cli, cfg.as_ref())).build().map_err(|e| e.to_string())?;
    let matrix = pool.install(|| run_break_suite_with(&tables, &bc.embedders, &bc.model, &opts)).map_err(|e| e.to_string())?;
    let text = matrix.to_text();
    print!("{text}");
    let dir = out_dir(cli, cfg.as_ref());
    write(&dir.join("break.csv"), matrix.to_csv())?;
    write(&dir.join("break.txt"), text)
}

fn llm_client(args: &VetArgs) -> Result<Box<dyn LlmClient>, String> {
    if args.live {
        let c = HttpClient::new(&args.endpoint, &args.model, &args.api_key_env, Duration::from_millis(args.rate_ms))
            .map_err(|e| e.to_string())?;
        Ok(Box::new(c))
    } else {
        Ok(Box::new(ReplayClient::new(&args.fixtures)))
    }
}

pub fn cmd_vet(args: &VetArgs, cli: &Cli) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let mut loaded: Vec<(DatasetManifest, Table)> = Vec::new();
    for p in &args.manifests {
        let m = DatasetManifest::from_file(p).map_err(|e| e.to_string())?;
        let (t, _) = prepare(&m).map_err(|e| format!("{}: {e}", m.name))?;
        loaded.push((m, t));
    }
    let find = |name: &str| {
        loaded.iter().map(|(_, t)| t).find(|t| t.name == name).ok_or_else(|| format!("--pair names unknown dataset {name:?}"))
    };
    let pairs: Vec<(&Table, &Table)> =
        args.pair.chunks(2).map(|c| Ok((find(&c[0])?, find(&c[1])?))).collect::<Result<_, String>>()?;
    let client = llm_client(args)?;
    let provenance = if client.is_live() { " (live LLM, not reproducible)" } else { "" };
    let dir = out_dir(cli, None);

    let mut text = String::new();
    let mut json_checks = serde_json::Map::new();
    for (m, t) in &loaded {
        let mut checks = curation_checks(m, t, seed);
        if args.no_signal {
            checks.retain(|c| !c.heuristic);
        }
        text.push_str(&format!("{}\n", t.name));
        for c in &checks {
            text.push_str(&format!("  {}\n", c.line()));
        }
        let mut entry = serde_json::json!({ "checks": checks });
        if args.fitness {
            let (color, rationale) = assess_fitness(client.as_ref(), t).map_err(|e| format!("{}: {e}", t.name))?;
            text.push_str(&format!("  fitness: {color:?}{provenance} - {}\n", rationale.lines().next().unwrap_or_default()));
            entry["fitness"] = serde_json::json!({ "color": color, "rationale": rationale });
        }
        json_checks.insert(t.name.clone(), entry);
    }
    write(&dir.join("checks.txt"), &text)?;
    write(&dir.join("checks.json"), serde_json::to_string_pretty(&json_checks).expect("json") + "\n")?;
    print!("{text}");

    if !pairs.is_empty() {
        let names: Vec<String> = loaded.iter().map(|(_, t)| t.name.clone()).collect();
        let mut matrix = CoverageMatrix::new(names);
        for (a, b) in pairs {
            let report = compare_pair(client.as_ref(), a, b).map_err(|e| format!("{} vs {}: {e}", a.name, b.name))?;
            matrix.insert(&report).map_err(|e| e.to_string())?;
            write(&dir.join(format!("match_{}__{}.json", a.name, b.name)), serde_json::to_string_pretty(&report).expect("json") + "\n")?;
        }
        write(&dir.join("coverage.csv"), matrix.to_csv())?;
        write(&dir.join("coverage_binary.csv"), matrix.to_binary_csv())?;
        println!("coverage{provenance}");
        print!("{}", matrix.to_csv());
    }
    Ok(())
}

/// Rebuilds report entries from `results.csv` and `manifest-lock`.
pub fn load_entries(dir: &Path) -> Result<Vec<ReportEntry>, String> {
    let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| format!("{}: {e}", dir.join(name).display()));
    let lock: serde_json::Value = serde_json::from_str(&read("manifest-lock")?).map_err(|e| format!("manifest-lock: {e}"))?;
    let csv_text = read("results.csv")?;
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| format!("results.csv lacks {name}"));
    let (i_hash, i_status, i_mean, i_std, i_folds) = (col("spec_hash")?, col("status")?, col("mean")?, col("std")?, col("per_fold")?);
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let cells = lock["cells"].as_array().ok_or("manifest-lock has no cells")?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?} in results.csv"));
    let mut entries = Vec::new();
    for (cell, row) in cells.iter().zip(&rows) {
        let spec: ExperimentSpec = serde_json::from_value(cell["spec"].clone()).map_err(|e| format!("manifest-lock: {e}"))?;
        if spec.hash() != row[i_hash] {
            return Err(format!("results.csv and manifest-lock disagree at {}", spec.label()));
        }
        let outcome = match &row[i_status] {
            "ok" | "below_cap" => Outcome::Done(EvalResult {
                metric_name: metric_name(&spec),
                per_fold: row[i_folds].split(';').map(num).collect::<Result<_, _>>()?,
                mean: num(&row[i_mean])?,
                std: num(&row[i_std])?,
                selection_applied: &row[i_status] == "ok",
                fold_fingerprints: Vec::new(),
                spec: spec.clone(),
            }),
            "inapplicable" => Outcome::Inapplicable,
            _ => Outcome::Failed("failed (details in the original results.txt)".into()),
        };
        entries.push(ReportEntry { spec, outcome });
    }
    if cells.len() != rows.len() {
        return Err("results.csv and manifest-lock have different cell counts".into());
    }
    Ok(entries)
}

pub fn cmd_report(dir: &Path) -> CmdResult {
    print!("{}", render_report(&load_entries(dir)?).text);
    Ok(())
}
