use clap::{Parser, Subcommand, ValueEnum};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vahr_core::metrics::{read_jsonl, write_jsonl, LogRecord, MetricsReport};
use vahr_core::scenario::{
    compare, load_scenario, read_csv, replay_log, run, run_paced, serve, write_csv, write_json, CsvRow,
    GatewayConfig, OperatorMode, RunOutput, Scenario, ScenarioError,
};

#[derive(Parser)]
#[command(name = "vahr", about = "Voice-assistant multi-robot delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pace {
    Fast,
    Real,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its event log and report.
    Run {
        /// Scenario JSON; the bundled three-task scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// scripted-vahr or scripted-keyboard; overrides the scenario file.
        #[arg(long)]
        operator: Option<OperatorMode>,
        #[arg(long, value_enum, default_value_t = Pace::Fast)]
        pace: Pace,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        repeat: u64,
    },
    /// Recompute metrics from a log, or re-simulate it and compare.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Re-simulate and require a byte-identical log.
        #[arg(long)]
        verify: bool,
    },
    /// Export metrics for a batch of logs, optionally comparing methods.
    Report {
        /// Log files or directories of `.jsonl` logs.
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        compare: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Serve one live session over TCP.
    Serve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Logical milliseconds per wall-clock millisecond.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn scenario_from(path: Option<&Path>) -> Result<Scenario, ScenarioError> {
    match path {
        Some(p) => load_scenario(p),
        None => Ok(Scenario::bundled_full()),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn save(out_dir: &Path, output: &RunOutput) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let stem = format!("{}_seed{}", output.report.method, output.report.seed);
    let log_path = out_dir.join(format!("{stem}.jsonl"));
    let file = File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
    write_jsonl(&output.log, BufWriter::new(file)).map_err(|e| io_err(&log_path, e))?;
    let report_path = out_dir.join(format!("{stem}.report.json"));
    let text = serde_json::to_string_pretty(&output.report).expect("report serializes");
    fs::write(&report_path, text).map_err(|e| io_err(&report_path, e))?;
    Ok(log_path)
}

fn read_log(path: &Path) -> Result<Vec<LogRecord>, ScenarioError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e| io_err(path, e))
}

fn summary(output: &RunOutput, log_path: &Path) {
    let r = &output.report;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{} seed={} complete={} tasks={:?} rad={} fo_s={} log={}",
        r.method,
        r.seed,
        r.complete,
        r.task_outcomes,
        fmt(r.metrics.rad),
        fmt(r.metrics.fo_s),
        log_path.display()
    );
}

fn cmd_run(
    scenario: Option<PathBuf>,
    seed: u64,
    operator: Option<OperatorMode>,
    pace: Pace,
    out: PathBuf,
    repeat: u64,
) -> Result<ExitCode, ScenarioError> {
    let mut scenario = scenario_from(scenario.as_deref())?;
    if let Some(op) = operator {
        scenario = scenario.with_operator(op);
    }
    if scenario.file.operator == OperatorMode::Live {
        return Err(ScenarioError::Validation {
            field: "operator".into(),
            msg: "live sessions run under `serve`".into(),
        });
    }
    let mut code = ExitCode::SUCCESS;
    for s in seed..seed.saturating_add(repeat.max(1)) {
        let result = match pace {
            Pace::Fast => run(&scenario, s),
            Pace::Real => run_paced(&scenario, s, 1.0),
        };
        match result {
            Ok(output) => {
                let path = save(&out, &output)?;
                summary(&output, &path);
            }
            Err(ScenarioError::Timeout(output)) => {
                let path = save(&out, &output)?;
                eprintln!("seed {s}: timed out at {}ms", output.report.logical_duration_ms);
                summary(&output, &path);
                code = ExitCode::from(2);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(code)
}

fn cmd_replay(log: PathBuf, scenario: Option<PathBuf>, verify: bool) -> Result<ExitCode, ScenarioError> {
    let records = read_log(&log)?;
    if !verify && scenario.is_none() {
        let report = MetricsReport::from_log(&records).map_err(|e| ScenarioError::Log(e.to_string()))?;
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(ExitCode::SUCCESS);
    }
    let scenario = scenario_from(scenario.as_deref())?;
    let replayed = match replay_log(&scenario, &records) {
        Ok(out) => out,
        Err(ScenarioError::Timeout(out)) | Err(ScenarioError::SessionAbandoned(out)) => *out,
        Err(e) => return Err(e),
    };
    let original = vahr_core::scenario::log_hash(&records);
    if replayed.report.log_hash == original {
        println!("replay identical: {original}");
        println!("{}", serde_json::to_string_pretty(&replayed.report.metrics).expect("report serializes"));
        Ok(ExitCode::SUCCESS)
    } else {
        let diverged = records
            .iter()
            .zip(&replayed.log)
            .position(|(a, b)| a != b)
            .unwrap_or(records.len().min(replayed.log.len()));
        eprintln!(
            "replay diverged at record {diverged}: {} != {}",
            replayed.report.log_hash, original
        );
        Ok(ExitCode::from(3))
    }
}

fn collect_logs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, ScenarioError> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| io_err(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    Ok(paths)
}

fn cmd_report(inputs: Vec<PathBuf>, do_compare: bool, format: Format) -> Result<ExitCode, ScenarioError> {
    let mut reports = Vec::new();
    for path in collect_logs(&inputs)? {
        let records = read_log(&path)?;
        let report = MetricsReport::from_log(&records)
            .map_err(|e| ScenarioError::Log(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if do_compare {
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf)?;
        let rows: Vec<CsvRow> = read_csv(buf.as_slice())?;
        let comparisons = compare(&rows);
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &comparisons).map_err(|e| ScenarioError::Log(e.to_string()))?
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(["metric", "method", "n", "mean", "sd", "f", "p"])
                    .map_err(|e| ScenarioError::Log(e.to_string()))?;
                for c in &comparisons {
                    let f = c.anova.map(|a| a.f_stat.to_string()).unwrap_or_default();
                    let p = c.anova.map(|a| a.p_value.to_string()).unwrap_or_default();
                    for (method, g) in &c.groups {
                        w.write_record([
                            c.metric.as_str(),
                            method,
                            &g.n.to_string(),
                            &g.mean.to_string(),
                            &g.sd.to_string(),
                            &f,
                            &p,
                        ])
                        .map_err(|e| ScenarioError::Log(e.to_string()))?;
                    }
                }
                w.flush().map_err(|e| ScenarioError::Log(e.to_string()))?;
            }
        }
    } else {
        match format {
            Format::Csv => write_csv(&reports, &mut out)?,
            Format::Json => write_json(&reports, &mut out)?,
        }
    }
    writeln!(out).ok();
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(
    scenario: Option<PathBuf>,
    bind: String,
    seed: u64,
    time_scale: f64,
    out: PathBuf,
) -> Result<ExitCode, ScenarioError> {
    let scenario = scenario_from(scenario.as_deref())?.with_operator(OperatorMode::Live);
    let config = GatewayConfig {
        seed,
        time_scale,
        ..GatewayConfig::default()
    };
    eprintln!("listening on {bind}");
    match serve(&scenario, &bind, config) {
        Ok(output) => {
            let path = save(&out, &output)?;
            summary(&output, &path);
            Ok(ExitCode::SUCCESS)
        }
        Err(ScenarioError::SessionAbandoned(output)) | Err(ScenarioError::Timeout(output)) => {
            let path = save(&out, &output)?;
            eprintln!("session ended early: {}", output.report.end_reason);
            summary(&output, &path);
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            scenario,
            seed,
            operator,
            pace,
            out,
            repeat,
        } => cmd_run(scenario, seed, operator, pace, out, repeat),
        Cmd::Replay { log, scenario, verify } => cmd_replay(log, scenario, verify),
        Cmd::Report {
            inputs,
            compare,
            format,
        } => cmd_report(inputs, compare, format),
        Cmd::Serve {
            scenario,
            bind,
            seed,
            time_scale,
            out,
        } => cmd_serve(scenario, bind, seed, time_scale, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
