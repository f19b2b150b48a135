//! Command-line front end: run configs, validate schedules, analyze traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::diagnostics::LimitReport;
use crate::engine::{IterationTrace, StopCause};
use crate::error::{Error, Result};
use crate::hilbert::{all_finite, Vector};
use crate::scenarios;
use crate::schedules::{check_h3n, HypothesisReport, Schedule, Verdict, DEFAULT_PREFIX};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_FAILED_RUN: i32 = 3;
pub const EXIT_VIOLATED: i32 = 4;

const TRACE_MAGIC: &str = "# viscoflow-trace";
const OUT_ENV: &str = "VISCOFLOW_OUT";

#[derive(Parser, Debug)]
#[command(name = "viscoflow", version, about = "Viscosity approximation runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled scenario name (see list-scenarios).
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override stop.max_iters.
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write `<scenario>.trace.csv` and `<scenario>.summary.json`.
    Run {
        #[command(flatten)]
        source: Source,
        /// Run every config matching the pattern, concurrently.
        #[arg(long, conflicts_with_all = ["config", "scenario"])]
        sweep: Option<String>,
        /// Output directory; VISCOFLOW_OUT takes precedence.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check H3,N for a step-size schedule given as JSON.
    ValidateSchedule {
        #[arg(long)]
        config: PathBuf,
        /// Shift N.
        #[arg(long, default_value_t = 1)]
        shift: usize,
        /// Number of terms examined by the prefix heuristics.
        #[arg(long, default_value_t = DEFAULT_PREFIX)]
        prefix: usize,
    },
    /// Recheck the limit stored in a trace against its config.
    Analyze {
        trace: PathBuf,
        #[command(flatten)]
        source: Source,
    },
    /// Print the bundled scenario names.
    ListScenarios,
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run { source, sweep, out } => {
            let out = output_dir(out);
            match sweep {
                Some(pattern) => cmd_sweep(&pattern, &source, &out),
                None => load_source(&source).and_then(|cfg| cmd_run(&cfg, &out).map(|o| o.exit_code)),
            }
        }
        Command::ValidateSchedule { config, shift, prefix } => cmd_validate_schedule(&config, shift, prefix),
        Command::Analyze { trace, source } => load_source(&source).and_then(|cfg| cmd_analyze(&trace, &cfg)),
        Command::ListScenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .or(flag)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn apply_overrides(mut cfg: ExperimentConfig, source: &Source) -> ExperimentConfig {
    if let Some(seed) = source.seed {
        cfg.seed = seed;
    }
    if let Some(m) = source.max_iters {
        cfg.stop.max_iters = m;
    }
    cfg
}

fn load_source(source: &Source) -> Result<ExperimentConfig> {
    let cfg = match (&source.config, &source.scenario) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => scenarios::load(name)?,
        (None, None) => return Err(Error::Config("pass --config PATH or --scenario NAME".into())),
    };
    Ok(apply_overrides(cfg, source))
}

pub fn exit_code_for(cause: StopCause) -> i32 {
    match cause {
        StopCause::ResidualMet => EXIT_OK,
        StopCause::MaxIters => EXIT_MAX_ITERS,
        StopCause::Diverged | StopCause::InnerSolverFailure => EXIT_FAILED_RUN,
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stop_cause: StopCause,
    pub failure: Option<String>,
    pub iterations: usize,
    pub limit: Vec<f64>,
    pub retracted_limit: Option<Vec<f64>>,
    pub vi_report: Option<LimitReport>,
    pub h1n_report: Option<HypothesisReport>,
    pub wall_time_ms: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: RunSummary,
    pub trace_path: Option<PathBuf>,
    pub summary_path: PathBuf,
}

/// One stored row of a trace file.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub alpha: Option<f64>,
    pub x: Vector,
    pub y: Option<Vector>,
    pub step_residual: Option<f64>,
    pub fixres: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub config_sha256: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    /// Rows `every_k` apart plus the final row.
    pub fn from_trace(trace: &IterationTrace, every_k: usize, config_sha256: &str, seed: u64) -> Self {
        let k_last = trace.iterations();
        let rows = (0..=k_last)
            .filter(|n| n % every_k.max(1) == 0 || *n == k_last)
            .map(|n| TraceRow {
                n,
                alpha: trace.alpha_values.get(n).copied(),
                x: trace.iterates[n].clone(),
                y: trace.retracted.as_ref().map(|ys| ys[n].clone()),
                step_residual: trace.residuals.get(n).copied(),
                fixres: trace.fixed_point_residuals.get(n).copied(),
            })
            .collect();
        TraceFile {
            config_sha256: config_sha256.to_string(),
            seed,
            rows,
        }
    }

    pub fn iterates(&self) -> Vec<Vector> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let dim = self.rows.first().map_or(0, |r| r.x.len());
        let with_y = self.rows.first().is_some_and(|r| r.y.is_some());
        let mut header = vec!["n".to_string(), "alpha_n".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        if with_y {
            header.extend((1..=dim).map(|i| format!("y{i}")));
        }
        header.push("step_residual".into());
        header.push("fixres".into());

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.n.to_string(), opt(r.alpha)];
            rec.extend(r.x.iter().map(f64::to_string));
            if let Some(y) = &r.y {
                rec.extend(y.iter().map(f64::to_string));
            }
            rec.push(opt(r.step_residual));
            rec.push(opt(r.fixres));
            w.write_record(&rec)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .expect("csv output is utf-8");
        let mut out = String::new();
        writeln!(out, "{TRACE_MAGIC} config_sha256={} seed={}", self.config_sha256, self.seed).unwrap();
        out.push_str(&body);
        writeln!(out, "# end rows={}", self.rows.len()).unwrap();
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("trace parse error: {m}"));
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| bad("empty file"))?;
        let rest = first
            .strip_prefix(TRACE_MAGIC)
            .ok_or_else(|| bad("missing trace header"))?;
        let mut sha = None;
        let mut seed = None;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("config_sha256", v)) => sha = Some(v.to_string()),
                Some(("seed", v)) => seed = Some(v.parse::<u64>().map_err(|_| bad("bad seed"))?),
                _ => return Err(bad(&format!("unexpected header field {field:?}"))),
            }
        }
        let sha = sha.ok_or_else(|| bad("header lacks config_sha256"))?;
        let seed = seed.ok_or_else(|| bad("header lacks seed"))?;
        let trailer = text
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| bad("empty file"))?;
        let expected: usize = trailer
            .strip_prefix("# end rows=")
            .ok_or_else(|| bad("missing end marker; file is truncated"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad end marker"))?;

        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .flat_map(|l| [l, "\n"])
            .collect();
        let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let dim = cols.iter().filter(|c| c.starts_with('x')).count();
        let with_y = cols.iter().any(|c| c.starts_with('y'));
        let width = 4 + dim * if with_y { 2 } else { 1 };
        if dim == 0 || cols.len() != width || cols[0] != "n" || cols[1] != "alpha_n" {
            return Err(bad("unexpected columns"));
        }
        let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}"))) };
        let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(&e.to_string()))?;
            if rec.len() != width {
                return Err(bad("short row"));
            }
            let n = rec[0].parse::<usize>().map_err(|_| bad("bad row index"))?;
            let x = (0..dim).map(|i| num(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
            let y = if with_y {
                Some(Vector::from_vec(
                    (0..dim).map(|i| num(&rec[2 + dim + i])).collect::<Result<Vec<_>>>()?,
                ))
            } else {
                None
            };
            rows.push(TraceRow {
                n,
                alpha: opt(&rec[1])?,
                x: Vector::from_vec(x),
                y,
                step_residual: opt(&rec[width - 2])?,
                fixres: opt(&rec[width - 1])?,
            });
        }
        if rows.len() != expected || rows.is_empty() {
            return Err(bad(&format!("expected {expected} rows, found {}", rows.len())));
        }
        Ok(TraceFile {
            config_sha256: sha,
            seed,
            rows,
        })
    }
}

/// VI report at the last stored row, with the stored rows as the H2,p tail.
fn limit_report_for(exp: &Experiment, file: &TraceFile) -> Result<Option<LimitReport>> {
    let last = &file.rows.last().expect("nonempty").x;
    if exp.fix_set.is_none() || !all_finite(last) {
        return Ok(None);
    }
    exp.limit_report(last, Some(&file.iterates())).map(Some)
}

/// Runs one config, writing its trace and summary under `out`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let exp = cfg.build()?;
    let sha = cfg.sha256();
    let trace = exp.run()?;
    let file = TraceFile::from_trace(&trace, cfg.emit.every_k, &sha, cfg.seed);
    std::fs::create_dir_all(out)?;
    let trace_path = if cfg.emit.trace_csv {
        let p = out.join(format!("{}.trace.csv", cfg.scenario));
        std::fs::write(&p, file.to_csv()?)?;
        Some(p)
    } else {
        None
    };
    let vi_report = limit_report_for(&exp, &file)?;
    let h1n_report = if trace.stop_cause == StopCause::ResidualMet || trace.stop_cause == StopCause::MaxIters {
        exp.h1n(&trace).ok()
    } else {
        None
    };
    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        config_sha256: sha,
        seed: cfg.seed,
        stop_cause: trace.stop_cause,
        failure: trace.failure.clone(),
        iterations: trace.iterations(),
        limit: trace.last().iter().copied().collect(),
        retracted_limit: trace
            .retracted
            .as_ref()
            .map(|ys| ys.last().expect("nonempty").iter().copied().collect()),
        vi_report,
        h1n_report,
        wall_time_ms: trace.wall_time.as_secs_f64() * 1e3,
    };
    let summary_path = out.join(format!("{}.summary.json", cfg.scenario));
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome {
        exit_code: exit_code_for(trace.stop_cause),
        summary,
        trace_path,
        summary_path,
    })
}

fn cmd_sweep(pattern: &str, source: &Source, out: &Path) -> Result<i32> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("bad sweep pattern: {e}")))?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(e.to_string()))?;
    if paths.is_empty() {
        return Err(Error::Config(format!("no configs match {pattern:?}")));
    }
    let configs = paths
        .iter()
        .map(|p| ExperimentConfig::from_path(p).map(|c| apply_overrides(c, source)))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for c in &configs {
        if !seen.insert(c.scenario.as_str()) {
            return Err(Error::Config(format!("two sweep configs share the scenario name {:?}", c.scenario)));
        }
    }
    let codes: Vec<i32> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || cmd_run(c, out)))
            .collect();
        handles
            .into_iter()
            .zip(&configs)
            .map(|(h, c)| match h.join().expect("run thread panicked") {
                Ok(o) => {
                    println!("{}: {} (exit {})", c.scenario, o.summary.stop_cause.as_str(), o.exit_code);
                    o.exit_code
                }
                Err(e) => {
                    eprintln!("{}: error: {e}", c.scenario);
                    EXIT_ERROR
                }
            })
            .collect()
    });
    Ok(if codes.contains(&EXIT_ERROR) {
        EXIT_ERROR
    } else {
        codes.into_iter().max().unwrap_or(EXIT_OK)
    })
}

/// Parses a schedule and checks H3,N; exit 4 when violated.
pub fn validate_schedule(text: &str, shift: usize, prefix: usize) -> Result<(HypothesisReport, i32)> {
    let s: Schedule = serde_json::from_str(text).map_err(|e| Error::Config(format!("schedule: {e}")))?;
    let rep = check_h3n(&s, shift, prefix)?;
    let code = if rep.verdict == Verdict::Violated {
        EXIT_VIOLATED
    } else {
        EXIT_OK
    };
    Ok((rep, code))
}

fn cmd_validate_schedule(path: &Path, shift: usize, prefix: usize) -> Result<i32> {
    let (rep, code) = validate_schedule(&std::fs::read_to_string(path)?, shift, prefix)?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(code)
}

/// Rechecks a stored trace; exit 4 when the VI check fails.
pub fn analyze(trace_text: &str, cfg: &ExperimentConfig) -> Result<(LimitReport, i32)> {
    let file = TraceFile::parse(trace_text)?;
    if file.config_sha256 != cfg.sha256() {
        return Err(Error::Config("trace/config mismatch".into()));
    }
    let exp = cfg.build()?;
    let rep = limit_report_for(&exp, &file)?.ok_or_else(|| {
        Error::Config("cannot analyze: no analysis.fix_set or the stored limit is not finite".into())
    })?;
    let code = if rep.pass { EXIT_OK } else { EXIT_VIOLATED };
    Ok((rep, code))
}

fn cmd_analyze(trace: &Path, cfg: &ExperimentConfig) -> Result<i32> {
    let (rep, code) = analyze(&std::fs::read_to_string(trace)?, cfg)?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(code)
}
