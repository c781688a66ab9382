//! Experiment configs, reports and the catalogue.
//!
//! A config names one experiment from [`list_experiments`] (or the
//! `acceptance` suite), its parameters and a seed. A suite runs its jobs in
//! order; job `i` gets the seed [`split_seed`]`(seed, i)` unless it fixes its
//! own. Reports are a pure function of the config and the build: wall-clock
//! data lives only in the `timing` field.

pub mod experiments;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Version tag of the report layout, checked against `schema/report.schema.json`.
pub const REPORT_SCHEMA: &str = "cberlab-report/1";

/// The acceptance-suite config shipped with the crate.
pub const ACCEPTANCE_CONFIG: &str = include_str!("../../configs/acceptance.json");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown experiment '{0}' (run `cberlab list` for the catalogue)")]
    UnknownExperiment(String),
    #[error("malformed config: {0}")]
    Config(String),
    #[error("bad parameters for '{id}': {msg}")]
    Params { id: String, msg: String },
    #[error("'{id}' failed: {msg}")]
    Failed { id: String, msg: String },
    #[error("cannot write {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Where the JSON report goes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Directory for CSV tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form name of this run.
    pub id: String,
    /// Catalogue id of the experiment.
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub outputs: Outputs,
}

/// One job of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    json!({})
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<ExperimentConfig, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// The shipped acceptance suite.
    pub fn acceptance() -> ExperimentConfig {
        Self::from_json_str(ACCEPTANCE_CONFIG).expect("shipped acceptance config parses")
    }

    /// The jobs this config runs: the suite's list, or the config itself.
    pub fn jobs(&self) -> Result<Vec<JobSpec>, HarnessError> {
        if self.experiment != SUITE {
            return Ok(vec![JobSpec { experiment: self.experiment.clone(), seed: Some(self.seed), params: self.params.clone() }]);
        }
        let jobs = self
            .params
            .get("jobs")
            .ok_or_else(|| HarnessError::Config("the acceptance suite needs params.jobs".into()))?;
        let jobs: Vec<JobSpec> =
            serde_json::from_value(jobs.clone()).map_err(|e| HarnessError::Config(format!("params.jobs: {e}")))?;
        if let Some(extra) = self.params.as_object().and_then(|o| o.keys().find(|k| *k != "jobs")) {
            return Err(HarnessError::Config(format!("unknown suite parameter '{extra}'")));
        }
        Ok(jobs)
    }
}

/// Catalogue id of the suite runner.
pub const SUITE: &str = "acceptance";

/// Seed of job `index` under `seed`: the first word of ChaCha8 seeded with
/// `seed` on stream `index + 1` (stream 0 is left to the caller).
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng.next_u64()
}

/// ChaCha8 seeded with `seed` on stream `index`: the generator of case
/// `index` inside a job.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Thread cap from `CBERLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("CBERLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|n| *n > 0)
}

/// Runs `f` on a pool of `threads` workers, or of `CBERLAB_THREADS` / the
/// rayon default when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(thread_cap) {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// A single PASS/FAIL line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: Value,
    pub tolerance: Value,
    /// On FAIL: the job that produced the check and the violating instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<Value>,
    #[serde(skip)]
    instance: Option<Value>,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, measured: Value, tolerance: Value) -> Check {
        Check { name: name.into(), pass, measured, tolerance, replay: None, instance: None }
    }

    /// Attaches the instance to replay if the check failed.
    pub fn instance(mut self, v: impl FnOnce() -> Value) -> Check {
        if !self.pass {
            self.instance = Some(v());
        }
        self
    }

    /// Attaches the first failing instance, if any.
    pub fn first_failure(mut self, v: Option<Value>) -> Check {
        if !self.pass {
            self.instance = v;
        }
        self
    }
}

/// A CSV table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let err = |e: csv::Error| HarnessError::Io { path: self.name.clone(), msg: e.to_string() };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io { path: self.name.clone(), msg: e.to_string() })?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// What an experiment returns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JobOutput {
    pub checks: Vec<Check>,
    pub data: Value,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobReport {
    pub index: usize,
    pub experiment: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub data: Value,
    pub tables: Vec<Table>,
}

impl JobReport {
    /// SHA-256 of the serialized job report.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("job reports serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub environment: Value,
    pub pass: bool,
    pub summary: Value,
    pub jobs: Vec<JobReport>,
    /// The only nondeterministic field.
    pub timing: Value,
}

impl Report {
    pub fn checks(&self) -> impl Iterator<Item = (&JobReport, &Check)> {
        self.jobs.iter().flat_map(|j| j.checks.iter().map(move |c| (j, c)))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    /// The report with `timing` removed, as compact JSON.
    pub fn deterministic_bytes(&self) -> Vec<u8> {
        let mut v = self.to_json();
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        serde_json::to_vec(&v).expect("reports serialize")
    }

    /// Writes the JSON report and CSV tables named in `outputs`.
    pub fn write_outputs(&self) -> Result<Vec<PathBuf>, HarnessError> {
        let io = |p: &Path, e: std::io::Error| HarnessError::Io { path: p.display().to_string(), msg: e.to_string() };
        let mut written = Vec::new();
        if let Some(path) = &self.config.outputs.report {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            }
            let text = serde_json::to_string_pretty(&self.to_json()).expect("reports serialize");
            std::fs::write(path, text + "\n").map_err(|e| io(path, e))?;
            written.push(path.clone());
        }
        if let Some(dir) = &self.config.outputs.csv_dir {
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            for job in &self.jobs {
                for t in &job.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    std::fs::write(&path, t.to_csv()?).map_err(|e| io(&path, e))?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}

/// Build and platform, without anything that changes between runs.
pub fn environment() -> Value {
    json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "debug_assertions": cfg!(debug_assertions),
        "rng": "ChaCha8",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub topic: &'static str,
}

/// Every experiment id with what it exercises.
pub fn list_experiments() -> &'static [ExperimentInfo] {
    experiments::CATALOGUE
}

/// Runs a config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let jobs = cfg.jobs()?;
    for job in &jobs {
        if !list_experiments().iter().any(|e| e.id == job.experiment) || job.experiment == SUITE {
            return Err(HarnessError::UnknownExperiment(job.experiment.clone()));
        }
    }
    let threads = thread_cap();
    let mut done: Vec<JobReport> = Vec::with_capacity(jobs.len());
    let mut job_ms = Vec::with_capacity(jobs.len());
    for (index, job) in jobs.iter().enumerate() {
        let seed = job.seed.unwrap_or_else(|| split_seed(cfg.seed, index as u64));
        let t = Instant::now();
        let out = if job.experiment == experiments::DETERMINISM {
            experiments::determinism(&job.params, &jobs[..index], &done, cfg.seed)?
        } else {
            with_threads(threads, || experiments::run(&job.experiment, &job.params, seed))?
        };
        job_ms.push(json!({"experiment": job.experiment, "ms": t.elapsed().as_millis() as u64}));
        done.push(finish_job(index, job, seed, out));
    }
    let total = done.iter().map(|j| j.checks.len()).sum::<usize>();
    let failed = done.iter().flat_map(|j| &j.checks).filter(|c| !c.pass).count();
    Ok(Report {
        schema: REPORT_SCHEMA,
        config: cfg.clone(),
        environment: environment(),
        pass: failed == 0,
        summary: json!({"jobs": done.len(), "checks": total, "failed": failed}),
        jobs: done,
        timing: json!({
            "started_unix_ms": started as u64,
            "total_ms": clock.elapsed().as_millis() as u64,
            "threads": threads.unwrap_or_else(rayon::current_num_threads),
            "jobs": job_ms,
        }),
    })
}

/// Runs one job outside a suite, for replays.
pub(crate) fn run_job(index: usize, job: &JobSpec, seed: u64, threads: Option<usize>) -> Result<JobReport, HarnessError> {
    let out = with_threads(threads, || experiments::run(&job.experiment, &job.params, seed))?;
    Ok(finish_job(index, job, seed, out))
}

fn finish_job(index: usize, job: &JobSpec, seed: u64, out: JobOutput) -> JobReport {
    let spec = json!({"experiment": job.experiment, "seed": seed, "params": job.params});
    let checks: Vec<Check> = out
        .checks
        .into_iter()
        .map(|mut c| {
            if !c.pass {
                c.replay = Some(json!({"job": spec, "instance": c.instance.take()}));
            }
            c
        })
        .collect();
    JobReport {
        index,
        experiment: job.experiment.clone(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
        data: out.data,
        tables: out.tables,
    }
}
