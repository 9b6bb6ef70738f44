//! Experiment specs and the commands behind the `leadopt` binary.
//!
//! Specs use a flat `key = value` text format with `cluster.`, `step.`,
//! `noise.`, `objective.` and `init.` prefixes. Blank lines and `#` comments
//! are ignored; every key is optional and defaults as in [`ExperimentSpec::default`].

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::leader::{GlobalRule, SelectionMode};
use crate::linalg::ParamVector;
use crate::objectives::{
    easgd_counterexample_f, matrix_completion_problem, quadratic_with_condition, sinc2d, Objective,
    ObjectiveError,
};
use crate::rng::SimRng;
use crate::sim::{
    fmt_float, run, run_synchronous, write_trace_csv, ClusterConfig, EventKind, Method,
    PullScaling, Schedule, SimError,
};
use crate::steps::{StepError, StepParams};
use crate::theory::{self, BoundReport, TheoryError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

impl BenchError {
    fn io(path: &Path, source: io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveName {
    Quadratic,
    MatrixCompletion,
    Sinc2d,
    EasgdCounterexample,
}

impl ObjectiveName {
    const ALL: [(ObjectiveName, &'static str); 4] = [
        (ObjectiveName::Quadratic, "quadratic"),
        (ObjectiveName::MatrixCompletion, "matrix_completion"),
        (ObjectiveName::Sinc2d, "sinc2d"),
        (ObjectiveName::EasgdCounterexample, "easgd_counterexample"),
    ];
}

/// Recipe for building an objective; every field is kept so specs round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveName,
    pub dim: usize,
    pub kappa: f64,
    pub d: usize,
    pub r: usize,
    pub seed: u64,
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective, ObjectiveError> {
        let mut rng = SimRng::new(self.seed);
        match self.kind {
            ObjectiveName::Quadratic => quadratic_with_condition(self.dim, self.kappa, &mut rng),
            ObjectiveName::MatrixCompletion => matrix_completion_problem(self.d, self.r, &mut rng),
            ObjectiveName::Sinc2d => Ok(sinc2d()),
            ObjectiveName::EasgdCounterexample => easgd_counterexample_f(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Runner {
    Async,
    Lockstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub runner: Runner,
    pub config: ClusterConfig,
    pub objective: ObjectiveSpec,
    /// Initial points are i.i.d. `N(0, init_scale²)` per coordinate.
    pub init_scale: f64,
    pub init_seed: u64,
    /// Independent runs; trial `t` uses seed `cluster.seed + t`.
    pub trials: u64,
    /// Output path prefix.
    pub out: String,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let step = StepParams {
            eta: 0.01,
            lambda: 0.1,
            lambda_g: 0.0,
            beta: None,
        };
        Self {
            name: "experiment".into(),
            runner: Runner::Async,
            config: ClusterConfig::new(Method::Lsgd, 1, 4, step),
            objective: ObjectiveSpec {
                kind: ObjectiveName::Quadratic,
                dim: 8,
                kappa: 10.0,
                d: 20,
                r: 2,
                seed: 0,
            },
            init_scale: 1.0,
            init_seed: 0,
            trials: 1,
            out: "leadopt-run".into(),
        }
    }
}

fn enum_str<T: Copy + PartialEq>(table: &[(T, &'static str)], v: T) -> &'static str {
    table
        .iter()
        .find(|(t, _)| *t == v)
        .map(|(_, s)| *s)
        .expect("complete table")
}

fn enum_parse<T: Copy>(table: &[(T, &'static str)], s: &str) -> Result<T, String> {
    table
        .iter()
        .find(|(_, name)| *name == s)
        .map(|(t, _)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = table.iter().map(|(_, n)| *n).collect();
            format!("expected one of {}", names.join(", "))
        })
}

const RUNNERS: [(Runner, &str); 2] = [(Runner::Async, "async"), (Runner::Lockstep, "lockstep")];
const SELECTIONS: [(SelectionMode, &str); 2] = [
    (SelectionMode::Exact, "exact"),
    (SelectionMode::Stochastic, "stochastic"),
];
const SCHEDULES: [(Schedule, &str); 2] = [
    (Schedule::Constant, "constant"),
    (Schedule::OneOverK, "theta_one_over_k"),
];
const SCALINGS: [(PullScaling, &str); 2] = [
    (PullScaling::Absolute, "absolute"),
    (PullScaling::LearningRate, "learning_rate"),
];
const RULES: [(GlobalRule, &str); 2] = [
    (GlobalRule::AllWorkers, "all_workers"),
    (GlobalRule::AmongLocalLeaders, "among_local_leaders"),
];

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

impl ExperimentSpec {
    /// Flat text form; [`ExperimentSpec::parse`] inverts it exactly.
    pub fn to_flat(&self) -> String {
        let c = &self.config;
        let o = &self.objective;
        let speeds: Vec<String> = c.speeds.iter().map(|s| format!("{s:?}")).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("runner", enum_str(&RUNNERS, self.runner).into());
        kv("trials", self.trials.to_string());
        kv("out", self.out.clone());
        kv("objective", enum_str(&ObjectiveName::ALL, o.kind).into());
        kv("objective.dim", o.dim.to_string());
        kv("objective.kappa", format!("{:?}", o.kappa));
        kv("objective.d", o.d.to_string());
        kv("objective.r", o.r.to_string());
        kv("objective.seed", o.seed.to_string());
        kv("init.scale", format!("{:?}", self.init_scale));
        kv("init.seed", self.init_seed.to_string());
        kv("cluster.n", c.n.to_string());
        kv("cluster.l", c.l.to_string());
        kv("cluster.method", c.method.as_str().into());
        kv("cluster.tau", c.tau.to_string());
        kv("cluster.tau_g", c.tau_g.to_string());
        kv(
            "cluster.selection",
            enum_str(&SELECTIONS, c.selection).into(),
        );
        kv("cluster.selection_window", c.selection_window.to_string());
        kv(
            "cluster.leader_first_step_only",
            c.leader_first_step_only.to_string(),
        );
        kv(
            "cluster.eta_schedule",
            enum_str(&SCHEDULES, c.eta_schedule).into(),
        );
        kv(
            "cluster.lambda_schedule",
            enum_str(&SCHEDULES, c.lambda_schedule).into(),
        );
        kv("cluster.speeds", speeds.join(","));
        kv("cluster.seed", c.seed.to_string());
        kv("cluster.max_total_steps", c.max_total_steps.to_string());
        kv(
            "cluster.pull_scaling",
            enum_str(&SCALINGS, c.pull_scaling).into(),
        );
        kv(
            "cluster.global_rule",
            enum_str(&RULES, c.global_rule).into(),
        );
        kv(
            "cluster.shared_selection_noise",
            c.shared_selection_noise.to_string(),
        );
        kv("cluster.step_tolerance", opt_float(c.step_tolerance));
        kv("step.eta", format!("{:?}", c.step.eta));
        kv("step.lambda", format!("{:?}", c.step.lambda));
        kv("step.lambda_g", format!("{:?}", c.step.lambda_g));
        kv("step.beta", opt_float(c.step.beta));
        kv("noise.sigma2", format!("{:?}", c.noise.sigma2));
        kv("noise.nu", format!("{:?}", c.noise.nu));
        kv("noise.sigma_f", format!("{:?}", c.noise.sigma_f));
        s
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut spec = ExperimentSpec::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(BenchError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let fail = |message: String| BenchError::Parse {
                line,
                key: key.to_string(),
                message,
            };
            if !seen.insert(key.to_string()) {
                return Err(fail("duplicate key".into()));
            }
            spec.set(key, value).map_err(fail)?;
        }
        spec.config.validate()?;
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        fn float(v: &str) -> Result<f64, String> {
            let x: f64 = num(v)?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{v}` is not finite"))
            }
        }
        fn opt(v: &str) -> Result<Option<f64>, String> {
            if v == "none" {
                Ok(None)
            } else {
                float(v).map(Some)
            }
        }
        fn boolean(v: &str) -> Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("expected true or false, got `{v}`")),
            }
        }
        let c = &mut self.config;
        let o = &mut self.objective;
        match key {
            "name" => self.name = value.to_string(),
            "runner" => self.runner = enum_parse(&RUNNERS, value)?,
            "trials" => self.trials = num(value)?,
            "out" => self.out = value.to_string(),
            "objective" => o.kind = enum_parse(&ObjectiveName::ALL, value)?,
            "objective.dim" => o.dim = num(value)?,
            "objective.kappa" => o.kappa = float(value)?,
            "objective.d" => o.d = num(value)?,
            "objective.r" => o.r = num(value)?,
            "objective.seed" => o.seed = num(value)?,
            "init.scale" => self.init_scale = float(value)?,
            "init.seed" => self.init_seed = num(value)?,
            "cluster.n" => c.n = num(value)?,
            "cluster.l" => c.l = num(value)?,
            "cluster.method" => c.method = value.parse()?,
            "cluster.tau" => c.tau = num(value)?,
            "cluster.tau_g" => c.tau_g = num(value)?,
            "cluster.selection" => c.selection = enum_parse(&SELECTIONS, value)?,
            "cluster.selection_window" => c.selection_window = num(value)?,
            "cluster.leader_first_step_only" => c.leader_first_step_only = boolean(value)?,
            "cluster.eta_schedule" => c.eta_schedule = enum_parse(&SCHEDULES, value)?,
            "cluster.lambda_schedule" => c.lambda_schedule = enum_parse(&SCHEDULES, value)?,
            "cluster.speeds" => {
                c.speeds = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| float(s.trim()))
                        .collect::<Result<_, _>>()?
                }
            }
            "cluster.seed" => c.seed = num(value)?,
            "cluster.max_total_steps" => c.max_total_steps = num(value)?,
            "cluster.pull_scaling" => c.pull_scaling = enum_parse(&SCALINGS, value)?,
            "cluster.global_rule" => c.global_rule = enum_parse(&RULES, value)?,
            "cluster.shared_selection_noise" => c.shared_selection_noise = boolean(value)?,
            "cluster.step_tolerance" => c.step_tolerance = opt(value)?,
            "step.eta" => c.step.eta = float(value)?,
            "step.lambda" => c.step.lambda = float(value)?,
            "step.lambda_g" => c.step.lambda_g = float(value)?,
            "step.beta" => c.step.beta = opt(value)?,
            "noise.sigma2" => c.noise.sigma2 = float(value)?,
            "noise.nu" => c.noise.nu = float(value)?,
            "noise.sigma_f" => c.noise.sigma_f = float(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn initial_points(&self, dim: usize) -> Vec<ParamVector> {
        let mut rng = SimRng::new(self.init_seed);
        (0..self.config.workers())
            .map(|_| {
                ParamVector::from_raw((0..dim).map(|_| self.init_scale * rng.normal()).collect())
            })
            .collect()
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::io(path, e))
}

/// SHA-256 of the little-endian bytes of every coordinate, in order.
pub fn hash_points(points: &[ParamVector]) -> String {
    let mut h = Sha256::new();
    for p in points {
        for v in p.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn min_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Matrix-completion comparison settings.
#[derive(Debug, Clone, PartialEq)]
pub struct McBenchOptions {
    pub d: usize,
    pub ranks: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub steps: u64,
    pub workers: usize,
    pub eta: f64,
    pub lambda: f64,
    /// Write every `curve_stride`-th step of the curves (the last step is always written).
    pub curve_stride: u64,
    pub out: PathBuf,
}

impl McBenchOptions {
    /// Full protocol: d = 1000, ranks 1, 10, 50, 100.
    pub fn full(out: PathBuf) -> Self {
        Self {
            d: 1000,
            ranks: vec![1, 10, 50, 100],
            trials: 10,
            seed: 0,
            steps: 20_000,
            workers: 8,
            eta: 5e-4,
            lambda: 0.2,
            curve_stride: 1,
            out,
        }
    }

    /// Desk-scale protocol: d = 100, ranks 1 and 10.
    pub fn desk(out: PathBuf) -> Self {
        Self {
            d: 100,
            ranks: vec![1, 10],
            ..Self::full(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTrial {
    pub rank: usize,
    pub trial: u64,
    pub init_hash: String,
    /// Best-worker objective at the shared starting points.
    pub f0: f64,
    pub lgd_final: f64,
    pub eagd_final: f64,
    /// Lowest best-worker value seen over the run.
    pub lgd_min: f64,
    pub eagd_min: f64,
}

impl McTrial {
    pub fn lgd_reaches(&self, ratio: f64) -> bool {
        self.lgd_min <= ratio * self.f0
    }

    pub fn eagd_reaches(&self, ratio: f64) -> bool {
        self.eagd_min <= ratio * self.f0
    }
}

struct Curve {
    best: Vec<f64>,
    final_best: f64,
}

fn mc_curve(
    cfg: &ClusterConfig,
    obj: &Objective,
    init: &[ParamVector],
) -> Result<Curve, BenchError> {
    let mut best = Vec::with_capacity(cfg.max_total_steps as usize / cfg.workers() + 1);
    let run = run_synchronous(cfg, obj, init, |info| {
        best.push(min_value(info.values));
        true
    })?;
    let (_, final_best) = run.state.best_worker(obj);
    best.push(final_best);
    Ok(Curve { best, final_best })
}

/// LGD versus EAGD from identical random starts on random low-rank targets.
///
/// Writes `curves.csv` (`rank,trial,method,step,best_f`) and `summary.csv`
/// into `opts.out`.
pub fn cmd_mc_bench(opts: &McBenchOptions) -> Result<Vec<McTrial>, BenchError> {
    if opts.ranks.is_empty() || opts.ranks.iter().any(|&r| r == 0 || r > opts.d) {
        return Err(BenchError::Usage(format!(
            "ranks must lie in 1..={}, got {:?}",
            opts.d, opts.ranks
        )));
    }
    if opts.trials == 0 || opts.steps == 0 || opts.workers == 0 || opts.curve_stride == 0 {
        return Err(BenchError::Usage(
            "trials, steps, workers and stride must be positive".into(),
        ));
    }
    let curves_path = opts.out.join("curves.csv");
    let mut curves = create(&curves_path)?;
    let io_err = |e| BenchError::io(&curves_path, e);
    writeln!(curves, "rank,trial,method,step,best_f").map_err(io_err)?;

    let root = SimRng::new(opts.seed);
    let p = opts.workers;
    let mut lgd = ClusterConfig::new(
        Method::Lgd,
        1,
        p,
        StepParams::new(opts.eta, opts.lambda, 0.0)?,
    );
    lgd.pull_scaling = PullScaling::LearningRate;
    lgd.max_total_steps = opts.steps * p as u64;
    let mut eagd = lgd.clone();
    eagd.method = Method::Eagd;

    let mut trials = Vec::new();
    for &rank in &opts.ranks {
        for t in 0..opts.trials {
            let mut rng = root.fork(rank as u64).fork(t);
            let obj = matrix_completion_problem(opts.d, rank, &mut rng)?;
            let init: Vec<ParamVector> = (0..p)
                .map(|_| ParamVector::from_raw((0..opts.d * rank).map(|_| rng.normal()).collect()))
                .collect();
            let init_hash = hash_points(&init);
            let f0 = min_value(&init.iter().map(|x| obj.value(x)).collect::<Vec<_>>());
            let e = mc_curve(&eagd, &obj, &init)?;
            let l = mc_curve(&lgd, &obj, &init)?;
            for (method, curve) in [("eagd", &e), ("lgd", &l)] {
                let last = curve.best.len() - 1;
                for (k, f) in curve.best.iter().enumerate() {
                    if k as u64 % opts.curve_stride == 0 || k == last {
                        writeln!(curves, "{rank},{t},{method},{k},{}", fmt_float(*f))
                            .map_err(io_err)?;
                    }
                }
            }
            trials.push(McTrial {
                rank,
                trial: t,
                init_hash,
                f0,
                lgd_final: l.final_best,
                eagd_final: e.final_best,
                lgd_min: min_value(&l.best),
                eagd_min: min_value(&e.best),
            });
        }
    }
    curves.flush().map_err(io_err)?;

    let summary_path = opts.out.join("summary.csv");
    let mut summary = create(&summary_path)?;
    let io_err = |e| BenchError::io(&summary_path, e);
    writeln!(
        summary,
        "rank,trial,init_sha256,f0,lgd_final,eagd_final,lgd_min,eagd_min"
    )
    .map_err(io_err)?;
    for r in &trials {
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            r.rank,
            r.trial,
            r.init_hash,
            fmt_float(r.f0),
            fmt_float(r.lgd_final),
            fmt_float(r.eagd_final),
            fmt_float(r.lgd_min),
            fmt_float(r.eagd_min)
        )
        .map_err(io_err)?;
    }
    summary.flush().map_err(io_err)?;
    Ok(trials)
}

pub const SINC_ETA: f64 = 0.1;
pub const SINC_LAMBDA: f64 = 0.1;
pub const SINC_BETA: f64 = 0.43;
pub const SINC_MAX_ITERATIONS: u64 = 50_000;
pub const SINC_STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SincResult {
    pub method: Method,
    pub iterations: u64,
    pub converged: bool,
    pub best_value: f64,
    pub best_point: [f64; 2],
    /// Largest `‖∇L‖` over workers at the end.
    pub max_grad_norm: f64,
}

/// Four-worker EAGD and LGD on the radial sinc from fixed starts.
///
/// EAGD uses the elastic coefficient β = 0.43 spread over the 4 workers
/// (0.1075 per worker per step); LGD pulls with λ = 0.1 toward the leader.
/// Writes `sinc_trajectory.csv` (`method,iteration,worker,x,y`) into `out`.
pub fn cmd_sinc_demo(out: &Path, max_iterations: u64) -> Result<Vec<SincResult>, BenchError> {
    if max_iterations == 0 {
        return Err(BenchError::Usage("iterations must be at least 1".into()));
    }
    let obj = sinc2d();
    let init = theory::sinc_inits();
    let mut eagd = ClusterConfig::new(
        Method::Eagd,
        1,
        4,
        StepParams::new(SINC_ETA, 0.0, 0.0)?.with_beta(SINC_BETA)?,
    );
    eagd.max_total_steps = 4 * max_iterations;
    eagd.step_tolerance = Some(SINC_STEP_TOLERANCE);
    let mut lgd = ClusterConfig::new(
        Method::Lgd,
        1,
        4,
        StepParams::new(SINC_ETA, SINC_LAMBDA, 0.0)?,
    );
    lgd.max_total_steps = 4 * max_iterations;
    lgd.step_tolerance = Some(SINC_STEP_TOLERANCE);

    let path = out.join("sinc_trajectory.csv");
    let mut csv = create(&path)?;
    let io_err = |e| BenchError::io(&path, e);
    writeln!(csv, "method,iteration,worker,x,y").map_err(io_err)?;
    let mut results = Vec::new();
    for cfg in [&eagd, &lgd] {
        let name = cfg.method.as_str();
        let mut rows = String::new();
        let mut push_rows = |it: u64, params: &[ParamVector]| {
            for (w, p) in params.iter().enumerate() {
                let [x, y] = [p.as_slice()[0], p.as_slice()[1]];
                let _ = writeln!(rows, "{name},{it},{w},{},{}", fmt_float(x), fmt_float(y));
            }
        };
        push_rows(0, &init);
        let run = run_synchronous(cfg, &obj, &init, |info| {
            push_rows(info.round + 1, &info.state.params);
            true
        })?;
        csv.write_all(rows.as_bytes()).map_err(io_err)?;
        let (i, best) = run.state.best_worker(&obj);
        let bp = run.state.params[i].as_slice();
        results.push(SincResult {
            method: cfg.method,
            iterations: run.rounds,
            converged: run.converged,
            best_value: best,
            best_point: [bp[0], bp[1]],
            max_grad_norm: run
                .state
                .params
                .iter()
                .map(|x| obj.gradient(x).norm())
                .fold(0.0, f64::max),
        });
    }
    csv.flush().map_err(io_err)?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trial: u64,
    pub center_value: f64,
    pub best_value: f64,
    pub local_pulls: usize,
    pub global_pulls: usize,
    pub leader_switches: usize,
    pub trace_path: PathBuf,
}

impl RunSummary {
    pub fn line(&self) -> String {
        format!(
            "trial={} center_f={} best_f={} local_pulls={} global_pulls={} leader_switches={}",
            self.trial,
            fmt_float(self.center_value),
            fmt_float(self.best_value),
            self.local_pulls,
            self.global_pulls,
            self.leader_switches
        )
    }
}

/// Runs a spec and writes `<out>.json`, `<out>-trace-<t>.csv` per trial and `<out>-summary.csv`.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<Vec<RunSummary>, BenchError> {
    let obj = spec.objective.build()?;
    let init = spec.initial_points(obj.dim());
    let prefix = PathBuf::from(&spec.out);
    let json_path = prefix.with_file_name(format!("{}.json", file_stem(&prefix)));
    let mut json = create(&json_path)?;
    serde_json::to_writer_pretty(&mut json, spec)
        .map_err(|e| BenchError::io(&json_path, e.into()))?;
    writeln!(json)
        .and_then(|_| json.flush())
        .map_err(|e| BenchError::io(&json_path, e))?;

    let mut summaries = Vec::new();
    for t in 0..spec.trials.max(1) {
        let mut cfg = spec.config.clone();
        cfg.seed = cfg.seed.wrapping_add(t);
        let result = match spec.runner {
            Runner::Async => run(&cfg, &obj, &init)?,
            Runner::Lockstep => run_synchronous(&cfg, &obj, &init, |_| true)?,
        };
        let trace_path = prefix.with_file_name(format!("{}-trace-{t}.csv", file_stem(&prefix)));
        let mut w = create(&trace_path)?;
        write_trace_csv(&result.trace, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| BenchError::io(&trace_path, e))?;
        summaries.push(RunSummary {
            trial: t,
            center_value: obj.value(&result.state.center_variable()),
            best_value: result.state.best_worker(&obj).1,
            local_pulls: result.count(EventKind::LocalPull),
            global_pulls: result.count(EventKind::GlobalPull),
            leader_switches: result.count(EventKind::LeaderSwitch),
            trace_path,
        });
    }
    let summary_path = prefix.with_file_name(format!("{}-summary.csv", file_stem(&prefix)));
    let mut w = create(&summary_path)?;
    let mut text = String::from("trial,center_f,best_f,local_pulls,global_pulls,leader_switches\n");
    for s in &summaries {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            s.trial,
            fmt_float(s.center_value),
            fmt_float(s.best_value),
            s.local_pulls,
            s.global_pulls,
            s.leader_switches
        );
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| BenchError::io(&summary_path, e))?;
    Ok(summaries)
}

fn file_stem(prefix: &Path) -> String {
    prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

/// Runs the verification suite; see [`theory::run_all`].
pub fn cmd_verify(filter: Option<&str>, seed: u64) -> Result<Vec<BoundReport>, BenchError> {
    Ok(theory::run_all(filter, seed)?)
}
