//! Deterministic simulated cluster.
//!
//! [`run`] is the asynchronous event loop: the next worker to step is drawn by
//! seeded weighted sampling over per-worker speeds, and communication fires
//! when `n·l·τ` (local) or `n·l·τ_G` (global) divides the summed iteration
//! counters. [`run_synchronous`] is the lockstep variant where every worker
//! steps once per round and leader pulls are part of each step.
//!
//! All randomness comes from independent [`SimRng`] streams forked from the
//! config seed, so a run is a pure function of `(config, objective, init)`.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leader::{
    select_hierarchy_from_values, GlobalRule, LeaderBoard, LeaderError, SelectionMode, WorkerId,
};
use crate::linalg::ParamVector;
use crate::objectives::{NoiseModel, Objective, ObjectiveError};
use crate::rng::SimRng;
use crate::steps::{
    downpour_exchange, eagd_center_step, eagd_worker_step, lsgd_step, pull_only_step, StepError,
    StepParams,
};

/// Parameters with a larger norm than this abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Offset `k₀` of the `Θ(1/k)` schedules `c_k = c₀ / (1 + k/k₀)`.
pub const SCHEDULE_K0: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("expected {expected} initial points, got {found}")]
    InitCount { expected: usize, found: usize },
    #[error("worker ({}, {}) diverged at event {event_index}: norm {norm:e}", worker.group, worker.worker)]
    Diverged {
        worker: WorkerId,
        event_index: u64,
        norm: f64,
    },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Leader(#[from] LeaderError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Lsgd,
    Lgd,
    Easgd,
    Eagd,
    Downpour,
    Sgd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Lsgd,
        Method::Lgd,
        Method::Easgd,
        Method::Eagd,
        Method::Downpour,
        Method::Sgd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lsgd => "lsgd",
            Method::Lgd => "lgd",
            Method::Easgd => "easgd",
            Method::Eagd => "eagd",
            Method::Downpour => "downpour",
            Method::Sgd => "sgd",
        }
    }

    /// Whether gradient steps use the noisy estimator.
    pub fn stochastic(&self) -> bool {
        !matches!(self, Method::Lgd | Method::Eagd)
    }

    pub fn uses_leaders(&self) -> bool {
        matches!(self, Method::Lsgd | Method::Lgd)
    }

    pub fn elastic(&self) -> bool {
        matches!(self, Method::Easgd | Method::Eagd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Schedule {
    #[default]
    Constant,
    /// `c₀ / (1 + k/k₀)` with `k₀ =` [`SCHEDULE_K0`].
    OneOverK,
}

impl Schedule {
    pub fn at(&self, base: f64, k: u64) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::OneOverK => base / (1.0 + k as f64 / SCHEDULE_K0),
        }
    }
}

/// How a pull coefficient λ turns into the fraction of the gap closed per pull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PullScaling {
    /// Fraction `λ`.
    #[default]
    Absolute,
    /// Fraction `ηλ`, as in `X − η∇F − ηλ(X − X̃)`.
    LearningRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Number of groups.
    pub n: usize,
    /// Workers per group.
    pub l: usize,
    pub method: Method,
    pub step: StepParams,
    pub tau: u64,
    pub tau_g: u64,
    pub noise: NoiseModel,
    pub selection: SelectionMode,
    /// Number of value samples averaged per worker at selection (1 = a fresh sample only).
    pub selection_window: usize,
    pub leader_first_step_only: bool,
    pub eta_schedule: Schedule,
    pub lambda_schedule: Schedule,
    /// Relative step weights, one per worker; empty means uniform.
    pub speeds: Vec<f64>,
    pub seed: u64,
    pub max_total_steps: u64,
    pub pull_scaling: PullScaling,
    pub global_rule: GlobalRule,
    /// Add one common noise draw to every worker's value at selection instead of independent draws.
    pub shared_selection_noise: bool,
    /// Lockstep runs stop once every worker's step norm in a round falls below this.
    pub step_tolerance: Option<f64>,
}

impl ClusterConfig {
    pub fn new(method: Method, n: usize, l: usize, step: StepParams) -> Self {
        Self {
            n,
            l,
            method,
            step,
            tau: 1,
            tau_g: 1,
            noise: NoiseModel::none(),
            selection: SelectionMode::Exact,
            selection_window: 1,
            leader_first_step_only: false,
            eta_schedule: Schedule::Constant,
            lambda_schedule: Schedule::Constant,
            speeds: Vec::new(),
            seed: 0,
            max_total_steps: 1000,
            pull_scaling: PullScaling::Absolute,
            global_rule: GlobalRule::AllWorkers,
            shared_selection_noise: false,
            step_tolerance: None,
        }
    }

    pub fn workers(&self) -> usize {
        self.n * self.l
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.n == 0 || self.l == 0 {
            return bad(format!(
                "need n, l >= 1, got n = {}, l = {}",
                self.n, self.l
            ));
        }
        if self.tau == 0 || self.tau_g < self.tau {
            return bad(format!(
                "need tau_g >= tau >= 1, got tau = {}, tau_g = {}",
                self.tau, self.tau_g
            ));
        }
        if self.selection_window == 0 {
            return bad("selection_window must be at least 1".into());
        }
        if !self.speeds.is_empty() {
            if self.speeds.len() != self.workers() {
                return bad(format!(
                    "{} speeds given for {} workers",
                    self.speeds.len(),
                    self.workers()
                ));
            }
            if let Some(s) = self.speeds.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
                return bad(format!("speeds must be positive and finite, got {s}"));
            }
        }
        if self.method == Method::Downpour && self.eta_schedule != Schedule::Constant {
            return bad("downpour supports only a constant learning rate".into());
        }
        if let Some(tol) = self.step_tolerance {
            if !(tol > 0.0) {
                return bad(format!("step_tolerance must be positive, got {tol}"));
            }
        }
        self.step.validate()?;
        NoiseModel::new(self.noise.sigma2, self.noise.nu, self.noise.sigma_f)?;
        Ok(())
    }

    fn pull_coefficient(&self, lambda: f64, k: u64, eta_k: f64) -> f64 {
        let lam = self.lambda_schedule.at(lambda, k);
        match self.pull_scaling {
            PullScaling::Absolute => lam,
            PullScaling::LearningRate => eta_k * lam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    GradStep,
    LocalPull,
    GlobalPull,
    LeaderSwitch,
    CenterUpdate,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::GradStep => "grad_step",
            EventKind::LocalPull => "local_pull",
            EventKind::GlobalPull => "global_pull",
            EventKind::LeaderSwitch => "leader_switch",
            EventKind::CenterUpdate => "center_update",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event_index: u64,
    pub kind: EventKind,
    pub worker: Option<WorkerId>,
    pub total_steps: u64,
    /// Exact objective at the pre-step point for `grad_step`; estimated leader value for `leader_switch`.
    pub f_value: Option<f64>,
    /// Global leader after the event.
    pub leader: Option<WorkerId>,
}

pub const TRACE_HEADER: &str =
    "event_index,kind,group,worker,total_steps,f_value,leader_group,leader_worker";

/// Float formatting used by every CSV writer: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: Write>(trace: &[TraceEvent], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let id = |w: Option<WorkerId>| match w {
        Some(w) => (w.group.to_string(), w.worker.to_string()),
        None => (String::new(), String::new()),
    };
    for e in trace {
        let (g, w) = id(e.worker);
        let (lg, lw) = id(e.leader);
        let f = e.f_value.map(fmt_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{g},{w},{},{f},{lg},{lw}",
            e.event_index,
            e.kind.as_str(),
            e.total_steps
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Worker parameters, flattened group-major.
    pub params: Vec<ParamVector>,
    pub counters: Vec<u64>,
    pub board: Option<LeaderBoard>,
    pub center: Option<ParamVector>,
    pub accum: Option<Vec<ParamVector>>,
    pub total_steps: u64,
}

impl ClusterState {
    /// Maintained center for elastic and DOWNPOUR methods, otherwise the mean of all workers.
    pub fn center_variable(&self) -> ParamVector {
        if let Some(c) = &self.center {
            return c.clone();
        }
        let mut mean = vec![0.0; self.params[0].dim()];
        for p in &self.params {
            for (m, v) in mean.iter_mut().zip(p.as_slice()) {
                *m += v;
            }
        }
        let n = self.params.len() as f64;
        ParamVector::from_raw(mean.into_iter().map(|m| m / n).collect())
    }

    /// Index and exact value of the worker with the lowest objective.
    pub fn best_worker(&self, obj: &Objective) -> (usize, f64) {
        let values: Vec<f64> = self.params.iter().map(|p| obj.value(p)).collect();
        let i = crate::leader::select_exact(&values).unwrap_or(0);
        (i, values[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub state: ClusterState,
    pub trace: Vec<TraceEvent>,
    /// Lockstep only: stopped on the step tolerance rather than the budget.
    pub converged: bool,
    pub rounds: u64,
}

impl SimRun {
    pub fn count(&self, kind: EventKind) -> usize {
        self.trace.iter().filter(|e| e.kind == kind).count()
    }
}

/// Per-round view handed to the lockstep observer.
pub struct RoundInfo<'a> {
    pub round: u64,
    /// Exact objective of each worker at the start of the round.
    pub values: &'a [f64],
    /// Largest `‖x⁺ − x‖` over workers this round.
    pub max_step_norm: f64,
    pub state: &'a ClusterState,
}

struct Engine<'a> {
    cfg: &'a ClusterConfig,
    obj: Objective,
    state: ClusterState,
    trace: Vec<TraceEvent>,
    grad_rngs: Vec<SimRng>,
    value_rngs: Vec<SimRng>,
    shared_rng: SimRng,
    windows: Vec<VecDeque<f64>>,
    pending_local: Vec<bool>,
    pending_global: Vec<bool>,
}

impl<'a> Engine<'a> {
    fn new(
        cfg: &'a ClusterConfig,
        obj: &Objective,
        init: &[ParamVector],
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        let p = cfg.workers();
        if init.len() != p {
            return Err(SimError::InitCount {
                expected: p,
                found: init.len(),
            });
        }
        for x in init {
            obj.check_point(x)?;
        }
        let root = SimRng::new(cfg.seed);
        let grad_root = root.fork(1);
        let value_root = root.fork(2);
        let obj = obj.clone().with_noise(cfg.noise);
        let params = init.to_vec();
        let mut state = ClusterState {
            counters: vec![0; p],
            board: None,
            center: None,
            accum: None,
            total_steps: 0,
            params,
        };
        if cfg.method.elastic() || cfg.method == Method::Downpour {
            state.center = Some(state.center_variable());
        }
        if cfg.method == Method::Downpour {
            state.accum = Some(vec![ParamVector::zeros(obj.dim()); p]);
        }
        Ok(Self {
            cfg,
            obj,
            state,
            trace: Vec::new(),
            grad_rngs: (0..p as u64).map(|w| grad_root.fork(w)).collect(),
            value_rngs: (0..p as u64).map(|w| value_root.fork(w)).collect(),
            shared_rng: root.fork(3),
            windows: vec![VecDeque::new(); p],
            pending_local: vec![false; p],
            pending_global: vec![false; p],
        })
    }

    fn id(&self, w: usize) -> WorkerId {
        WorkerId::from_flat(w, self.cfg.l)
    }

    fn leader(&self) -> Option<WorkerId> {
        self.state.board.as_ref().map(|b| b.global_id)
    }

    fn push(&mut self, kind: EventKind, worker: Option<usize>, f_value: Option<f64>) {
        let event = TraceEvent {
            event_index: self.trace.len() as u64,
            kind,
            worker: worker.map(|w| self.id(w)),
            total_steps: self.state.total_steps,
            f_value,
            leader: self.leader(),
        };
        self.trace.push(event);
    }

    fn guard(&self, w: usize, x: &ParamVector) -> Result<(), SimError> {
        let norm = x.norm();
        if !x.is_finite() || !(norm <= DIVERGENCE_NORM) {
            return Err(SimError::Diverged {
                worker: self.id(w),
                event_index: self.trace.len() as u64,
                norm,
            });
        }
        Ok(())
    }

    fn gradient(&mut self, w: usize) -> (f64, ParamVector) {
        let (f, g) = self.obj.value_and_gradient(&self.state.params[w]);
        let g = if self.cfg.method.stochastic() {
            self.obj.perturb_gradient(g, &mut self.grad_rngs[w])
        } else {
            g
        };
        (f, g)
    }

    /// Records a per-step value sample for windowed stochastic selection.
    fn record_sample(&mut self, w: usize, f: f64) {
        if self.cfg.selection != SelectionMode::Stochastic || self.cfg.selection_window <= 1 {
            return;
        }
        let y = self.obj.perturb_value(f, &mut self.value_rngs[w]);
        let win = &mut self.windows[w];
        win.push_back(y);
        while win.len() > self.cfg.selection_window - 1 {
            win.pop_front();
        }
    }

    /// Leader estimates: exact values, or a fresh sample averaged with the trailing window.
    fn estimates(&mut self, exact: &[f64]) -> Vec<f64> {
        if self.cfg.selection == SelectionMode::Exact {
            return exact.to_vec();
        }
        let shared = if self.cfg.shared_selection_noise && self.obj.noise().sigma_f > 0.0 {
            Some(self.obj.noise().sigma_f * self.shared_rng.normal())
        } else {
            None
        };
        exact
            .iter()
            .enumerate()
            .map(|(w, &f)| {
                let fresh = match shared {
                    Some(e) => f + e,
                    None => self.obj.perturb_value(f, &mut self.value_rngs[w]),
                };
                let win = &self.windows[w];
                if win.is_empty() {
                    fresh
                } else {
                    (fresh + win.iter().sum::<f64>()) / (win.len() + 1) as f64
                }
            })
            .collect()
    }

    /// Reselects leaders; keeps the previous global snapshot unless `global` is set.
    fn select(&mut self, exact: &[f64], global: bool) -> Result<(), SimError> {
        let values = self.estimates(exact);
        let event = self.trace.len() as u64;
        let mut board = select_hierarchy_from_values(
            &self.state.params,
            &values,
            self.cfg.n,
            self.cfg.l,
            self.cfg.global_rule,
            event,
        )?;
        if let (false, Some(old)) = (global, &self.state.board) {
            board.global_id = old.global_id;
            board.global_params = old.global_params.clone();
            board.global_value = old.global_value;
            board.global_selected_at = old.global_selected_at;
        }
        let switched = self.leader() != Some(board.global_id);
        let value = board.global_value;
        self.state.board = Some(board);
        if switched {
            let flat = self.leader().map(|id| id.flat(self.cfg.l));
            self.push(EventKind::LeaderSwitch, flat, Some(value));
        }
        Ok(())
    }

    fn exact_values(&self) -> Vec<f64> {
        self.state
            .params
            .iter()
            .map(|p| self.obj.value(p))
            .collect()
    }

    fn round_index(&self) -> u64 {
        self.state.total_steps / self.cfg.workers() as u64
    }

    fn async_step(&mut self, w: usize) -> Result<(), SimError> {
        let cfg = self.cfg;
        let k = self.state.counters[w];
        let eta_k = cfg.eta_schedule.at(cfg.step.eta, k);
        let (f, g) = self.gradient(w);
        self.record_sample(w, f);
        let x = &self.state.params[w];
        let mut params = StepParams {
            eta: eta_k,
            lambda: 0.0,
            lambda_g: 0.0,
            beta: None,
        };
        let mut fused = Vec::new();
        if let Some(board) = &self.state.board {
            let round = self.round_index();
            if self.pending_local[w] {
                params.lambda = cfg.pull_coefficient(cfg.step.lambda, round, eta_k);
                fused.push(EventKind::LocalPull);
            }
            if self.pending_global[w] {
                params.lambda_g = cfg.pull_coefficient(cfg.step.lambda_g, round, eta_k);
                fused.push(EventKind::GlobalPull);
            }
            let local = board.local_leader(w / cfg.l);
            let next = lsgd_step(x, &g, local, &board.global_params, &params)?;
            self.state.params[w] = next;
        } else {
            let next = lsgd_step(x, &g, x, x, &params)?;
            if let Some(acc) = self.state.accum.as_mut() {
                acc[w] = acc[w].add(&g);
            }
            self.state.params[w] = next;
        }
        self.pending_local[w] = false;
        self.pending_global[w] = false;
        self.state.counters[w] += 1;
        self.state.total_steps += 1;
        self.push(EventKind::GradStep, Some(w), Some(f));
        for kind in fused {
            self.push(kind, Some(w), None);
        }
        self.guard(w, &self.state.params[w].clone())?;

        let own = self.state.counters[w];
        match cfg.method {
            Method::Easgd | Method::Eagd if own % cfg.tau == 0 => {
                let alpha = cfg.step.elastic(cfg.workers());
                let center = self.state.center.as_ref().expect("elastic center");
                let x = &self.state.params[w];
                let new_x = pull_only_step(x, center, alpha)?;
                let new_c = pull_only_step(center, x, alpha)?;
                self.state.params[w] = new_x;
                self.state.center = Some(new_c);
                self.push(EventKind::CenterUpdate, Some(w), None);
            }
            Method::Downpour if own % cfg.tau == 0 => {
                let acc = self.state.accum.as_mut().expect("downpour accumulators");
                let grad_sum = std::mem::replace(&mut acc[w], ParamVector::zeros(self.obj.dim()));
                let center = self.state.center.as_ref().expect("downpour center");
                let (c, x) = downpour_exchange(&grad_sum, center, cfg.step.eta)?;
                self.state.center = Some(c);
                self.state.params[w] = x;
                self.push(EventKind::CenterUpdate, Some(w), None);
            }
            _ => {}
        }
        Ok(())
    }

    fn communicate(&mut self) -> Result<(), SimError> {
        let cfg = self.cfg;
        let p = cfg.workers() as u64;
        let total = self.state.total_steps;
        let local_due = total % (p * cfg.tau) == 0;
        let global_due = total % (p * cfg.tau_g) == 0;
        if !local_due && !global_due {
            return Ok(());
        }
        let exact = self.exact_values();
        self.select(&exact, global_due)?;
        let round = self.round_index();
        for (due, kind, lambda) in [
            (local_due, EventKind::LocalPull, cfg.step.lambda),
            (global_due, EventKind::GlobalPull, cfg.step.lambda_g),
        ] {
            if !due || lambda == 0.0 {
                continue;
            }
            if cfg.leader_first_step_only {
                let pending = match kind {
                    EventKind::LocalPull => &mut self.pending_local,
                    _ => &mut self.pending_global,
                };
                pending.iter_mut().for_each(|f| *f = true);
                continue;
            }
            let board = self.state.board.as_ref().expect("board after selection");
            let mut next = Vec::with_capacity(self.state.params.len());
            for (w, x) in self.state.params.iter().enumerate() {
                let eta_k = cfg.eta_schedule.at(cfg.step.eta, self.state.counters[w]);
                let coeff = cfg.pull_coefficient(lambda, round, eta_k);
                let target = match kind {
                    EventKind::LocalPull => board.local_leader(w / cfg.l),
                    _ => &board.global_params,
                };
                next.push(pull_only_step(x, target, coeff)?);
            }
            self.state.params = next;
            self.push(kind, None, None);
        }
        Ok(())
    }

    fn run_async(mut self) -> Result<SimRun, SimError> {
        let cfg = self.cfg;
        let p = cfg.workers();
        let speeds = if cfg.speeds.is_empty() {
            vec![1.0; p]
        } else {
            cfg.speeds.clone()
        };
        let mut sched = SimRng::new(cfg.seed).fork(0);
        if cfg.method.uses_leaders() {
            let exact = self.exact_values();
            self.select(&exact, true)?;
        }
        for _ in 0..cfg.max_total_steps {
            let w = if p == 1 {
                0
            } else {
                sched.weighted_index(&speeds)
            };
            self.async_step(w)?;
            if cfg.method.uses_leaders() {
                self.communicate()?;
            }
        }
        let rounds = self.round_index();
        Ok(SimRun {
            state: self.state,
            trace: self.trace,
            converged: false,
            rounds,
        })
    }

    fn lockstep_round(&mut self, round: u64) -> Result<(Vec<f64>, f64), SimError> {
        let cfg = self.cfg;
        let p = cfg.workers();
        let mut values = Vec::with_capacity(p);
        let mut grads = Vec::with_capacity(p);
        for w in 0..p {
            let (f, g) = self.gradient(w);
            self.record_sample(w, f);
            values.push(f);
            grads.push(g);
        }
        if cfg.method.uses_leaders() && round % cfg.tau == 0 {
            self.select(&values, round % cfg.tau_g == 0)?;
        }
        let old = self.state.params.clone();
        match cfg.method {
            Method::Lsgd | Method::Lgd | Method::Sgd => {
                for w in 0..p {
                    let eta_k = cfg.eta_schedule.at(cfg.step.eta, self.state.counters[w]);
                    let x = &old[w];
                    let next = match &self.state.board {
                        Some(board) => {
                            let params = StepParams {
                                eta: eta_k,
                                lambda: cfg.pull_coefficient(cfg.step.lambda, round, eta_k),
                                lambda_g: cfg.pull_coefficient(cfg.step.lambda_g, round, eta_k),
                                beta: None,
                            };
                            lsgd_step(
                                x,
                                &grads[w],
                                board.local_leader(w / cfg.l),
                                &board.global_params,
                                &params,
                            )?
                        }
                        None => {
                            let params = StepParams::new(eta_k, 0.0, 0.0)?;
                            lsgd_step(x, &grads[w], x, x, &params)?
                        }
                    };
                    self.state.params[w] = next;
                }
            }
            Method::Eagd | Method::Easgd => {
                let center = self.state.center.clone().expect("elastic center");
                for w in 0..p {
                    let eta_k = cfg.eta_schedule.at(cfg.step.eta, self.state.counters[w]);
                    let params = StepParams {
                        eta: eta_k,
                        ..cfg.step
                    };
                    self.state.params[w] =
                        eagd_worker_step(&old[w], &grads[w], &center, &params, p)?;
                }
                self.state.center = Some(eagd_center_step(&center, &old, &cfg.step)?);
            }
            Method::Downpour => {
                for (w, g) in grads.iter().enumerate() {
                    let center = self.state.center.as_ref().expect("downpour center");
                    let (c, x) = downpour_exchange(g, center, cfg.step.eta)?;
                    self.state.center = Some(c);
                    self.state.params[w] = x;
                }
            }
        }
        let mut max_step = 0.0f64;
        for w in 0..p {
            self.state.counters[w] += 1;
            self.state.total_steps += 1;
            self.push(EventKind::GradStep, Some(w), Some(values[w]));
            let x = self.state.params[w].clone();
            self.guard(w, &x)?;
            max_step = max_step.max(x.distance(&old[w]));
        }
        if cfg.method.elastic() || cfg.method == Method::Downpour {
            self.push(EventKind::CenterUpdate, None, None);
        }
        Ok((values, max_step))
    }

    fn run_lockstep<F>(mut self, mut observer: F) -> Result<SimRun, SimError>
    where
        F: FnMut(&RoundInfo) -> bool,
    {
        let rounds = self.cfg.max_total_steps / self.cfg.workers() as u64;
        let mut converged = false;
        let mut done = 0;
        for round in 0..rounds {
            let (values, max_step_norm) = self.lockstep_round(round)?;
            done = round + 1;
            let info = RoundInfo {
                round,
                values: &values,
                max_step_norm,
                state: &self.state,
            };
            let keep_going = observer(&info);
            if self
                .cfg
                .step_tolerance
                .is_some_and(|tol| max_step_norm < tol)
            {
                converged = true;
                break;
            }
            if !keep_going {
                break;
            }
        }
        Ok(SimRun {
            state: self.state,
            trace: self.trace,
            converged,
            rounds: done,
        })
    }
}

/// Asynchronous run: one weighted-sampled worker step per tick, communication on divisibility.
pub fn run(
    config: &ClusterConfig,
    obj: &Objective,
    init: &[ParamVector],
) -> Result<SimRun, SimError> {
    Engine::new(config, obj, init)?.run_async()
}

/// Lockstep rounds: every worker steps once per round from the same snapshot.
///
/// Leader methods apply both pulls inside every step toward the board, which
/// is reselected from the round's pre-step values every `τ` rounds (the global
/// entry every `τ_G` rounds). The budget is `max_total_steps / (n·l)` rounds.
/// `observer` sees each finished round and may stop the run by returning false.
pub fn run_synchronous<F>(
    config: &ClusterConfig,
    obj: &Objective,
    init: &[ParamVector],
    observer: F,
) -> Result<SimRun, SimError>
where
    F: FnMut(&RoundInfo) -> bool,
{
    Engine::new(config, obj, init)?.run_lockstep(observer)
}

/// [`run_synchronous`] restricted to full-gradient methods with uniform speeds.
pub fn run_synchronous_lgd<F>(
    config: &ClusterConfig,
    obj: &Objective,
    init: &[ParamVector],
    observer: F,
) -> Result<SimRun, SimError>
where
    F: FnMut(&RoundInfo) -> bool,
{
    if config.method.stochastic() {
        return Err(SimError::Config(format!(
            "{} uses stochastic gradients; lockstep full-gradient runs take lgd or eagd",
            config.method
        )));
    }
    let n = config.noise;
    if n.sigma2 != 0.0 || n.nu != 0.0 {
        return Err(SimError::Config(
            "full-gradient runs need zero gradient noise".into(),
        ));
    }
    if config.speeds.windows(2).any(|s| s[0] != s[1]) {
        return Err(SimError::Config("lockstep runs need uniform speeds".into()));
    }
    run_synchronous(config, obj, init, observer)
}
