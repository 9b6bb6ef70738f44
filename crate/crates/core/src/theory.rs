//! Executable convergence and geometry bounds.
//!
//! Each check computes the two sides of an inequality, by closed form or
//! Monte Carlo, and returns a [`BoundReport`]. A check whose step-size or
//! geometric preconditions do not hold reports [`Status::Inapplicable`]
//! rather than failing, since the bound says nothing there.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leader::SelectionMode;
use crate::linalg::{solve_small_linear, symmetric_eigen, DenseMatrix, LinalgError, ParamVector};
use crate::objectives::{
    easgd_counterexample_f, quadratic_from_matrix, quadratic_with_condition, sinc2d, NoiseModel,
    Objective, ObjectiveError, ObjectiveKind,
};
use crate::rng::SimRng;
use crate::sim::{
    fmt_float, run_synchronous, run_synchronous_lgd, ClusterConfig, Method, PullScaling, Schedule,
    SimError,
};
use crate::steps::{lsgd_step, StepError, StepParams};

/// Seed of the default verification run.
pub const VERIFY_SEED: u64 = 20_240_601;
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-9;
pub const MC_STD_ERRORS: f64 = 4.0;
pub const VOLUME_STD_ERRORS: f64 = 3.0;
/// One-sided 5% critical value of the standard normal.
pub const SPEARMAN_CRITICAL: f64 = 1.645;
/// Workers closer than this count as one point when looking for a unique minimizer.
pub const COINCIDENT_DISTANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("check needs a quadratic objective")]
    NotQuadratic,
    #[error("bisection bracket [{lo}, {hi}] has no sign change")]
    Bracket { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Inapplicable,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inapplicable => "inapplicable",
        }
    }
}

/// Slack allowed on top of `rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tolerance {
    /// `k` Monte Carlo standard errors.
    StdErrors(f64),
    Absolute(f64),
}

/// Outcome of one inequality `lhs ≤ rhs + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub std_error: Option<f64>,
    pub trials: u64,
    pub tolerance: Tolerance,
    pub status: Status,
    pub note: Option<String>,
}

pub const REPORT_HEADER: &str = "name,lhs,rhs,slack,std_error,trials,status";

impl BoundReport {
    pub fn evaluate(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tolerance: Tolerance,
        std_error: Option<f64>,
        trials: u64,
    ) -> Self {
        let allowance = match tolerance {
            Tolerance::StdErrors(k) => k * std_error.unwrap_or(0.0),
            Tolerance::Absolute(t) => t,
        };
        let status = if lhs <= rhs + allowance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            std_error,
            trials,
            tolerance,
            status,
            note: None,
        }
    }

    pub fn inapplicable(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            std_error: None,
            trials: 0,
            tolerance: Tolerance::Absolute(0.0),
            status: Status::Inapplicable,
            note: Some(note.into()),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn csv_line(&self) -> String {
        let se = self.std_error.map(fmt_float).unwrap_or_default();
        format!(
            "{},{},{},{},{se},{},{}",
            self.name,
            fmt_float(self.lhs),
            fmt_float(self.rhs),
            fmt_float(self.slack),
            self.trials,
            self.status.as_str()
        )
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn quadratic_parts(obj: &Objective) -> Result<(&DenseMatrix, f64, f64), TheoryError> {
    match (obj.kind(), obj.strong_convexity(), obj.lipschitz()) {
        (ObjectiveKind::Quadratic { a, .. }, Some(m), Some(big_m)) => Ok((a, m, big_m)),
        _ => Err(TheoryError::NotQuadratic),
    }
}

/// Expected one-step decrease of a worker pulled toward leader `z`.
///
/// The step is `x⁺ = x − ηg̃(x) − ηλ(x − z)`. Checks
/// `E f(x⁺) − f* ≤ (1 − mη)(f(x) − f*) − ηλ(f(x) − f(z)) + ½η²Mσ²`
/// under `η ≤ 1/(2M(ν+1))`, `ηλ ≤ 1/(2κ)` and `η√λ ≤ 1/(κ√(2m))`.
pub fn check_one_step_descent(
    name: &str,
    obj: &Objective,
    x: &ParamVector,
    z: &ParamVector,
    p: &StepParams,
    trials: u64,
    rng: &mut SimRng,
) -> Result<BoundReport, TheoryError> {
    let (_, m, big_m) = quadratic_parts(obj)?;
    let kappa = big_m / m;
    let noise = obj.noise();
    let (eta, lambda) = (p.eta, p.lambda);
    let pre = [
        (
            eta <= 1.0 / (2.0 * big_m * (noise.nu + 1.0)),
            "eta > 1/(2M(nu+1))",
        ),
        (
            eta * lambda <= 1.0 / (2.0 * kappa),
            "eta*lambda > 1/(2 kappa)",
        ),
        (
            eta * lambda.sqrt() <= 1.0 / (kappa * (2.0 * m).sqrt()),
            "eta*sqrt(lambda) > 1/(kappa sqrt(2m))",
        ),
    ];
    if let Some((_, why)) = pre.iter().find(|(ok, _)| !ok) {
        return Ok(BoundReport::inapplicable(name, *why));
    }
    let step = StepParams::new(eta, eta * lambda, 0.0)?;
    let fx = obj.value(x);
    let fz = obj.value(z);
    let rhs =
        (1.0 - m * eta) * fx - eta * lambda * (fx - fz) + 0.5 * eta * eta * big_m * noise.sigma2;
    let exact_gradient = noise.gradient_is_exact();
    let n = if exact_gradient { 1 } else { trials };
    let mut samples = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let g = obj.stochastic_gradient(x, rng);
        samples.push(obj.value(&lsgd_step(x, &g, z, z, &step)?));
    }
    let (lhs, se) = mean_and_se(&samples);
    Ok(BoundReport::evaluate(
        name,
        lhs,
        rhs,
        if exact_gradient {
            Tolerance::Absolute(DETERMINISTIC_TOLERANCE)
        } else {
            Tolerance::StdErrors(MC_STD_ERRORS)
        },
        (!exact_gradient).then_some(se),
        n,
    ))
}

/// A worker already better than a stale leader `z` stays within `½η²Mσ²` of it
/// in expectation after one pulled step.
pub fn check_stale_leader(
    name: &str,
    obj: &Objective,
    x: &ParamVector,
    z: &ParamVector,
    p: &StepParams,
    trials: u64,
    rng: &mut SimRng,
) -> Result<BoundReport, TheoryError> {
    let (_, m, big_m) = quadratic_parts(obj)?;
    let kappa = big_m / m;
    let noise = obj.noise();
    if obj.value(x) > obj.value(z) {
        return Ok(BoundReport::inapplicable(
            name,
            "worker is not better than the leader",
        ));
    }
    if p.eta > 1.0 / (2.0 * big_m * (noise.nu + 1.0)) || p.eta * p.lambda > 1.0 / (2.0 * kappa) {
        return Ok(BoundReport::inapplicable(
            name,
            "step size outside the descent regime",
        ));
    }
    let step = StepParams::new(p.eta, p.eta * p.lambda, 0.0)?;
    let mut samples = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let g = obj.stochastic_gradient(x, rng);
        samples.push(obj.value(&lsgd_step(x, &g, z, z, &step)?));
    }
    let (lhs, se) = mean_and_se(&samples);
    let rhs = obj.value(z) + 0.5 * p.eta * p.eta * big_m * noise.sigma2;
    Ok(BoundReport::evaluate(
        name,
        lhs,
        rhs,
        Tolerance::StdErrors(MC_STD_ERRORS),
        Some(se),
        trials,
    ))
}

/// Steady-state gap of constant-step LSGD against `½ηκσ²`.
///
/// Runs `seeds` independent lockstep clusters for `rounds` rounds and averages
/// the final gap over workers; the standard error is across seeds.
pub fn check_limsup(
    name: &str,
    obj: &Objective,
    base: &ClusterConfig,
    init: &[ParamVector],
    seeds: u64,
) -> Result<BoundReport, TheoryError> {
    let (_, m, big_m) = quadratic_parts(obj)?;
    let kappa = big_m / m;
    let eta = base.step.eta;
    if eta > 1.0 / (2.0 * big_m * (base.noise.nu + 1.0)) {
        return Ok(BoundReport::inapplicable(name, "eta > 1/(2M(nu+1))"));
    }
    let mut samples = Vec::with_capacity(seeds as usize);
    for s in 0..seeds {
        let mut cfg = base.clone();
        cfg.seed = base.seed.wrapping_add(s);
        let run = run_synchronous(&cfg, obj, init, |_| true)?;
        let gaps: f64 = run.state.params.iter().map(|x| obj.value(x)).sum();
        samples.push(gaps / run.state.params.len() as f64);
    }
    let (lhs, se) = mean_and_se(&samples);
    let rhs = 0.5 * eta * kappa * base.noise.sigma2;
    Ok(BoundReport::evaluate(
        name,
        lhs,
        rhs,
        Tolerance::StdErrors(MC_STD_ERRORS),
        Some(se),
        seeds,
    ))
}

/// Minimizer `w` of `f(w) + (λ/2)‖w − z‖²` on `½xᵀAx`, checked against
/// `f(w) ≤ λ/(m+λ)·f(z)` and `‖w‖² ≤ λ²/(m(m+λ))·‖z‖²`.
pub fn check_psi_minimizer(
    name: &str,
    obj: &Objective,
    z: &ParamVector,
    lambda: f64,
) -> Result<[BoundReport; 2], TheoryError> {
    let (a, m, _) = quadratic_parts(obj)?;
    if !(lambda > 0.0) {
        return Err(TheoryError::Argument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let w = solve_small_linear(&a.shifted(lambda), &z.scaled(lambda))?;
    let value = BoundReport::evaluate(
        format!("{name}/value"),
        obj.value(&w),
        lambda / (m + lambda) * obj.value(z),
        Tolerance::Absolute(DETERMINISTIC_TOLERANCE),
        None,
        1,
    );
    let distance = BoundReport::evaluate(
        format!("{name}/distance"),
        w.norm_sq(),
        lambda * lambda / (m * (m + lambda)) * z.norm_sq(),
        Tolerance::Absolute(DETERMINISTIC_TOLERANCE),
        None,
        1,
    );
    Ok([value, distance])
}

/// Picking the argmin of one Gaussian sample per candidate.
///
/// `gaps` are the true values relative to the best (`gaps[0] = 0`, sorted).
/// Checks `E μ̃ − μ₁ ≤ 4√p·σ` and `P(μ̃ ≥ μ₁ + a) ≤ 4σ²p/a²`.
pub fn check_stochastic_leader_bounds(
    name: &str,
    gaps: &[f64],
    sigma_f: f64,
    tail_a: f64,
    trials: u64,
    rng: &mut SimRng,
) -> Result<[BoundReport; 2], TheoryError> {
    if gaps.is_empty() || gaps[0] != 0.0 || gaps.windows(2).any(|w| w[1] < w[0]) {
        return Err(TheoryError::Argument(
            "gaps must be sorted and start at 0".into(),
        ));
    }
    if !(tail_a > 0.0) || !(sigma_f >= 0.0) {
        return Err(TheoryError::Argument(
            "need tail_a > 0 and sigma_f >= 0".into(),
        ));
    }
    let p = gaps.len() as f64;
    let mut excess = Vec::with_capacity(trials as usize);
    let mut tail = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let mut best = 0;
        let mut best_y = f64::INFINITY;
        for (i, g) in gaps.iter().enumerate() {
            let y = if sigma_f == 0.0 {
                *g
            } else {
                g + sigma_f * rng.normal()
            };
            if y < best_y {
                best_y = y;
                best = i;
            }
        }
        excess.push(gaps[best]);
        tail.push(if gaps[best] >= tail_a { 1.0 } else { 0.0 });
    }
    let (e_lhs, e_se) = mean_and_se(&excess);
    let (t_lhs, t_se) = mean_and_se(&tail);
    Ok([
        BoundReport::evaluate(
            format!("{name}/expectation"),
            e_lhs,
            4.0 * p.sqrt() * sigma_f,
            Tolerance::StdErrors(MC_STD_ERRORS),
            Some(e_se),
            trials,
        ),
        BoundReport::evaluate(
            format!("{name}/tail"),
            t_lhs,
            4.0 * sigma_f * sigma_f * p / (tail_a * tail_a),
            Tolerance::StdErrors(MC_STD_ERRORS),
            Some(t_se),
            trials,
        ),
    ])
}

/// Spearman rank correlation; tied values share their average rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in &idx[i..=j] {
                r[*k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// `O(1/k)` decay under `Θ(1/k)` schedules.
///
/// Averages the gap over workers and `seeds` runs, forms `(k + k₀)·gap(k)` at
/// every `stride`-th round in `[k_min, k_max]`, and fails on an upward trend:
/// one-sided Spearman statistic `ρ√(N−1)` above [`SPEARMAN_CRITICAL`].
pub fn check_rate_1_over_k(
    name: &str,
    obj: &Objective,
    base: &ClusterConfig,
    init: &[ParamVector],
    seeds: u64,
    window: (u64, u64, u64),
) -> Result<BoundReport, TheoryError> {
    quadratic_parts(obj)?;
    if base.eta_schedule != Schedule::OneOverK {
        return Err(TheoryError::Argument(
            "rate check needs a 1/k learning-rate schedule".into(),
        ));
    }
    let (k_min, k_max, stride) = window;
    let rounds = k_max + 1;
    let mut mean_gap = vec![0.0; rounds as usize];
    for s in 0..seeds {
        let mut cfg = base.clone();
        cfg.seed = base.seed.wrapping_add(s);
        cfg.max_total_steps = rounds * cfg.workers() as u64;
        run_synchronous(&cfg, obj, init, |info| {
            let g = info.values.iter().sum::<f64>() / info.values.len() as f64;
            mean_gap[info.round as usize] += g / seeds as f64;
            true
        })?;
    }
    let ks: Vec<f64> = (k_min..=k_max)
        .step_by(stride as usize)
        .map(|k| k as f64)
        .collect();
    let stat: Vec<f64> = ks
        .iter()
        .map(|&k| (k + crate::sim::SCHEDULE_K0) * mean_gap[k as usize])
        .collect();
    let rho = spearman(&ks, &stat);
    let z = rho * ((ks.len() - 1) as f64).sqrt();
    let sup = stat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport::evaluate(
        name,
        z,
        SPEARMAN_CRITICAL,
        Tolerance::Absolute(0.0),
        None,
        seeds,
    )
    .with_note(format!("rho = {rho:.4}, sup (k+k0)*gap = {sup:.6e}")))
}

/// Noiseless constant-step gradient descent: `f(x_K) ≤ (1 − mη)^K f(x_0)`.
pub fn check_deterministic_contraction(
    name: &str,
    obj: &Objective,
    x0: &ParamVector,
    eta: f64,
    steps: u64,
) -> Result<BoundReport, TheoryError> {
    let (_, m, big_m) = quadratic_parts(obj)?;
    if eta > 1.0 / big_m {
        return Ok(BoundReport::inapplicable(name, "eta > 1/M"));
    }
    let mut x = x0.clone();
    for _ in 0..steps {
        x = x.sub(&obj.gradient(&x).scaled(eta));
    }
    let rhs = (1.0 - m * eta).powi(steps as i32) * obj.value(x0);
    Ok(BoundReport::evaluate(
        name,
        obj.value(&x),
        rhs,
        Tolerance::Absolute(DETERMINISTIC_TOLERANCE * rhs.max(f64::MIN_POSITIVE)),
        None,
        steps,
    ))
}

/// Converged lockstep LGD with a unique best worker has a stationary leader.
pub fn check_stationary_leader(
    name: &str,
    obj: &Objective,
    cfg: &ClusterConfig,
    init: &[ParamVector],
) -> Result<BoundReport, TheoryError> {
    let run = run_synchronous_lgd(cfg, obj, init, |_| true)?;
    if !run.converged {
        return Ok(BoundReport::inapplicable(
            name,
            "run did not reach the step tolerance",
        ));
    }
    let mut values: Vec<(f64, usize)> = run
        .state
        .params
        .iter()
        .enumerate()
        .map(|(i, x)| (obj.value(x), i))
        .collect();
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Workers that collapsed onto the leader tie with it but are the same point.
    let leader = &run.state.params[values[0].1];
    let distinct_tie = values[1..]
        .iter()
        .take_while(|(f, _)| f - values[0].0 <= DETERMINISTIC_TOLERANCE)
        .any(|(_, i)| run.state.params[*i].distance(leader) > COINCIDENT_DISTANCE);
    if distinct_tie {
        return Ok(BoundReport::inapplicable(
            name,
            "minimizing worker is not unique",
        ));
    }
    Ok(BoundReport::evaluate(
        name,
        obj.gradient(leader).norm(),
        0.0,
        Tolerance::Absolute(1e-8),
        None,
        run.rounds,
    ))
}

/// Leader gradients along a lockstep LGD run get arbitrarily small:
/// the minimum recorded norm must drop below `1e-6`.
pub fn check_leader_gradient_liminf(
    name: &str,
    obj: &Objective,
    cfg: &ClusterConfig,
    init: &[ParamVector],
) -> Result<BoundReport, TheoryError> {
    if let Some(big_m) = obj.lipschitz() {
        if cfg.step.eta >= 2.0 / big_m {
            return Ok(BoundReport::inapplicable(name, "eta >= 2/M"));
        }
    }
    let mut min_norm = f64::INFINITY;
    let run = run_synchronous_lgd(cfg, obj, init, |info| {
        if let Some(board) = &info.state.board {
            min_norm = min_norm.min(obj.gradient(&board.global_params).norm());
        }
        min_norm >= 1e-6
    })?;
    Ok(BoundReport::evaluate(
        name,
        min_norm,
        0.0,
        Tolerance::Absolute(1e-6),
        None,
        run.rounds,
    ))
}

/// Root of `e^{−y+1} = λy` on `[1, max(2, 2/λ)]` by bisection.
pub fn counterexample_root(lambda: f64) -> Result<f64, TheoryError> {
    let h = |y: f64| (-y + 1.0).exp() - lambda * y;
    let (mut lo, mut hi) = (1.0f64, (2.0f64).max(2.0 / lambda));
    if h(lo) < 0.0 || h(hi) > 0.0 {
        return Err(TheoryError::Bracket { lo, hi });
    }
    if h(lo) == 0.0 {
        return Ok(lo);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-worker elastic averaging has a stationary point `(−y, y, center 0)`
/// at which no coordinate is stationary for `f` itself.
pub fn check_easgd_counterexample(lambda: f64) -> Result<BoundReport, TheoryError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(TheoryError::Argument(format!(
            "lambda must lie in (0, 1], got {lambda}"
        )));
    }
    let f = easgd_counterexample_f()?;
    let y = counterexample_root(lambda)?;
    let df = |t: f64| f.gradient(&ParamVector::from(t)).as_slice()[0];
    let grad = [
        df(-y) + lambda * (-y - 0.0),
        df(y) + lambda * (y - 0.0),
        lambda * (0.0 - (-y)) + lambda * (0.0 - y),
    ];
    let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let min_slope = df(-y).abs().min(df(y).abs()).min(df(0.0).abs());
    let floor = lambda * y.min(1.0) * (1.0 - DETERMINISTIC_TOLERANCE);
    let name = format!("easgd_counterexample/lambda={lambda}");
    let mut report = BoundReport::evaluate(
        name,
        grad_norm,
        0.0,
        Tolerance::Absolute(DETERMINISTIC_TOLERANCE),
        None,
        1,
    )
    .with_note(format!("y = {y:.12}, min |f'| = {min_slope:.6e}"));
    if !(min_slope >= floor && min_slope > 0.0) {
        report.status = Status::Fail;
        report.note = Some(format!("min |f'| = {min_slope:e} below {floor:e}"));
    }
    Ok(report)
}

fn angle(u: &[f64], v: &[f64]) -> f64 {
    let d = crate::linalg::dot(u, v);
    let nu = crate::linalg::dot(u, u).sqrt();
    let nv = crate::linalg::dot(v, v).sqrt();
    (d / (nu * nv)).clamp(-1.0, 1.0).acos()
}

/// Which angle-improvement statement to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleVariant {
    /// Small-λ limit, at the given λ as a proxy; needs `θ_x > 1e-6`.
    Limit,
    /// Any λ, for `x ∈ S_r` with `r/√κ + r^{3/2}/κ^{1/4} ≤ 1`.
    Conditioned,
}

/// Fraction of the sublevel ellipsoid `E = {z : zᵀAz ≤ xᵀAx}` whose pull turns
/// the search direction at least as close to the Newton direction `−x` as the
/// gradient direction `−Ax` is. Checks fraction `≥ ½ − 3σ_MC`.
pub fn check_angle_improvement(
    name: &str,
    a: &DenseMatrix,
    x: &ParamVector,
    lambda: f64,
    samples: u64,
    variant: AngleVariant,
    rng: &mut SimRng,
) -> Result<BoundReport, TheoryError> {
    let n = a.rows();
    if a.cols() != n || x.dim() != n {
        return Err(TheoryError::Argument(
            "matrix and point dimensions differ".into(),
        ));
    }
    let (alphas, vecs) = symmetric_eigen(a)?;
    if alphas[0] <= 0.0 {
        return Ok(BoundReport::inapplicable(
            name,
            "matrix is not positive definite",
        ));
    }
    let xs = x.as_slice();
    let ax = a.mul_vec(xs);
    let neg_x: Vec<f64> = xs.iter().map(|v| -v).collect();
    let neg_ax: Vec<f64> = ax.iter().map(|v| -v).collect();
    let theta_x = angle(&neg_ax, &neg_x);
    match variant {
        AngleVariant::Limit if theta_x <= 1e-6 => {
            return Ok(BoundReport::inapplicable(
                name,
                format!("theta_x = {theta_x:e} is degenerate"),
            ));
        }
        AngleVariant::Conditioned => {
            let kappa = alphas[n - 1] / alphas[0];
            let r = kappa.sqrt() * theta_x.cos();
            let lhs = r / kappa.sqrt() + r.powf(1.5) / kappa.powf(0.25);
            if lhs > 1.0 {
                return Ok(BoundReport::inapplicable(
                    name,
                    format!("x lies on S_r with r = {r:.4}, outside R_kappa ({lhs:.4} > 1)"),
                ));
            }
        }
        _ => {}
    }
    let level = crate::linalg::dot(xs, &ax);
    let radii: Vec<f64> = alphas.iter().map(|al| (level / al).sqrt()).collect();
    let mut hits = 0u64;
    let mut u = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        // uniform in the unit ball by rejection from the cube, then scaled onto E
        loop {
            for ui in u.iter_mut() {
                *ui = rng.uniform_in(-1.0, 1.0);
            }
            if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                break;
            }
        }
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = (0..n).map(|k| vecs.get(i, k) * radii[k] * u[k]).sum();
        }
        let dir: Vec<f64> = (0..n).map(|i| -(ax[i] + lambda * (xs[i] - z[i]))).collect();
        if angle(&dir, &neg_x) <= theta_x {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    let se = (frac * (1.0 - frac) / samples as f64).sqrt();
    Ok(BoundReport::evaluate(
        name,
        0.5,
        frac,
        Tolerance::StdErrors(VOLUME_STD_ERRORS),
        Some(se),
        samples,
    ))
}

/// Point on `S_r` built from the extreme eigen-directions of a diagonal matrix.
pub fn extreme_direction_point(diag: &[f64]) -> ParamVector {
    let (a1, an) = (diag[0], diag[diag.len() - 1]);
    let mut x = vec![0.0; diag.len()];
    x[0] = (an / (a1 + an)).sqrt();
    x[diag.len() - 1] = (a1 / (a1 + an)).sqrt();
    ParamVector::from_raw(x)
}

fn random_point(dim: usize, rng: &mut SimRng) -> ParamVector {
    ParamVector::from_raw((0..dim).map(|_| rng.normal()).collect())
}

type Check = (
    &'static str,
    fn(&mut SimRng) -> Result<Vec<BoundReport>, TheoryError>,
);

fn suite() -> Vec<Check> {
    vec![
        ("one_step_descent", |rng| {
            let iso = quadratic_from_matrix(DenseMatrix::identity(2))?;
            let hand = check_one_step_descent(
                "one_step_descent/identity_hand",
                &iso,
                &ParamVector::new(vec![1.0, 0.0])?,
                &ParamVector::zeros(2),
                &StepParams::new(0.25, 0.5, 0.0)?,
                1,
                rng,
            )?;
            let obj = quadratic_with_condition(4, 100.0, rng)?;
            let x = random_point(4, rng);
            let z = x.scaled(0.5);
            let p = StepParams::new(1.0 / 300.0, 1.0, 0.0)?;
            let noiseless = check_one_step_descent(
                "one_step_descent/kappa100_noiseless",
                &obj,
                &x,
                &z,
                &StepParams::new(1.0 / 200.0, 0.0, 0.0)?,
                1,
                rng,
            )?;
            let noisy_obj = obj.with_noise(NoiseModel::new(1.0, 0.5, 0.0)?);
            let noisy = check_one_step_descent(
                "one_step_descent/kappa100_noisy",
                &noisy_obj,
                &x,
                &z,
                &p,
                100_000,
                rng,
            )?;
            Ok(vec![hand, noiseless, noisy])
        }),
        ("stale_leader", |rng| {
            let obj =
                quadratic_with_condition(4, 10.0, rng)?.with_noise(NoiseModel::new(1.0, 0.0, 0.0)?);
            let z = random_point(4, rng);
            let x = z.scaled(0.9);
            let p = StepParams::new(1.0 / 20.0, 1.0, 0.0)?;
            Ok(vec![check_stale_leader(
                "stale_leader/kappa10",
                &obj,
                &x,
                &z,
                &p,
                100_000,
                rng,
            )?])
        }),
        ("limsup", |rng| {
            let obj = quadratic_with_condition(4, 10.0, rng)?;
            let mut cfg =
                ClusterConfig::new(Method::Lsgd, 1, 4, StepParams::new(1.0 / 20.0, 0.1, 0.0)?);
            cfg.noise = NoiseModel::new(1.0, 0.0, 0.0)?;
            cfg.pull_scaling = PullScaling::LearningRate;
            cfg.max_total_steps = 4 * 400;
            cfg.seed = rng.next_u64();
            let init: Vec<ParamVector> = (0..4).map(|_| random_point(4, rng)).collect();
            Ok(vec![check_limsup(
                "limsup_constant_step/kappa10",
                &obj,
                &cfg,
                &init,
                2000,
            )?])
        }),
        ("psi_minimizer", |rng| {
            let mut out = Vec::new();
            let one = quadratic_from_matrix(DenseMatrix::diag(&[1.0]))?;
            out.extend(check_psi_minimizer(
                "psi_minimizer/scalar_hand",
                &one,
                &ParamVector::from(2.0),
                1.0,
            )?);
            let obj = quadratic_with_condition(4, 100.0, rng)?;
            out.extend(check_psi_minimizer(
                "psi_minimizer/leader_at_optimum",
                &obj,
                &ParamVector::zeros(4),
                1.0,
            )?);
            let z = random_point(4, rng);
            for (label, lambda) in [("0.01", 0.01), ("1", 1.0), ("1e6", 1e6)] {
                out.extend(check_psi_minimizer(
                    &format!("psi_minimizer/kappa100_lambda={label}"),
                    &obj,
                    &z,
                    lambda,
                )?);
            }
            Ok(out)
        }),
        ("stochastic_leader", |rng| {
            let mut out = Vec::new();
            out.extend(check_stochastic_leader_bounds(
                "stochastic_leader/equal_gaps",
                &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
                0.5,
                1.0,
                100_000,
                rng,
            )?);
            out.extend(check_stochastic_leader_bounds(
                "stochastic_leader/spread_gaps",
                &[0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
                1.0,
                16.0,
                100_000,
                rng,
            )?);
            Ok(out)
        }),
        ("rate_one_over_k", |rng| {
            let obj = quadratic_with_condition(4, 10.0, rng)?;
            let big_m = obj.lipschitz().unwrap_or(10.0);
            let mut cfg = ClusterConfig::new(
                Method::Lsgd,
                1,
                4,
                StepParams::new(1.0 / (2.0 * big_m), 0.1, 0.0)?,
            );
            cfg.noise = NoiseModel::new(1.0, 0.0, 0.1)?;
            cfg.selection = SelectionMode::Stochastic;
            cfg.eta_schedule = Schedule::OneOverK;
            cfg.lambda_schedule = Schedule::OneOverK;
            cfg.pull_scaling = PullScaling::LearningRate;
            cfg.seed = rng.next_u64();
            let init: Vec<ParamVector> = (0..4).map(|_| random_point(4, rng).scaled(3.0)).collect();
            let trend = check_rate_1_over_k(
                "rate_one_over_k/trend",
                &obj,
                &cfg,
                &init,
                20,
                (500, 5000, 100),
            )?;
            let contraction = check_deterministic_contraction(
                "rate_one_over_k/noiseless_contraction",
                &obj,
                &init[0],
                1.0 / big_m,
                200,
            )?;
            Ok(vec![trend, contraction])
        }),
        ("stationary_leader", |_| {
            let init = sinc_inits();
            let mut out = Vec::new();
            for (label, lambda) in [("0.01", 0.01), ("0.1", 0.1)] {
                let mut cfg =
                    ClusterConfig::new(Method::Lgd, 1, 4, StepParams::new(0.1, lambda, 0.0)?);
                cfg.max_total_steps = 4 * 50_000;
                cfg.step_tolerance = Some(1e-10);
                out.push(check_stationary_leader(
                    &format!("stationary_leader/sinc_lambda={label}"),
                    &sinc2d(),
                    &cfg,
                    &init,
                )?);
            }
            Ok(out)
        }),
        ("leader_gradient_liminf", |rng| {
            let obj = quadratic_with_condition(4, 10.0, rng)?;
            let mut cfg = ClusterConfig::new(Method::Lgd, 2, 2, StepParams::new(0.1, 0.2, 0.1)?);
            cfg.tau = 3;
            cfg.tau_g = 6;
            cfg.max_total_steps = 4 * 20_000;
            let init: Vec<ParamVector> = (0..4).map(|_| random_point(4, rng).scaled(5.0)).collect();
            Ok(vec![check_leader_gradient_liminf(
                "leader_gradient_liminf/kappa10_periods3_6",
                &obj,
                &cfg,
                &init,
            )?])
        }),
        ("easgd_counterexample", |_| {
            [0.1, 0.25, 0.5, 0.75, 1.0]
                .into_iter()
                .map(check_easgd_counterexample)
                .collect()
        }),
        ("angle_improvement_limit", |rng| {
            let a = DenseMatrix::diag(&[1.0, 3.0, 10.0, 30.0]);
            let mut out = vec![check_angle_improvement(
                "angle_improvement_limit/identity",
                &DenseMatrix::identity(2),
                &ParamVector::new(vec![1.0, 0.5])?,
                1e-6,
                1000,
                AngleVariant::Limit,
                rng,
            )?];
            let mut found = 0;
            while found < 3 {
                let x = random_point(4, rng);
                let ax = a.mul_vec(x.as_slice());
                let neg: Vec<f64> = ax.iter().map(|v| -v).collect();
                let negx: Vec<f64> = x.as_slice().iter().map(|v| -v).collect();
                if angle(&neg, &negx) <= 0.1 {
                    continue;
                }
                out.push(check_angle_improvement(
                    &format!("angle_improvement_limit/lambda=1e-6_point{found}"),
                    &a,
                    &x,
                    1e-6,
                    100_000,
                    AngleVariant::Limit,
                    rng,
                )?);
                found += 1;
            }
            Ok(out)
        }),
        ("angle_improvement_conditioned", |rng| {
            let mut out = Vec::new();
            for kappa in [100.0, 400.0] {
                let diag = [1.0, kappa];
                let a = DenseMatrix::diag(&diag);
                let x = extreme_direction_point(&diag);
                for (label, lambda) in [("0.01", 0.01), ("1", 1.0), ("100", 100.0)] {
                    out.push(check_angle_improvement(
                        &format!("angle_improvement_conditioned/kappa={kappa}_lambda={label}"),
                        &a,
                        &x,
                        lambda,
                        100_000,
                        AngleVariant::Conditioned,
                        rng,
                    )?);
                }
            }
            Ok(out)
        }),
    ]
}

/// Starting points of the four-worker sinc demonstration.
pub fn sinc_inits() -> Vec<ParamVector> {
    [[-6.0, -4.0], [-15.0, -18.0], [20.0, 11.0], [17.0, 8.0]]
        .iter()
        .map(|p| ParamVector::from_raw(p.to_vec()))
        .collect()
}

/// Runs every check whose report name contains `filter` (all when `None`).
///
/// Each check group owns an RNG stream forked from `seed` by position, so
/// filtering never changes the numbers a check produces.
pub fn run_all(filter: Option<&str>, seed: u64) -> Result<Vec<BoundReport>, TheoryError> {
    let root = SimRng::new(seed);
    let mut out = Vec::new();
    for (i, (group, check)) in suite().into_iter().enumerate() {
        if let Some(f) = filter {
            if !group.contains(f) && !f.contains(group) {
                continue;
            }
        }
        let mut rng = root.fork(i as u64);
        let reports = check(&mut rng)?;
        out.extend(
            reports
                .into_iter()
                .filter(|r| filter.map_or(true, |f| r.name.contains(f))),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_descent_hand_example() {
        let iso = quadratic_from_matrix(DenseMatrix::identity(2)).unwrap();
        let r = check_one_step_descent(
            "hand",
            &iso,
            &ParamVector::new(vec![1.0, 0.0]).unwrap(),
            &ParamVector::zeros(2),
            &StepParams::new(0.25, 0.5, 0.0).unwrap(),
            10,
            &mut SimRng::new(0),
        )
        .unwrap();
        assert!((r.lhs - 0.1953125).abs() < 1e-15);
        assert!((r.rhs - 0.3125).abs() < 1e-15);
        assert!(r.passed());
    }

    #[test]
    fn one_step_descent_precondition() {
        let obj = quadratic_with_condition(2, 100.0, &mut SimRng::new(1)).unwrap();
        let x = ParamVector::new(vec![1.0, 1.0]).unwrap();
        let r = check_one_step_descent(
            "big_eta",
            &obj,
            &x,
            &x,
            &StepParams::new(0.1, 0.0, 0.0).unwrap(),
            10,
            &mut SimRng::new(0),
        )
        .unwrap();
        assert_eq!(r.status, Status::Inapplicable);
    }

    #[test]
    fn psi_minimizer_scalar() {
        let one = quadratic_from_matrix(DenseMatrix::diag(&[1.0])).unwrap();
        let [value, distance] =
            check_psi_minimizer("s", &one, &ParamVector::from(2.0), 1.0).unwrap();
        assert!((value.lhs - 0.5).abs() < 1e-15);
        assert!((value.rhs - 1.0).abs() < 1e-15);
        assert!(value.passed() && distance.passed());
        let [v0, d0] = check_psi_minimizer("zero", &one, &ParamVector::from(0.0), 1.0).unwrap();
        assert_eq!((v0.lhs, v0.rhs, d0.lhs, d0.rhs), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn stochastic_leader_trivial_cases() {
        let mut rng = SimRng::new(3);
        let [e, _] =
            check_stochastic_leader_bounds("s", &[0.0, 1.0, 2.0], 0.0, 1.0, 100, &mut rng).unwrap();
        assert_eq!(e.lhs, 0.0);
        let [e, t] = check_stochastic_leader_bounds("p1", &[0.0], 2.0, 1.0, 100, &mut rng).unwrap();
        assert_eq!((e.lhs, t.lhs), (0.0, 0.0));
        assert!(
            check_stochastic_leader_bounds("bad", &[1.0, 0.0], 1.0, 1.0, 10, &mut rng).is_err()
        );
    }

    #[test]
    fn standard_error_shrinks_with_trials() {
        let gaps = [0.0, 0.3, 0.6, 1.0];
        let [small, _] =
            check_stochastic_leader_bounds("a", &gaps, 0.5, 1.0, 50_000, &mut SimRng::new(5))
                .unwrap();
        let [large, _] =
            check_stochastic_leader_bounds("b", &gaps, 0.5, 1.0, 100_000, &mut SimRng::new(6))
                .unwrap();
        let ratio = small.std_error.unwrap() / large.std_error.unwrap();
        assert!((ratio - 2f64.sqrt()).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn counterexample_roots() {
        assert_eq!(counterexample_root(1.0).unwrap(), 1.0);
        let y = counterexample_root(0.5).unwrap();
        assert!(y > 1.0 && y < 2.0 * std::f64::consts::E);
        assert!(((-y + 1.0f64).exp() - 0.5 * y).abs() < 1e-11);
    }

    #[test]
    fn counterexample_holds_for_each_lambda() {
        for lambda in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let r = check_easgd_counterexample(lambda).unwrap();
            assert!(r.passed(), "{r:?}");
        }
        assert!(check_easgd_counterexample(0.0).is_err());
    }

    #[test]
    fn identity_matrix_has_no_angle_to_improve() {
        let r = check_angle_improvement(
            "id",
            &DenseMatrix::identity(2),
            &ParamVector::new(vec![1.0, 0.0]).unwrap(),
            1e-6,
            100,
            AngleVariant::Limit,
            &mut SimRng::new(0),
        )
        .unwrap();
        assert_eq!(r.status, Status::Inapplicable);
    }

    #[test]
    fn conditioned_angle_needs_r_in_range() {
        let diag = [1.0, 100.0];
        let r = check_angle_improvement(
            "k100",
            &DenseMatrix::diag(&diag),
            &extreme_direction_point(&diag),
            1.0,
            100,
            AngleVariant::Conditioned,
            &mut SimRng::new(0),
        )
        .unwrap();
        assert_eq!(r.status, Status::Inapplicable);
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn report_csv_line() {
        let r = BoundReport::evaluate("x", 1.0, 2.0, Tolerance::Absolute(0.0), None, 3);
        assert_eq!(
            r.csv_line(),
            "x,1.0000000000000000e0,2.0000000000000000e0,1.0000000000000000e0,,3,pass"
        );
    }

    #[test]
    fn filter_selects_counterexample_only() {
        let reports = run_all(Some("easgd_counterexample"), VERIFY_SEED).unwrap();
        assert_eq!(reports.len(), 5);
        assert!(reports.iter().all(|r| r.passed()));
    }
}
