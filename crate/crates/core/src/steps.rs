//! Single-step update rules as pure functions.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, ParamVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("learning rate must be positive and finite, got {0}")]
    BadEta(f64),
    #[error("{name} must be finite and nonnegative, got {value}")]
    BadCoefficient { name: &'static str, value: f64 },
    #[error("{name} = {value} exceeds 1 and would overshoot its target")]
    Overshoot { name: &'static str, value: f64 },
    #[error("elastic coefficient {which} = {value} exceeds 1")]
    DivergentElastic { which: &'static str, value: f64 },
    #[error("center update needs at least one worker")]
    NoWorkers,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub eta: f64,
    pub lambda: f64,
    pub lambda_g: f64,
    /// Elastic coefficient for EASGD-style configs; see [`StepParams::elastic`].
    pub beta: Option<f64>,
}

impl StepParams {
    pub fn new(eta: f64, lambda: f64, lambda_g: f64) -> Result<Self, StepError> {
        let p = Self {
            eta,
            lambda,
            lambda_g,
            beta: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, StepError> {
        check_nonneg("beta", beta)?;
        self.beta = Some(beta);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(StepError::BadEta(self.eta));
        }
        check_nonneg("lambda", self.lambda)?;
        check_nonneg("lambda_g", self.lambda_g)?;
        if let Some(b) = self.beta {
            check_nonneg("beta", b)?;
        }
        Ok(())
    }

    /// Per-step elastic coefficient α pulling a worker toward the center.
    ///
    /// With β supplied this is `β/p`; otherwise `ηλ`.
    pub fn elastic(&self, workers: usize) -> f64 {
        match self.beta {
            Some(b) => b / workers as f64,
            None => self.eta * self.lambda,
        }
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), StepError> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(StepError::BadCoefficient { name, value });
    }
    Ok(())
}

fn check_unit(name: &'static str, value: f64) -> Result<(), StepError> {
    check_nonneg(name, value)?;
    if value > 1.0 {
        return Err(StepError::Overshoot { name, value });
    }
    Ok(())
}

thread_local! {
    static FLIP_LEADER_PULL: Cell<bool> = const { Cell::new(false) };
}

/// Mutation hook for checking that the verification suite detects a broken
/// update rule: while set, the leader-pull terms of [`lsgd_step`] change sign
/// on the current thread.
#[doc(hidden)]
pub fn set_pull_sign_fault(on: bool) {
    FLIP_LEADER_PULL.with(|f| f.set(on));
}

fn pull_sign() -> f64 {
    if FLIP_LEADER_PULL.with(Cell::get) {
        -1.0
    } else {
        1.0
    }
}

/// `x − ηg − λ(x − x̃ʲ) − λ_G(x − x̃)`.
///
/// Zero pull coefficients skip their term entirely, so the pull-free case is
/// bitwise `x − ηg`.
pub fn lsgd_step(
    x: &ParamVector,
    g: &ParamVector,
    local_leader: &ParamVector,
    global_leader: &ParamVector,
    p: &StepParams,
) -> Result<ParamVector, StepError> {
    p.validate()?;
    check_unit("lambda", p.lambda)?;
    check_unit("lambda_g", p.lambda_g)?;
    x.check_same_dim(g, 1)?;
    x.check_same_dim(local_leader, 2)?;
    x.check_same_dim(global_leader, 3)?;
    let sign = pull_sign();
    let mut out = x.as_slice().to_vec();
    for (o, gi) in out.iter_mut().zip(g.as_slice()) {
        *o -= p.eta * gi;
    }
    let xs = x.as_slice();
    for (coeff, leader) in [(p.lambda, local_leader), (p.lambda_g, global_leader)] {
        if coeff == 0.0 {
            continue;
        }
        let c = sign * coeff;
        for ((o, xi), li) in out.iter_mut().zip(xs).zip(leader.as_slice()) {
            *o -= c * (xi - li);
        }
    }
    Ok(ParamVector::from_raw(out))
}

/// `x − c(x − leader)`; `c = 1` lands exactly on the leader.
pub fn pull_only_step(
    x: &ParamVector,
    leader: &ParamVector,
    coeff: f64,
) -> Result<ParamVector, StepError> {
    check_unit("coeff", coeff)?;
    x.check_same_dim(leader, 1)?;
    if coeff == 0.0 {
        return Ok(x.clone());
    }
    if coeff == 1.0 {
        return Ok(leader.clone());
    }
    let out = x
        .as_slice()
        .iter()
        .zip(leader.as_slice())
        .map(|(xi, li)| xi - coeff * (xi - li))
        .collect();
    Ok(ParamVector::from_raw(out))
}

/// `(1 − α)x + α·center − ηg` with `α` from [`StepParams::elastic`].
pub fn eagd_worker_step(
    x: &ParamVector,
    g: &ParamVector,
    center: &ParamVector,
    p: &StepParams,
    workers: usize,
) -> Result<ParamVector, StepError> {
    p.validate()?;
    let alpha = p.elastic(workers);
    if alpha > 1.0 {
        return Err(StepError::DivergentElastic {
            which: "worker",
            value: alpha,
        });
    }
    x.check_same_dim(g, 1)?;
    x.check_same_dim(center, 2)?;
    let out = x
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .zip(center.as_slice())
        .map(|((xi, gi), ci)| xi - alpha * (xi - ci) - p.eta * gi)
        .collect();
    Ok(ParamVector::from_raw(out))
}

/// `(1 − pα)c + pα·mean(workers)`.
pub fn eagd_center_step(
    center: &ParamVector,
    workers: &[ParamVector],
    p: &StepParams,
) -> Result<ParamVector, StepError> {
    p.validate()?;
    if workers.is_empty() {
        return Err(StepError::NoWorkers);
    }
    let n = workers.len();
    let rate = n as f64 * p.elastic(n);
    if rate > 1.0 {
        return Err(StepError::DivergentElastic {
            which: "center",
            value: rate,
        });
    }
    for (i, w) in workers.iter().enumerate() {
        center.check_same_dim(w, i + 1)?;
    }
    let mut mean = vec![0.0; center.dim()];
    for w in workers {
        for (m, wi) in mean.iter_mut().zip(w.as_slice()) {
            *m += wi;
        }
    }
    let out = center
        .as_slice()
        .iter()
        .zip(&mean)
        .map(|(ci, m)| (1.0 - rate) * ci + rate * (m / n as f64))
        .collect();
    Ok(ParamVector::from_raw(out))
}

/// Push accumulated gradient, pull parameters: returns `(center − η·accum, same)`.
pub fn downpour_exchange(
    accum: &ParamVector,
    center: &ParamVector,
    eta: f64,
) -> Result<(ParamVector, ParamVector), StepError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(StepError::BadEta(eta));
    }
    center.check_same_dim(accum, 1)?;
    let out: Vec<f64> = center
        .as_slice()
        .iter()
        .zip(accum.as_slice())
        .map(|(c, a)| c - eta * a)
        .collect();
    let new_center = ParamVector::from_raw(out);
    Ok((new_center.clone(), new_center))
}
