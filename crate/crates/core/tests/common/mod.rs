//! Independent oracles shared by the integration targets.

#![allow(dead_code)]

use leadopt_core::leader::SelectionMode;
use leadopt_core::linalg::ParamVector;
use leadopt_core::objectives::{
    easgd_counterexample_f, matrix_completion_problem, quadratic_with_condition, sinc2d,
    NoiseModel, Objective,
};
use leadopt_core::rng::SimRng;
use leadopt_core::sim::{run, ClusterConfig, Method};
use leadopt_core::steps::StepParams;

pub const ORACLE_POINTS: usize = 100;
pub const ORACLE_TOLERANCE: f64 = 1e-5;

/// Central differences with a step scaled to each coordinate.
pub fn central_difference(obj: &Objective, x: &ParamVector) -> Vec<f64> {
    let base = x.as_slice().to_vec();
    (0..base.len())
        .map(|i| {
            let h = 1e-5 * base[i].abs().max(1.0);
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] += h;
            down[i] -= h;
            let fu = obj.value(&ParamVector::new(up).unwrap());
            let fd = obj.value(&ParamVector::new(down).unwrap());
            (fu - fd) / (2.0 * h)
        })
        .collect()
}

/// `‖∇f − FD‖∞ / max(1, ‖∇f‖∞)` at one point.
pub fn gradient_error(obj: &Objective, x: &ParamVector) -> f64 {
    let g = obj.gradient(x);
    let fd = central_difference(obj, x);
    let diff = g
        .as_slice()
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    diff / g.norm_inf().max(1.0)
}

/// Every objective family with its seeded sample points.
pub fn oracle_cases(seed: u64) -> Vec<(String, Objective, Vec<ParamVector>)> {
    let root = SimRng::new(seed);
    let mut cases = Vec::new();

    let mut rng = root.fork(0);
    let quad = quadratic_with_condition(10, 100.0, &mut rng).unwrap();
    let pts = (0..ORACLE_POINTS)
        .map(|_| gaussian_point(10, 3.0, &mut rng))
        .collect();
    cases.push(("quadratic".to_string(), quad, pts));

    let mut rng = root.fork(1);
    let mc = matrix_completion_problem(20, 3, &mut rng).unwrap();
    let pts = (0..ORACLE_POINTS)
        .map(|_| gaussian_point(60, 1.0, &mut rng))
        .collect();
    cases.push(("matrix_completion".to_string(), mc, pts));

    // Away from the origin, where the value switches to its series form.
    let mut rng = root.fork(2);
    let mut pts = Vec::new();
    while pts.len() < ORACLE_POINTS {
        let p = [rng.uniform_in(-20.0, 20.0), rng.uniform_in(-20.0, 20.0)];
        if p[0].hypot(p[1]) > 1e-3 {
            pts.push(ParamVector::new(p.to_vec()).unwrap());
        }
    }
    cases.push(("sinc2d".to_string(), sinc2d(), pts));

    // Away from the joins of the piecewise definition.
    let mut rng = root.fork(3);
    let mut pts = Vec::new();
    while pts.len() < ORACLE_POINTS {
        let x: f64 = rng.uniform_in(-3.0, 3.0);
        if (x.abs() - 1.0).abs() > 1e-3 {
            pts.push(ParamVector::from(x));
        }
    }
    cases.push((
        "easgd_counterexample".to_string(),
        easgd_counterexample_f().unwrap(),
        pts,
    ));
    cases
}

pub fn gaussian_point(dim: usize, scale: f64, rng: &mut SimRng) -> ParamVector {
    ParamVector::new((0..dim).map(|_| scale * rng.normal()).collect()).unwrap()
}

/// Plain sequential SGD fed by `rng`.
pub fn sequential_sgd(
    obj: &Objective,
    x0: &ParamVector,
    eta: f64,
    steps: u64,
    rng: &mut SimRng,
) -> ParamVector {
    let mut x = x0.clone();
    for _ in 0..steps {
        let g = obj.stochastic_gradient(&x, rng);
        let next = x
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .map(|(a, b)| a - eta * b)
            .collect();
        x = ParamVector::new(next).unwrap();
    }
    x
}

fn reduction_objective() -> (Objective, Vec<ParamVector>) {
    let mut rng = SimRng::new(404);
    let obj = quadratic_with_condition(5, 25.0, &mut rng)
        .unwrap()
        .with_noise(NoiseModel::new(0.5, 0.2, 0.3).unwrap());
    let init = (0..6).map(|_| gaussian_point(5, 2.0, &mut rng)).collect();
    (obj, init)
}

/// One worker in one group: pulls toward itself leave SGD untouched.
pub fn single_worker_lsgd_is_sgd() -> Result<(), String> {
    let (obj, init) = reduction_objective();
    let mut cfg = ClusterConfig::new(Method::Lsgd, 1, 1, StepParams::new(0.02, 0.3, 0.2).unwrap());
    cfg.noise = obj.noise();
    cfg.tau = 3;
    cfg.tau_g = 6;
    cfg.max_total_steps = 2000;
    cfg.seed = 31;
    let out = run(&cfg, &obj, &init[..1]).map_err(|e| e.to_string())?;
    let reference = sequential_sgd(
        &obj,
        &init[0],
        0.02,
        2000,
        &mut SimRng::new(31).fork(1).fork(0),
    );
    if out.state.params[0] == reference {
        Ok(())
    } else {
        Err(format!(
            "final {:?} vs {:?}",
            out.state.params[0], reference
        ))
    }
}

/// Zero pull coefficients: every worker runs its own SGD for the steps it was scheduled.
pub fn pull_free_lsgd_is_sgd() -> Result<(), String> {
    let (obj, init) = reduction_objective();
    let mut cfg = ClusterConfig::new(Method::Lsgd, 2, 3, StepParams::new(0.02, 0.0, 0.0).unwrap());
    cfg.noise = obj.noise();
    cfg.tau = 2;
    cfg.tau_g = 4;
    cfg.speeds = vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.5];
    cfg.max_total_steps = 3000;
    cfg.seed = 32;
    let out = run(&cfg, &obj, &init).map_err(|e| e.to_string())?;
    let grad_root = SimRng::new(32).fork(1);
    for (w, x0) in init.iter().enumerate() {
        let steps = out.state.counters[w];
        let reference = sequential_sgd(&obj, x0, 0.02, steps, &mut grad_root.fork(w as u64));
        if out.state.params[w] != reference {
            return Err(format!("worker {w} after {steps} steps differs"));
        }
    }
    Ok(())
}

/// Noise-free values: stochastic selection replays exact selection event for event.
pub fn noiseless_stochastic_selection_is_exact() -> Result<(), String> {
    let (obj, init) = reduction_objective();
    let obj = obj.with_noise(NoiseModel::new(0.5, 0.2, 0.0).unwrap());
    let mut cfg = ClusterConfig::new(Method::Lsgd, 2, 3, StepParams::new(0.02, 0.2, 0.1).unwrap());
    cfg.noise = obj.noise();
    cfg.tau = 2;
    cfg.tau_g = 4;
    cfg.speeds = vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.5];
    cfg.max_total_steps = 3000;
    cfg.seed = 33;
    let exact = run(&cfg, &obj, &init).map_err(|e| e.to_string())?;
    cfg.selection = SelectionMode::Stochastic;
    let stochastic = run(&cfg, &obj, &init).map_err(|e| e.to_string())?;
    if exact.trace != stochastic.trace {
        return Err("traces differ".into());
    }
    if exact.state != stochastic.state {
        return Err("final states differ".into());
    }
    Ok(())
}
