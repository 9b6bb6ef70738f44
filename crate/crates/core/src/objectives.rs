//! Test functions with exact gradients and noise-wrapped estimators.
//!
//! Every objective exposes an exact value and gradient. The stochastic
//! estimators add zero-mean Gaussian noise whose total variance is
//! `σ² + ν‖∇f(x)‖²` for gradients and `σ_f²` for values.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    random_orthogonal, solve_small_linear, symmetric_eigen, DenseMatrix, LinalgError, ParamVector,
};
use crate::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("condition number must be >= 1, got {0}")]
    BadCondition(f64),
    #[error("dimension must be at least {min}, got {got}")]
    BadDimension { min: usize, got: usize },
    #[error("rank {r} must satisfy 1 <= r <= d = {d}")]
    BadRank { d: usize, r: usize },
    #[error("target matrix must be {d}x{d}")]
    BadTarget { d: usize },
    #[error("matrix is not symmetric positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("noise parameter {name} must be finite and nonnegative, got {value}")]
    BadNoise { name: &'static str, value: f64 },
    #[error("point has dimension {found}, objective expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Variance model of the stochastic estimators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Additive gradient variance σ².
    pub sigma2: f64,
    /// Relative gradient variance ν.
    pub nu: f64,
    /// Standard deviation σ_f of the value estimator.
    pub sigma_f: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64, nu: f64, sigma_f: f64) -> Result<Self, ObjectiveError> {
        for (name, value) in [("sigma2", sigma2), ("nu", nu), ("sigma_f", sigma_f)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ObjectiveError::BadNoise { name, value });
            }
        }
        Ok(Self {
            sigma2,
            nu,
            sigma_f,
        })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn gradient_is_exact(&self) -> bool {
        self.sigma2 == 0.0 && self.nu == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// `½ xᵀAx`, minimizer at the origin.
    Quadratic { a: DenseMatrix, spectrum: Vec<f64> },
    /// `¼‖M − XXᵀ‖²_F` over row-major `X ∈ R^{d×r}`.
    MatrixCompletion {
        target: DenseMatrix,
        d: usize,
        r: usize,
        /// Generating factor `U` with `M = UUᵀ`, when known.
        factor: Option<Vec<f64>>,
    },
    /// Radial sinc `sin(πρ)/(πρ)` on the plane.
    Sinc2d,
    /// Piecewise 1-D function with exponential tails whose elastic-averaging
    /// objective has stationary points that are not stationary for `f`.
    EasgdCounterexample { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    kind: ObjectiveKind,
    noise: NoiseModel,
    dim: usize,
    strong_convexity: Option<f64>,
    lipschitz: Option<f64>,
}

/// Value of the global minimum of the radial sinc, attained on the ring ρ ≈ 1.4303.
pub const SINC_GLOBAL_MIN: f64 = -0.217_233_628_211_221_66;

impl Objective {
    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Strong convexity modulus `m`, when the objective is strongly convex.
    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }

    /// Gradient Lipschitz constant `M`, when known globally.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn condition_number(&self) -> Option<f64> {
        Some(self.lipschitz? / self.strong_convexity?)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ObjectiveKind::Quadratic { .. } => "quadratic",
            ObjectiveKind::MatrixCompletion { .. } => "matrix_completion",
            ObjectiveKind::Sinc2d => "sinc2d",
            ObjectiveKind::EasgdCounterexample { .. } => "easgd_counterexample",
        }
    }

    /// Global minimum value, when known in closed form.
    pub fn min_value(&self) -> Option<f64> {
        match self.kind {
            ObjectiveKind::Quadratic { .. } | ObjectiveKind::MatrixCompletion { .. } => Some(0.0),
            ObjectiveKind::Sinc2d => Some(SINC_GLOBAL_MIN),
            ObjectiveKind::EasgdCounterexample { .. } => None,
        }
    }

    /// The unique minimizer, for strongly convex objectives.
    pub fn minimizer(&self) -> Option<ParamVector> {
        match self.kind {
            ObjectiveKind::Quadratic { .. } => Some(ParamVector::zeros(self.dim)),
            _ => None,
        }
    }

    pub fn check_point(&self, x: &ParamVector) -> Result<(), ObjectiveError> {
        if x.dim() != self.dim {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &ParamVector) -> f64 {
        debug_assert_eq!(x.dim(), self.dim);
        let xs = x.as_slice();
        match &self.kind {
            ObjectiveKind::Quadratic { a, .. } => 0.5 * a.quad_form(xs),
            ObjectiveKind::MatrixCompletion { .. } => self.matrix_completion(xs, false).0,
            ObjectiveKind::Sinc2d => sinc_value(xs[0], xs[1]),
            ObjectiveKind::EasgdCounterexample { coeffs } => counterexample_value(coeffs, xs[0]),
        }
    }

    pub fn gradient(&self, x: &ParamVector) -> ParamVector {
        self.value_and_gradient(x).1
    }

    /// Value and gradient from one pass; cheaper than two calls for matrix completion.
    pub fn value_and_gradient(&self, x: &ParamVector) -> (f64, ParamVector) {
        debug_assert_eq!(x.dim(), self.dim);
        let xs = x.as_slice();
        match &self.kind {
            ObjectiveKind::Quadratic { a, .. } => {
                let ax = a.mul_vec(xs);
                let value = 0.5 * crate::linalg::dot(xs, &ax);
                (value, ParamVector::from_raw(ax))
            }
            ObjectiveKind::MatrixCompletion { .. } => {
                let (value, grad) = self.matrix_completion(xs, true);
                (
                    value,
                    ParamVector::from_raw(grad.expect("gradient requested")),
                )
            }
            ObjectiveKind::Sinc2d => {
                let (gx, gy) = sinc_gradient(xs[0], xs[1]);
                (
                    sinc_value(xs[0], xs[1]),
                    ParamVector::from_raw(vec![gx, gy]),
                )
            }
            ObjectiveKind::EasgdCounterexample { coeffs } => (
                counterexample_value(coeffs, xs[0]),
                ParamVector::from(counterexample_derivative(coeffs, xs[0])),
            ),
        }
    }

    /// Unbiased gradient estimate with `E‖ε‖² = σ² + ν‖∇f(x)‖²`.
    pub fn stochastic_gradient(&self, x: &ParamVector, rng: &mut SimRng) -> ParamVector {
        self.perturb_gradient(self.gradient(x), rng)
    }

    /// Adds estimator noise to an exact gradient computed elsewhere.
    pub fn perturb_gradient(&self, mut grad: ParamVector, rng: &mut SimRng) -> ParamVector {
        if self.noise.gradient_is_exact() {
            return grad;
        }
        let total = self.noise.sigma2 + self.noise.nu * grad.norm_sq();
        let std = (total / self.dim as f64).sqrt();
        for g in grad.as_mut_slice() {
            *g += std * rng.normal();
        }
        grad
    }

    /// Unbiased value estimate with variance `σ_f²`.
    pub fn stochastic_value(&self, x: &ParamVector, rng: &mut SimRng) -> f64 {
        self.perturb_value(self.value(x), rng)
    }

    pub fn perturb_value(&self, value: f64, rng: &mut SimRng) -> f64 {
        if self.noise.sigma_f == 0.0 {
            return value;
        }
        value + self.noise.sigma_f * rng.normal()
    }

    fn matrix_completion(&self, xs: &[f64], with_grad: bool) -> (f64, Option<Vec<f64>>) {
        let ObjectiveKind::MatrixCompletion { target, d, r, .. } = &self.kind else {
            unreachable!("matrix completion kernel on another objective");
        };
        let x = ArrayView2::from_shape((*d, *r), xs).expect("flattened d x r point");
        let m = ArrayView2::from_shape((*d, *d), target.data()).expect("d x d target");
        let mut resid = x.dot(&x.t());
        resid -= &m;
        let value = 0.25 * resid.iter().map(|v| v * v).sum::<f64>();
        let grad = with_grad.then(|| resid.dot(&x).iter().copied().collect());
        (value, grad)
    }
}

/// `½ xᵀAx` with a log-uniform spectrum on `[1, κ]` rotated by a seeded random rotation.
pub fn quadratic_with_condition(
    dim: usize,
    kappa: f64,
    rng: &mut SimRng,
) -> Result<Objective, ObjectiveError> {
    if dim < 2 {
        return Err(ObjectiveError::BadDimension { min: 2, got: dim });
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(ObjectiveError::BadCondition(kappa));
    }
    let spectrum: Vec<f64> = (0..dim)
        .map(|i| kappa.powf(i as f64 / (dim - 1) as f64))
        .collect();
    let q = random_orthogonal(dim, rng);
    let a = DenseMatrix::symmetric_from_fn(dim, |i, j| {
        (0..dim)
            .map(|k| q.get(i, k) * spectrum[k] * q.get(j, k))
            .sum()
    });
    Ok(Objective {
        dim,
        strong_convexity: Some(spectrum[0]),
        lipschitz: Some(spectrum[dim - 1]),
        kind: ObjectiveKind::Quadratic { a, spectrum },
        noise: NoiseModel::none(),
    })
}

/// `½ xᵀAx` for a given symmetric positive definite `A`.
pub fn quadratic_from_matrix(a: DenseMatrix) -> Result<Objective, ObjectiveError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        }
        .into());
    }
    let sym = DenseMatrix::symmetric_from_fn(n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let (spectrum, _) = symmetric_eigen(&sym)?;
    if spectrum[0] <= 0.0 {
        return Err(ObjectiveError::NotPositiveDefinite(spectrum[0]));
    }
    Ok(Objective {
        dim: n,
        strong_convexity: Some(spectrum[0]),
        lipschitz: Some(spectrum[n - 1]),
        kind: ObjectiveKind::Quadratic { a: sym, spectrum },
        noise: NoiseModel::none(),
    })
}

/// Random PSD instance: `U` has i.i.d. N(0,1) entries and `M = UUᵀ`.
pub fn matrix_completion_problem(
    d: usize,
    r: usize,
    rng: &mut SimRng,
) -> Result<Objective, ObjectiveError> {
    if r == 0 || r > d {
        return Err(ObjectiveError::BadRank { d, r });
    }
    let u: Vec<f64> = (0..d * r).map(|_| rng.normal()).collect();
    let uv = ArrayView2::from_shape((d, r), &u[..]).expect("d x r factor");
    let m = uv.dot(&uv.t());
    let target = DenseMatrix::symmetric_from_fn(d, |i, j| m[[i, j]]);
    let mut obj = matrix_completion_from_target(target, d, r)?;
    if let ObjectiveKind::MatrixCompletion { factor, .. } = &mut obj.kind {
        *factor = Some(u);
    }
    Ok(obj)
}

pub fn matrix_completion_from_target(
    target: DenseMatrix,
    d: usize,
    r: usize,
) -> Result<Objective, ObjectiveError> {
    if r == 0 || r > d {
        return Err(ObjectiveError::BadRank { d, r });
    }
    if target.rows() != d || target.cols() != d {
        return Err(ObjectiveError::BadTarget { d });
    }
    Ok(Objective {
        dim: d * r,
        strong_convexity: None,
        lipschitz: None,
        kind: ObjectiveKind::MatrixCompletion {
            target,
            d,
            r,
            factor: None,
        },
        noise: NoiseModel::none(),
    })
}

impl Objective {
    /// Generating factor `U` of a matrix-completion instance, flattened row-major.
    pub fn completion_factor(&self) -> Option<ParamVector> {
        match &self.kind {
            ObjectiveKind::MatrixCompletion {
                factor: Some(u), ..
            } => Some(ParamVector::from_raw(u.clone())),
            _ => None,
        }
    }
}

pub fn sinc2d() -> Objective {
    Objective {
        dim: 2,
        strong_convexity: None,
        lipschitz: None,
        kind: ObjectiveKind::Sinc2d,
        noise: NoiseModel::none(),
    }
}

const SINC_SERIES_RADIUS: f64 = 1e-4;

fn sinc_value(x: f64, y: f64) -> f64 {
    let rho = x.hypot(y);
    if rho == 0.0 {
        return 1.0;
    }
    let u = std::f64::consts::PI * rho;
    if rho < SINC_SERIES_RADIUS {
        return 1.0 - u * u / 6.0 + u.powi(4) / 120.0;
    }
    u.sin() / u
}

fn sinc_gradient(x: f64, y: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let rho = x.hypot(y);
    if rho == 0.0 {
        return (0.0, 0.0);
    }
    if rho < SINC_SERIES_RADIUS {
        let u = PI * rho;
        let c = PI * PI * (-1.0 / 3.0 + u * u / 30.0);
        return (c * x, c * y);
    }
    let u = PI * rho;
    let dl_drho = (u.cos() * u - u.sin()) / (PI * rho * rho);
    (dl_drho * x / rho, dl_drho * y / rho)
}

/// Degree of the polynomial middle piece of [`easgd_counterexample_f`].
pub const COUNTEREXAMPLE_DEGREE: usize = 7;

/// Row of derivative `order` of the monomial basis `1, t, …, t^degree` evaluated at `t`.
fn monomial_row(degree: usize, t: f64, order: usize) -> Vec<f64> {
    (0..=degree)
        .map(|k| {
            if k < order {
                return 0.0;
            }
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            falling * t.powi((k - order) as i32)
        })
        .collect()
}

/// The seven interpolation conditions for a degree-6 middle piece, as literally
/// posed: `p(1)=1, p′(1)=−1, p″(1)=1, p(−1)=−1, p′(−1)=1, p″(−1)=−1, p′(0)=1`.
///
/// This system is rank deficient (the even and odd coefficient blocks decouple
/// into 3 and 4 conditions on 4 and 3 unknowns), so no degree-6 polynomial
/// satisfies it. Kept for the solver's singularity check.
pub fn degree6_counterexample_system() -> (DenseMatrix, ParamVector) {
    let conditions = [
        (1.0, 0, 1.0),
        (1.0, 1, -1.0),
        (1.0, 2, 1.0),
        (-1.0, 0, -1.0),
        (-1.0, 1, 1.0),
        (-1.0, 2, -1.0),
        (0.0, 1, 1.0),
    ];
    build_system(6, &conditions)
}

/// Conditions for the degree-7 middle piece: second-order matching with
/// `e^{x+1}` at −1 and `e^{−x+1}` at 1, plus `p′(0) = 1` and `p(0) = 1`.
pub fn counterexample_system() -> (DenseMatrix, ParamVector) {
    let conditions = [
        (1.0, 0, 1.0),
        (1.0, 1, -1.0),
        (1.0, 2, 1.0),
        (-1.0, 0, 1.0),
        (-1.0, 1, 1.0),
        (-1.0, 2, 1.0),
        (0.0, 1, 1.0),
        (0.0, 0, 1.0),
    ];
    build_system(COUNTEREXAMPLE_DEGREE, &conditions)
}

fn build_system(degree: usize, conditions: &[(f64, usize, f64)]) -> (DenseMatrix, ParamVector) {
    let rows: Vec<Vec<f64>> = conditions
        .iter()
        .map(|&(t, order, _)| monomial_row(degree, t, order))
        .collect();
    let rhs = conditions.iter().map(|c| c.2).collect();
    (
        DenseMatrix::from_rows(&rows).expect("square interpolation system"),
        ParamVector::new(rhs).expect("finite right-hand side"),
    )
}

/// `e^{x+1}` for `x < −1`, a polynomial on `[−1, 1]`, `e^{−x+1}` for `x > 1`; C² with `f′(0) = 1`.
pub fn easgd_counterexample_f() -> Result<Objective, ObjectiveError> {
    let (a, b) = counterexample_system();
    let coeffs = solve_small_linear(&a, &b)?.into_vec();
    Ok(Objective {
        dim: 1,
        strong_convexity: None,
        lipschitz: None,
        kind: ObjectiveKind::EasgdCounterexample { coeffs },
        noise: NoiseModel::none(),
    })
}

fn poly_eval(coeffs: &[f64], t: f64, order: usize) -> f64 {
    crate::linalg::dot(&monomial_row(coeffs.len() - 1, t, order), coeffs)
}

fn counterexample_value(coeffs: &[f64], x: f64) -> f64 {
    if x < -1.0 {
        (x + 1.0).exp()
    } else if x > 1.0 {
        (-x + 1.0).exp()
    } else {
        poly_eval(coeffs, x, 0)
    }
}

fn counterexample_derivative(coeffs: &[f64], x: f64) -> f64 {
    if x < -1.0 {
        (x + 1.0).exp()
    } else if x > 1.0 {
        -(-x + 1.0).exp()
    } else {
        poly_eval(coeffs, x, 1)
    }
}

impl Objective {
    /// Derivative of order 0..=2 of the polynomial middle piece of the counterexample.
    pub fn counterexample_poly(&self, x: f64, order: usize) -> Option<f64> {
        match &self.kind {
            ObjectiveKind::EasgdCounterexample { coeffs } => Some(poly_eval(coeffs, x, order)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::finite_diff_gradient;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn isotropic_quadratic() {
        let obj = quadratic_with_condition(2, 1.0, &mut SimRng::new(1)).unwrap();
        let x = pv(&[0.3, -1.7]);
        assert!((obj.value(&x) - 0.5 * x.norm_sq()).abs() < 1e-14);
        assert_eq!(obj.condition_number(), Some(1.0));
    }

    #[test]
    fn quadratic_rejects_bad_inputs() {
        let mut rng = SimRng::new(1);
        assert_eq!(
            quadratic_with_condition(2, 0.5, &mut rng).unwrap_err(),
            ObjectiveError::BadCondition(0.5)
        );
        assert!(matches!(
            quadratic_with_condition(1, 2.0, &mut rng),
            Err(ObjectiveError::BadDimension { .. })
        ));
        let indefinite = DenseMatrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            quadratic_from_matrix(indefinite),
            Err(ObjectiveError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn matrix_completion_scalar_case() {
        let target = DenseMatrix::new(1, 1, vec![4.0]).unwrap();
        let obj = matrix_completion_from_target(target, 1, 1).unwrap();
        let (value, grad) = obj.value_and_gradient(&pv(&[1.0]));
        assert!((value - 2.25).abs() < 1e-15);
        assert!((grad.as_slice()[0] + 3.0).abs() < 1e-15);
        let (value, grad) = obj.value_and_gradient(&pv(&[2.0]));
        assert_eq!(value, 0.0);
        assert_eq!(grad.as_slice()[0], 0.0);
    }

    #[test]
    fn matrix_completion_vanishes_at_factor() {
        let obj = matrix_completion_problem(12, 3, &mut SimRng::new(6)).unwrap();
        let u = obj.completion_factor().unwrap();
        let (value, grad) = obj.value_and_gradient(&u);
        assert!(value.abs() < 1e-9);
        assert!(grad.norm_inf() < 1e-9);
    }

    #[test]
    fn matrix_completion_rank_checks() {
        let mut rng = SimRng::new(0);
        assert_eq!(
            matrix_completion_problem(3, 4, &mut rng).unwrap_err(),
            ObjectiveError::BadRank { d: 3, r: 4 }
        );
        assert!(matrix_completion_problem(3, 0, &mut rng).is_err());
    }

    #[test]
    fn sinc_special_points() {
        let obj = sinc2d();
        let (v, g) = obj.value_and_gradient(&pv(&[0.0, 0.0]));
        assert_eq!(v, 1.0);
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
        assert!(obj.value(&pv(&[1.0, 0.0])).abs() < 1e-15);
        let g = obj.gradient(&pv(&[-6.0, -4.0]));
        let fd = finite_diff_gradient(|p| obj.value(p), &pv(&[-6.0, -4.0]), 1e-5).unwrap();
        assert!(g.sub(&fd).norm_inf() < 1e-6);
    }

    #[test]
    fn sinc_series_matches_closed_form_near_origin() {
        let obj = sinc2d();
        let inside = pv(&[0.99e-4, 0.0]);
        let outside = pv(&[1.01e-4, 0.0]);
        assert!((obj.value(&inside) - obj.value(&outside)).abs() < 1e-8);
        let gi = obj.gradient(&inside).as_slice()[0];
        let go = obj.gradient(&outside).as_slice()[0];
        assert!((gi - go).abs() < 1e-5);
    }

    #[test]
    fn sinc_global_min_constant() {
        let obj = sinc2d();
        // Newton on dL/dρ along the x axis, starting inside the first trough.
        let mut rho = 1.43f64;
        for _ in 0..50 {
            let h = 1e-6;
            let g = |r: f64| obj.gradient(&pv(&[r, 0.0])).as_slice()[0];
            rho -= g(rho) / ((g(rho + h) - g(rho - h)) / (2.0 * h));
        }
        assert!((obj.value(&pv(&[rho, 0.0])) - SINC_GLOBAL_MIN).abs() < 1e-15);
    }

    #[test]
    fn degree6_system_is_singular() {
        let (a, b) = degree6_counterexample_system();
        assert_eq!(a.rows(), 7);
        assert!(matches!(
            solve_small_linear(&a, &b),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn counterexample_smoothness_and_slope() {
        let obj = easgd_counterexample_f().unwrap();
        let e0 = 1.0;
        // value, first and second derivative match the exponential tails at ±1
        assert!((obj.counterexample_poly(1.0, 0).unwrap() - e0).abs() <= 1e-9);
        assert!((obj.counterexample_poly(1.0, 1).unwrap() + e0).abs() <= 1e-9);
        assert!((obj.counterexample_poly(1.0, 2).unwrap() - e0).abs() <= 1e-9);
        assert!((obj.counterexample_poly(-1.0, 0).unwrap() - e0).abs() <= 1e-9);
        assert!((obj.counterexample_poly(-1.0, 1).unwrap() - e0).abs() <= 1e-9);
        assert!((obj.counterexample_poly(-1.0, 2).unwrap() - e0).abs() <= 1e-9);
        assert!((obj.gradient(&pv(&[0.0])).as_slice()[0] - 1.0).abs() <= 1e-12);
        // y = 1 solves e^{-y+1} = λy at λ = 1
        let slope = obj.gradient(&pv(&[1.0])).as_slice()[0];
        assert!((slope + 1.0).abs() <= 1e-9);
        // solved coefficients of the degree-7 piece
        let ObjectiveKind::EasgdCounterexample { coeffs } = obj.kind() else {
            unreachable!()
        };
        let expected = [1.0, 1.0, 1.25, -3.0, -2.0, 3.0, 0.75, -1.0];
        for (c, e) in coeffs.iter().zip(expected) {
            assert!((c - e).abs() < 1e-12, "{coeffs:?}");
        }
    }

    #[test]
    fn noiseless_estimators_are_exact() {
        let obj = quadratic_with_condition(4, 10.0, &mut SimRng::new(2)).unwrap();
        let x = pv(&[1.0, -2.0, 0.5, 3.0]);
        let mut rng = SimRng::new(3);
        assert_eq!(obj.stochastic_gradient(&x, &mut rng), obj.gradient(&x));
        assert_eq!(
            obj.stochastic_value(&x, &mut rng).to_bits(),
            obj.value(&x).to_bits()
        );
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::new(0.0, 0.0, 0.0).is_ok());
        assert_eq!(
            NoiseModel::new(1.0, -0.1, 0.0).unwrap_err(),
            ObjectiveError::BadNoise {
                name: "nu",
                value: -0.1
            }
        );
    }
}
