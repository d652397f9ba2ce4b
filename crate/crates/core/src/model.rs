//! SDE problem definitions: drift, diffusion columns, the Milstein
//! coefficients (L^{j1} sigma_{j2})(x) = (d sigma_{j2}/dx)(x) sigma_{j1}(x),
//! payoffs, and the shipped test problems.
//!
//! Models are plain closures, not a parsed expression language: the numerical
//! core stays dependency-free and coefficient evaluations stay exact.

use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::math::{norm, norm_sq};
use crate::rng::RngStream;

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DiffusionFn = dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync;
type MilsteinFn = dyn Fn(&[f64], usize, usize, &mut [f64]) + Send + Sync;

/// An autonomous Itô SDE dX = mu(X) dt + sigma(X) dW on [0, horizon],
/// together with the polynomial growth exponent `gamma` of its drift.
#[derive(Clone)]
pub struct SdeModel {
    dim_state: usize,
    dim_noise: usize,
    initial_state: Vec<f64>,
    horizon: f64,
    gamma: f64,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    milstein: Arc<MilsteinFn>,
}

impl std::fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("initial_state", &self.initial_state)
            .field("horizon", &self.horizon)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl SdeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim_state: usize,
        dim_noise: usize,
        initial_state: Vec<f64>,
        horizon: f64,
        gamma: f64,
        drift: Arc<DriftFn>,
        diffusion: Arc<DiffusionFn>,
        milstein: Arc<MilsteinFn>,
    ) -> Result<Self> {
        if dim_state == 0 || dim_noise == 0 {
            return Err(SimError::InvalidArgument(
                "state and noise dimensions must be positive".into(),
            ));
        }
        if initial_state.len() != dim_state {
            return Err(SimError::InvalidArgument(format!(
                "initial state has length {}, expected {dim_state}",
                initial_state.len()
            )));
        }
        if !(horizon > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(gamma >= 1.0) {
            return Err(SimError::InvalidArgument(format!(
                "growth exponent must be at least 1, got {gamma}"
            )));
        }
        Ok(Self {
            dim_state,
            dim_noise,
            initial_state,
            horizon,
            gamma,
            drift,
            diffusion,
            milstein,
        })
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    /// Column `j` (0-based) of the diffusion matrix.
    pub fn diffusion_column(&self, x: &[f64], j: usize, out: &mut [f64]) {
        (self.diffusion)(x, j, out);
    }

    /// The Milstein coefficient (d sigma_{j2}/dx)(x) sigma_{j1}(x).
    pub fn milstein_coeff(&self, x: &[f64], j1: usize, j2: usize, out: &mut [f64]) {
        (self.milstein)(x, j1, j2, out);
    }
}

/// A scalar payoff of the terminal state.
#[derive(Clone)]
pub struct Payoff {
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    label: String,
}

impl Payoff {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            label: label.into(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Payoff({})", self.label)
    }
}

/// Coefficients of the generalized stochastic FitzHugh-Nagumo system
///
/// dX1 = (X1 - X1^3 - X2)/epsilon dt + (c1 X1 + c2 X2 + d1) dW1
/// dX2 = (gamma_fhn X1 - X2 + beta) dt + (c3 X1 + c4 X2 + d2) dW2
///
/// with X0 = (0, 0) and horizon 1. The cubic drift grows superlinearly and
/// the diffusion does not commute, which is exactly the regime the schemes
/// here are built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    pub epsilon: f64,
    pub gamma_fhn: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            gamma_fhn: 0.5,
            beta: 0.5,
            c1: 0.5,
            c2: 0.3,
            c3: 0.0,
            c4: 0.5,
            d1: 0.1,
            d2: 0.1,
        }
    }
}

/// Build the FitzHugh-Nagumo model. Total in its parameters; the growth
/// exponent is 3 because the cubic drift dominates.
pub fn fhn_model(params: FhnParams) -> SdeModel {
    let p = params;
    let drift = move |x: &[f64], out: &mut [f64]| {
        out[0] = (x[0] - x[0] * x[0] * x[0] - x[1]) / p.epsilon;
        out[1] = p.gamma_fhn * x[0] - x[1] + p.beta;
    };
    let diffusion = move |x: &[f64], j: usize, out: &mut [f64]| match j {
        0 => {
            out[0] = p.c1 * x[0] + p.c2 * x[1] + p.d1;
            out[1] = 0.0;
        }
        1 => {
            out[0] = 0.0;
            out[1] = p.c3 * x[0] + p.c4 * x[1] + p.d2;
        }
        _ => panic!("noise column out of range"),
    };
    // Jacobians of the two columns are constant:
    //   d sigma_0 / dx = [[c1, c2], [0, 0]]
    //   d sigma_1 / dx = [[0, 0], [c3, c4]]
    // so L^{j1} sigma_{j2} = (d sigma_{j2}/dx) sigma_{j1} is affine in x.
    let milstein = move |x: &[f64], j1: usize, j2: usize, out: &mut [f64]| {
        let s1 = p.c1 * x[0] + p.c2 * x[1] + p.d1;
        let s2 = p.c3 * x[0] + p.c4 * x[1] + p.d2;
        match (j1, j2) {
            (0, 0) => {
                out[0] = p.c1 * s1;
                out[1] = 0.0;
            }
            (1, 0) => {
                out[0] = p.c2 * s2;
                out[1] = 0.0;
            }
            (0, 1) => {
                out[0] = 0.0;
                out[1] = p.c3 * s1;
            }
            (1, 1) => {
                out[0] = 0.0;
                out[1] = p.c4 * s2;
            }
            _ => panic!("noise column out of range"),
        }
    };
    SdeModel::new(
        2,
        2,
        vec![0.0, 0.0],
        1.0,
        3.0,
        Arc::new(drift),
        Arc::new(diffusion),
        Arc::new(milstein),
    )
    .expect("FHN construction is total")
}

/// Scalar geometric Brownian motion dX = a X dt + b X dW. Globally Lipschitz
/// and commutative (d = m = 1), with a closed-form solution, so it serves as
/// the exact-solution oracle for the estimator stack.
pub fn gbm_model(a: f64, b: f64, x0: f64, horizon: f64) -> Result<SdeModel> {
    if x0 == 0.0 {
        return Err(SimError::InvalidArgument(
            "GBM initial state must be nonzero".into(),
        ));
    }
    if !(horizon > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let drift = move |x: &[f64], out: &mut [f64]| out[0] = a * x[0];
    let diffusion = move |x: &[f64], _j: usize, out: &mut [f64]| out[0] = b * x[0];
    let milstein = move |x: &[f64], _j1: usize, _j2: usize, out: &mut [f64]| out[0] = b * b * x[0];
    SdeModel::new(
        1,
        1,
        vec![x0],
        horizon,
        1.0,
        Arc::new(drift),
        Arc::new(diffusion),
        Arc::new(milstein),
    )
}

/// Exact GBM terminal value given the driving Brownian endpoint.
pub fn gbm_exact_terminal(a: f64, b: f64, x0: f64, horizon: f64, w_t: f64) -> f64 {
    x0 * ((a - 0.5 * b * b) * horizon + b * w_t).exp()
}

/// Norm of L^{j1}sigma_{j2}(x) - L^{j2}sigma_{j1}(x). Identically zero
/// exactly when the truncated Lévy-area terms of the classical Milstein
/// scheme vanish.
pub fn commutativity_defect(model: &SdeModel, x: &[f64], j1: usize, j2: usize) -> f64 {
    let d = model.dim_state();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    model.milstein_coeff(x, j1, j2, &mut a);
    model.milstein_coeff(x, j2, j1, &mut b);
    a.iter()
        .zip(&b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

pub const MODEL_NAMES: &[&str] = &["fhn", "gbm"];
pub const PAYOFF_NAMES: &[&str] = &["fhn-smooth", "identity-first"];

/// Build a registered model by name, applying `key=value` overrides.
///
/// FHN keys: epsilon, gamma_fhn, beta, c1..c4, d1, d2.
/// GBM keys: a, b, x0, horizon (defaults 0.05, 0.2, 1.0, 1.0).
pub fn build_model(name: &str, overrides: &[(String, f64)]) -> Result<SdeModel> {
    match name {
        "fhn" => {
            let mut p = FhnParams::default();
            for (key, value) in overrides {
                if !value.is_finite() {
                    return Err(SimError::InvalidArgument(format!(
                        "non-finite value for parameter {key}"
                    )));
                }
                match key.as_str() {
                    "epsilon" => p.epsilon = *value,
                    "gamma_fhn" => p.gamma_fhn = *value,
                    "beta" => p.beta = *value,
                    "c1" => p.c1 = *value,
                    "c2" => p.c2 = *value,
                    "c3" => p.c3 = *value,
                    "c4" => p.c4 = *value,
                    "d1" => p.d1 = *value,
                    "d2" => p.d2 = *value,
                    other => {
                        return Err(SimError::InvalidArgument(format!(
                            "unknown fhn parameter `{other}` (valid: epsilon, gamma_fhn, beta, c1, c2, c3, c4, d1, d2)"
                        )))
                    }
                }
            }
            Ok(fhn_model(p))
        }
        "gbm" => {
            let (mut a, mut b, mut x0, mut horizon) = (0.05, 0.2, 1.0, 1.0);
            for (key, value) in overrides {
                match key.as_str() {
                    "a" => a = *value,
                    "b" => b = *value,
                    "x0" => x0 = *value,
                    "horizon" => horizon = *value,
                    other => {
                        return Err(SimError::InvalidArgument(format!(
                            "unknown gbm parameter `{other}` (valid: a, b, x0, horizon)"
                        )))
                    }
                }
            }
            gbm_model(a, b, x0, horizon)
        }
        other => Err(SimError::InvalidArgument(format!(
            "unknown model `{other}` (valid: {})",
            MODEL_NAMES.join(", ")
        ))),
    }
}

/// Build a registered payoff by name.
pub fn build_payoff(name: &str) -> Result<Payoff> {
    match name {
        "fhn-smooth" => Ok(Payoff::new("fhn-smooth", |x| 2.0 * x[0] + x[1].sin())),
        "identity-first" => Ok(Payoff::new("identity-first", |x| x[0])),
        other => Err(SimError::InvalidArgument(format!(
            "unknown payoff `{other}` (valid: {})",
            PAYOFF_NAMES.join(", ")
        ))),
    }
}

// ---------------------------------------------------------------------------
// Runtime-checkable contracts.
//
// The structural assumptions on a model (coercivity, coupled monotonicity,
// consistency of the hand-coded Milstein coefficients) cannot be proved at
// runtime, but they can be probed at sampled states; these helpers report
// fitted constants or worst-case errors for the test suite and for users
// supplying their own models.
// ---------------------------------------------------------------------------

fn sample_state(stream: &mut RngStream, dim: usize, max_norm: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| stream.next_standard_normal()).collect();
    let n = norm(&x);
    let radius = max_norm * stream.next_uniform();
    if n > 0.0 {
        for xi in x.iter_mut() {
            *xi *= radius / n;
        }
    }
    x
}

/// Central finite-difference evaluation of (d sigma_{j2}/dx) sigma_{j1} at
/// `x`, the independent oracle for `milstein_coeff`. Step 1e-5 (1 + |x|).
pub fn finite_difference_milstein(
    model: &SdeModel,
    x: &[f64],
    j1: usize,
    j2: usize,
    out: &mut [f64],
) {
    let d = model.dim_state();
    let mut direction = vec![0.0; d];
    model.diffusion_column(x, j1, &mut direction);
    let dir_norm = norm(&direction);
    if dir_norm == 0.0 {
        out.fill(0.0);
        return;
    }
    let step = 1e-5 * (1.0 + norm(x));
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let shifted_plus: Vec<f64> = x
        .iter()
        .zip(&direction)
        .map(|(xi, di)| xi + step * di / dir_norm)
        .collect();
    let shifted_minus: Vec<f64> = x
        .iter()
        .zip(&direction)
        .map(|(xi, di)| xi - step * di / dir_norm)
        .collect();
    model.diffusion_column(&shifted_plus, j2, &mut plus);
    model.diffusion_column(&shifted_minus, j2, &mut minus);
    for k in 0..d {
        out[k] = (plus[k] - minus[k]) / (2.0 * step) * dir_norm;
    }
}

/// Worst relative disagreement between `milstein_coeff` and its
/// finite-difference oracle over `n_states` random states of norm <= 10.
pub fn verify_milstein_coeff(model: &SdeModel, n_states: usize, seed: u64) -> f64 {
    let d = model.dim_state();
    let m = model.dim_noise();
    let mut stream = RngStream::new(seed, 0, 0);
    let mut exact = vec![0.0; d];
    let mut fd = vec![0.0; d];
    let mut worst = 0.0f64;
    for _ in 0..n_states {
        let x = sample_state(&mut stream, d, 10.0);
        for j1 in 0..m {
            for j2 in 0..m {
                model.milstein_coeff(&x, j1, j2, &mut exact);
                finite_difference_milstein(model, &x, j1, j2, &mut fd);
                let diff: f64 = exact
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let scale = norm(&exact).max(1e-8);
                worst = worst.max(diff / scale);
            }
        }
    }
    worst
}

/// Fitted constant C in |mu(x)| <= C (1 + |x|)^gamma over sampled states.
pub fn fit_drift_growth_constant(model: &SdeModel, n_states: usize, seed: u64) -> f64 {
    let d = model.dim_state();
    let mut stream = RngStream::new(seed, 0, 1);
    let mut mu = vec![0.0; d];
    let mut worst = 0.0f64;
    for _ in 0..n_states {
        let x = sample_state(&mut stream, d, 10.0);
        model.drift(&x, &mut mu);
        worst = worst.max(norm(&mu) / (1.0 + norm(&x)).powf(model.gamma()));
    }
    worst
}

/// Fitted constant C in the coercivity bound
/// 2<x, mu(x)> + (2 p0 - 1) |sigma(x)|_F^2 <= C (1 + |x|^2).
pub fn fit_coercivity_constant(model: &SdeModel, p0: f64, n_states: usize, seed: u64) -> f64 {
    let d = model.dim_state();
    let m = model.dim_noise();
    let mut stream = RngStream::new(seed, 0, 2);
    let mut mu = vec![0.0; d];
    let mut col = vec![0.0; d];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_states {
        let x = sample_state(&mut stream, d, 10.0);
        model.drift(&x, &mut mu);
        let mut frob_sq = 0.0;
        for j in 0..m {
            model.diffusion_column(&x, j, &mut col);
            frob_sq += norm_sq(&col);
        }
        let lhs = 2.0 * crate::math::dot(&x, &mu) + (2.0 * p0 - 1.0) * frob_sq;
        worst = worst.max(lhs / (1.0 + norm_sq(&x)));
    }
    worst
}

/// Fitted constant C in the coupled monotonicity bound
/// 2<x - y, mu(x) - mu(y)> + (2 p1 - 1) |sigma(x) - sigma(y)|_F^2
///   <= C |x - y|^2.
pub fn fit_monotonicity_constant(model: &SdeModel, p1: f64, n_pairs: usize, seed: u64) -> f64 {
    let d = model.dim_state();
    let m = model.dim_noise();
    let mut stream = RngStream::new(seed, 0, 3);
    let mut mu_x = vec![0.0; d];
    let mut mu_y = vec![0.0; d];
    let mut col_x = vec![0.0; d];
    let mut col_y = vec![0.0; d];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let x = sample_state(&mut stream, d, 10.0);
        let y = sample_state(&mut stream, d, 10.0);
        let gap_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if gap_sq < 1e-12 {
            continue;
        }
        model.drift(&x, &mut mu_x);
        model.drift(&y, &mut mu_y);
        let mut inner = 0.0;
        for k in 0..d {
            inner += (x[k] - y[k]) * (mu_x[k] - mu_y[k]);
        }
        let mut diff_frob_sq = 0.0;
        for j in 0..m {
            model.diffusion_column(&x, j, &mut col_x);
            model.diffusion_column(&y, j, &mut col_y);
            diff_frob_sq += col_x
                .iter()
                .zip(&col_y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        worst = worst.max((2.0 * inner + (2.0 * p1 - 1.0) * diff_frob_sq) / gap_sq);
    }
    worst
}

/// Largest finite-difference gradient and Hessian norms of a payoff over
/// sampled states; smooth payoffs should report moderate values for both.
pub fn payoff_derivative_bounds(
    payoff: &Payoff,
    dim: usize,
    n_states: usize,
    seed: u64,
) -> (f64, f64) {
    let mut stream = RngStream::new(seed, 0, 4);
    let step = 1e-4;
    let mut max_grad = 0.0f64;
    let mut max_hess = 0.0f64;
    for _ in 0..n_states {
        let x = sample_state(&mut stream, dim, 5.0);
        let f0 = payoff.eval(&x);
        let mut grad_sq = 0.0;
        let mut hess_sq = 0.0;
        for k in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += step;
            xm[k] -= step;
            let fp = payoff.eval(&xp);
            let fm = payoff.eval(&xm);
            let g = (fp - fm) / (2.0 * step);
            let h = (fp - 2.0 * f0 + fm) / (step * step);
            grad_sq += g * g;
            hess_sq += h * h;
        }
        max_grad = max_grad.max(grad_sq.sqrt());
        max_hess = max_hess.max(hess_sq.sqrt());
    }
    (max_grad, max_hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fhn_drift_at_origin() {
        let model = fhn_model(FhnParams::default());
        let mut out = [0.0, 0.0];
        model.drift(&[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.5]);
    }

    #[test]
    fn fhn_milstein_coeff_examples() {
        let model = fhn_model(FhnParams::default());
        let mut out = [0.0, 0.0];
        // (d sigma_0/dx) sigma_1 at the origin: (c2 * d2, 0).
        model.milstein_coeff(&[0.0, 0.0], 1, 0, &mut out);
        assert!((out[0] - 0.03).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        // c3 = 0 wipes the whole (0, 1) coefficient at every state.
        for x in [[0.0, 0.0], [1.3, -0.4], [-2.0, 5.0]] {
            model.milstein_coeff(&x, 0, 1, &mut out);
            assert_eq!(out, [0.0, 0.0]);
        }
    }

    #[test]
    fn fhn_milstein_matches_finite_differences() {
        let model = fhn_model(FhnParams::default());
        assert!(verify_milstein_coeff(&model, 100, 7) < 1e-6);
    }

    #[test]
    fn fhn_fails_commutativity_at_origin() {
        let model = fhn_model(FhnParams::default());
        let defect = commutativity_defect(&model, &[0.0, 0.0], 0, 1);
        assert!((defect - 0.03).abs() < 1e-15);
    }

    #[test]
    fn same_column_defect_is_zero() {
        let model = fhn_model(FhnParams::default());
        for j in 0..2 {
            assert_eq!(commutativity_defect(&model, &[0.7, -1.1], j, j), 0.0);
        }
    }

    #[test]
    fn gbm_milstein_matches_finite_differences_and_commutes() {
        let model = gbm_model(0.05, 0.3, 2.0, 1.0).unwrap();
        assert!(verify_milstein_coeff(&model, 100, 11) < 1e-6);
        let mut out = [0.0];
        model.milstein_coeff(&[2.0], 0, 0, &mut out);
        assert!((out[0] - 0.18).abs() < 1e-15);
        assert_eq!(commutativity_defect(&model, &[2.0], 0, 0), 0.0);
    }

    #[test]
    fn gbm_rejects_bad_arguments() {
        assert!(gbm_model(0.1, 0.2, 1.0, 0.0).is_err());
        assert!(gbm_model(0.1, 0.2, 1.0, -1.0).is_err());
        assert!(gbm_model(0.1, 0.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn gbm_exact_solution_degenerate_and_generic() {
        assert_eq!(gbm_exact_terminal(0.0, 0.0, 1.5, 1.0, 0.37), 1.5);
        let v = gbm_exact_terminal(0.05, 0.2, 1.0, 1.0, 0.0);
        assert!((v - 0.03f64.exp()).abs() < 1e-15);
        assert!((v - 1.030455).abs() < 1e-6);
    }

    #[test]
    fn fhn_growth_constant_is_finite_and_moderate() {
        let model = fhn_model(FhnParams::default());
        let c = fit_drift_growth_constant(&model, 100, 5);
        assert!(c.is_finite() && c > 0.0 && c < 10.0, "C = {c}");
    }

    #[test]
    fn fhn_satisfies_coercivity_and_monotonicity_probes() {
        let model = fhn_model(FhnParams::default());
        let c_coerc = fit_coercivity_constant(&model, 2.0, 500, 13);
        let c_mono = fit_monotonicity_constant(&model, 2.0, 500, 17);
        assert!(
            c_coerc.is_finite() && c_coerc < 50.0,
            "coercivity {c_coerc}"
        );
        assert!(c_mono.is_finite() && c_mono < 50.0, "monotonicity {c_mono}");
    }

    #[test]
    fn registry_rejects_unknown_names_listing_valid_ones() {
        let err = build_model("heston", &[]).unwrap_err().to_string();
        assert!(err.contains("fhn") && err.contains("gbm"));
        let err = build_payoff("digital").unwrap_err().to_string();
        assert!(err.contains("fhn-smooth") && err.contains("identity-first"));
    }

    #[test]
    fn registry_applies_overrides() {
        let model = build_model("fhn", &[("c3".to_string(), 0.2)]).unwrap();
        let mut out = [0.0, 0.0];
        model.milstein_coeff(&[0.0, 0.0], 0, 1, &mut out);
        // c3 * d1 in the second component once c3 is nonzero.
        assert!((out[1] - 0.02).abs() < 1e-15);
        assert!(build_model("fhn", &[("nope".to_string(), 1.0)]).is_err());
    }

    #[test]
    fn shipped_payoffs_have_bounded_derivatives() {
        for name in PAYOFF_NAMES {
            let payoff = build_payoff(name).unwrap();
            let (grad, hess) = payoff_derivative_bounds(&payoff, 2, 200, 3);
            assert!(grad < 5.0 && hess < 5.0, "{name}: grad {grad} hess {hess}");
        }
    }
}
