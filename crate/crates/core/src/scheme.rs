//! The modified Milstein step family and the coupled coarse / fine /
//! antithetic stepping the multilevel estimator is built on.
//!
//! One step advances the state as
//!
//!   y' = P(y) + mu_h(P(y)) h + sigma_h(P(y)) dW
//!        + sum_{j1,j2} (L^{j1} sigma_{j2})_h(P(y)) Pi_{j1,j2}
//!
//! where P and the `_h` modifications depend on the strategy: taming divides
//! coefficients by a state- or coefficient-dependent factor, projection
//! retracts the state onto a ball of radius h^{-1/(2 gamma)} and leaves the
//! coefficients alone. Pi is the symmetric increment-product proxy from
//! [`crate::brownian`]; no Lévy areas are ever simulated.

use crate::brownian::{area_proxy_into, resample_coupled, AreaProxy, CoupledIncrements};
use crate::error::{PathLabel, Result, SimError};
use crate::math::norm_sq;
use crate::model::{commutativity_defect, SdeModel};
use crate::rng::RngStream;

/// Coefficient modification strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modification {
    /// No modification; only safe for globally Lipschitz coefficients.
    Identity,
    /// Tame each coefficient by its own squared norm:
    /// mu / (1 + |mu|^2 h), sigma / (1 + |mu|^2 h),
    /// L sigma / (1 + |L sigma|^2 h).
    Tms1,
    /// Tame every coefficient by the state norm: divide by
    /// 1 + |x|^{2(gamma - 1)} h.
    Tms2,
    /// Evaluate unmodified coefficients at the projected state.
    Projection,
}

/// Base update rule the modification is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseScheme {
    /// Milstein-type update with the increment-product proxy.
    ModifiedMilstein,
    /// Drops the second-order term entirely.
    EulerMaruyama,
    /// The textbook Milstein update for commutative noise, written with its
    /// own arithmetic so it can serve as an independent per-step oracle.
    /// Refuses non-commutative models outright: silently truncating there is
    /// exactly the modified Milstein scheme and must be requested as such.
    ClassicalMilsteinCommutative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeSpec {
    pub base: BaseScheme,
    pub modification: Modification,
}

pub const SCHEME_NAMES: &[&str] = &[
    "em",
    "milstein-commutative",
    "mm-identity",
    "tms1",
    "tms2",
    "pms",
];

impl SchemeSpec {
    pub const fn new(base: BaseScheme, modification: Modification) -> Self {
        Self { base, modification }
    }

    /// Look up a scheme by its command-line name.
    pub fn parse(name: &str) -> Result<Self> {
        let spec = match name {
            "em" => Self::new(BaseScheme::EulerMaruyama, Modification::Identity),
            "milstein-commutative" => Self::new(
                BaseScheme::ClassicalMilsteinCommutative,
                Modification::Identity,
            ),
            "mm-identity" => Self::new(BaseScheme::ModifiedMilstein, Modification::Identity),
            "tms1" => Self::new(BaseScheme::ModifiedMilstein, Modification::Tms1),
            "tms2" => Self::new(BaseScheme::ModifiedMilstein, Modification::Tms2),
            "pms" => Self::new(BaseScheme::ModifiedMilstein, Modification::Projection),
            other => {
                return Err(SimError::InvalidArgument(format!(
                    "unknown scheme `{other}` (valid: {})",
                    SCHEME_NAMES.join(", ")
                )))
            }
        };
        Ok(spec)
    }

    /// Check the scheme against a model. The commutative Milstein base probes
    /// the commutativity defect at 100 random states and refuses models where
    /// it is nonzero.
    pub fn validate_for(&self, model: &SdeModel) -> Result<()> {
        if self.base != BaseScheme::ClassicalMilsteinCommutative {
            return Ok(());
        }
        let m = model.dim_noise();
        let mut stream = RngStream::new(0x636f_6d6d, 0, 0);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..model.dim_state())
                .map(|_| 3.0 * stream.next_standard_normal())
                .collect();
            for j1 in 0..m {
                for j2 in (j1 + 1)..m {
                    worst = worst.max(commutativity_defect(model, &x, j1, j2));
                }
            }
        }
        if worst > 1e-10 {
            return Err(SimError::NonCommutativeModel { defect: worst });
        }
        Ok(())
    }
}

/// Radial retraction onto the ball of radius h^{-1/(2 gamma)}:
/// min{1, h^{-1/(2 gamma)} / |x|} x. Total; the origin maps to itself
/// without any division.
pub fn project(x: &[f64], h: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    project_into(x, h, gamma, &mut out);
    out
}

fn project_into(x: &[f64], h: f64, gamma: f64, out: &mut [f64]) {
    let radius = h.powf(-1.0 / (2.0 * gamma));
    let n_sq = norm_sq(x);
    if n_sq <= radius * radius {
        out.copy_from_slice(x);
        return;
    }
    let factor = radius / n_sq.sqrt();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = factor * xi;
    }
}

#[inline]
fn tms1_denom(coeff_norm_sq: f64, h: f64) -> f64 {
    1.0 + coeff_norm_sq * h
}

#[inline]
fn tms2_denom(x_norm_sq: f64, gamma: f64, h: f64) -> f64 {
    1.0 + x_norm_sq.powf(gamma - 1.0) * h
}

/// All modified coefficient evaluations at one point. `diffusion` stores the
/// d x m matrix column-major; `milstein` stores the pair (j1, j2) at
/// `[(j1 * m + j2) * d ..][..d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedCoefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub milstein: Vec<f64>,
}

fn modified_coefficients(
    model: &SdeModel,
    modification: Modification,
    x: &[f64],
    h: f64,
) -> ModifiedCoefficients {
    let d = model.dim_state();
    let m = model.dim_noise();
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * m];
    let mut milstein = vec![0.0; d * m * m];
    model.drift(x, &mut drift);
    let shared_denom = match modification {
        Modification::Identity | Modification::Projection => 1.0,
        Modification::Tms1 => tms1_denom(norm_sq(&drift), h),
        Modification::Tms2 => tms2_denom(norm_sq(x), model.gamma(), h),
    };
    for v in drift.iter_mut() {
        *v /= shared_denom;
    }
    for j in 0..m {
        model.diffusion_column(x, j, &mut diffusion[j * d..(j + 1) * d]);
    }
    for v in diffusion.iter_mut() {
        *v /= shared_denom;
    }
    for j1 in 0..m {
        for j2 in 0..m {
            let slot = &mut milstein[(j1 * m + j2) * d..(j1 * m + j2 + 1) * d];
            model.milstein_coeff(x, j1, j2, slot);
            let denom = match modification {
                Modification::Identity | Modification::Projection => 1.0,
                Modification::Tms1 => tms1_denom(norm_sq(slot), h),
                Modification::Tms2 => shared_denom,
            };
            for v in slot.iter_mut() {
                *v /= denom;
            }
        }
    }
    ModifiedCoefficients {
        drift,
        diffusion,
        milstein,
    }
}

/// Coefficient modification of the first tamed scheme: everything divided by
/// a factor built from the squared coefficient norms.
pub fn tame_tms1(model: &SdeModel, x: &[f64], h: f64) -> ModifiedCoefficients {
    modified_coefficients(model, Modification::Tms1, x, h)
}

/// Coefficient modification of the second tamed scheme: everything divided
/// by 1 + |x|^{2(gamma-1)} h.
pub fn tame_tms2(model: &SdeModel, x: &[f64], h: f64) -> ModifiedCoefficients {
    modified_coefficients(model, Modification::Tms2, x, h)
}

struct Overflow;

// States beyond this magnitude are treated as divergence: with polynomial
// coefficients they overflow within a step or two anyway, and letting them
// linger poisons every downstream variance estimate with finite garbage.
const DIVERGENCE_THRESHOLD: f64 = 1e12;

struct StepScratch {
    eval: Vec<f64>,
    drift: Vec<f64>,
    col: Vec<f64>,
    mil: Vec<f64>,
    next: Vec<f64>,
}

impl StepScratch {
    fn new(d: usize) -> Self {
        Self {
            eval: vec![0.0; d],
            drift: vec![0.0; d],
            col: vec![0.0; d],
            mil: vec![0.0; d],
            next: vec![0.0; d],
        }
    }
}

// One step of the selected scheme. Terms accumulate in a fixed order (drift,
// diffusion columns by j, second-order pairs row-major in (j1, j2)) so that
// algebraically equal routes are bit-comparable.
fn step_core(
    model: &SdeModel,
    spec: SchemeSpec,
    y: &mut [f64],
    h: f64,
    dw: &[f64],
    pi: &AreaProxy,
    s: &mut StepScratch,
) -> std::result::Result<(), Overflow> {
    let d = model.dim_state();
    let m = model.dim_noise();

    match spec.modification {
        Modification::Projection => project_into(y, h, model.gamma(), &mut s.eval),
        _ => s.eval.copy_from_slice(y),
    }

    model.drift(&s.eval, &mut s.drift);
    let shared_denom = match spec.modification {
        Modification::Identity | Modification::Projection => 1.0,
        Modification::Tms1 => tms1_denom(norm_sq(&s.drift), h),
        Modification::Tms2 => tms2_denom(norm_sq(&s.eval), model.gamma(), h),
    };

    for k in 0..d {
        s.next[k] = s.eval[k] + s.drift[k] / shared_denom * h;
    }

    for j in 0..m {
        model.diffusion_column(&s.eval, j, &mut s.col);
        let w = dw[j];
        for k in 0..d {
            s.next[k] += s.col[k] / shared_denom * w;
        }
    }

    if spec.base != BaseScheme::EulerMaruyama {
        for j1 in 0..m {
            for j2 in 0..m {
                model.milstein_coeff(&s.eval, j1, j2, &mut s.mil);
                let denom = match spec.modification {
                    Modification::Identity | Modification::Projection => 1.0,
                    Modification::Tms1 => tms1_denom(norm_sq(&s.mil), h),
                    Modification::Tms2 => shared_denom,
                };
                let weight = match spec.base {
                    BaseScheme::ModifiedMilstein => pi.get(j1, j2),
                    BaseScheme::ClassicalMilsteinCommutative => {
                        // Independent arithmetic route for the oracle
                        // comparison against the proxy-based update.
                        let compensator = if j1 == j2 { 0.5 * h } else { 0.0 };
                        0.5 * dw[j1] * dw[j2] - compensator
                    }
                    BaseScheme::EulerMaruyama => unreachable!(),
                };
                for k in 0..d {
                    s.next[k] += s.mil[k] / denom * weight;
                }
            }
        }
    }

    if !s
        .next
        .iter()
        .all(|v| v.is_finite() && v.abs() < DIVERGENCE_THRESHOLD)
    {
        return Err(Overflow);
    }
    y.copy_from_slice(&s.next);
    Ok(())
}

fn check_step_args(model: &SdeModel, h: f64, dw: &[f64], pi: &AreaProxy) -> Result<()> {
    if !(h > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "timestep must be positive, got {h}"
        )));
    }
    if dw.len() != model.dim_noise() {
        return Err(SimError::InvalidArgument(format!(
            "increment has dimension {}, model has {}",
            dw.len(),
            model.dim_noise()
        )));
    }
    if pi.dim() != model.dim_noise() {
        return Err(SimError::InvalidArgument(format!(
            "area proxy has dimension {}, model has {}",
            pi.dim(),
            model.dim_noise()
        )));
    }
    Ok(())
}

/// One step of the selected scheme from state `y` over a step of length `h`.
pub fn mm_step(
    spec: SchemeSpec,
    model: &SdeModel,
    y: &[f64],
    h: f64,
    dw: &[f64],
    pi: &AreaProxy,
) -> Result<Vec<f64>> {
    check_step_args(model, h, dw, pi)?;
    let mut state = y.to_vec();
    let mut scratch = StepScratch::new(model.dim_state());
    step_core(model, spec, &mut state, h, dw, pi, &mut scratch).map_err(|_| {
        SimError::NonFiniteState {
            context: "a full step",
        }
    })?;
    Ok(state)
}

/// Reusable stepping engine: owns the scratch buffers so path loops stay
/// allocation-free.
pub(crate) struct PathEngine<'m> {
    model: &'m SdeModel,
    spec: SchemeSpec,
    scratch: StepScratch,
    pi: AreaProxy,
    dw: Vec<f64>,
}

pub(crate) enum HalfStep {
    Full,
    First,
    Second,
}

impl<'m> PathEngine<'m> {
    pub(crate) fn new(model: &'m SdeModel, spec: SchemeSpec) -> Self {
        Self {
            model,
            spec,
            scratch: StepScratch::new(model.dim_state()),
            pi: AreaProxy::zeros(model.dim_noise()),
            dw: vec![0.0; model.dim_noise()],
        }
    }

    /// Full step with externally supplied increment.
    pub(crate) fn full_step(
        &mut self,
        y: &mut [f64],
        h: f64,
        dw: &[f64],
    ) -> std::result::Result<(), HalfStep> {
        area_proxy_into(dw, h, &mut self.pi);
        step_core(self.model, self.spec, y, h, dw, &self.pi, &mut self.scratch)
            .map_err(|_| HalfStep::Full)
    }

    /// One coarse step driven by the reassembled full increment.
    pub(crate) fn coarse_step(
        &mut self,
        y: &mut [f64],
        inc: &CoupledIncrements,
    ) -> std::result::Result<(), HalfStep> {
        inc.coarse_into(&mut self.dw);
        area_proxy_into(&self.dw, inc.h(), &mut self.pi);
        step_core(
            self.model,
            self.spec,
            y,
            inc.h(),
            &self.dw,
            &self.pi,
            &mut self.scratch,
        )
        .map_err(|_| HalfStep::Full)
    }

    /// Two half steps of size h/2, consuming the given half increments in
    /// order. The antithetic path is this exact routine with the halves
    /// swapped.
    pub(crate) fn double_step(
        &mut self,
        y: &mut [f64],
        h: f64,
        first: &[f64],
        second: &[f64],
    ) -> std::result::Result<(), HalfStep> {
        let h_half = 0.5 * h;
        area_proxy_into(first, h_half, &mut self.pi);
        step_core(
            self.model,
            self.spec,
            y,
            h_half,
            first,
            &self.pi,
            &mut self.scratch,
        )
        .map_err(|_| HalfStep::First)?;
        area_proxy_into(second, h_half, &mut self.pi);
        step_core(
            self.model,
            self.spec,
            y,
            h_half,
            second,
            &self.pi,
            &mut self.scratch,
        )
        .map_err(|_| HalfStep::Second)
    }
}

fn half_step_context(which: HalfStep) -> SimError {
    SimError::NonFiniteState {
        context: match which {
            HalfStep::Full => "a full step",
            HalfStep::First => "the first half-step",
            HalfStep::Second => "the second half-step",
        },
    }
}

/// One coarse step: the full-step scheme applied to the reassembled
/// increment, with the proxy over the whole interval.
pub fn coarse_step(
    spec: SchemeSpec,
    model: &SdeModel,
    y: &[f64],
    inc: &CoupledIncrements,
) -> Result<Vec<f64>> {
    check_increments(model, inc)?;
    let mut state = y.to_vec();
    let mut engine = PathEngine::new(model, spec);
    engine
        .coarse_step(&mut state, inc)
        .map_err(half_step_context)?;
    Ok(state)
}

/// Two half steps of size h/2 over one coarse interval, consuming the half
/// increments in their natural order. Every modification uses h/2 in its
/// denominators and radii.
pub fn fine_double_step(
    spec: SchemeSpec,
    model: &SdeModel,
    y: &[f64],
    inc: &CoupledIncrements,
) -> Result<Vec<f64>> {
    check_increments(model, inc)?;
    let mut state = y.to_vec();
    let mut engine = PathEngine::new(model, spec);
    engine
        .double_step(&mut state, inc.h(), inc.delta_first(), inc.delta_second())
        .map_err(half_step_context)?;
    Ok(state)
}

/// The fine double step with the half increments exchanged; identical to
/// `fine_double_step` applied to the antithetic view of `inc`.
pub fn antithetic_double_step(
    spec: SchemeSpec,
    model: &SdeModel,
    y: &[f64],
    inc: &CoupledIncrements,
) -> Result<Vec<f64>> {
    check_increments(model, inc)?;
    let mut state = y.to_vec();
    let mut engine = PathEngine::new(model, spec);
    engine
        .double_step(&mut state, inc.h(), inc.delta_second(), inc.delta_first())
        .map_err(half_step_context)?;
    Ok(state)
}

fn check_increments(model: &SdeModel, inc: &CoupledIncrements) -> Result<()> {
    if inc.dim_noise() != model.dim_noise() {
        return Err(SimError::InvalidArgument(format!(
            "increments have dimension {}, model has {}",
            inc.dim_noise(),
            model.dim_noise()
        )));
    }
    Ok(())
}

/// Terminal states of the three coupled paths of one multilevel sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTriple {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub anti: Vec<f64>,
}

const MAX_SIM_LEVEL: u32 = 40;

fn level_geometry(model: &SdeModel, level: u32) -> Result<(u64, f64)> {
    if level < 1 {
        return Err(SimError::InvalidArgument(
            "coupled simulation needs level >= 1".into(),
        ));
    }
    if level > MAX_SIM_LEVEL {
        return Err(SimError::InvalidArgument(format!(
            "level {level} exceeds the supported maximum {MAX_SIM_LEVEL}"
        )));
    }
    let n_coarse = 1u64 << (level - 1);
    let h = model.horizon() / n_coarse as f64;
    Ok((n_coarse, h))
}

/// Advance all three coupled paths to the horizon at the given level:
/// 2^{level-1} coarse steps of size T 2^{-(level-1)}, each containing two
/// fine half steps.
pub fn simulate_triple(
    spec: SchemeSpec,
    model: &SdeModel,
    level: u32,
    stream: &mut RngStream,
) -> Result<PathTriple> {
    let (n_coarse, h) = level_geometry(model, level)?;
    let mut engine = PathEngine::new(model, spec);
    let mut inc = CoupledIncrements::zeros(model.dim_noise());
    let mut coarse = model.initial_state().to_vec();
    let mut fine = model.initial_state().to_vec();
    let mut anti = model.initial_state().to_vec();
    for step in 0..n_coarse {
        resample_coupled(stream, h, &mut inc);
        let ctx = |path: PathLabel| SimError::Diverged {
            path,
            level,
            sample: stream.sample_index(),
            step,
        };
        engine
            .coarse_step(&mut coarse, &inc)
            .map_err(|_| ctx(PathLabel::Coarse))?;
        engine
            .double_step(&mut fine, h, inc.delta_first(), inc.delta_second())
            .map_err(|_| ctx(PathLabel::Fine))?;
        engine
            .double_step(&mut anti, h, inc.delta_second(), inc.delta_first())
            .map_err(|_| ctx(PathLabel::Antithetic))?;
    }
    Ok(PathTriple { coarse, fine, anti })
}

/// Coarse/fine pair only, for the standard (non-antithetic) estimator. Draws
/// exactly the same increments as [`simulate_triple`] at the same stream.
pub fn simulate_pair(
    spec: SchemeSpec,
    model: &SdeModel,
    level: u32,
    stream: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n_coarse, h) = level_geometry(model, level)?;
    let mut engine = PathEngine::new(model, spec);
    let mut inc = CoupledIncrements::zeros(model.dim_noise());
    let mut coarse = model.initial_state().to_vec();
    let mut fine = model.initial_state().to_vec();
    for step in 0..n_coarse {
        resample_coupled(stream, h, &mut inc);
        let ctx = |path: PathLabel| SimError::Diverged {
            path,
            level,
            sample: stream.sample_index(),
            step,
        };
        engine
            .coarse_step(&mut coarse, &inc)
            .map_err(|_| ctx(PathLabel::Coarse))?;
        engine
            .double_step(&mut fine, h, inc.delta_first(), inc.delta_second())
            .map_err(|_| ctx(PathLabel::Fine))?;
    }
    Ok((coarse, fine))
}

/// A single uncoupled path: `n_steps` full steps of size `h`, drawing a fresh
/// increment per step.
pub fn simulate_path(
    spec: SchemeSpec,
    model: &SdeModel,
    n_steps: u64,
    h: f64,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "timestep must be positive, got {h}"
        )));
    }
    let mut engine = PathEngine::new(model, spec);
    let mut state = model.initial_state().to_vec();
    let mut dw = vec![0.0; model.dim_noise()];
    let scale = h.sqrt();
    for step in 0..n_steps {
        for w in dw.iter_mut() {
            *w = scale * stream.next_standard_normal();
        }
        engine
            .full_step(&mut state, h, &dw)
            .map_err(|_| SimError::Diverged {
                path: PathLabel::Single,
                level: stream.level(),
                sample: stream.sample_index(),
                step,
            })?;
    }
    Ok(state)
}
