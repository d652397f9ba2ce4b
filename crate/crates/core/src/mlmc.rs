//! The multilevel estimator: per-level correction samples, sample
//! allocation, bias-based level selection, and the driver that assembles the
//! final estimate with full cost accounting.
//!
//! Level `l >= 1` couples a coarse path at stepsize T 2^{-(l-1)} to a fine
//! path at half that stepsize (plus the increment-swapped twin in antithetic
//! mode); level 0 is a single one-step path. The driver keeps adding levels
//! until the extrapolated bias fits in its half of the error budget, while
//! the sample allocation keeps the estimator variance inside the other half.

use crate::brownian::make_stream;
use crate::error::{Result, SimError};
use crate::model::{Payoff, SdeModel};
use crate::rng::RngStream;
use crate::scheme::{simulate_pair, simulate_path, simulate_triple, SchemeSpec};
use crate::stats::{par_chunked_reduce, CompensatedSum, RunningStats};

/// Which level-correction estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Fine payoff averaged with its increment-swapped twin before
    /// subtracting the coarse payoff; variance decays one order faster.
    Antithetic,
    /// Plain fine-minus-coarse coupling.
    Standard,
}

impl EstimatorMode {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorMode::Antithetic => "antithetic",
            EstimatorMode::Standard => "standard",
        }
    }
}

/// Streaming statistics of one level's correction samples.
#[derive(Debug, Clone)]
pub struct LevelStats {
    level: u32,
    stats: RunningStats,
    cost: CompensatedSum,
}

impl LevelStats {
    fn new(level: u32) -> Self {
        Self {
            level,
            stats: RunningStats::new(),
            cost: CompensatedSum::new(),
        }
    }

    /// Build stats from summary moments (planning and tests).
    pub fn synthetic(
        level: u32,
        n_samples: u64,
        mean: f64,
        variance: f64,
        cost_per_sample: f64,
    ) -> Self {
        let mut stats = RunningStats::new();
        // Two-point construction reproducing the requested mean/variance.
        let spread = (variance * (n_samples.max(2) - 1) as f64 / n_samples as f64).sqrt();
        for i in 0..n_samples {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            stats.add(mean + sign * spread);
        }
        let mut cost = CompensatedSum::new();
        cost.add(cost_per_sample * n_samples as f64);
        Self { level, stats, cost }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_samples(&self) -> u64 {
        self.stats.count()
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean()
    }

    pub fn variance(&self) -> f64 {
        self.stats.sample_variance()
    }

    pub fn cost_per_sample(&self) -> f64 {
        if self.stats.count() == 0 {
            return 0.0;
        }
        self.cost.value() / self.stats.count() as f64
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.value()
    }

    pub fn std_error(&self) -> f64 {
        self.stats.std_error()
    }
}

/// Driver configuration. `alpha_hint` is the assumed weak-convergence order
/// used by the bias extrapolation; Milstein-type schemes have order one.
#[derive(Debug, Clone, Copy)]
pub struct MlmcConfig {
    pub eps: f64,
    pub alpha_hint: f64,
    pub max_level: u32,
    pub min_samples: u64,
    pub seed: u64,
}

impl MlmcConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            alpha_hint: 1.0,
            max_level: 20,
            min_samples: 100,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "target accuracy must be positive, got {}",
                self.eps
            )));
        }
        if !(self.alpha_hint > 0.0) {
            return Err(SimError::InvalidArgument(
                "weak-order hint must be positive".into(),
            ));
        }
        if self.max_level < 2 || self.max_level > 30 {
            return Err(SimError::InvalidArgument(
                "max level must lie in 2..=30".into(),
            ));
        }
        if self.min_samples < 2 {
            return Err(SimError::InvalidArgument(
                "need at least two pilot samples per level".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a multilevel run.
#[derive(Debug, Clone)]
pub struct MlmcResult {
    pub estimate: f64,
    pub levels: Vec<LevelStats>,
    pub total_cost: f64,
    pub bias_estimate: f64,
    pub variance_estimate: f64,
}

impl MlmcResult {
    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn mse_proxy(&self) -> f64 {
        self.bias_estimate * self.bias_estimate + self.variance_estimate
    }
}

/// One antithetic correction sample at level `l >= 1`:
/// (phi(fine) + phi(anti))/2 - phi(coarse), plus its cost in path-cell work
/// units (three paths times 2^{l-1} coarse cells).
pub fn antithetic_correction_sample(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    level: u32,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    let triple = simulate_triple(spec, model, level, stream)?;
    let y =
        0.5 * (payoff.eval(&triple.fine) + payoff.eval(&triple.anti)) - payoff.eval(&triple.coarse);
    let cost = 3.0 * (1u64 << (level - 1)) as f64;
    Ok((y, cost))
}

/// One standard correction sample: phi(fine) - phi(coarse) on the same
/// underlying increments, two paths instead of three.
pub fn standard_correction_sample(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    level: u32,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    let (coarse, fine) = simulate_pair(spec, model, level, stream)?;
    let y = payoff.eval(&fine) - payoff.eval(&coarse);
    let cost = 2.0 * (1u64 << (level - 1)) as f64;
    Ok((y, cost))
}

/// The level-zero sample: one scheme step across the whole horizon.
pub fn level_zero_sample(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    let terminal = simulate_path(spec, model, 1, model.horizon(), stream)?;
    Ok((payoff.eval(&terminal), 1.0))
}

fn sample_one(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    mode: EstimatorMode,
    level: u32,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    if level == 0 {
        level_zero_sample(spec, model, payoff, stream)
    } else {
        match mode {
            EstimatorMode::Antithetic => {
                antithetic_correction_sample(spec, model, payoff, level, stream)
            }
            EstimatorMode::Standard => {
                standard_correction_sample(spec, model, payoff, level, stream)
            }
        }
    }
}

#[derive(Default)]
struct BatchAccum {
    stats: RunningStats,
    cost: CompensatedSum,
}

/// Grow a level's sample set to `target`, in parallel, with the
/// deterministic chunked reduction.
fn extend_level(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    mode: EstimatorMode,
    seed: u64,
    level_stats: &mut LevelStats,
    target: u64,
) -> Result<()> {
    let level = level_stats.level;
    let start = level_stats.n_samples();
    let batch = par_chunked_reduce(
        start,
        target,
        |range| {
            let mut acc = BatchAccum::default();
            for i in range {
                let mut stream = make_stream(seed, level, i);
                let (y, cost) = sample_one(spec, model, payoff, mode, level, &mut stream)?;
                acc.stats.add(y);
                acc.cost.add(cost);
            }
            Ok(acc)
        },
        |a, b| {
            a.stats.merge(&b.stats);
            a.cost.merge(&b.cost);
        },
    )?;
    if let Some(batch) = batch {
        level_stats.stats.merge(&batch.stats);
        level_stats.cost.merge(&batch.cost);
    }
    Ok(())
}

/// Optimal sample counts: N_l = ceil(2 eps^{-2} sqrt(V_l / C_l)
/// sum_k sqrt(V_k C_k)), which pins the total estimator variance at or below
/// eps^2 / 2.
pub fn allocate_samples(stats: &[LevelStats], eps: f64) -> Result<Vec<u64>> {
    if stats.is_empty() {
        return Err(SimError::InvalidArgument(
            "sample allocation needs at least one level".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "target accuracy must be positive, got {eps}"
        )));
    }
    let mut sum_sqrt_vc = 0.0;
    for s in stats {
        let (v, c) = (s.variance(), s.cost_per_sample());
        if !v.is_finite() || !c.is_finite() || c <= 0.0 {
            return Err(SimError::InvalidArgument(format!(
                "level {} has unusable variance {v} or cost {c}",
                s.level
            )));
        }
        sum_sqrt_vc += (v * c).sqrt();
    }
    Ok(stats
        .iter()
        .map(|s| {
            let n = 2.0 / (eps * eps) * (s.variance() / s.cost_per_sample()).sqrt() * sum_sqrt_vc;
            n.ceil() as u64
        })
        .collect())
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

// A level asking for more samples than this is not going to finish; surface
// a structured failure instead of grinding forever.
const SAMPLE_CAP: u64 = 1_000_000_000_000;

fn bias_proxy(levels: &[LevelStats], alpha: f64) -> f64 {
    let top = levels.len() - 1;
    let denom = 2f64.powf(alpha) - 1.0;
    let at_top = levels[top].mean().abs() / denom;
    let below = levels[top - 1].mean().abs() / (2.0 * denom);
    at_top.max(below)
}

/// Run the full multilevel estimator at target root-mean-square accuracy
/// `cfg.eps`.
///
/// The error budget is split evenly: the sample allocation holds the
/// estimator variance at eps^2/2 and levels are added until the
/// extrapolated bias max(|m_L|, |m_{L-1}|/2) / (2^alpha - 1) drops below
/// eps/sqrt(2).
pub fn run_mlmc(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    cfg: &MlmcConfig,
    mode: EstimatorMode,
) -> Result<MlmcResult> {
    cfg.validate()?;
    spec.validate_for(model)?;

    let mut levels: Vec<LevelStats> = Vec::new();
    for level in 0..=2u32 {
        let mut stats = LevelStats::new(level);
        extend_level(
            spec,
            model,
            payoff,
            mode,
            cfg.seed,
            &mut stats,
            cfg.min_samples,
        )?;
        levels.push(stats);
    }

    loop {
        // Re-allocate and top up until every level meets its target; each
        // pass can shift the variance estimates, so iterate to a fixpoint.
        let mut rounds = 0;
        loop {
            let targets = allocate_samples(&levels, cfg.eps)?;
            for (stats, &target) in levels.iter().zip(&targets) {
                if target > SAMPLE_CAP {
                    return Err(SimError::AccuracyUnreachable {
                        level: stats.level(),
                        requested: target as f64,
                        variance: stats.variance(),
                    });
                }
            }
            let mut grew = false;
            for (stats, &target) in levels.iter_mut().zip(&targets) {
                let target = target.max(cfg.min_samples);
                if target > stats.n_samples() {
                    extend_level(spec, model, payoff, mode, cfg.seed, stats, target)?;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
            rounds += 1;
            if rounds > 1000 {
                return Err(SimError::InvalidArgument(
                    "sample allocation failed to stabilize".into(),
                ));
            }
        }

        let bias = bias_proxy(&levels, cfg.alpha_hint);
        if bias <= cfg.eps * SQRT_HALF {
            let estimate: f64 = levels.iter().map(|s| s.mean()).sum();
            let variance_estimate: f64 = levels
                .iter()
                .map(|s| s.variance() / s.n_samples() as f64)
                .sum();
            let total_cost: f64 = levels.iter().map(|s| s.total_cost()).sum();
            return Ok(MlmcResult {
                estimate,
                levels,
                total_cost,
                bias_estimate: bias,
                variance_estimate,
            });
        }

        let next = levels.len() as u32;
        if next > cfg.max_level {
            return Err(SimError::BiasNotConverged {
                max_level: cfg.max_level,
                bias,
                target: cfg.eps * SQRT_HALF,
            });
        }
        let mut stats = LevelStats::new(next);
        extend_level(
            spec,
            model,
            payoff,
            mode,
            cfg.seed,
            &mut stats,
            cfg.min_samples,
        )?;
        levels.push(stats);
    }
}
