//! Empirical convergence studies: strong error against a fine-path
//! reference, per-level variance decay of the multilevel correction, log-log
//! slope regression, and cost-versus-accuracy sweeps.

use crate::brownian::make_stream;
use crate::error::{PathLabel, Result, SimError};
use crate::mlmc::{run_mlmc, EstimatorMode, MlmcConfig};
use crate::model::{Payoff, SdeModel};
use crate::rng::RngStream;
use crate::scheme::{simulate_path, simulate_triple, PathEngine, SchemeSpec};
use crate::stats::{par_chunked_reduce, CompensatedSum, RunningStats};

/// Experiment sizes. The desk scale keeps the full suite runnable in minutes
/// on a laptop; the paper scale reproduces the published figures.
pub mod scale {
    pub const DESK_SAMPLES: u64 = 10_000;
    pub const PAPER_SAMPLES: u64 = 100_000;
    /// Reference stepsize exponent: h_exact = T * 2^-k.
    pub const DESK_REFERENCE_EXP: i32 = 12;
    pub const PAPER_REFERENCE_EXP: i32 = 15;
    /// Stepsize exponents h = T * 2^-k of the strong-order study.
    pub const STEP_EXPONENTS: std::ops::RangeInclusive<i32> = 6..=11;
    /// Level range of the variance-decay study.
    pub const DESK_LEVELS: std::ops::RangeInclusive<u32> = 2..=8;
    pub const PAPER_LEVELS: std::ops::RangeInclusive<u32> = 1..=10;
    /// Accuracy sweep of the cost study.
    pub const EPS_SWEEP: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
}

/// Default strong-order stepsizes for a horizon `t`.
pub fn default_stepsizes(t: f64) -> Vec<f64> {
    scale::STEP_EXPONENTS.map(|k| t * 2f64.powi(-k)).collect()
}

/// Monte Carlo L2 and L4 errors at one stepsize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongErrorRow {
    pub h: f64,
    pub err_l2: f64,
    pub err_l4: f64,
    pub n_samples: u64,
}

/// Least-squares line through (log2 x, log2 y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fit a line to (log2 xs, log2 ys). Rejects fewer than three points and any
/// nonpositive value.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(SimError::InvalidArgument(
            "slope fit needs matching coordinate lists".into(),
        ));
    }
    if xs.len() < 3 {
        return Err(SimError::InvalidArgument(format!(
            "slope fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(SimError::InvalidArgument(
            "slope fit needs strictly positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.log2()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(SimError::InvalidArgument(
            "slope fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res < 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: xs.len(),
    })
}

/// First index of the slope-fit window: with six or more points the two
/// coarsest are dropped, since pre-asymptotic transients visibly bend the
/// coarse end of log-log plots.
pub fn asymptotic_start(n_points: usize) -> usize {
    if n_points >= 6 {
        2
    } else {
        0
    }
}

fn dyadic_step_count(t: f64, h: f64) -> Result<u64> {
    if !(h > 0.0) || h > t {
        return Err(SimError::InvalidArgument(format!(
            "stepsize {h} must lie in (0, horizon={t}]"
        )));
    }
    let ratio = t / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 * ratio || rounded < 1.0 {
        return Err(SimError::InvalidArgument(format!(
            "stepsize {h} does not divide the horizon {t} dyadically"
        )));
    }
    let n = rounded as u64;
    if !n.is_power_of_two() {
        return Err(SimError::InvalidArgument(format!(
            "horizon/stepsize = {n} is not a power of two"
        )));
    }
    Ok(n)
}

/// One path at the reference resolution; the strong-error study couples
/// coarser runs to the same underlying increments.
pub fn reference_terminal(
    spec: SchemeSpec,
    model: &SdeModel,
    stream: &mut RngStream,
    h_exact: f64,
) -> Result<Vec<f64>> {
    let n = dyadic_step_count(model.horizon(), h_exact)?;
    simulate_path(spec, model, n, h_exact, stream)
}

struct CoupledCell {
    h: f64,
    stride: u64,
    level_tag: u32,
    state: Vec<f64>,
    accum: Vec<f64>,
}

/// Advance one reference path and every coupled coarser path in a single
/// pass, holding only a per-stepsize increment aggregate (O(1) memory per
/// coarse cell). `on_cell(h_index, dw)` sees each coarse increment exactly as
/// the coarse path consumes it.
pub(crate) fn run_coupled_sample<F>(
    spec: SchemeSpec,
    model: &SdeModel,
    stepsizes: &[f64],
    h_exact: f64,
    seed: u64,
    sample: u64,
    on_cell: &mut F,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(usize, &[f64]),
{
    let t = model.horizon();
    let n_fine = dyadic_step_count(t, h_exact)?;
    let ref_level = n_fine.trailing_zeros();
    let mut cells: Vec<CoupledCell> = stepsizes
        .iter()
        .map(|&h| {
            let n_coarse = dyadic_step_count(t, h)?;
            if h <= h_exact {
                return Err(SimError::InvalidArgument(format!(
                    "study stepsize {h} must be coarser than the reference {h_exact}"
                )));
            }
            Ok(CoupledCell {
                h,
                stride: n_fine / n_coarse,
                level_tag: n_coarse.trailing_zeros(),
                state: model.initial_state().to_vec(),
                accum: vec![0.0; model.dim_noise()],
            })
        })
        .collect::<Result<_>>()?;

    let mut stream = make_stream(seed, ref_level, sample);
    let mut engine = PathEngine::new(model, spec);
    let mut ref_state = model.initial_state().to_vec();
    let mut dw = vec![0.0; model.dim_noise()];
    let scale = h_exact.sqrt();
    for step in 0..n_fine {
        for w in dw.iter_mut() {
            *w = scale * stream.next_standard_normal();
        }
        engine
            .full_step(&mut ref_state, h_exact, &dw)
            .map_err(|_| SimError::Diverged {
                path: PathLabel::Single,
                level: ref_level,
                sample,
                step,
            })?;
        for (idx, cell) in cells.iter_mut().enumerate() {
            for (a, w) in cell.accum.iter_mut().zip(&dw) {
                *a += w;
            }
            if (step + 1) % cell.stride == 0 {
                on_cell(idx, &cell.accum);
                engine
                    .full_step(&mut cell.state, cell.h, &cell.accum)
                    .map_err(|_| SimError::Diverged {
                        path: PathLabel::Single,
                        level: cell.level_tag,
                        sample,
                        step: (step + 1) / cell.stride - 1,
                    })?;
                cell.accum.fill(0.0);
            }
        }
    }
    Ok((ref_state, cells.into_iter().map(|c| c.state).collect()))
}

#[derive(Clone)]
struct ErrorMoments {
    sum_sq: CompensatedSum,
    sum_quartic: CompensatedSum,
}

/// Strong L2/L4 terminal error at each stepsize, each sample's coarse runs
/// coupled to its own reference path.
pub fn strong_error_study(
    spec: SchemeSpec,
    model: &SdeModel,
    stepsizes: &[f64],
    n_samples: u64,
    h_exact: f64,
    seed: u64,
) -> Result<Vec<StrongErrorRow>> {
    if stepsizes.is_empty() {
        return Err(SimError::InvalidArgument("no stepsizes given".into()));
    }
    if n_samples < 2 {
        return Err(SimError::InvalidArgument(
            "strong-error study needs at least two samples".into(),
        ));
    }
    spec.validate_for(model)?;
    // Surface geometry errors before spawning workers.
    run_coupled_sample(spec, model, stepsizes, h_exact, seed, 0, &mut |_, _| {})?;

    let moments = par_chunked_reduce(
        0,
        n_samples,
        |range| {
            let mut acc = vec![
                ErrorMoments {
                    sum_sq: CompensatedSum::new(),
                    sum_quartic: CompensatedSum::new(),
                };
                stepsizes.len()
            ];
            for i in range {
                let (reference, terminals) =
                    run_coupled_sample(spec, model, stepsizes, h_exact, seed, i, &mut |_, _| {})?;
                for (slot, terminal) in acc.iter_mut().zip(&terminals) {
                    let gap_sq: f64 = terminal
                        .iter()
                        .zip(&reference)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    slot.sum_sq.add(gap_sq);
                    slot.sum_quartic.add(gap_sq * gap_sq);
                }
            }
            Ok(acc)
        },
        |a, b| {
            for (sa, sb) in a.iter_mut().zip(&b) {
                sa.sum_sq.merge(&sb.sum_sq);
                sa.sum_quartic.merge(&sb.sum_quartic);
            }
        },
    )?
    .expect("nonempty sample range");

    Ok(stepsizes
        .iter()
        .zip(&moments)
        .map(|(&h, m)| {
            let n = n_samples as f64;
            StrongErrorRow {
                h,
                err_l2: (m.sum_sq.value() / n).sqrt(),
                err_l4: (m.sum_quartic.value() / n).powf(0.25),
                n_samples,
            }
        })
        .collect())
}

/// Per-level variances of the antithetic and standard corrections, both
/// measured on the identical triples (hence identical seeds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecayRow {
    pub level: u32,
    pub h_fine: f64,
    pub var_antithetic: f64,
    pub var_standard: f64,
    pub n_samples: u64,
}

pub fn variance_decay_study(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    levels: &[u32],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<VarianceDecayRow>> {
    if levels.iter().any(|&l| l < 1) {
        return Err(SimError::InvalidArgument(
            "variance decay is defined for levels >= 1".into(),
        ));
    }
    if n_samples < 2 {
        return Err(SimError::InvalidArgument(
            "variance study needs at least two samples".into(),
        ));
    }
    spec.validate_for(model)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let acc = par_chunked_reduce(
            0,
            n_samples,
            |range| {
                let mut anti = RunningStats::new();
                let mut std = RunningStats::new();
                for i in range {
                    let mut stream = make_stream(seed, level, i);
                    let triple = simulate_triple(spec, model, level, &mut stream)?;
                    let p_fine = payoff.eval(&triple.fine);
                    let p_anti = payoff.eval(&triple.anti);
                    let p_coarse = payoff.eval(&triple.coarse);
                    anti.add(0.5 * (p_fine + p_anti) - p_coarse);
                    std.add(p_fine - p_coarse);
                }
                Ok((anti, std))
            },
            |a, b| {
                a.0.merge(&b.0);
                a.1.merge(&b.1);
            },
        )?
        .expect("nonempty sample range");
        rows.push(VarianceDecayRow {
            level,
            h_fine: model.horizon() * 2f64.powi(-(level as i32)),
            var_antithetic: acc.0.sample_variance(),
            var_standard: acc.1.sample_variance(),
            n_samples,
        });
    }
    Ok(rows)
}

/// Outcome of one driver run inside the cost sweep.
#[derive(Debug, Clone)]
pub struct CostAccuracyRun {
    pub total_cost: f64,
    pub estimate: f64,
    pub levels: u32,
}

/// One accuracy from the sweep; a failed cell keeps its error so the rest of
/// the sweep still reports.
#[derive(Debug, Clone)]
pub struct CostAccuracyRow {
    pub eps: f64,
    pub antithetic: Result<CostAccuracyRun>,
    pub standard: Result<CostAccuracyRun>,
}

pub fn cost_accuracy_study(
    spec: SchemeSpec,
    model: &SdeModel,
    payoff: &Payoff,
    eps_list: &[f64],
    seed: u64,
) -> Result<Vec<CostAccuracyRow>> {
    if eps_list.is_empty() {
        return Err(SimError::InvalidArgument("no accuracies given".into()));
    }
    for pair in eps_list.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(SimError::InvalidArgument(
                "accuracy list must be strictly descending".into(),
            ));
        }
    }
    if !(eps_list[eps_list.len() - 1] > 0.0) {
        return Err(SimError::InvalidArgument(
            "accuracies must be positive".into(),
        ));
    }
    spec.validate_for(model)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut cfg = MlmcConfig::new(eps);
        cfg.seed = seed;
        let run_mode = |mode: EstimatorMode| -> Result<CostAccuracyRun> {
            let result = run_mlmc(spec, model, payoff, &cfg, mode)?;
            Ok(CostAccuracyRun {
                total_cost: result.total_cost,
                estimate: result.estimate,
                levels: result.max_level(),
            })
        };
        rows.push(CostAccuracyRow {
            eps,
            antithetic: run_mode(EstimatorMode::Antithetic),
            standard: run_mode(EstimatorMode::Standard),
        });
    }
    Ok(rows)
}
