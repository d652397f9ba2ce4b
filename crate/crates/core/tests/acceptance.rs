//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line
//! per check before asserting. All runs are seed-fixed at desk scale; the
//! published experiment sizes sit behind the CLI's --paper-scale flag.
//!
//! Known red: the strong-order window, the standard estimator's variance
//! slope, and the cost-sweep window fail on the FitzHugh-Nagumo benchmark.
//! Its published coefficients leave the noise-driven error terms ~10^3 times
//! smaller than the drift-driven ones, so those asymptotic rates are not yet
//! visible at the gated resolutions (nor at --paper-scale). The stepping and
//! coupling machinery itself is pinned analytically in tests/statistical.rs;
//! do not widen these bands to force them green.

use mlmc_sde::analysis::{asymptotic_start, scale};
use mlmc_sde::brownian::{antithetic_view, make_stream, sample_coupled};
use mlmc_sde::model::{build_payoff, fhn_model, gbm_model, FhnParams};
use mlmc_sde::scheme::{
    antithetic_double_step, fine_double_step, mm_step, project, simulate_triple, tame_tms1,
    tame_tms2, BaseScheme, Modification, SchemeSpec,
};
use mlmc_sde::stats::RunningStats;
use mlmc_sde::{
    area_proxy, cost_accuracy_study, fit_slope, run_mlmc, strong_error_study, variance_decay_study,
    EstimatorMode, MlmcConfig,
};

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        let status = if pass { "PASS" } else { "FAIL" };
        let line = format!("ACCEPTANCE {label}: {status} ({detail})");
        println!("{line}");
        if !pass {
            self.failures.push(line);
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "{} acceptance check(s) failed:\n{}",
            self.failures.len(),
            self.failures.join("\n")
        );
    }
}

fn tms1() -> SchemeSpec {
    SchemeSpec::new(BaseScheme::ModifiedMilstein, Modification::Tms1)
}

#[test]
fn criterion_1_strong_order_one_half() {
    let model = fhn_model(FhnParams::default());
    let stepsizes: Vec<f64> = scale::STEP_EXPONENTS.map(|k| 2f64.powi(-k)).collect();
    let h_exact = 2f64.powi(-scale::DESK_REFERENCE_EXP);
    let mut gate = Gate::new();
    for name in ["tms1", "tms2", "pms"] {
        let spec = SchemeSpec::parse(name).unwrap();
        let rows =
            strong_error_study(spec, &model, &stepsizes, scale::DESK_SAMPLES, h_exact, 0).unwrap();
        let start = asymptotic_start(rows.len());
        let hs: Vec<f64> = rows[start..].iter().map(|r| r.h).collect();
        let l2: Vec<f64> = rows[start..].iter().map(|r| r.err_l2).collect();
        let l4: Vec<f64> = rows[start..].iter().map(|r| r.err_l4).collect();
        let fit2 = fit_slope(&hs, &l2).unwrap();
        let fit4 = fit_slope(&hs, &l4).unwrap();
        gate.check(
            &format!("1 strong-order {name} L2"),
            (0.40..=0.65).contains(&fit2.slope),
            format!("slope {:.3} target [0.40, 0.65]", fit2.slope),
        );
        gate.check(
            &format!("1 strong-order {name} L4"),
            (0.40..=0.65).contains(&fit4.slope),
            format!("slope {:.3} target [0.40, 0.65]", fit4.slope),
        );
    }
    gate.finish();
}

#[test]
fn criterion_2_antithetic_variance_decay() {
    let model = fhn_model(FhnParams::default());
    let payoff = build_payoff("fhn-smooth").unwrap();
    let levels: Vec<u32> = scale::DESK_LEVELS.collect();
    let rows =
        variance_decay_study(tms1(), &model, &payoff, &levels, scale::DESK_SAMPLES, 0).unwrap();
    let start = asymptotic_start(rows.len());
    let xs: Vec<f64> = rows[start..]
        .iter()
        .map(|r| 2f64.powi(r.level as i32))
        .collect();
    let anti: Vec<f64> = rows[start..].iter().map(|r| r.var_antithetic).collect();
    let std: Vec<f64> = rows[start..].iter().map(|r| r.var_standard).collect();
    let fit_anti = fit_slope(&xs, &anti).unwrap();
    let fit_std = fit_slope(&xs, &std).unwrap();
    let mut gate = Gate::new();
    gate.check(
        "2 antithetic variance slope",
        (-2.5..=-1.6).contains(&fit_anti.slope),
        format!("slope {:.3} target [-2.5, -1.6]", fit_anti.slope),
    );
    gate.check(
        "2 standard variance slope",
        (-1.3..=-0.7).contains(&fit_std.slope),
        format!("slope {:.3} target [-1.3, -0.7]", fit_std.slope),
    );
    let dominance = rows
        .iter()
        .filter(|r| r.level >= 3)
        .all(|r| r.var_antithetic < r.var_standard);
    gate.check(
        "2 antithetic dominance from level 3",
        dominance,
        "antithetic variance below standard at every level >= 3".into(),
    );
    gate.finish();
}

#[test]
fn criterion_3_complexity_eps_minus_two() {
    let model = fhn_model(FhnParams::default());
    let payoff = build_payoff("fhn-smooth").unwrap();
    let rows = cost_accuracy_study(tms1(), &model, &payoff, &scale::EPS_SWEEP, 0).unwrap();
    let mut gate = Gate::new();
    let mut eps = Vec::new();
    let mut anti_cost = Vec::new();
    let mut std_cost = Vec::new();
    for row in &rows {
        let anti = row.antithetic.as_ref().expect("antithetic run failed");
        let std = row.standard.as_ref().expect("standard run failed");
        eps.push(row.eps);
        anti_cost.push(anti.total_cost);
        std_cost.push(std.total_cost);
    }
    let fit = fit_slope(&eps, &anti_cost).unwrap();
    gate.check(
        "3 antithetic cost slope",
        (-2.4..=-1.8).contains(&fit.slope),
        format!("slope {:.3} target [-2.4, -1.8]", fit.slope),
    );
    let last = rows.len() - 1;
    gate.check(
        "3 antithetic cheaper at eps=0.0025",
        anti_cost[last] < std_cost[last],
        format!(
            "antithetic {} vs standard {}",
            anti_cost[last], std_cost[last]
        ),
    );
    gate.finish();
}

#[test]
fn criterion_4_gbm_mean_oracle() {
    // E[X_T] = x0 e^{aT}: the closed-form mean of geometric Brownian motion.
    let model = gbm_model(0.05, 0.2, 1.0, 1.0).unwrap();
    let payoff = build_payoff("identity-first").unwrap();
    let spec = SchemeSpec::new(BaseScheme::ModifiedMilstein, Modification::Identity);
    let truth = 0.05f64.exp();
    let eps = 0.01;
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut cfg = MlmcConfig::new(eps);
        cfg.seed = seed;
        let result = run_mlmc(spec, &model, &payoff, &cfg, EstimatorMode::Antithetic).unwrap();
        let gap = (result.estimate - truth).abs();
        worst = worst.max(gap);
        if gap <= 2.0 * eps {
            hits += 1;
        }
    }
    let mut gate = Gate::new();
    gate.check(
        "4 GBM mean within 2 eps",
        hits >= 19,
        format!("{hits}/20 seeds inside, worst gap {worst:.4}"),
    );
    gate.finish();
}

#[test]
fn criterion_5_bit_exact_identities() {
    let model = fhn_model(FhnParams::default());
    let spec = tms1();
    let mut gate = Gate::new();

    let mut stream = make_stream(900, 3, 0);
    let mut swap_ok = true;
    let mut involution_ok = true;
    let mut aggregation_ok = true;
    for _ in 0..1000 {
        let y = [stream.next_standard_normal(), stream.next_standard_normal()];
        let inc = sample_coupled(&mut stream, 2, 0.25).unwrap();
        let direct = antithetic_double_step(spec, &model, &y, &inc).unwrap();
        let via_view = fine_double_step(spec, &model, &y, &antithetic_view(&inc)).unwrap();
        swap_ok &= direct == via_view;
        involution_ok &= antithetic_view(&antithetic_view(&inc)) == inc;
        let coarse = inc.coarse();
        for j in 0..2 {
            aggregation_ok &= coarse[j] == inc.delta_first()[j] + inc.delta_second()[j];
        }
        aggregation_ok &= antithetic_view(&inc).coarse() == coarse;
    }
    gate.check(
        "5 swap identity",
        swap_ok,
        "antithetic_double_step == fine_double_step after swap, 1000 inputs".into(),
    );
    gate.check(
        "5 antithetic involution",
        involution_ok,
        "double swap restores the increments bitwise".into(),
    );
    gate.check(
        "5 coarse increment aggregation",
        aggregation_ok,
        "coarse increment is the exact bitwise half sum".into(),
    );

    let gbm = gbm_model(0.05, 0.4, 1.0, 1.0).unwrap();
    let mm = SchemeSpec::new(BaseScheme::ModifiedMilstein, Modification::Identity);
    let classical = SchemeSpec::new(
        BaseScheme::ClassicalMilsteinCommutative,
        Modification::Identity,
    );
    let mut stream = make_stream(901, 0, 0);
    let mut classical_ok = true;
    for _ in 0..1000 {
        let y = [1.0 + stream.next_standard_normal().abs()];
        let h = 2f64.powf(-1.0 - 8.0 * stream.next_uniform());
        let dw = [h.sqrt() * stream.next_standard_normal()];
        let pi = area_proxy(&dw, h).unwrap();
        let a = mm_step(mm, &gbm, &y, h, &dw, &pi).unwrap();
        let b = mm_step(classical, &gbm, &y, h, &dw, &pi).unwrap();
        classical_ok &= a == b;
    }
    gate.check(
        "5 MM(identity) == classical Milstein on 1-D GBM",
        classical_ok,
        "per-step bitwise equality, 1000 inputs".into(),
    );
    println!(
        "ACCEPTANCE 5 CSV thread-invariance: exercised in the CLI crate's \
         acceptance test (byte-identical output across 1, 2, 8 threads)"
    );
    gate.finish();
}

#[test]
fn criterion_6_modification_property_suite() {
    let model = fhn_model(FhnParams::default());
    let mut gate = Gate::new();
    let mut stream = make_stream(600, 0, 0);

    let mut drift_bounds = true;
    let mut sigma_bounds = true;
    let mut milstein_bounds = true;
    for _ in 0..10_000 {
        let x = [
            5.0 * stream.next_standard_normal(),
            5.0 * stream.next_standard_normal(),
        ];
        let h = 2f64.powf(-20.0 * stream.next_uniform());
        let mut raw_drift = [0.0, 0.0];
        model.drift(&x, &mut raw_drift);
        let raw_drift_norm = (raw_drift[0].powi(2) + raw_drift[1].powi(2)).sqrt();
        let mut raw_col = [0.0, 0.0];
        let mut raw_sigma_sq = 0.0;
        for j in 0..2 {
            model.diffusion_column(&x, j, &mut raw_col);
            raw_sigma_sq += raw_col[0].powi(2) + raw_col[1].powi(2);
        }
        for coeffs in [tame_tms1(&model, &x, h), tame_tms2(&model, &x, h)] {
            let drift_norm = (coeffs.drift[0].powi(2) + coeffs.drift[1].powi(2)).sqrt();
            drift_bounds &= drift_norm <= raw_drift_norm * (1.0 + 1e-12);
            let sigma_sq: f64 = coeffs.diffusion.iter().map(|v| v * v).sum();
            sigma_bounds &= sigma_sq <= raw_sigma_sq * (1.0 + 1e-12);
            for j1 in 0..2 {
                for j2 in 0..2 {
                    let mut raw = [0.0, 0.0];
                    model.milstein_coeff(&x, j1, j2, &mut raw);
                    let raw_norm = (raw[0].powi(2) + raw[1].powi(2)).sqrt();
                    let slot = &coeffs.milstein[(j1 * 2 + j2) * 2..(j1 * 2 + j2 + 1) * 2];
                    let norm = (slot[0].powi(2) + slot[1].powi(2)).sqrt();
                    milstein_bounds &= norm <= raw_norm * (1.0 + 1e-12);
                }
            }
        }
        let tamed = tame_tms1(&model, &x, h);
        let drift_norm = (tamed.drift[0].powi(2) + tamed.drift[1].powi(2)).sqrt();
        drift_bounds &= drift_norm <= 0.5 / h.sqrt() * (1.0 + 1e-12);
    }
    gate.check(
        "6 taming drift bound",
        drift_bounds,
        "|mu_h| <= min(|mu|, h^{-1/2}/2 for TMS1), 10^4 samples".into(),
    );
    gate.check(
        "6 taming diffusion bound",
        sigma_bounds,
        "|sigma_h| <= |sigma|".into(),
    );
    gate.check(
        "6 taming second-order bound",
        milstein_bounds,
        "|(L sigma)_h| <= |L sigma|".into(),
    );

    let mut contraction = true;
    let mut radius_ok = true;
    for _ in 0..10_000 {
        let x = [
            10.0 * stream.next_standard_normal(),
            10.0 * stream.next_standard_normal(),
        ];
        let y = [
            10.0 * stream.next_standard_normal(),
            10.0 * stream.next_standard_normal(),
        ];
        let h = 2f64.powf(-14.0 * stream.next_uniform());
        let gamma = 3.0;
        let px = project(&x, h, gamma);
        let py = project(&y, h, gamma);
        let d_proj = ((px[0] - py[0]).powi(2) + (px[1] - py[1]).powi(2)).sqrt();
        let d_orig = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        contraction &= d_proj <= d_orig * (1.0 + 1e-12);
        let radius = h.powf(-1.0 / (2.0 * gamma));
        let norm = (px[0].powi(2) + px[1].powi(2)).sqrt();
        let x_norm = (x[0].powi(2) + x[1].powi(2)).sqrt();
        radius_ok &= norm <= radius * (1.0 + 1e-12) && norm <= x_norm * (1.0 + 1e-12);
    }
    gate.check(
        "6 projection contraction",
        contraction,
        "|P(x) - P(y)| <= |x - y|, 10^4 pairs".into(),
    );
    gate.check(
        "6 projection ball",
        radius_ok,
        "|P(x)| <= min(|x|, h^{-1/(2 gamma)})".into(),
    );

    // h-linear consistency: the drift-modification gap halves with h within
    // 20%, sampled inside the asymptotic regime |mu(x)|^2 h << 1.
    let mut halving = true;
    for _ in 0..10_000 {
        let x = [
            1.5 * (2.0 * stream.next_uniform() - 1.0),
            1.5 * (2.0 * stream.next_uniform() - 1.0),
        ];
        let h = 2f64.powf(-16.0 - 8.0 * stream.next_uniform());
        let mut raw = [0.0, 0.0];
        model.drift(&x, &mut raw);
        for which in [Modification::Tms1, Modification::Tms2] {
            let gap = |hh: f64| {
                let coeffs = match which {
                    Modification::Tms1 => tame_tms1(&model, &x, hh),
                    _ => tame_tms2(&model, &x, hh),
                };
                ((coeffs.drift[0] - raw[0]).powi(2) + (coeffs.drift[1] - raw[1]).powi(2)).sqrt()
            };
            let g1 = gap(h);
            let g2 = gap(h / 2.0);
            if g1 > 1e-14 {
                let ratio = g1 / g2;
                halving &= (1.6..=2.4).contains(&ratio);
            }
        }
    }
    gate.check(
        "6 h-linear consistency",
        halving,
        "|mu_h - mu| halves with h within 20%, 10^4 samples".into(),
    );
    gate.finish();
}

#[test]
fn criterion_7_estimator_identities() {
    let model = fhn_model(FhnParams::default());
    let payoff = build_payoff("fhn-smooth").unwrap();
    let mut gate = Gate::new();

    // Telescoping: the fine-definition mean at level l equals the
    // coarse-definition mean at level l (sampled from independent level l+1
    // triples), within three combined standard errors.
    for level in [2u32, 4, 6] {
        let n = 20_000u64;
        let mut fine_stats = RunningStats::new();
        for i in 0..n {
            let mut stream = make_stream(70, level, i);
            let t = simulate_triple(tms1(), &model, level, &mut stream).unwrap();
            fine_stats.add(0.5 * (payoff.eval(&t.fine) + payoff.eval(&t.anti)));
        }
        let mut coarse_stats = RunningStats::new();
        for i in 0..n {
            let mut stream = make_stream(70, level + 1, i);
            let t = simulate_triple(tms1(), &model, level + 1, &mut stream).unwrap();
            coarse_stats.add(payoff.eval(&t.coarse));
        }
        let gap = (fine_stats.mean() - coarse_stats.mean()).abs();
        let combined = (fine_stats.std_error().powi(2) + coarse_stats.std_error().powi(2)).sqrt();
        gate.check(
            &format!("7 telescoping level {level}"),
            gap <= 3.0 * combined,
            format!("gap {gap:.3e} vs 3 SE {:.3e}", 3.0 * combined),
        );
    }

    // Proxy moments over 1e6 draws: zero mean, variance tau^2/4 off the
    // diagonal and tau^2/2 on it, using the analytic standard errors of the
    // moment estimators.
    let tau = 0.4f64;
    let n = 1_000_000u64;
    let mut stream = make_stream(71, 0, 0);
    let mut off = RunningStats::new();
    let mut diag = RunningStats::new();
    let scale_factor = tau.sqrt();
    for _ in 0..n {
        let dw = [
            scale_factor * stream.next_standard_normal(),
            scale_factor * stream.next_standard_normal(),
        ];
        let pi = area_proxy(&dw, tau).unwrap();
        off.add(pi.get(0, 1));
        diag.add(pi.get(0, 0));
    }
    let nf = n as f64;
    let mean_se_off = tau / (2.0 * nf.sqrt());
    let mean_se_diag = tau / (2f64.sqrt() * nf.sqrt());
    gate.check(
        "7 proxy zero mean off-diagonal",
        off.mean().abs() <= 3.0 * mean_se_off,
        format!("mean {:.3e} vs 3 SE {:.3e}", off.mean(), 3.0 * mean_se_off),
    );
    gate.check(
        "7 proxy zero mean diagonal",
        diag.mean().abs() <= 3.0 * mean_se_diag,
        format!(
            "mean {:.3e} vs 3 SE {:.3e}",
            diag.mean(),
            3.0 * mean_se_diag
        ),
    );
    // Var[V-hat] = (E[y^4] - V^2)/n: tau^4/(2n) off-diagonal and
    // 3.5 tau^4/n on the diagonal.
    let var_se_off = tau * tau / (2.0 * nf).sqrt();
    let var_se_diag = tau * tau * (3.5 / nf).sqrt();
    gate.check(
        "7 proxy variance off-diagonal",
        (off.sample_variance() - tau * tau / 4.0).abs() <= 3.0 * var_se_off,
        format!(
            "variance {:.6e} vs tau^2/4 = {:.6e} (3 SE {:.2e})",
            off.sample_variance(),
            tau * tau / 4.0,
            3.0 * var_se_off
        ),
    );
    gate.check(
        "7 proxy variance diagonal",
        (diag.sample_variance() - tau * tau / 2.0).abs() <= 3.0 * var_se_diag,
        format!(
            "variance {:.6e} vs tau^2/2 = {:.6e} (3 SE {:.2e})",
            diag.sample_variance(),
            tau * tau / 2.0,
            3.0 * var_se_diag
        ),
    );
    gate.finish();
}
