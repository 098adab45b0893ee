//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Tolerances are pinned in code; stochastic criteria run on
//! fixed seeds.

use msieve_core::approx::{
    self, discretize_mixing, domination_checks, kl_decay_curve, lemma9_sum, lemma9_sum_quadrature,
    lemma13_sigma_bar, DominationParams, IteratedKernel, MixingMeasure, VarianceReading,
};
use msieve_core::divergence::{hellinger_sq, kl_div, NumericDensity};
use msieve_core::em::{em_iterate, fit_mle, initialize, EmConfig, InitStrategy};
use msieve_core::holder::{
    audit_separation, build_omega, proposition1_params, random_theta, verify_class_conditions,
    vg_subset, FamilyBuilder, SmoothDensity,
};
use msieve_core::holder::audit::DEFAULT_AUDIT_SLACK;
use msieve_core::kernel::{conv_scale, psi, psi_sigma};
use msieve_core::mixture::{
    draw_sample, empirical_contrast, validate_membership, Component, Mixture,
};
use msieve_core::select::{select_model, sieve_spec, SieveConfig};
use msieve_core::{quad, seed};
use std::sync::Arc;

fn verdict(criterion: &str, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn sieve_config() -> SieveConfig {
    SieveConfig {
        beta_low: 0.5,
        beta_high: 2.0,
        a_bar: 1.2,
        g_tilde: 5.0,
        lambda_bar: 4.0,
        kappa: 1.0,
        c1: 1.0,
        m_max: 16,
    }
}

fn kernel_density() -> NumericDensity {
    NumericDensity::new(Arc::new(psi), Some(1.0), None).unwrap()
}

fn shifted_scaled(sigma: f64, shift: f64) -> NumericDensity {
    let reach = 27.0 * sigma.max(1.0) + shift.abs();
    NumericDensity::new(
        Arc::new(move |x| psi_sigma(sigma, x - shift)),
        None,
        Some((-reach, reach)),
    )
    .unwrap()
}

#[test]
fn criterion_01_kernel_quadrature_identities() {
    let mut worst_norm = 0.0f64;
    for &sigma in &[0.1f64, 1.0, 10.0] {
        let t = 27.0 * sigma.max(1.0);
        let v = quad::adaptive(&|x| psi_sigma(sigma, x), -t, t, 1e-12).unwrap();
        worst_norm = worst_norm.max((v - 1.0).abs());
    }
    let var = quad::adaptive(&|x| x * x * psi(x), -30.0, 30.0, 1e-11).unwrap();
    let var_err = (var - 0.5).abs();
    let mut worst_conv = 0.0f64;
    for &(a, b) in &[(1.0, 0.5), (1.0, 1.0)] {
        let f = shifted_scaled(a, 0.0);
        let s = conv_scale(a, b);
        for i in 0..200 {
            let x = -4.0 + 8.0 * i as f64 / 199.0;
            let v = approx::convolve(&f, b, 1, x).unwrap();
            worst_conv = worst_conv.max((v - psi_sigma(s, x)).abs());
        }
    }
    let pass = worst_norm < 1e-10 && var_err < 1e-9 && worst_conv < 1e-9;
    verdict(
        "01 kernel/quadrature identities",
        pass,
        format!("norm err {worst_norm:.2e}, variance err {var_err:.2e}, self-convolution err {worst_conv:.2e}"),
    );
}

#[test]
fn criterion_02_divergence_closed_forms() {
    let deltas = [0.2, 0.5, 0.8, 1.1, 1.5];
    let sigmas = [0.6, 0.8, 1.0, 1.3, 1.6];
    let mut worst_h = 0.0f64;
    let mut worst_kl = 0.0f64;
    for &d in &deltas {
        for &s in &sigmas {
            let f = shifted_scaled(s, 0.0);
            let g = shifted_scaled(s, d);
            let h2 = hellinger_sq(&f, &g).unwrap();
            let h2_closed = 1.0 - (-d * d / (4.0 * s * s)).exp();
            worst_h = worst_h.max((h2 - h2_closed).abs());
            let kl = kl_div(&f, &g).unwrap().value();
            let kl_closed = d * d / (s * s);
            worst_kl = worst_kl.max((kl - kl_closed).abs());
        }
    }
    let pass = worst_h < 1e-6 && worst_kl < 1e-6;
    verdict(
        "02 divergence closed forms",
        pass,
        format!("hellinger err {worst_h:.2e}, kl err {worst_kl:.2e} over the 5x5 grid"),
    );
}

#[test]
fn criterion_03_alternating_moment_identity() {
    let mut worst_closed = 0.0f64;
    let mut worst_quad = 0.0f64;
    for u in 1..=4usize {
        for k in u..=4usize {
            worst_closed = worst_closed.max(lemma9_sum(u, k).abs());
            worst_quad = worst_quad.max(lemma9_sum_quadrature(u, k).unwrap().abs());
        }
    }
    let pass = worst_closed < 1e-9 && worst_quad < 1e-6;
    verdict(
        "03 alternating moment identity",
        pass,
        format!("closed-form residual {worst_closed:.2e}, quadrature residual {worst_quad:.2e}"),
    );
}

#[test]
fn criterion_04_iterate_suite() {
    let base = build_omega(1.0, 0.22, 2.0).unwrap();
    let f = base.numeric_density().unwrap();
    let m = base.envelope_m_tilde;
    let sigma = 0.25;
    let kit = IteratedKernel::build(&f, sigma, 3).unwrap();
    let (lo, hi) = kit.domain;
    let mut worst_mass = 0.0f64;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_routes = 0.0f64;
    for k in 0..=3usize {
        let total = quad::adaptive(&|x| kit.f_k(k, x), lo, hi, 1e-8).unwrap();
        worst_mass = worst_mass.max((total - 1.0).abs());
        let cap = (2f64.powi(k as i32 + 1) - 1.0) * m / std::f64::consts::PI.sqrt();
        for i in 0..=800 {
            let x = -8.0 + 16.0 * i as f64 / 800.0;
            let v = kit.f_k(k, x);
            worst_bound = worst_bound.max(v.abs() - cap);
            worst_routes = worst_routes.max((v - kit.f_k_recursive(k, x)).abs());
        }
    }
    let pass = worst_mass < 1e-6 && worst_bound <= 0.0 && worst_routes <= 1e-8;
    verdict(
        "04 iterate suite",
        pass,
        format!(
            "mass err {worst_mass:.2e}, bound margin {worst_bound:.2e}, route gap {worst_routes:.2e}"
        ),
    );
}

#[test]
fn criterion_05_discretization_contract() {
    let mut worst_ratio = 0.0f64;
    let mut all_ok = true;
    for &a in &[1.0f64, 2.0] {
        for &sigma in &[0.5, 0.25] {
            for &eps in &[1e-2, 1e-3] {
                for uniform in [true, false] {
                    let measure = if uniform {
                        let h = 0.5 / a;
                        MixingMeasure::Density(Arc::new(move |_x| h))
                    } else {
                        // truncated kernel, normalized on [-a, a]
                        let mass = quad::adaptive(&psi, -a, a, 1e-12).unwrap();
                        MixingMeasure::Density(Arc::new(move |x| psi(x) / mass))
                    };
                    match discretize_mixing(&measure, a, sigma, eps) {
                        Ok(rep) => {
                            let target = (2.0 * eps / sigma)
                                .max(msieve_core::approx::discretize::SUP_NORM_FLOOR);
                            worst_ratio = worst_ratio.max(rep.sup_norm_achieved / target);
                            all_ok &= rep.sup_norm_achieved <= target;
                            all_ok &= (rep.measure.support_points.len() as f64) <= rep.support_bound;
                        }
                        Err(e) => {
                            all_ok = false;
                            println!("  case a={a} sigma={sigma} eps={eps} uniform={uniform}: {e}");
                        }
                    }
                }
            }
        }
    }
    verdict(
        "05 discretization contract",
        all_ok,
        format!("worst sup-norm/bound ratio {worst_ratio:.3}"),
    );
}

#[test]
fn criterion_06_approximation_decay() {
    let f = kernel_density();
    let curve = kl_decay_curve(&f, 2.0, &[0.4, 0.3, 0.2, 0.1, 0.05]).unwrap();
    let slope = curve.slope.unwrap_or(f64::NAN);
    let kls: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{:.3e}", p.kl.unwrap_or(f64::NAN)))
        .collect();
    let pass = slope >= 3.5;
    verdict(
        "06 approximation decay",
        pass,
        format!("log-log slope {slope:.3} (need >= 3.5); kl = [{}]", kls.join(", ")),
    );
}

#[test]
fn criterion_07_class_membership() {
    let mut all_pass = true;
    let mut details = Vec::new();
    for &(beta, d) in &[(0.5f64, 4usize), (1.0, 8), (2.0, 8)] {
        let base = build_omega(1.0, 0.22, beta).unwrap();
        let params = proposition1_params(0.5, 2.0, &base, 0.5).unwrap();
        let builder = FamilyBuilder::new(beta, d, base).unwrap();
        let mut case_pass = true;
        for t in 0..10u64 {
            let theta_seed = seed::derive_seed(7, "acceptance-class", &[beta.to_bits(), d as u64, t]);
            let theta = random_theta(d, theta_seed);
            let fam = builder.family(&theta).unwrap();
            let smooth = SmoothDensity::from_family(&fam).unwrap();
            let report = verify_class_conditions(&smooth, beta, &params).unwrap();
            case_pass &= report.pass;
            if !report.pass {
                details.push(format!(
                    "beta={beta} D={d} theta#{t}: holder {:.3} origin {:.3} moments {:.3} tail {:.3} mono {:.3}",
                    report.smoothness_holder.worst_ratio,
                    report.smoothness_origin.worst_ratio,
                    report.moments.worst_ratio,
                    report.tail.worst_ratio,
                    report.monotonicity.worst_ratio
                ));
            }
        }
        all_pass &= case_pass;
        details.push(format!("(beta={beta}, D={d}): {}", if case_pass { "ok" } else { "violations" }));
    }
    verdict("07 class membership", all_pass, details.join("; "));
}

#[test]
fn criterion_08_separation_audit() {
    let mut all_pass = true;
    let mut details = Vec::new();
    for &(beta, d) in &[(0.5f64, 4usize), (1.0, 8), (2.0, 8)] {
        let base = build_omega(1.0, 0.22, beta).unwrap();
        let builder = FamilyBuilder::new(beta, d, base).unwrap();
        let code = vg_subset(d, 0.5, 11).unwrap();
        let audit = audit_separation(&builder, &code, None, DEFAULT_AUDIT_SLACK).unwrap();
        all_pass &= audit.pass;
        let worst_upper = audit
            .pairs
            .iter()
            .map(|p| p.h2 - p.h2_upper)
            .fold(f64::NEG_INFINITY, f64::max);
        details.push(format!(
            "(beta={beta}, D={d}): {} pairs, pass={}, worst upper-excess {:.2e}",
            audit.pairs.len(),
            audit.pass,
            worst_upper
        ));
    }
    verdict("08 separation audit", all_pass, details.join("; "));
}

#[test]
fn criterion_09_code_construction() {
    let mut all_pass = true;
    let mut details = Vec::new();
    for &d in &[8usize, 16, 32] {
        let code = vg_subset(d, 0.5, 4).unwrap();
        // exhaustive verification of both clauses
        let mut min_delta = d;
        for (i, &x) in code.words.iter().enumerate() {
            for &y in &code.words[i + 1..] {
                min_delta = min_delta.min((x ^ y).count_ones() as usize);
            }
        }
        let sep_ok = min_delta > d / 4;
        let count_ok = (code.words.len() as f64).ln() > d as f64 / 8.0;
        all_pass &= sep_ok && count_ok && code.verify();
        details.push(format!(
            "D={d}: |code|={}, min distance {min_delta}",
            code.words.len()
        ));
    }
    verdict("09 code construction", all_pass, details.join("; "));
}

#[test]
fn criterion_10_em_monotonicity_and_feasibility() {
    let cfg = sieve_config();
    let spec = sieve_spec(3, &cfg).unwrap();
    let truth = Mixture::new(vec![
        Component {
            weight: 0.5,
            mean: -3.0,
            variance: 1.0,
        },
        Component {
            weight: 0.5,
            mean: 3.0,
            variance: 1.0,
        },
    ])
    .unwrap();
    let mut worst_drift = 0.0f64;
    let mut all_feasible = true;
    for run in 0..100u64 {
        let s = draw_sample(&truth, 200, seed::derive_seed(42, "acceptance-em", &[run])).unwrap();
        let mut mix = initialize(
            &s,
            3,
            &spec,
            InitStrategy::RandomPoints,
            seed::derive_seed(42, "acceptance-em-init", &[run]),
        )
        .unwrap();
        let mut prev = empirical_contrast(&mix, &s).unwrap();
        for _ in 0..40 {
            let (next, info) = em_iterate(&mix, &s, &spec).unwrap();
            let cur = empirical_contrast(&next, &s).unwrap();
            if !info.clamped && info.reseeded.is_empty() {
                worst_drift = worst_drift.max(cur - prev);
            }
            mix = next;
            prev = cur;
        }
        all_feasible &= validate_membership(&mix, &spec).pass;
        // the multi-start driver must also return feasible mixtures
        let fit = fit_mle(
            &s,
            &spec,
            &EmConfig {
                n_starts: 2,
                max_iterations: 60,
                init_strategy: InitStrategy::PlusPlusStyle,
                ..EmConfig::with_seed(run)
            },
        )
        .unwrap();
        all_feasible &= validate_membership(&fit.mixture, &spec).pass;
    }
    let pass = worst_drift <= 1e-9 && all_feasible;
    verdict(
        "10 em monotonicity and feasibility",
        pass,
        format!("worst unclamped drift {worst_drift:.2e}, all mixtures feasible: {all_feasible}"),
    );
}

fn selection_truth() -> Mixture {
    Mixture::new(vec![
        Component {
            weight: 1.0 / 3.0,
            mean: -4.0,
            variance: 1.0,
        },
        Component {
            weight: 1.0 / 3.0,
            mean: 0.0,
            variance: 1.0,
        },
        Component {
            weight: 1.0 - 2.0 / 3.0,
            mean: 4.0,
            variance: 1.0,
        },
    ])
    .unwrap()
}

#[test]
fn criterion_11_selection_oracle() {
    let cfg = sieve_config();
    let truth = selection_truth();
    let truth_density = NumericDensity::from_mixture(&truth).unwrap();
    let reps = 50u64;
    let mut hits = 0usize;
    let mut ratios = Vec::new();
    for rep in 0..reps {
        let s = draw_sample(
            &truth,
            2000,
            seed::derive_seed(2026, "acceptance-select", &[rep]),
        )
        .unwrap();
        let em = EmConfig {
            n_starts: 3,
            max_iterations: 200,
            init_strategy: InitStrategy::PlusPlusStyle,
            ..EmConfig::with_seed(rep)
        };
        let outcome = select_model(&s, (2, 8), &cfg, &em).unwrap();
        let m_hat = outcome.table.selected_m;
        if (3..=5).contains(&m_hat) {
            hits += 1;
        }
        let mut best = f64::INFINITY;
        let mut selected_d2 = f64::NAN;
        for (row, fit) in outcome.table.rows.iter().zip(outcome.fits.iter()) {
            if let Some(fit) = fit {
                let d2 = hellinger_sq(
                    &truth_density,
                    &NumericDensity::from_mixture(&fit.mixture).unwrap(),
                )
                .unwrap();
                best = best.min(d2);
                if row.m == m_hat {
                    selected_d2 = d2;
                }
            }
        }
        ratios.push(selected_d2 / best.max(1e-300));
    }
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[24] + ratios[25]);
    let pass = hits * 5 >= (reps as usize) * 4 && median <= 3.0;
    verdict(
        "11 selection oracle",
        pass,
        format!(
            "selected m in {{3,4,5}} on {hits}/{reps} replications, median risk ratio {median:.3}"
        ),
    );
}

#[test]
fn criterion_12_adaptive_rate() {
    use msieve_core::divergence::{mc_hellinger_risk, EnvelopeTruth};
    let cfg = sieve_config();
    let beta = 2.0;
    let base = build_omega(1.0, 0.22, beta).unwrap();
    let builder = FamilyBuilder::new(beta, 8, base).unwrap();
    let theta = random_theta(8, 5);
    let fam = builder.family(&theta).unwrap();
    let truth = EnvelopeTruth::new(fam.numeric_density().unwrap()).unwrap();
    let procedure = |s: &msieve_core::mixture::Sample| -> msieve_core::Result<NumericDensity> {
        let em = EmConfig {
            n_starts: 2,
            max_iterations: 200,
            init_strategy: InitStrategy::PlusPlusStyle,
            ..EmConfig::with_seed(77)
        };
        let outcome = select_model(s, (2, 10), &cfg, &em)?;
        let fit = outcome
            .selected_fit()
            .ok_or_else(|| msieve_core::CoreError::Selection("no fit".into()))?;
        NumericDensity::from_mixture(&fit.mixture)
    };
    let report = mc_hellinger_risk(
        &truth,
        &procedure,
        &[500, 1000, 2000, 4000, 8000],
        50,
        2026,
    )
    .unwrap();
    let slope = report.slope.map(|s| s.slope).unwrap_or(f64::NAN);
    let target = -2.0 * beta / (2.0 * beta + 1.0);
    let risks: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{:.3e}", r.mean_risk))
        .collect();
    let pass = (slope - target).abs() <= 0.2;
    verdict(
        "12 adaptive rate",
        pass,
        format!(
            "fitted slope {slope:.3} vs target {target:.2} (band +-0.2); risks = [{}]",
            risks.join(", ")
        ),
    );
}

#[test]
fn criterion_13_domination_inequalities() {
    let base = build_omega(1.0, 0.22, 2.0).unwrap();
    let f = base.numeric_density().unwrap();
    let params = DominationParams {
        alpha: base.alpha,
        xi: base.xi,
        envelope_m: base.envelope_m_tilde,
        p: 0.5,
        q1: 1.0,
        q2: 0.5,
        reading: VarianceReading::Literal,
    };
    let sigma_bar = lemma13_sigma_bar(base.alpha, VarianceReading::Literal);
    // convolution lower bound at sigma_bar / 2
    let r13 = domination_checks(&f, sigma_bar / 2.0, 0, &params).unwrap();
    let c13 = r13.convolution_lower.checked().expect("applicable");
    // iterate domination with p = 1/2, k = 1, sigma = 0.1
    let r14 = domination_checks(&f, 0.1, 1, &params).unwrap();
    let c14 = r14.iterate_upper.checked().expect("applicable");
    // envelope propagation with q1 = 1, q2 = 1/2, sigma = 0.5
    let r15 = domination_checks(&f, 0.5, 0, &params).unwrap();
    let c15 = r15.envelope_propagation.checked().expect("applicable");
    let pass = c13.pass && c14.pass && c15.pass;
    verdict(
        "13 domination inequalities",
        pass,
        format!(
            "margins: lower {:.2e}, iterate {:.2e}, propagation {:.2e} (slack 1e-9)",
            c13.worst_margin, c14.worst_margin, c15.worst_margin
        ),
    );
}

#[test]
fn criterion_14_reproducibility() {
    use std::process::Command;
    let dir = std::env::temp_dir().join("msieve-acceptance-repro");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    // toy sample from the selection truth
    let sample = draw_sample(&selection_truth(), 300, 99).unwrap();
    let sample_path = dir.join("sample.txt");
    sample.write_to(&sample_path).unwrap();
    let config = serde_json::json!({
        "command": "select",
        "seed": 5,
        "out_dir": dir.join("out").to_str().unwrap(),
        "sample_path": sample_path.to_str().unwrap(),
        "m_range": [2, 3],
        "sieve": {
            "beta_low": 0.5, "beta_high": 2.0, "a_bar": 1.2, "g_tilde": 5.0,
            "lambda_bar": 4.0, "kappa": 1.0, "c1": 1.0, "m_max": 8
        },
        "em": {"n_starts": 2, "init_strategy": "plus_plus_style", "max_iterations": 80}
    });
    let config_path = dir.join("select.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_msieve"))
            .args(["select", "--config"])
            .arg(&config_path)
            .status()
            .expect("binary runs");
        assert!(status.success(), "select run failed");
        let files = ["selection.csv", "selection.json", "selected_mixture.json"];
        let mut digests = Vec::new();
        for name in files {
            digests.push((
                name.to_string(),
                std::fs::read(dir.join("out").join(name)).unwrap(),
            ));
        }
        digests
    };
    let first = run();
    let second = run();
    let pass = first == second;
    verdict(
        "14 reproducibility",
        pass,
        format!(
            "{} output files byte-identical across reruns",
            first.len()
        ),
    );
}
