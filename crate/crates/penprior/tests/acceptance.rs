//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single pass/fail line (visible with `cargo test -- --nocapture`
//! or on failure).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use penprior::convergence_rates::{corollary_rate, verify_witness, ToyModel};
use penprior::divergence::{kl_gaussian_gaussian, kl_numeric, renyi_divergence_prior};
use penprior::grid::GridFunction;
use penprior::lambda_planner::{
    check_prior_condition, default_bayesian_sweep, lambda_bayesian, lambda_usual, plan,
    ArchitectureSpec, ConditionMode, LayerShape, PriorConditionTarget, Scheme,
};
use penprior::penalty::{NuDependence, PenaltyKind, PenaltySpec, PosteriorFamily};
use penprior::prior::{PriorDensity, PriorForm};
use penprior::prior_engine::{
    check_condition_a, default_grid_config, derive_prior_dirac, derive_prior_grid,
    derive_prior_symbolic, reconstruct_penalty,
};
use penprior::pruning_lab::{
    forward_backward, make_synthetic_dataset, train_two_phase, Activation, MLPModel, TrainConfig,
};
use penprior::quadrature::QuadratureConfig;
use penprior::verify_correspondence;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn within(elapsed: Duration, limit_s: u64, criterion: usize) {
    assert!(
        elapsed < Duration::from_secs(limit_s),
        "criterion {criterion} exceeded its {limit_s} s budget ({elapsed:?})"
    );
}

#[test]
fn criterion_1_factor_table_closed_forms() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = rng.gen_range(1..=4096usize);
        let n = rng.gen_range(1..=4096usize);
        let pf = p as f64;
        let nf = n as f64;
        let cases = [
            (PenaltyKind::L2, pf / 2.0, 1.0),
            (PenaltyKind::L1, (2.0 * pf).sqrt(), 1.0),
            (PenaltyKind::GroupLasso, (pf * (pf + 1.0)).sqrt(), pf.sqrt()),
            (
                PenaltyKind::ReversedGroupLasso,
                (pf * (nf + 1.0)).sqrt(),
                nf.sqrt(),
            ),
        ];
        for (kind, bayes, usual) in cases {
            let rb = (lambda_bayesian(kind, p, n).unwrap() - bayes).abs() / bayes;
            let ru = (lambda_usual(kind, p, n).unwrap() - usual).abs() / usual;
            worst = worst.max(rb).max(ru);
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 1, 1);
    report(
        1,
        worst < 1e-15,
        &format!("50 shape pairs, worst relative factor error {worst:.2e} in {elapsed:?}"),
    );
}

#[test]
fn criterion_2_prior_catalogue_verifies() {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut worst: f64 = 0.0;
    let mut forms_ok = true;

    // L2 with lambda = 1 -> Gaussian(0, 1/2).
    let spec = PenaltySpec::named(PenaltyKind::L2, 1.0, 1).unwrap();
    let prior = derive_prior_dirac(&spec).unwrap();
    forms_ok &= matches!(prior.form, PriorForm::Gaussian { mean, var }
        if mean == 0.0 && (var - 0.5).abs() < 1e-12);
    let grid: Vec<Vec<f64>> = (0..21).map(|i| vec![-2.0 + 0.2 * i as f64]).collect();
    let r = verify_correspondence(&spec, &PosteriorFamily::dirac(1), &prior, &grid, &[], &cfg)
        .unwrap();
    worst = worst.max(r.max_residual);

    // L1 with lambda = 4 -> Laplace(4).
    let spec = PenaltySpec::named(PenaltyKind::L1, 4.0, 1).unwrap();
    let prior = derive_prior_dirac(&spec).unwrap();
    forms_ok &= matches!(prior.form, PriorForm::Laplace { rate } if (rate - 4.0).abs() < 1e-12);
    let r = verify_correspondence(&spec, &PosteriorFamily::dirac(1), &prior, &grid, &[], &cfg)
        .unwrap();
    worst = worst.max(r.max_residual);

    // Group-Lasso with lambda = 2 in dimension 3 -> radial exponential.
    let spec = PenaltySpec::named(PenaltyKind::GroupLasso, 2.0, 3).unwrap();
    let prior = derive_prior_dirac(&spec).unwrap();
    forms_ok &= matches!(prior.form, PriorForm::ExpNorm { rate, dim }
        if (rate - 2.0).abs() < 1e-12 && dim == 3);
    let grid3: Vec<Vec<f64>> = (0..21).map(|i| vec![-2.0 + 0.2 * i as f64; 3]).collect();
    let r = verify_correspondence(&spec, &PosteriorFamily::dirac(3), &prior, &grid3, &[], &cfg)
        .unwrap();
    worst = worst.max(r.max_residual);

    let elapsed = start.elapsed();
    within(elapsed, 5, 2);
    report(
        2,
        forms_ok && worst <= 1e-10,
        &format!("named priors recovered, worst correspondence residual {worst:.2e} in {elapsed:?}"),
    );
}

#[test]
fn criterion_3_quadratic_family_rigidity() {
    let start = Instant::now();
    let nus = [0.25, 1.0, 4.0];

    let rigid = PenaltySpec::quadratic_family(NuDependence::Rigid { a0: 0.3, b0: 0.7 }, 1).unwrap();
    let accept = check_condition_a(&rigid, &PosteriorFamily::gaussian_free(1), &nus, 1e-9).unwrap();

    let perturbed = PenaltySpec::quadratic_family(
        NuDependence::Perturbed {
            a0: 0.3,
            b0: 0.7,
            quartic_coeff: 0.01,
        },
        1,
    )
    .unwrap();
    let reject =
        check_condition_a(&perturbed, &PosteriorFamily::gaussian_free(1), &nus, 1e-9).unwrap();

    let elapsed = start.elapsed();
    within(elapsed, 5, 3);
    let pass = accept.holds()
        && accept.max_deviation <= 1e-9
        && !reject.independent_of_nu
        && reject.max_deviation > 1e-3;
    report(
        3,
        pass,
        &format!(
            "rigid family deviation {:.2e}, perturbed deviation {:.2e} in {elapsed:?}",
            accept.max_deviation, reject.max_deviation
        ),
    );
}

#[test]
fn criterion_4_grid_engine_matches_symbolic() {
    let start = Instant::now();
    let sigma2 = 1.0;
    let posterior = PosteriorFamily::gaussian_fixed(1, sigma2).unwrap();
    let (lo, hi, n, band) = default_grid_config(sigma2);

    let quadratic = PenaltySpec::named(PenaltyKind::L2, 0.5, 1).unwrap();
    let quartic = PenaltySpec::even_polynomial(1.0, 1, vec![0.0, 0.3, 0.05]).unwrap();
    let mut worst_a: f64 = 0.0;
    let mut worst_r: f64 = 0.0;

    for spec in [&quadratic, &quartic] {
        let symbolic = derive_prior_symbolic(spec, &posterior).unwrap();
        let sampled =
            GridFunction::sample(lo, hi, n, |x| spec.value(&[x], Some(sigma2)).unwrap()).unwrap();
        let a_grid = derive_prior_grid(&sampled, &posterior, band).unwrap();
        // Central half-domain comparison.
        for k in 0..a_grid.n_points {
            let x = a_grid.x(k);
            if x.abs() <= (hi - lo) / 4.0 {
                worst_a = worst_a.max((a_grid.values[k] - symbolic.eval(x)).abs());
            }
        }
        // Convolution roundtrip at central penalty arguments.
        for i in 0..41 {
            let mu = -2.0 + 0.1 * i as f64;
            let rhat = reconstruct_penalty(&a_grid, sigma2, mu);
            worst_r = worst_r.max((rhat - spec.value(&[mu], Some(sigma2)).unwrap()).abs());
        }
    }

    let elapsed = start.elapsed();
    within(elapsed, 30, 4);
    report(
        4,
        worst_a <= 1e-4 && worst_r <= 1e-4,
        &format!(
            "grid vs symbolic {worst_a:.2e}, roundtrip {worst_r:.2e} in {elapsed:?}"
        ),
    );
}

fn compute_criterion_5() -> (bool, String) {
    let p = 20usize;
    let n = 400usize;
    let mut pass = true;
    let mut reports = Vec::new();

    // L2 at its factor: Gaussian with per-weight second moment 1/P.
    let lam = lambda_bayesian(PenaltyKind::L2, p, n).unwrap();
    let prior = PriorDensity::gaussian(0.0, 1.0 / (2.0 * lam)).unwrap();
    let target = PriorConditionTarget {
        mode: ConditionMode::Prior,
        p_l: p,
        n_l: 32,
    };
    let r = check_prior_condition(&prior, &target, 1_000_000, 5).unwrap();
    pass &= r.pass && r.moment_err <= 1e-12 / p as f64;
    reports.push(("l2", r));

    // L1 at its factor: Laplace with per-weight second moment 1/P.
    let lam = lambda_bayesian(PenaltyKind::L1, p, n).unwrap();
    let prior = PriorDensity::laplace(lam).unwrap();
    let r = check_prior_condition(&prior, &target, 1_000_000, 5).unwrap();
    pass &= r.pass && r.moment_err <= 1e-12 / p as f64;
    reports.push(("l1", r));

    // Group-Lasso at its factor: radial exponential with unit group norm,
    // closed form plus a 1e6-sample Monte-Carlo cross-check within 3 SE.
    let lam = lambda_bayesian(PenaltyKind::GroupLasso, p, n).unwrap();
    let prior = PriorDensity::exp_norm(lam, p).unwrap();
    let target_prime = PriorConditionTarget {
        mode: ConditionMode::PriorPrime,
        p_l: p,
        n_l: 32,
    };
    let r = check_prior_condition(&prior, &target_prime, 1_000_000, 5).unwrap();
    pass &= r.pass && (r.target_moment - 1.0).abs() < 1e-12;
    pass &= match (r.mc_estimate, r.mc_std_err) {
        (Some(est), Some(se)) => (est - r.target_moment).abs() <= 3.0 * se,
        _ => false,
    };
    reports.push(("group-lasso", r));

    let json = serde_json::to_string_pretty(&reports).unwrap();
    (pass, json)
}

static CRIT5: OnceLock<(bool, String)> = OnceLock::new();

#[test]
fn criterion_5_moment_closure() {
    let start = Instant::now();
    let (pass, _) = CRIT5.get_or_init(compute_criterion_5).clone();
    let elapsed = start.elapsed();
    within(elapsed, 60, 5);
    report(5, pass, &format!("moment conditions closed in {elapsed:?}"));
}

#[test]
fn criterion_6_divergence_cross_checks() {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mu = rng.gen_range(-2.0..2.0);
        let s2 = rng.gen_range(0.3..3.0);
        let s02 = rng.gen_range(0.3..3.0);
        let posterior = PosteriorFamily::gaussian_fixed(1, s2).unwrap();
        let prior = PriorDensity::gaussian(0.0, s02).unwrap();
        let numeric = kl_numeric(&posterior, &[mu], None, &prior, &cfg).unwrap();
        let closed = kl_gaussian_gaussian(mu, s2, s02).unwrap();
        worst = worst.max((numeric - closed).abs());
    }

    // Renyi order ladder toward the KL limit.
    let alpha = PriorDensity::gaussian(0.0, 1.0).unwrap();
    let kl = kl_gaussian_gaussian(0.3, 1.0, 1.0).unwrap();
    let mut ladder_ok = true;
    let mut gaps = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let d = renyi_divergence_prior(0.3, 1.0, &alpha, 1.0 + delta, -24.0, 24.0, 1 << 14)
            .unwrap();
        let gap = (d - kl).abs();
        ladder_ok &= gap <= delta;
        gaps.push(gap);
    }

    let elapsed = start.elapsed();
    within(elapsed, 30, 6);
    report(
        6,
        worst <= 1e-10 && ladder_ok,
        &format!("KL gap {worst:.2e}; Renyi ladder gaps {gaps:?} in {elapsed:?}"),
    );
}

fn pruning_architecture() -> ArchitectureSpec {
    ArchitectureSpec {
        layers: vec![
            LayerShape { l: 1, n_l: 32, p_l: 20 },
            LayerShape { l: 2, n_l: 16, p_l: 32 },
            LayerShape { l: 3, n_l: 3, p_l: 16 },
        ],
        n: 400,
        b: 32,
    }
}

fn compute_criterion_7() -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();

    // Finite-difference agreement on 20 random small models.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_fd: f64 = 0.0;
    for m in 0..20 {
        let sizes = [
            rng.gen_range(2..5usize),
            rng.gen_range(2..6usize),
            rng.gen_range(2..4usize),
        ];
        let act = if m % 2 == 0 { Activation::Tanh } else { Activation::ReLU };
        let model = MLPModel::new(&sizes, act, 100 + m as u64).unwrap();
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..4).map(|_| rng.gen_range(0..sizes[2])).collect();
        let (_, grads) = forward_backward(&model, &xs, &ys).unwrap();
        let h = 1e-5;
        let mut probe = model.clone();
        for l in 0..probe.layers.len() {
            for i in 0..probe.layers[l].weights.len() {
                for j in 0..probe.layers[l].weights[i].len() {
                    let w0 = probe.layers[l].weights[i][j];
                    probe.layers[l].weights[i][j] = w0 + h;
                    let up = forward_backward(&probe, &xs, &ys).unwrap().0;
                    probe.layers[l].weights[i][j] = w0 - h;
                    let dn = forward_backward(&probe, &xs, &ys).unwrap().0;
                    probe.layers[l].weights[i][j] = w0;
                    let fd = (up - dn) / (2.0 * h);
                    let g = grads.weights[l][i][j];
                    let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
                    worst_fd = worst_fd.max(rel);
                }
            }
        }
    }
    pass &= worst_fd <= 1e-4;
    notes.push(format!("fd worst relative error {worst_fd:.2e}"));

    // Mask monotonicity over 5 seeded runs.
    let arch = pruning_architecture();
    let sweep_top = *default_bayesian_sweep(arch.n).last().unwrap();
    let plan_strong = plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, Some(sweep_top), None)
        .unwrap();
    let mut monotone = true;
    for seed in 0..5u64 {
        let data = make_synthetic_dataset(arch.n, 20, 3, 1.5, seed).unwrap();
        let cfg = TrainConfig {
            learning_rates: vec![0.1],
            max_epochs: 120,
            seed,
            ..TrainConfig::default()
        };
        let mut model = MLPModel::new(&[20, 32, 16, 3], Activation::ReLU, seed).unwrap();
        let r = train_two_phase(&mut model, &data, &plan_strong, &cfg).unwrap();
        for w in r.phase_log.windows(2) {
            for (a, b) in w[0].alive.iter().zip(&w[1].alive) {
                monotone &= b <= a;
            }
        }
    }
    pass &= monotone;
    notes.push(format!("masks monotone over 5 seeds: {monotone}"));

    // Fixed-seed pruning run against the unpenalized baseline.
    let data = make_synthetic_dataset(arch.n, 20, 3, 1.5, 42).unwrap();
    let cfg = TrainConfig {
        learning_rates: vec![0.1],
        max_epochs: 2000,
        seed: 42,
        ..TrainConfig::default()
    };
    let mut model = MLPModel::new(&[20, 32, 16, 3], Activation::ReLU, 42).unwrap();
    let total = model.total_hidden_neurons();
    let pruned_report = train_two_phase(&mut model, &data, &plan_strong, &cfg).unwrap();
    let alive = model.alive_hidden_neurons();
    let frac_pruned = (total - alive) as f64 / total as f64;

    let plan_zero =
        plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, Some(0.0), None).unwrap();
    let mut baseline_model = MLPModel::new(&[20, 32, 16, 3], Activation::ReLU, 42).unwrap();
    let baseline = train_two_phase(&mut baseline_model, &data, &plan_zero, &cfg).unwrap();
    let acc_gap = (baseline.final_test_acc - pruned_report.final_test_acc).abs();

    pass &= frac_pruned >= 0.30;
    pass &= acc_gap <= 0.05;
    notes.push(format!(
        "pruned {:.0}% of hidden neurons, accuracy {:.4} vs baseline {:.4}",
        100.0 * frac_pruned,
        pruned_report.final_test_acc,
        baseline.final_test_acc
    ));

    // Regression fixture frozen at the first green run of this seed-42 setup.
    pass &= model.per_layer_alive() == vec![8, 4, 3];
    pass &= pruned_report.final_param_count == 219;
    pass &= (pruned_report.final_test_acc - 0.8333333333333334).abs() < 1e-15;
    pass &= (baseline.final_test_acc - 0.8666666666666667).abs() < 1e-15;

    let json = serde_json::to_string_pretty(&serde_json::json!({
        "fd_worst_rel": worst_fd,
        "monotone": monotone,
        "pruned_report": pruned_report,
        "baseline_test_acc": baseline.final_test_acc,
    }))
    .unwrap();
    println!("criterion 7 detail: {}", notes.join("; "));
    (pass, json)
}

static CRIT7: OnceLock<(bool, String)> = OnceLock::new();

#[test]
fn criterion_7_pruning_lab_properties() {
    let start = Instant::now();
    let (pass, _) = CRIT7.get_or_init(compute_criterion_7).clone();
    let elapsed = start.elapsed();
    within(elapsed, 600, 7);
    report(7, pass, &format!("pruning-lab properties held in {elapsed:?}"));
}

fn compute_criterion_8() -> (bool, String) {
    let model = ToyModel::standard();
    let witness = corollary_rate(&model, 0.5).unwrap();
    let sum_c = witness.c1 + witness.c2 + witness.c3;
    let r = verify_witness(&model, &witness, &[100, 1_000, 10_000], 1_000, 8).unwrap();
    let mut pass = true;
    for check in &r.per_n {
        pass &= check.conditions_hold;
        pass &= check.r_n_estimate <= sum_c * (check.n as f64).powf(-0.5) + 1e-12;
    }
    let json = serde_json::to_string_pretty(&r).unwrap();
    (pass, json)
}

static CRIT8: OnceLock<(bool, String)> = OnceLock::new();

#[test]
fn criterion_8_rate_bound_witness() {
    let start = Instant::now();
    let (pass, _) = CRIT8.get_or_init(compute_criterion_8).clone();
    let elapsed = start.elapsed();
    within(elapsed, 60, 8);
    report(8, pass, &format!("constructed witness certified in {elapsed:?}"));
}

#[test]
fn criterion_9_determinism_of_randomized_criteria() {
    let (_, first5) = CRIT5.get_or_init(compute_criterion_5).clone();
    let (_, first7) = CRIT7.get_or_init(compute_criterion_7).clone();
    let (_, first8) = CRIT8.get_or_init(compute_criterion_8).clone();
    let (_, second5) = compute_criterion_5();
    let (_, second7) = compute_criterion_7();
    let (_, second8) = compute_criterion_8();
    let pass = first5 == second5 && first7 == second7 && first8 == second8;
    report(
        9,
        pass,
        "reruns of criteria 5, 7 and 8 produced byte-identical reports",
    );
}
