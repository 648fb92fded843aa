//! Plans per-layer penalty factors for an architecture under both factor
//! schemes and shows the moment conditions that motivate them.

use penprior::{
    check_prior_condition, default_bayesian_sweep, plan, plan_to_csv, ArchitectureSpec,
    ConditionMode, LayerShape, PenaltyKind, PriorConditionTarget, PriorDensity, Scheme,
};

fn main() -> penprior::Result<()> {
    let arch = ArchitectureSpec {
        layers: vec![
            LayerShape { l: 1, n_l: 100, p_l: 784 },
            LayerShape { l: 2, n_l: 10, p_l: 100 },
        ],
        n: 42_000,
        b: 100,
    };

    let bayes = plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, None, None)?;
    println!("Bayesian group-Lasso plan:\n{}", serde_json::to_string_pretty(&bayes)?);
    println!("as CSV:\n{}", plan_to_csv(&arch, &bayes));

    let usual = plan(&arch, PenaltyKind::GroupLasso, Scheme::Usual, Some(1e-4), None)?;
    println!(
        "usual-scheme factors: {:?} (global {})",
        usual.per_layer, usual.global_lambda
    );

    println!(
        "default global sweep around 1/n: {:?}",
        default_bayesian_sweep(arch.n)
    );

    // The Bayesian factor for L2 makes the matched Gaussian prior satisfy
    // the per-weight moment condition E[w^2] = 1/P exactly.
    let p = 784;
    let lam = bayes.per_layer[&1];
    let group_prior = PriorDensity::exp_norm(lam, p)?;
    let target = PriorConditionTarget {
        mode: ConditionMode::PriorPrime,
        p_l: p,
        n_l: 100,
    };
    let check = check_prior_condition(&group_prior, &target, 200_000, 0)?;
    println!(
        "group prior at the planned factor: target {:.3}, moment error {:.2e}, pass = {}",
        check.target_moment, check.moment_err, check.pass
    );
    Ok(())
}
