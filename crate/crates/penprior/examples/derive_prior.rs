//! Derives the prior equivalent to a penalty for Dirac and Gaussian
//! posteriors, and shows the variance-independence check that gates the
//! equivalence.

use penprior::{
    check_condition_a, derive_prior_dirac, derive_prior_symbolic, normalize_prior,
    DerivedLogDensity, NuDependence, PenaltyKind, PenaltySpec, PosteriorFamily,
};

fn main() -> penprior::Result<()> {
    // MAP case: an L2 penalty lambda * mu^2 corresponds to a centered
    // Gaussian prior with variance 1 / (2 lambda).
    let l2 = PenaltySpec::named(PenaltyKind::L2, 1.0, 1)?;
    let prior = derive_prior_dirac(&l2)?;
    println!("L2, lambda = 1, Dirac posterior -> {:?}", prior.form);

    // L1 gives a Laplace prior, group penalties a radial exponential.
    let l1 = PenaltySpec::named(PenaltyKind::L1, 4.0, 1)?;
    println!("L1, lambda = 4 -> {:?}", derive_prior_dirac(&l1)?.form);
    let gl = PenaltySpec::named(PenaltyKind::GroupLasso, 2.0, 3)?;
    println!("group-Lasso, lambda = 2, P = 3 -> {:?}", derive_prior_dirac(&gl)?.form);

    // Gaussian posterior: the derived log-density must not depend on the
    // posterior variance. The rigid quadratic family passes...
    let rigid = PenaltySpec::quadratic_family(NuDependence::Rigid { a0: 0.3, b0: 0.7 }, 1)?;
    let free = PosteriorFamily::gaussian_free(1);
    let check = check_condition_a(&rigid, &free, &[0.25, 1.0, 4.0], 1e-9)?;
    println!(
        "rigid quadratic family: variance independent = {} (deviation {:.2e})",
        check.independent_of_nu, check.max_deviation
    );

    // ...while a bare quadratic penalty does not (its constant drifts with
    // the variance), so no single prior reproduces it for every variance.
    let bare = PenaltySpec::even_polynomial(1.0, 1, vec![0.0, 1.0])?;
    let check = check_condition_a(&bare, &free, &[1.0, 2.0], 1e-9)?;
    println!(
        "bare quadratic penalty: variance independent = {} (deviation {:.2e})",
        check.independent_of_nu, check.max_deviation
    );

    // When the check passes, normalize the log-density into a usable prior.
    let fixed = PosteriorFamily::gaussian_fixed(1, 1.0)?;
    let poly = derive_prior_symbolic(&rigid, &fixed)?;
    let prior = normalize_prior(&DerivedLogDensity::Poly(poly))?;
    println!("normalized rigid-family prior: {:?}", prior.form);
    Ok(())
}
