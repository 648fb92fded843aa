//! Inverts a penalty into a candidate prior under the Renyi divergence and
//! checks the resulting correspondence numerically.

use penprior::{
    kl_gaussian_gaussian, renyi_divergence_prior, renyi_prior_candidate, PenaltySpec,
    PosteriorFamily, PriorDensity,
};

fn main() -> penprior::Result<()> {
    // For an order-2 divergence, a Gaussian posterior of unit variance and
    // the quadratic penalty mu^2 / 3 + K, the candidate prior is N(0, 2).
    let gamma = 2.0;
    let k = (2.0f64 / 3.0f64.sqrt()).ln();
    let spec = PenaltySpec::even_polynomial(1.0, 1, vec![0.0, 1.0 / 3.0])?;
    let posterior = PosteriorFamily::gaussian_fixed(1, 1.0)?;
    let candidate = renyi_prior_candidate(&spec, &posterior, gamma, -k, -12.0, 12.0, 2048)?;

    let target = PriorDensity::gaussian(0.0, 2.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..candidate.n_points {
        let x = candidate.x(i);
        if x.abs() <= 4.0 {
            worst = worst.max((candidate.values[i] - target.density(&[x])?).abs());
        }
    }
    println!("candidate vs N(0, 2): max density gap {worst:.2e} on [-4, 4]");

    // Sanity check of the closed form that pins the example: the order-2
    // divergence between N(mu, 1) and N(0, 2) is ln(2/sqrt(3)) + mu^2 / 3.
    for mu in [0.0, 0.5, 1.0] {
        let d = renyi_divergence_prior(mu, 1.0, &target, gamma, -24.0, 24.0, 1 << 14)?;
        println!(
            "D_2(N({mu}, 1) || N(0, 2)) = {d:.6}, closed form {:.6}",
            (2.0 / 3.0f64.sqrt()).ln() + mu * mu / 3.0
        );
    }

    // As the order approaches 1 the divergence approaches the KL.
    let alpha = PriorDensity::gaussian(0.0, 1.0)?;
    let kl = kl_gaussian_gaussian(0.3, 1.0, 1.0)?;
    for delta in [1e-2, 1e-3, 1e-4] {
        let d = renyi_divergence_prior(0.3, 1.0, &alpha, 1.0 + delta, -24.0, 24.0, 1 << 14)?;
        println!("order 1 + {delta:.0e}: gap to KL = {:.2e}", (d - kl).abs());
    }
    Ok(())
}
