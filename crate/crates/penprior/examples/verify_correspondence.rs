//! Checks numerically that KL(posterior || prior) equals the penalty up to
//! one constant across a grid of posterior means.

use penprior::{
    verify_correspondence, PenaltyKind, PenaltySpec, PosteriorFamily, PriorDensity,
    QuadratureConfig,
};

fn main() -> penprior::Result<()> {
    let cfg = QuadratureConfig::default();
    let mu_grid: Vec<Vec<f64>> = (0..21).map(|i| vec![-2.0 + 0.2 * i as f64]).collect();

    // Correct pairing: L1 with rate-matched Laplace prior.
    let l1 = PenaltySpec::named(PenaltyKind::L1, 4.0, 1)?;
    let laplace = PriorDensity::laplace(4.0)?;
    let report = verify_correspondence(
        &l1,
        &PosteriorFamily::dirac(1),
        &laplace,
        &mu_grid,
        &[],
        &cfg,
    )?;
    println!(
        "L1 vs Laplace(4): fitted constant {:.6}, max residual {:.2e} ({:?})",
        report.fitted_k, report.max_residual, report.method
    );

    // Wrong rate: the residual exposes the mismatch immediately.
    let wrong = PriorDensity::laplace(2.0)?;
    let report = verify_correspondence(
        &l1,
        &PosteriorFamily::dirac(1),
        &wrong,
        &mu_grid,
        &[],
        &cfg,
    )?;
    println!(
        "L1 vs Laplace(2): max residual {:.2e} (should be far above 1e-10)",
        report.max_residual
    );

    // Gaussian posterior with several variances: only the rigid quadratic
    // family (whose constant absorbs the entropy drift) keeps a single
    // Gaussian prior across the whole variance grid.
    let rigid = PenaltySpec::quadratic_family(
        penprior::NuDependence::Rigid { a0: 0.3, b0: 0.7 },
        1,
    )?;
    let gaussian = PriorDensity::gaussian(0.0, 1.0 / 1.4)?;
    let report = verify_correspondence(
        &rigid,
        &PosteriorFamily::gaussian_free(1),
        &gaussian,
        &mu_grid,
        &[0.25, 1.0, 4.0],
        &cfg,
    )?;
    println!(
        "rigid quadratic family vs its Gaussian prior over three variances: max residual {:.2e}",
        report.max_residual
    );
    Ok(())
}
