//! Derivation of the prior log-density from a penalty and a
//! translation-invariant posterior family.
//!
//! Two engines are provided. The symbolic engine handles even-polynomial
//! penalties with Gaussian posteriors: deconvolving a polynomial by a
//! centered Gaussian is the inverse heat flow, a finite series
//! `D = sum_j ((-s2/2)^j / j!) r^(2j)`, so the result is exact. The grid
//! engine handles sampled penalties: it first splits off an even-polynomial
//! trend by least squares (deconvolved exactly by the same series) and
//! deconvolves only the bounded residual in frequency space, dividing by
//! the Gaussian characteristic function inside a hard band limit. Without
//! the split, the exponential amplification of the division destroys any
//! penalty with polynomial growth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{continuous_fft, real_ifft, GridFunction};
use crate::penalty::{PenaltyKind, PenaltySpec, PosteriorFamily, PosteriorKind};
use crate::prior::{LogDensityPoly, PriorDensity, PriorForm};

/// Maximum polynomial degree the symbolic engine and the grid detrender accept.
pub const MAX_POLY_DEGREE: usize = 8;

/// Differential entropy of the centered family member.
/// Gaussian: `sum_k ln(2 pi e s_k^2) / 2`; Dirac: `dim * ln(epsilon)`.
pub fn entropy(posterior: &PosteriorFamily, nu: Option<&[f64]>) -> Result<f64> {
    posterior.validate()?;
    match posterior.kind {
        PosteriorKind::Dirac => {
            let eps = posterior.epsilon_machine.expect("validated");
            Ok(posterior.dim as f64 * eps.ln())
        }
        PosteriorKind::GaussianFixedVar | PosteriorKind::GaussianFreeVar => {
            let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
            let vars = posterior.variances(nu)?;
            for &v in &vars {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "variance must be positive and finite, got {v}"
                    )));
                }
            }
            Ok(vars.iter().map(|&v| 0.5 * (two_pi_e * v).ln()).sum())
        }
    }
}

/// Applies the inverse heat flow `exp(-(s2/2) d^2/dx^2)` to polynomial
/// coefficients (index = power). Finite series: polynomials truncate it.
pub fn heat_deconvolve_poly(coeffs: &[f64], sigma2: f64) -> Vec<f64> {
    let deg = coeffs.len().saturating_sub(1);
    let mut out = coeffs.to_vec();
    let mut factor = 1.0f64;
    for j in 1..=deg / 2 {
        factor *= -sigma2 / 2.0 / j as f64;
        for k in 0..=deg.saturating_sub(2 * j) {
            // (d^{2j} x^{k+2j}) coefficient: (k+2j)! / k!.
            let mut fall = 1.0f64;
            for m in k + 1..=k + 2 * j {
                fall *= m as f64;
            }
            out[k] += factor * fall * coeffs[k + 2 * j];
        }
    }
    out
}

/// Per-coordinate polynomial coefficients (index = power in `mu`)
/// of the penalty, for the symbolic engine.
fn penalty_poly_coeffs(penalty: &PenaltySpec, sigma2: f64) -> Result<Vec<f64>> {
    if let Some(dep) = &penalty.nu_dependence {
        let (a, b) = dep.coeffs(sigma2);
        return Ok(vec![a, 0.0, b]);
    }
    match penalty.kind {
        PenaltyKind::L2 => Ok(vec![0.0, 0.0, penalty.lambda]),
        PenaltyKind::EvenPolynomial => {
            let coeffs = penalty.poly_coeffs.as_ref().ok_or_else(|| {
                Error::InvalidParameter("even polynomial penalty needs coefficients".into())
            })?;
            let mut full = vec![0.0; 2 * coeffs.len() - 1];
            for (k, &c) in coeffs.iter().enumerate() {
                full[2 * k] = penalty.lambda * c;
            }
            Ok(full)
        }
        other => Err(Error::UnsupportedPenalty(format!(
            "symbolic derivation needs an even polynomial penalty, got {other:?}"
        ))),
    }
}

/// Symbolic engine: per-coordinate log-density
/// `A(theta) = -Ent(beta_0) - [inverse heat flow of r](theta)`.
pub fn derive_prior_symbolic(
    penalty: &PenaltySpec,
    posterior: &PosteriorFamily,
) -> Result<LogDensityPoly> {
    derive_prior_symbolic_at(penalty, posterior, None)
}

/// Symbolic engine at an explicit variance parameter (free-variance families).
pub fn derive_prior_symbolic_at(
    penalty: &PenaltySpec,
    posterior: &PosteriorFamily,
    nu: Option<&[f64]>,
) -> Result<LogDensityPoly> {
    penalty.validate()?;
    posterior.validate()?;
    if posterior.kind == PosteriorKind::Dirac {
        return Err(Error::UnsupportedPenalty(
            "symbolic engine needs a Gaussian posterior; use the direct path for Dirac".into(),
        ));
    }
    let vars = posterior.variances(nu)?;
    let sigma2 = vars[0];
    if vars.iter().any(|&v| v != sigma2) {
        return Err(Error::Configuration(
            "symbolic engine assumes a shared per-coordinate variance".into(),
        ));
    }
    let r = penalty_poly_coeffs(penalty, sigma2)?;
    if r.len() - 1 > MAX_POLY_DEGREE {
        return Err(Error::Configuration(format!(
            "penalty degree {} exceeds the supported maximum {MAX_POLY_DEGREE}",
            r.len() - 1
        )));
    }
    let deconv = heat_deconvolve_poly(&r, sigma2);
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(LogDensityPoly {
        coeffs: deconv.iter().map(|c| -c).collect(),
        entropy_const: -0.5 * (two_pi_e * sigma2).ln(),
        dim: penalty.dim,
    })
}

/// Direct path for Dirac posteriors: `A = -r`, so the prior is
/// `exp(-r)/kappa` with named-family shortcuts.
pub fn derive_prior_dirac(penalty: &PenaltySpec) -> Result<PriorDensity> {
    penalty.validate()?;
    match penalty.kind {
        PenaltyKind::L2 => PriorDensity::gaussian(0.0, 1.0 / (2.0 * penalty.lambda)),
        PenaltyKind::L1 => PriorDensity::laplace(penalty.lambda),
        PenaltyKind::GroupLasso | PenaltyKind::ReversedGroupLasso => {
            PriorDensity::exp_norm(penalty.lambda, penalty.dim)
        }
        PenaltyKind::EvenPolynomial => {
            let coeffs = penalty_poly_coeffs(penalty, 0.0)?;
            let a = LogDensityPoly {
                coeffs: coeffs.iter().map(|c| -c).collect(),
                entropy_const: 0.0,
                dim: penalty.dim,
            };
            normalize_prior(&DerivedLogDensity::Poly(a))
        }
        PenaltyKind::GridSampled => {
            let grid = penalty
                .grid
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("missing penalty grid".into()))?;
            let a = GridFunction::new(
                grid.lo,
                grid.hi,
                grid.n_points,
                grid.values.iter().map(|v| -penalty.lambda * v).collect(),
            )?;
            normalize_prior(&DerivedLogDensity::Grid(a))
        }
    }
}

/// Least-squares fit of an even polynomial (degree <= `MAX_POLY_DEGREE`)
/// to the grid samples; returns full coefficients (index = power).
fn fit_even_trend(g: &GridFunction) -> Result<Vec<f64>> {
    let n_basis = MAX_POLY_DEGREE / 2 + 1;
    let scale = g.lo.abs().max(g.hi.abs());
    // Normal equations over the basis (x/scale)^{2j}.
    let mut m = vec![vec![0.0f64; n_basis]; n_basis];
    let mut rhs = vec![0.0f64; n_basis];
    for (k, &v) in g.values.iter().enumerate() {
        let t = g.x(k) / scale;
        let mut basis = [0.0f64; 8];
        let mut p = 1.0;
        for b in basis.iter_mut().take(n_basis) {
            *b = p;
            p *= t * t;
        }
        for i in 0..n_basis {
            rhs[i] += basis[i] * v;
            for j in 0..n_basis {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let sol = solve_linear(m, rhs)?;
    let mut full = vec![0.0; MAX_POLY_DEGREE + 1];
    for (j, &c) in sol.iter().enumerate() {
        full[2 * j] = c / scale.powi(2 * j as i32);
    }
    Ok(full)
}

/// Dense Gaussian elimination with partial pivoting (tiny systems only).
fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::NumericalFailure(
                "singular normal equations in trend fit".into(),
            ));
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Ok(x)
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Grid engine: samples of `A = -Ent(beta_0) - [deconvolved r]` on the
/// penalty's grid. The polynomial trend is deconvolved exactly; the residual
/// goes through the band-limited frequency division.
pub fn derive_prior_grid(
    penalty: &GridFunction,
    posterior: &PosteriorFamily,
    band_limit: f64,
) -> Result<GridFunction> {
    posterior.validate()?;
    if posterior.kind != PosteriorKind::GaussianFixedVar {
        return Err(Error::Configuration(
            "grid engine needs a fixed-variance Gaussian posterior".into(),
        ));
    }
    let sigma2 = posterior
        .sigma2
        .as_ref()
        .and_then(|s| s.scalar())
        .ok_or_else(|| Error::Configuration("grid engine needs a shared scalar variance".into()))?;
    if !(band_limit > 0.0) || band_limit > penalty.nyquist() {
        return Err(Error::Configuration(format!(
            "band limit {band_limit} outside (0, {}]",
            penalty.nyquist()
        )));
    }
    // The division multiplies by exp(s2 xi^2 / 2); refuse when the
    // characteristic function underflows inside the band.
    let char_at_band = (-sigma2 * band_limit * band_limit / 2.0).exp();
    if char_at_band < 1e-300 {
        return Err(Error::IllConditionedDeconvolution {
            frequency: band_limit,
            magnitude: char_at_band,
        });
    }

    let trend = fit_even_trend(penalty)?;
    let trend_deconv = heat_deconvolve_poly(&trend, sigma2);
    let residual = GridFunction::new(
        penalty.lo,
        penalty.hi,
        penalty.n_points,
        penalty
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| v - eval_poly(&trend, penalty.x(k)))
            .collect(),
    )?;

    let mut spectrum = continuous_fft(&residual);
    for (k, s) in spectrum.iter_mut().enumerate() {
        let xi = residual.xi(k);
        if xi.abs() <= band_limit {
            *s *= (sigma2 * xi * xi / 2.0).exp();
        } else {
            *s *= 0.0;
        }
    }
    let resid_deconv = real_ifft(&spectrum, penalty.lo, penalty.hi, 1e-10)?;

    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let ent = 0.5 * (two_pi_e * sigma2).ln();
    let values = (0..penalty.n_points)
        .map(|k| -ent - eval_poly(&trend_deconv, penalty.x(k)) - resid_deconv[k])
        .collect();
    GridFunction::new(penalty.lo, penalty.hi, penalty.n_points, values)
}

/// Default grid parameters for a given posterior variance:
/// domain `[-20 sigma, 20 sigma]`, 4096 points, band limit
/// `min(4/sigma, Nyquist/4)` — keeps the amplification below 1e8.
pub fn default_grid_config(sigma2: f64) -> (f64, f64, usize, f64) {
    let sigma = sigma2.sqrt();
    let (lo, hi, n) = (-20.0 * sigma, 20.0 * sigma, 4096usize);
    let nyquist = std::f64::consts::PI * n as f64 / (hi - lo);
    (lo, hi, n, (4.0 / sigma).min(nyquist / 4.0))
}

/// Reconstructs the penalty from a derived log-density grid:
/// `r(mu) = -Ent - E_{theta ~ N(mu, s2)} A(theta)`, evaluated by trapezoid
/// over the grid (the Gaussian tail outside the grid must be negligible).
pub fn reconstruct_penalty(a: &GridFunction, sigma2: f64, mu: f64) -> f64 {
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let ent = 0.5 * (two_pi_e * sigma2).ln();
    let norm = (2.0 * std::f64::consts::PI * sigma2).sqrt();
    let weighted = GridFunction::new(
        a.lo,
        a.hi,
        a.n_points,
        (0..a.n_points)
            .map(|k| {
                let t = a.x(k);
                a.values[k] * (-(t - mu) * (t - mu) / (2.0 * sigma2)).exp() / norm
            })
            .collect(),
    )
    .expect("same shape as input");
    -ent - weighted.integrate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAReport {
    pub independent_of_nu: bool,
    /// Max over variance pairs and the probe grid of the absolute
    /// log-density difference. Constant offsets are NOT removed: a
    /// variance-dependent additive constant already breaks the equivalence
    /// (it changes the normalization with the variance).
    pub max_deviation: f64,
    pub integrable: bool,
    pub tested_nus: Vec<f64>,
}

impl ConditionAReport {
    pub fn holds(&self) -> bool {
        self.independent_of_nu && self.integrable
    }
}

/// Derives the log-density at each variance sample and checks that it does
/// not depend on the variance (on a 101-point probe grid) and that its
/// exponential is integrable.
pub fn check_condition_a(
    penalty: &PenaltySpec,
    posterior: &PosteriorFamily,
    nu_samples: &[f64],
    tolerance: f64,
) -> Result<ConditionAReport> {
    if nu_samples.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one variance sample".into(),
        ));
    }
    let mut derived = Vec::with_capacity(nu_samples.len());
    for &nu in nu_samples {
        let family = PosteriorFamily::gaussian_fixed(posterior.dim, nu)?;
        let a = derive_prior_symbolic(penalty, &family).map_err(|e| Error::NuDerivation {
            nu: vec![nu],
            source: Box::new(e),
        })?;
        derived.push(a);
    }

    let probe: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
    let mut max_deviation = 0.0f64;
    for i in 0..derived.len() {
        for j in i + 1..derived.len() {
            for &theta in &probe {
                let d = (derived[i].eval(theta) - derived[j].eval(theta)).abs();
                max_deviation = max_deviation.max(d);
            }
        }
    }
    let integrable = derived.iter().all(LogDensityPoly::is_integrable);
    Ok(ConditionAReport {
        independent_of_nu: max_deviation <= tolerance,
        max_deviation,
        integrable,
        tested_nus: nu_samples.to_vec(),
    })
}

/// A derived log-density ready for normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivedLogDensity {
    Poly(LogDensityPoly),
    Grid(GridFunction),
}

/// Normalizes `exp(A)` into a proper density. Quadratic `A` becomes a
/// closed-form Gaussian; higher even degrees keep the polynomial form with a
/// numerically integrated normalization; grids integrate by trapezoid after
/// a boundary-decay screen.
pub fn normalize_prior(a: &DerivedLogDensity) -> Result<PriorDensity> {
    match a {
        DerivedLogDensity::Poly(p) => {
            if !p.is_integrable() {
                return Err(Error::NonNormalizablePrior(format!(
                    "log-density of degree {} with leading coefficient {} does not decay",
                    p.degree(),
                    p.coeffs.get(p.degree()).copied().unwrap_or(0.0)
                )));
            }
            if p.degree() == 2 {
                let c2 = p.coeffs[2];
                let c1 = p.coeffs.get(1).copied().unwrap_or(0.0);
                let var = -1.0 / (2.0 * c2);
                let mean = c1 * var;
                return PriorDensity::gaussian(mean, var);
            }
            // Integrate exp(A) per coordinate on a domain where the leading
            // term has pushed A far below its maximum.
            let d = p.degree();
            let lead = -p.coeffs[d];
            let radius = (80.0 / lead).powf(1.0 / d as f64) + 5.0;
            let n = 1 << 14;
            let g = GridFunction::sample(-radius, radius, n, |x| p.eval(x).exp())?;
            let kappa = g.integrate();
            if !kappa.is_finite() || kappa <= 0.0 {
                return Err(Error::NonNormalizablePrior(format!(
                    "normalization integral evaluated to {kappa}"
                )));
            }
            Ok(PriorDensity {
                form: PriorForm::LogPoly(p.clone()),
                kappa,
            })
        }
        DerivedLogDensity::Grid(g) => {
            // Boundary-decay screen: exp(A) must be negligible at the edges
            // relative to the peak, otherwise the domain truncates real mass.
            let peak = g.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let edge = g.values[0].max(g.values[g.n_points - 1]);
            if edge > peak - 20.0 {
                return Err(Error::NonNormalizablePrior(format!(
                    "log-density does not decay at the grid boundary (peak {peak:.3}, edge {edge:.3})"
                )));
            }
            let expd = GridFunction::new(
                g.lo,
                g.hi,
                g.n_points,
                g.values.iter().map(|v| v.exp()).collect(),
            )?;
            let kappa = expd.integrate();
            if !kappa.is_finite() || kappa <= 0.0 {
                return Err(Error::NonNormalizablePrior(format!(
                    "normalization integral evaluated to {kappa}"
                )));
            }
            Ok(PriorDensity {
                form: PriorForm::Grid(g.clone()),
                kappa,
            })
        }
    }
}
