//! Penalty specifications and translation-invariant posterior families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    L2,
    L1,
    GroupLasso,
    ReversedGroupLasso,
    EvenPolynomial,
    GridSampled,
}

/// How the quadratic-family coefficients depend on the posterior variance:
/// `r(mu, sigma2) = a(sigma2) + b(sigma2) mu^2` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NuDependence {
    /// The rigid family `b(s2) = b0`, `a(s2) = s2 b0 - a0 - ln(2 pi e s2)/2`,
    /// the unique shape whose derived log-density is variance-independent.
    Rigid { a0: f64, b0: f64 },
    /// Rigid family with an extra `c * s2^2` term added to `a` — breaks
    /// variance-independence by a variance-dependent constant.
    Perturbed { a0: f64, b0: f64, quartic_coeff: f64 },
    /// Variance-independent coefficients `a(s2) = a`, `b(s2) = b`
    /// (the derived log-density then varies with the variance).
    Constant { a: f64, b: f64 },
}

impl NuDependence {
    /// Evaluates `(a(sigma2), b(sigma2))`.
    pub fn coeffs(&self, sigma2: f64) -> (f64, f64) {
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        match *self {
            NuDependence::Rigid { a0, b0 } => {
                (sigma2 * b0 - a0 - 0.5 * (two_pi_e * sigma2).ln(), b0)
            }
            NuDependence::Perturbed {
                a0,
                b0,
                quartic_coeff,
            } => (
                sigma2 * b0 - a0 - 0.5 * (two_pi_e * sigma2).ln() + quartic_coeff * sigma2 * sigma2,
                b0,
            ),
            NuDependence::Constant { a, b } => (a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poly_coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_dependence: Option<NuDependence>,
}

impl PenaltySpec {
    pub fn named(kind: PenaltyKind, lambda: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            kind,
            lambda,
            dim,
            poly_coeffs: None,
            grid: None,
            nu_dependence: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Even polynomial `sum_k c_k mu^{2k}` per coordinate, scaled by `lambda`.
    pub fn even_polynomial(lambda: f64, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: PenaltyKind::EvenPolynomial,
            lambda,
            dim,
            poly_coeffs: Some(coeffs),
            grid: None,
            nu_dependence: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid_sampled(lambda: f64, grid: GridFunction) -> Result<Self> {
        let spec = Self {
            kind: PenaltyKind::GridSampled,
            lambda,
            dim: 1,
            poly_coeffs: None,
            grid: Some(grid),
            nu_dependence: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Quadratic family with variance-dependent coefficients.
    pub fn quadratic_family(nu_dependence: NuDependence, dim: usize) -> Result<Self> {
        let spec = Self {
            kind: PenaltyKind::EvenPolynomial,
            lambda: 1.0,
            dim,
            poly_coeffs: None,
            grid: None,
            nu_dependence: Some(nu_dependence),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "penalty factor must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        match self.kind {
            PenaltyKind::EvenPolynomial => {
                if self.nu_dependence.is_some() {
                    return Ok(());
                }
                let coeffs = self.poly_coeffs.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("even polynomial penalty needs coefficients".into())
                })?;
                let leading = coeffs.iter().rev().find(|c| **c != 0.0).copied();
                match leading {
                    Some(c) if c > 0.0 => {}
                    _ => {
                        return Err(Error::InvalidParameter(
                            "even polynomial penalty needs a positive leading coefficient".into(),
                        ))
                    }
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "polynomial coefficients must be finite".into(),
                    ));
                }
            }
            PenaltyKind::GridSampled => {
                if self.grid.is_none() {
                    return Err(Error::InvalidParameter(
                        "grid-sampled penalty needs grid samples".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Penalty value at `mu`; `sigma2` feeds the variance-dependent family.
    pub fn value(&self, mu: &[f64], sigma2: Option<f64>) -> Result<f64> {
        if mu.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "expected {}-dimensional argument, got {}",
                self.dim,
                mu.len()
            )));
        }
        if let Some(dep) = &self.nu_dependence {
            let s2 = sigma2.ok_or_else(|| {
                Error::InvalidParameter(
                    "variance-dependent penalty requires a variance argument".into(),
                )
            })?;
            let (a, b) = dep.coeffs(s2);
            return Ok(mu.iter().map(|m| a + b * m * m).sum());
        }
        Ok(match self.kind {
            PenaltyKind::L2 => self.lambda * mu.iter().map(|m| m * m).sum::<f64>(),
            PenaltyKind::L1 => self.lambda * mu.iter().map(|m| m.abs()).sum::<f64>(),
            PenaltyKind::GroupLasso | PenaltyKind::ReversedGroupLasso => {
                self.lambda * mu.iter().map(|m| m * m).sum::<f64>().sqrt()
            }
            PenaltyKind::EvenPolynomial => {
                let coeffs = self.poly_coeffs.as_ref().expect("validated");
                self.lambda
                    * mu.iter()
                        .map(|m| {
                            let m2 = m * m;
                            // Horner evaluation in mu^2.
                            coeffs.iter().rev().fold(0.0, |acc, c| acc * m2 + c)
                        })
                        .sum::<f64>()
            }
            PenaltyKind::GridSampled => {
                self.lambda
                    * mu.iter()
                        .map(|&m| self.grid.as_ref().expect("validated").interp(m))
                        .sum::<f64>()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosteriorKind {
    Dirac,
    GaussianFixedVar,
    GaussianFreeVar,
}

/// Scalar-or-per-coordinate variance; accepts both JSON shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma2 {
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

impl Sigma2 {
    pub fn as_vec(&self, dim: usize) -> Vec<f64> {
        match self {
            Sigma2::Scalar(s) => vec![*s; dim],
            Sigma2::PerCoordinate(v) => v.clone(),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Sigma2::Scalar(s) => Some(*s),
            Sigma2::PerCoordinate(v) if v.len() == 1 => Some(v[0]),
            Sigma2::PerCoordinate(v) => {
                let first = v[0];
                v.iter().all(|&s| s == first).then_some(first)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFamily {
    pub kind: PosteriorKind,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<Sigma2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_machine: Option<f64>,
}

impl PosteriorFamily {
    /// Dirac family with the default machine-width convention 2^-52.
    pub fn dirac(dim: usize) -> Self {
        Self {
            kind: PosteriorKind::Dirac,
            dim,
            sigma2: None,
            epsilon_machine: Some(2f64.powi(-52)),
        }
    }

    pub fn gaussian_fixed(dim: usize, sigma2: f64) -> Result<Self> {
        let family = Self {
            kind: PosteriorKind::GaussianFixedVar,
            dim,
            sigma2: Some(Sigma2::Scalar(sigma2)),
            epsilon_machine: None,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn gaussian_free(dim: usize) -> Self {
        Self {
            kind: PosteriorKind::GaussianFreeVar,
            dim,
            sigma2: None,
            epsilon_machine: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if let Some(s2) = &self.sigma2 {
            for s in s2.as_vec(self.dim) {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "variance must be positive and finite, got {s}"
                    )));
                }
            }
        }
        if self.kind == PosteriorKind::Dirac {
            match self.epsilon_machine {
                Some(e) if e > 0.0 && e.is_finite() => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "Dirac posterior needs a positive machine-width convention".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Per-coordinate variances for a Gaussian family at parameter `nu`
    /// (free-variance families take the variance from `nu`).
    pub fn variances(&self, nu: Option<&[f64]>) -> Result<Vec<f64>> {
        match self.kind {
            PosteriorKind::Dirac => Err(Error::InvalidParameter(
                "Dirac posterior has no variance".into(),
            )),
            PosteriorKind::GaussianFixedVar => self
                .sigma2
                .as_ref()
                .map(|s| s.as_vec(self.dim))
                .ok_or_else(|| {
                    Error::InvalidParameter("fixed-variance family missing variance".into())
                }),
            PosteriorKind::GaussianFreeVar => {
                let nu = nu.ok_or_else(|| {
                    Error::InvalidParameter(
                        "free-variance family needs the variance parameter".into(),
                    )
                })?;
                if nu.len() == 1 {
                    Ok(vec![nu[0]; self.dim])
                } else if nu.len() == self.dim {
                    Ok(nu.to_vec())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "variance parameter has length {}, expected 1 or {}",
                        nu.len(),
                        self.dim
                    )))
                }
            }
        }
    }
}
