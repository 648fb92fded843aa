//! Derived prior densities: closed-form families and grid-sampled
//! log-densities, with evaluation, sampling and normalization support.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Polynomial log-density `A(theta) = entropy_const + sum_k coeffs[k] theta^k`,
/// applied per coordinate with product structure across `dim` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDensityPoly {
    pub coeffs: Vec<f64>,
    pub entropy_const: f64,
    pub dim: usize,
}

impl LogDensityPoly {
    /// Value of `A` at a single coordinate.
    pub fn eval(&self, theta: f64) -> f64 {
        self.entropy_const + self.coeffs.iter().rev().fold(0.0, |acc, c| acc * theta + c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }

    /// `exp(A)` is integrable iff the leading coefficient is negative and the
    /// degree even (constant `A` is not integrable on the whole line).
    pub fn is_integrable(&self) -> bool {
        let d = self.degree();
        d >= 2 && d % 2 == 0 && self.coeffs[d] < 0.0
    }
}

/// Log of the surface area of the unit sphere in `R^p`: `S_{p-1} = 2 pi^{p/2} / Gamma(p/2)`.
pub fn ln_sphere_area(p: usize) -> f64 {
    let p = p as f64;
    std::f64::consts::LN_2 + 0.5 * p * std::f64::consts::PI.ln() - ln_gamma(0.5 * p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorForm {
    Gaussian { mean: f64, var: f64 },
    Laplace { rate: f64 },
    ExpNorm { rate: f64, dim: usize },
    LogPoly(LogDensityPoly),
    /// Grid samples of the unnormalized log-density `A`.
    Grid(GridFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorDensity {
    pub form: PriorForm,
    /// Normalization of the underlying `exp(A)`: the density is `exp(A)/kappa`.
    pub kappa: f64,
}

impl PriorDensity {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian variance must be positive, got {var}"
            )));
        }
        // With A = -(theta - mean)^2 / (2 var), kappa = sqrt(2 pi var).
        Ok(Self {
            form: PriorForm::Gaussian { mean, var },
            kappa: (2.0 * std::f64::consts::PI * var).sqrt(),
        })
    }

    pub fn laplace(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Laplace rate must be positive, got {rate}"
            )));
        }
        // A = -rate |theta|, kappa = 2 / rate.
        Ok(Self {
            form: PriorForm::Laplace { rate },
            kappa: 2.0 / rate,
        })
    }

    /// Radial-exponential prior on `R^p` with density
    /// `rate^p / (S_{p-1} Gamma(p)) exp(-rate ||theta||)`.
    pub fn exp_norm(rate: f64, dim: usize) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "radial-exponential rate must be positive, got {rate}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let ln_kappa = ln_sphere_area(dim) + ln_gamma(dim as f64) - dim as f64 * rate.ln();
        Ok(Self {
            form: PriorForm::ExpNorm { rate, dim },
            kappa: ln_kappa.exp(),
        })
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            PriorForm::ExpNorm { dim, .. } => *dim,
            PriorForm::LogPoly(p) => p.dim,
            _ => 1,
        }
    }

    /// Normalized log-density at `theta`.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        match &self.form {
            PriorForm::Gaussian { mean, var } => {
                let d: f64 = theta.iter().map(|t| (t - mean) * (t - mean)).sum();
                Ok(-d / (2.0 * var) - theta.len() as f64 * self.kappa.ln())
            }
            PriorForm::Laplace { rate } => {
                let d: f64 = theta.iter().map(|t| t.abs()).sum();
                Ok(-rate * d - theta.len() as f64 * self.kappa.ln())
            }
            PriorForm::ExpNorm { rate, dim } => {
                if theta.len() != *dim {
                    return Err(Error::InvalidParameter(format!(
                        "expected {dim}-dimensional argument, got {}",
                        theta.len()
                    )));
                }
                let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                Ok(-rate * norm - self.kappa.ln())
            }
            PriorForm::LogPoly(p) => {
                if theta.len() != p.dim {
                    return Err(Error::InvalidParameter(format!(
                        "expected {}-dimensional argument, got {}",
                        p.dim,
                        theta.len()
                    )));
                }
                let a: f64 = theta.iter().map(|&t| p.eval(t)).sum();
                Ok(a - p.dim as f64 * self.kappa.ln())
            }
            PriorForm::Grid(g) => {
                let a: f64 = theta.iter().map(|&t| g.interp(t)).sum();
                Ok(a - theta.len() as f64 * self.kappa.ln())
            }
        }
    }

    pub fn density(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_density(theta)?.exp())
    }

    /// Draws one sample; the closed-form families are supported,
    /// grid/polynomial forms are not sampleable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.form {
            PriorForm::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(vec![mean + var.sqrt() * z])
            }
            PriorForm::Laplace { rate } => {
                // Difference of two exponentials is Laplace-distributed.
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                Ok(vec![(-u1.ln() + u2.ln()) / rate])
            }
            PriorForm::ExpNorm { rate, dim } => {
                // Radius is Gamma(shape = dim, rate) and the direction uniform:
                // the radial density is proportional to r^{dim-1} e^{-rate r}.
                let gamma = Gamma::new(*dim as f64, 1.0 / rate)
                    .map_err(|e| Error::NumericalFailure(e.to_string()))?;
                let r = gamma.sample(rng);
                let mut dir: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::NumericalFailure(
                        "degenerate direction sample".into(),
                    ));
                }
                for d in &mut dir {
                    *d *= r / norm;
                }
                Ok(dir)
            }
            PriorForm::LogPoly(_) | PriorForm::Grid(_) => Err(Error::UnsupportedPenalty(
                "sampling is only available for closed-form priors".into(),
            )),
        }
    }

    /// Log-density of a single coordinate when the prior factorizes over
    /// coordinates (everything except the multi-dimensional radial family).
    pub fn separable_coord_log_density(&self, t: f64) -> Option<f64> {
        match &self.form {
            PriorForm::Gaussian { mean, var } => {
                Some(-(t - mean) * (t - mean) / (2.0 * var) - self.kappa.ln())
            }
            PriorForm::Laplace { rate } => Some(-rate * t.abs() - self.kappa.ln()),
            PriorForm::ExpNorm { rate, dim: 1 } => Some(-rate * t.abs() - self.kappa.ln()),
            PriorForm::ExpNorm { .. } => None,
            PriorForm::LogPoly(p) => Some(p.eval(t) - self.kappa.ln()),
            PriorForm::Grid(g) => Some(g.interp(t) - self.kappa.ln()),
        }
    }

    /// Closed-form per-coordinate variance where available
    /// (`E theta^2` for the centered scalar families).
    pub fn coordinate_second_moment(&self) -> Option<f64> {
        match &self.form {
            PriorForm::Gaussian { mean, var } => Some(var + mean * mean),
            PriorForm::Laplace { rate } => Some(2.0 / (rate * rate)),
            _ => None,
        }
    }

    /// Closed-form `E ||theta||^2`: `P(P+1)/rate^2` for the radial family.
    pub fn squared_norm_moment(&self) -> Option<f64> {
        match &self.form {
            PriorForm::Gaussian { .. } | PriorForm::Laplace { .. } => {
                self.coordinate_second_moment()
            }
            PriorForm::ExpNorm { rate, dim } => {
                let p = *dim as f64;
                Some(p * (p + 1.0) / (rate * rate))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_density_integrates_to_one() {
        let p = PriorDensity::gaussian(0.0, 0.5).unwrap();
        let g = GridFunction::sample(-12.0, 12.0, 2048, |x| p.density(&[x]).unwrap()).unwrap();
        assert_abs_diff_eq!(g.integrate(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn laplace_density_matches_closed_form() {
        let p = PriorDensity::laplace(2.0).unwrap();
        // (lambda/2) e^{-lambda |theta|} at theta = 1.5.
        assert_abs_diff_eq!(
            p.density(&[1.5]).unwrap(),
            1.0 * (-3.0f64).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn exp_norm_integrates_to_one_radially() {
        // Integrate the radial marginal rate^p r^{p-1} e^{-rate r} / Gamma(p).
        let (rate, dim) = (2.5, 3);
        let p = PriorDensity::exp_norm(rate, dim).unwrap();
        let g = GridFunction::sample(1e-9, 20.0, 4096, |r| {
            let dir = [r, 0.0, 0.0];
            let surface = (ln_sphere_area(dim) + (dim as f64 - 1.0) * r.ln()).exp();
            p.density(&dir).unwrap() * surface
        })
        .unwrap();
        assert_abs_diff_eq!(g.integrate(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn exp_norm_sample_moment_matches_closed_form() {
        let (rate, dim) = (3.0, 4);
        let p = PriorDensity::exp_norm(rate, dim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean_sq: f64 = (0..n)
            .map(|_| {
                let s = p.sample(&mut rng).unwrap();
                s.iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        let expected = p.squared_norm_moment().unwrap();
        assert!((mean_sq - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn log_poly_integrability_screen() {
        let good = LogDensityPoly {
            coeffs: vec![1.0, 0.0, -2.0],
            entropy_const: 0.0,
            dim: 1,
        };
        assert!(good.is_integrable());
        let bad = LogDensityPoly {
            coeffs: vec![0.0, 0.0, 2.0],
            entropy_const: 0.0,
            dim: 1,
        };
        assert!(!bad.is_integrable());
    }
}
