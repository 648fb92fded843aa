//! Uniform-grid function carrier and discrete Fourier helpers.
//!
//! The grid is endpoint-exclusive: `n_points` samples at
//! `lo + k * (hi - lo) / n_points`. Forward/inverse transforms approximate
//! the continuous conventions `F f(xi) = int f(x) e^{-i xi x} dx` and its
//! inverse, so multipliers such as the Gaussian characteristic function can
//! be evaluated analytically at the grid frequencies.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lo: f64, hi: f64, n_points: usize, values: Vec<f64>) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy hi > lo, got [{lo}, {hi}]"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if values.len() != n_points {
            return Err(Error::InvalidParameter(format!(
                "expected {n_points} samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid values must be finite".into(),
            ));
        }
        Ok(Self {
            lo,
            hi,
            n_points,
            values,
        })
    }

    /// Samples `f` on the endpoint-exclusive uniform grid.
    pub fn sample(lo: f64, hi: f64, n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = (hi - lo) / n_points as f64;
        let values = (0..n_points).map(|k| f(lo + k as f64 * dx)).collect();
        Self::new(lo, hi, n_points, values)
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.n_points as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.x(k))
    }

    /// Angular frequency of DFT bin `k` (signed, fftfreq layout).
    pub fn xi(&self, k: usize) -> f64 {
        let n = self.n_points as i64;
        let k = k as i64;
        let signed = if k <= n / 2 - 1 { k } else { k - n };
        2.0 * std::f64::consts::PI * signed as f64 / (self.n_points as f64 * self.dx())
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// Linear interpolation; clamps outside the domain.
    pub fn interp(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.dx();
        if t <= 0.0 {
            return self.values[0];
        }
        let i = t.floor() as usize;
        if i + 1 >= self.n_points {
            return self.values[self.n_points - 1];
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Trapezoid integral over the sampled domain.
    pub fn integrate(&self) -> f64 {
        let dx = self.dx();
        let inner: f64 = self.values[1..self.n_points - 1].iter().sum();
        dx * (0.5 * self.values[0] + inner + 0.5 * self.values[self.n_points - 1])
    }
}

/// Forward DFT approximating the continuous Fourier transform
/// (dx scaling and phase for the grid origin included).
pub fn continuous_fft(g: &GridFunction) -> Vec<Complex64> {
    let n = g.n_points;
    let mut buf: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dx = g.dx();
    for k in 0..n {
        let xi = g.xi(k);
        let phase = Complex64::from_polar(1.0, -xi * g.lo);
        buf[k] *= dx * phase;
    }
    buf
}

/// Inverse of [`continuous_fft`]; returns complex samples on the grid.
pub fn continuous_ifft(spectrum: &[Complex64], lo: f64, hi: f64) -> Vec<Complex64> {
    let n = spectrum.len();
    let dx = (hi - lo) / n as f64;
    let mut buf: Vec<Complex64> = Vec::with_capacity(n);
    for (k, &s) in spectrum.iter().enumerate() {
        let signed = if (k as i64) <= n as i64 / 2 - 1 {
            k as i64
        } else {
            k as i64 - n as i64
        };
        let xi = 2.0 * std::f64::consts::PI * signed as f64 / (n as f64 * dx);
        let phase = Complex64::from_polar(1.0, xi * lo);
        buf.push(s * phase / dx);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    for v in &mut buf {
        *v /= n as f64;
    }
    buf
}

/// Real part of the inverse transform; errors if the imaginary residue
/// exceeds `imag_tol` relative to the real magnitude.
pub fn real_ifft(spectrum: &[Complex64], lo: f64, hi: f64, imag_tol: f64) -> Result<Vec<f64>> {
    let c = continuous_ifft(spectrum, lo, hi);
    let scale = c.iter().map(|z| z.re.abs()).fold(1.0f64, f64::max);
    let max_imag = c.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
    if max_imag > imag_tol * scale {
        return Err(Error::NumericalFailure(format!(
            "imaginary residue {max_imag:e} exceeds tolerance (scale {scale:e})"
        )));
    }
    Ok(c.iter().map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::new(0.0, 1.0, 7, vec![0.0; 7]).is_err());
        assert!(GridFunction::new(0.0, 1.0, 12, vec![0.0; 12]).is_err());
        assert!(GridFunction::new(1.0, 0.0, 8, vec![0.0; 8]).is_err());
        assert!(GridFunction::new(0.0, 1.0, 8, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let s2 = 0.7;
        let g = GridFunction::sample(-15.0, 15.0, 1024, |x| {
            (-x * x / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
        })
        .unwrap();
        let spec = continuous_fft(&g);
        for k in 0..g.n_points {
            let xi = g.xi(k);
            if xi.abs() < 6.0 {
                let expected = (-s2 * xi * xi / 2.0).exp();
                assert!((spec[k].re - expected).abs() < 1e-10, "xi = {xi}");
                assert!(spec[k].im.abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn dft_roundtrip_is_identity(vals in proptest::collection::vec(-100.0f64..100.0, 64)) {
            let g = GridFunction::new(-3.0, 5.0, 64, vals).unwrap();
            let back = real_ifft(&continuous_fft(&g), g.lo, g.hi, 1e-9).unwrap();
            let max = g.values.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            prop_assert!(max < 1e-10);
        }
    }
}
