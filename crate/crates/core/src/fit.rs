//! Least-squares fits used by the scaling analyses.

use serde::{Deserialize, Serialize};

use crate::rng::{stream, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope from the residuals.
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::domain("linear fit needs at least two paired points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, r2, slope_stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Bootstrap standard error of the exponent.
    pub stderr: f64,
    pub r2: f64,
}

/// Fit `y = c x^α` by least squares in log-log over the points with
/// `x` inside `window` (inclusive), with a pairs-bootstrap error.
pub fn fit_power_law(x: &[f64], y: &[f64], window: Option<(f64, f64)>, seed: u64) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::domain("series lengths differ"));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, _)| window.is_none_or(|(lo, hi)| **a >= lo && **a <= hi))
        .map(|(a, b)| {
            if *a <= 0.0 || *b <= 0.0 {
                Err(Error::domain("power-law fit requires positive data"))
            } else {
                Ok((a.ln(), b.ln()))
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    if lx.len() < 5 {
        return Err(Error::domain("power-law fit needs at least 5 points in the window"));
    }
    let fit = linear_fit(&lx, &ly)?;
    let mut rng = stream(seed, 0xF17, 0);
    let stderr = bootstrap_slope(&lx, &ly, 200, &mut rng);
    Ok(PowerLawFit { exponent: fit.slope, prefactor: fit.intercept.exp(), stderr, r2: fit.r2 })
}

fn bootstrap_slope(x: &[f64], y: &[f64], resamples: usize, rng: &mut StreamRng) -> f64 {
    use rand::Rng;
    let n = x.len();
    let mut slopes = Vec::with_capacity(resamples);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    while slopes.len() < resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            bx[k] = x[i];
            by[k] = y[i];
        }
        if let Ok(f) = linear_fit(&bx, &by) {
            slopes.push(f.slope);
        }
    }
    let m = slopes.iter().sum::<f64>() / resamples as f64;
    (slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

/// Time derivative `½ d⟨x²⟩/dt` by least squares over a window.
pub fn diffusion_constant(t: &[f64], msd: &[f64], window: (f64, f64)) -> Result<f64> {
    let (tw, mw): (Vec<f64>, Vec<f64>) =
        t.iter().zip(msd).filter(|(a, _)| **a >= window.0 && **a <= window.1).map(|(a, b)| (*a, *b)).unzip();
    Ok(0.5 * linear_fit(&tw, &mw)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;

    #[test]
    fn exact_square_law() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = fit_power_law(&x, &y, None, 1).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = stream(9, 0, 0);
        let x: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.sqrt() * (1.0 + 0.01 * (2.0 * uniform(&mut rng) - 1.0))).collect();
        let f = fit_power_law(&x, &y, None, 1).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.02);
        assert!(f.stderr < 0.02);
    }

    #[test]
    fn rejects_nonpositive_and_short_series() {
        assert!(fit_power_law(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 0.0, 1.0, 1.0, 1.0], None, 1).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0], None, 1).is_err());
    }

    #[test]
    fn linear_diffusion() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let m: Vec<f64> = t.iter().map(|v| 0.6 * v + 3.0).collect();
        assert!((diffusion_constant(&t, &m, (10.0, 40.0)).unwrap() - 0.3).abs() < 1e-12);
    }
}
