//! Noiseless aging void: the Ω integral equation, the similarity profile Φ
//! and the polylog cumulant generating function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::grid::GridSpec;
use crate::{Error, Result};

/// ζ(3/2).
pub const ZETA_3_2: f64 = 2.612_375_348_685_488_3;

pub fn default_grid() -> GridSpec {
    GridSpec { max: 12.0, points: 2400 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSolution {
    pub s: f64,
    pub h: f64,
    pub u: Vec<f64>,
    pub omega: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub used_newton: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SimilarityProfile {
    /// Φ at arbitrary u (linear interpolation, 1/2 beyond the grid).
    pub fn at(&self, u: f64) -> f64 {
        let h = self.u[1] - self.u[0];
        if u >= *self.u.last().unwrap() {
            return 0.5;
        }
        crate::grid::interp_uniform(&self.phi, h, u.max(0.0))
    }
}

fn source(s: f64, u: f64) -> f64 {
    (-2.0 * s).exp_m1() * (-u * u / 4.0).exp() / (4.0 * PI).sqrt()
}

/// Trapezoid approximation of `∫_0^{u_max-u_i} Ω(z) Ω(u_i+z) dz` for every i.
fn autocorrelation(omega: &[f64], h: f64) -> Vec<f64> {
    let n = omega.len();
    let last = omega.iter().rposition(|w| w.abs() >= 1e-14).map_or(0, |k| k + 1);
    (0..n)
        .map(|i| {
            let m = n - i; // terms j = 0..m-1
            if m == 1 {
                return 0.0;
            }
            let upper = m.min(last.saturating_sub(i).max(1));
            let mut acc = 0.0;
            for j in 0..upper {
                let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                acc += w * omega[j] * omega[i + j];
            }
            acc * h
        })
        .collect()
}

fn residual(omega: &[f64], src: &[f64], h: f64) -> Vec<f64> {
    let c = autocorrelation(omega, h);
    omega.iter().zip(&c).zip(src).map(|((w, c), s)| w + c - s).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

const TOL: f64 = 1e-12;

/// Solve `Ω(u) + ∫_0^∞ Ω(z)Ω(u+z)dz = (e^{-2s}-1) e^{-u²/4}/sqrt(4π)`.
pub fn solve_omega(s: f64, grid: GridSpec) -> Result<OmegaSolution> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("tilt must be finite and >= 0, got {s}")));
    }
    if grid.max < 10.0 {
        return Err(Error::domain("u_max must be >= 10"));
    }
    let h = grid.step();
    let u = grid.nodes();
    let src: Vec<f64> = u.iter().map(|&x| source(s, x)).collect();

    let mut omega = src.clone();
    let mut history = Vec::new();
    let mut res = max_abs(&residual(&omega, &src, h));
    let mut iterations = 0;
    while res > TOL && iterations < 500 {
        let c = autocorrelation(&omega, h);
        for i in 0..omega.len() {
            omega[i] = 0.5 * omega[i] + 0.5 * (src[i] - c[i]);
        }
        iterations += 1;
        res = max_abs(&residual(&omega, &src, h));
        history.push(res);
        if !res.is_finite() || (iterations > 20 && res > 10.0 * history[iterations - 20]) {
            break;
        }
    }
    let mut used_newton = false;
    if !(res <= TOL) {
        used_newton = true;
        if !res.is_finite() {
            omega = src.clone();
        }
        for _ in 0..50 {
            let r = residual(&omega, &src, h);
            res = max_abs(&r);
            if res <= TOL {
                break;
            }
            let jac = jacobian(&omega, h);
            let delta = jac
                .lu()
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| Error::numerical("singular Jacobian in Omega Newton step", res))?;
            for (w, d) in omega.iter_mut().zip(delta.iter()) {
                *w -= d;
            }
            iterations += 1;
        }
        res = max_abs(&residual(&omega, &src, h));
    }
    if !(res <= 1e-10) {
        return Err(Error::numerical(
            format!("Omega iteration failed; residual history tail {:?}", &history[history.len().saturating_sub(5)..]),
            res,
        ));
    }
    Ok(OmegaSolution { s, h, u, omega, residual: res, iterations, used_newton })
}

fn jacobian(omega: &[f64], h: f64) -> DMatrix<f64> {
    let n = omega.len();
    let mut jac = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let m = n - i;
        if m == 1 {
            continue;
        }
        for j in 0..m {
            let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 } * h;
            jac[(i, j)] += w * omega[i + j];
            jac[(i, i + j)] += w * omega[j];
        }
    }
    jac
}

/// `Φ(u) = ½ ∫_0^u Ω / ∫_0^∞ Ω`.
pub fn phi_profile(sol: &OmegaSolution) -> Result<SimilarityProfile> {
    let h = sol.h;
    let mut cum = vec![0.0; sol.omega.len()];
    for i in 1..cum.len() {
        cum[i] = cum[i - 1] + 0.5 * h * (sol.omega[i - 1] + sol.omega[i]);
    }
    let total = *cum.last().unwrap();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::domain("phi profile undefined: integral of Omega vanishes"));
    }
    Ok(SimilarityProfile { u: sol.u.clone(), phi: cum.iter().map(|c| 0.5 * c / total).collect() })
}

/// `Li_{3/2}(z)` for `z ∈ [0, 1]`, with an upper bound on the neglected tail.
///
/// The series is summed directly; above z = 0.99 the sum is capped and the
/// returned bound can exceed 1e-12.
pub fn polylog_3_2(z: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("polylog argument {z} outside [0, 1]")));
    }
    if z == 1.0 {
        return Ok((ZETA_3_2, 0.0));
    }
    let max_terms: usize = if z <= 0.99 { 100_000 } else { 10_000_000 };
    let mut sum = 0.0;
    let mut zk = 1.0;
    let mut k = 0usize;
    let mut bound = f64::INFINITY;
    while k < max_terms {
        k += 1;
        zk *= z;
        let kf = k as f64;
        sum += zk / (kf * kf.sqrt());
        let kn = kf + 1.0;
        bound = zk * z / (kn * kn.sqrt() * (1.0 - z));
        if bound < 1e-13 {
            break;
        }
    }
    Ok((sum, bound))
}

/// `Λ̂₀(s) = Li_{3/2}(1 - e^{-2s}) / (2 sqrt π)`.
pub fn cgf_hat_lambda0(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("tilt must be >= 0, got {s}")));
    }
    let z = if s.is_infinite() { 1.0 } else { -(-2.0 * s).exp_m1() };
    Ok(polylog_3_2(z)?.0 / (2.0 * PI.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn untilted_omega_vanishes() {
        let sol = solve_omega(0.0, default_grid()).unwrap();
        assert!(sol.omega.iter().all(|&w| w == 0.0));
        assert!(phi_profile(&sol).is_err());
    }

    #[test]
    fn omega_sign_and_residual() {
        let sol = solve_omega(0.5, default_grid()).unwrap();
        assert!(sol.omega[0] < 0.0);
        assert!(sol.residual < 1e-10);
        assert!(sol.omega.iter().all(|&w| w <= 0.0));
    }

    #[test]
    fn second_order_convergence() {
        let g0 = GridSpec { max: 12.0, points: 241 };
        let g1 = g0.refined();
        let g2 = g1.refined();
        let a = solve_omega(0.5, g0).unwrap();
        let b = solve_omega(0.5, g1).unwrap();
        let c = solve_omega(0.5, g2).unwrap();
        let d1 = (0..a.omega.len()).map(|i| (a.omega[i] - b.omega[2 * i]).abs()).fold(0.0, f64::max);
        let d2 = (0..a.omega.len()).map(|i| (b.omega[2 * i] - c.omega[4 * i]).abs()).fold(0.0, f64::max);
        assert!(d1 / d2 >= 3.8, "ratio {}", d1 / d2);
    }

    #[test]
    fn newton_matches_fixed_point() {
        let g = GridSpec { max: 12.0, points: 241 };
        let fp = solve_omega(0.5, g).unwrap();
        let h = g.step();
        let src: Vec<f64> = g.nodes().iter().map(|&x| source(0.5, x)).collect();
        let mut omega = src.clone();
        for _ in 0..10 {
            let r = residual(&omega, &src, h);
            let d = jacobian(&omega, h).lu().solve(&DVector::from_vec(r)).unwrap();
            for (w, d) in omega.iter_mut().zip(d.iter()) {
                *w -= d;
            }
        }
        for (a, b) in fp.omega.iter().zip(&omega) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn phi_endpoints_and_monotone() {
        let p = phi_profile(&solve_omega(0.5, default_grid()).unwrap()).unwrap();
        assert_eq!(p.phi[0], 0.0);
        assert!((p.phi.last().unwrap() - 0.5).abs() < 1e-12);
        assert!(p.phi.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn phi_insensitive_to_domain() {
        let a = phi_profile(&solve_omega(0.5, GridSpec { max: 12.0, points: 1201 }).unwrap()).unwrap();
        let b = phi_profile(&solve_omega(0.5, GridSpec { max: 24.0, points: 2401 }).unwrap()).unwrap();
        for i in 0..a.u.len() {
            assert!((a.phi[i] - b.phi[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn polylog_values() {
        assert_eq!(cgf_hat_lambda0(0.0).unwrap(), 0.0);
        assert_relative_eq!(cgf_hat_lambda0(0.5).unwrap(), 0.2426, max_relative = 2e-4);
        assert_relative_eq!(cgf_hat_lambda0(f64::INFINITY).unwrap(), 0.736_94, max_relative = 1e-5);
        assert!(cgf_hat_lambda0(-0.1).is_err());
        // Leading terms z + z²/2^{3/2} + z³/3^{3/2}.
        let z = 1e-4;
        assert_relative_eq!(polylog_3_2(z).unwrap().0, z + z * z / 8f64.sqrt() + z.powi(3) / 27f64.sqrt(), max_relative = 1e-11);
        let (_, bound) = polylog_3_2(0.99).unwrap();
        assert!(bound < 1e-12);
    }

    #[test]
    fn cgf_monotone_concave_bounded() {
        let s: Vec<f64> = (1..=10).map(|k| 0.25 * k as f64).collect();
        let v: Vec<f64> = s.iter().map(|&s| cgf_hat_lambda0(s).unwrap()).collect();
        let cap = cgf_hat_lambda0(f64::INFINITY).unwrap();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(v.windows(3).all(|w| w[2] - w[1] < w[1] - w[0]));
        assert!(v.iter().all(|&x| x < cap));
    }
}
