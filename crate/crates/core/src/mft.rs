//! Stationary and comoving weak-noise saddles of the conditioned fluid.
//!
//! Dimensionless problem on the right half-line `z ∈ [0, z_max]`:
//!
//! ```text
//! ρ'' = (σ₀(ρ) π')' − ½[(1−ρ)e^π − ρe^{−π}] − u ρ'
//! π'' = sinh π − ½σ₀'(ρ)(π')² + u π'
//! ρ(0) = 0, π(0) = −s, ρ(∞) = ½, π(∞) = 0,   σ₀(ρ) = 2ρ(1−ρ)
//! ```

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::grid::{interp_uniform, GridSpec};
use crate::kernels::KernelParams;
use crate::{Error, Result};

pub fn default_grid() -> GridSpec {
    GridSpec { max: 14.0, points: 2800 }
}

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub s: f64,
    /// Scaled drift velocity; zero for the stationary problem.
    pub u: f64,
    pub h: f64,
    pub z: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

/// The comoving solution carries its drift in `u`.
pub type ComovingSolution = SaddleSolution;

impl SaddleSolution {
    /// Density profile in physical units, `ρ(x) = ρ̂(x sqrt(γ/D))`, mirrored for x < 0.
    pub fn physical_density(&self, x: f64, d: f64, gamma: f64) -> f64 {
        interp_uniform(&self.rho_hat, self.h, x.abs() * (gamma / d).sqrt())
    }

    pub fn density_at(&self, z: f64) -> f64 {
        interp_uniform(&self.rho_hat, self.h, z)
    }
}

fn sigma(r: f64) -> f64 {
    2.0 * r * (1.0 - r)
}

fn dsigma(r: f64) -> f64 {
    2.0 - 4.0 * r
}

fn h_bath(r: f64, p: f64) -> f64 {
    0.5 * (r * (-p).exp_m1() + (1.0 - r) * p.exp_m1())
}

struct Problem {
    s: f64,
    u: f64,
    h: f64,
    n: usize,
}

impl Problem {
    /// Residuals at interior nodes 1..n-1 (index 0 and n-1 unused).
    fn residual(&self, rho: &[f64], pi: &[f64], out: &mut [Vector2<f64>]) -> f64 {
        let (h, u) = (self.h, self.u);
        let h2 = h * h;
        let mut norm = 0.0f64;
        for i in 1..self.n - 1 {
            let (rm, r0, rp) = (rho[i - 1], rho[i], rho[i + 1]);
            let (pm, p0, pp) = (pi[i - 1], pi[i], pi[i + 1]);
            let sp = sigma(0.5 * (r0 + rp));
            let sm = sigma(0.5 * (rm + r0));
            let flux = (sp * (pp - p0) - sm * (p0 - pm)) / h2;
            let e = p0.exp();
            let r1 = (rp - 2.0 * r0 + rm) / h2 - flux + 0.5 * ((1.0 - r0) * e - r0 / e) + u * (rp - rm) / (2.0 * h);
            let dp = (pp - pm) / (2.0 * h);
            let r2 = (pp - 2.0 * p0 + pm) / h2 - p0.sinh() + 0.5 * dsigma(r0) * dp * dp - u * dp;
            out[i] = Vector2::new(r1, r2);
            norm = norm.max(r1.abs()).max(r2.abs());
        }
        norm
    }

    /// Newton correction from the block-tridiagonal Jacobian (Thomas algorithm).
    fn newton_step(&self, rho: &[f64], pi: &[f64], res: &[Vector2<f64>]) -> Result<Vec<Vector2<f64>>> {
        let (h, u) = (self.h, self.u);
        let h2 = h * h;
        let m = self.n - 2;
        let mut c_prime: Vec<Matrix2<f64>> = Vec::with_capacity(m);
        let mut d_prime: Vec<Vector2<f64>> = Vec::with_capacity(m);
        for k in 0..m {
            let i = k + 1;
            let (rm, r0, rp) = (rho[i - 1], rho[i], rho[i + 1]);
            let (pm, p0, pp) = (pi[i - 1], pi[i], pi[i + 1]);
            let bp = 0.5 * (r0 + rp);
            let bm = 0.5 * (rm + r0);
            let (sp, sm) = (sigma(bp), sigma(bm));
            let (dsp, dsm) = (0.5 * dsigma(bp), 0.5 * dsigma(bm));
            let e = p0.exp();
            let dp = (pp - pm) / (2.0 * h);
            let g = dsigma(r0) * dp - u;

            let a = Matrix2::new(
                1.0 / h2 + dsm * (p0 - pm) / h2 - u / (2.0 * h),
                -sm / h2,
                0.0,
                1.0 / h2 - g / (2.0 * h),
            );
            let b = Matrix2::new(
                -2.0 / h2 - (dsp * (pp - p0) - dsm * (p0 - pm)) / h2 - 0.5 * (e + 1.0 / e),
                (sp + sm) / h2 + 0.5 * ((1.0 - r0) * e + r0 / e),
                -2.0 * dp * dp,
                -2.0 / h2 - p0.cosh(),
            );
            let c = Matrix2::new(
                1.0 / h2 - dsp * (pp - p0) / h2 + u / (2.0 * h),
                -sp / h2,
                0.0,
                1.0 / h2 + g / (2.0 * h),
            );
            let (bb, dd) = if k == 0 {
                (b, res[i])
            } else {
                (b - a * c_prime[k - 1], res[i] - a * d_prime[k - 1])
            };
            let inv = bb
                .try_inverse()
                .ok_or_else(|| Error::numerical("singular block in saddle Jacobian", f64::NAN))?;
            c_prime.push(inv * c);
            d_prime.push(inv * dd);
        }
        let mut x = vec![Vector2::zeros(); m];
        x[m - 1] = d_prime[m - 1];
        for k in (0..m - 1).rev() {
            x[k] = d_prime[k] - c_prime[k] * x[k + 1];
        }
        Ok(x)
    }

    fn solve(&self, rho: &mut [f64], pi: &mut [f64]) -> Result<(f64, usize)> {
        let mut res = vec![Vector2::zeros(); self.n];
        let mut norm = self.residual(rho, pi, &mut res);
        let mut trial_res = res.clone();
        for it in 0..MAX_NEWTON {
            if norm < RESIDUAL_TOL {
                return Ok((norm, it));
            }
            let dx = self.newton_step(rho, pi, &res)?;
            let mut lambda = 1.0;
            let (mut tr, mut tp) = (rho.to_vec(), pi.to_vec());
            loop {
                for k in 0..dx.len() {
                    tr[k + 1] = rho[k + 1] - lambda * dx[k][0];
                    tp[k + 1] = pi[k + 1] - lambda * dx[k][1];
                }
                let tn = self.residual(&tr, &tp, &mut trial_res);
                if tn.is_finite() && (tn < norm || lambda < 1e-3) {
                    rho.copy_from_slice(&tr);
                    pi.copy_from_slice(&tp);
                    std::mem::swap(&mut res, &mut trial_res);
                    norm = tn;
                    break;
                }
                lambda *= 0.5;
            }
            if lambda < 1e-3 && norm > 1.0e3 {
                break;
            }
        }
        if norm < RESIDUAL_TOL {
            Ok((norm, MAX_NEWTON))
        } else {
            Err(Error::numerical(format!("Newton did not converge (s = {}, u = {})", self.s, self.u), norm))
        }
    }
}

fn check_grid(grid: &GridSpec) -> Result<()> {
    if grid.max < 12.0 {
        return Err(Error::domain("saddle grid must span z_max >= 12"));
    }
    Ok(())
}

fn initial_guess(z: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
    let rho = z.iter().map(|&z| 0.5 * (1.0 - (-z).exp())).collect::<Vec<_>>();
    let mut pi = z.iter().map(|&z| -s * (-z).exp()).collect::<Vec<_>>();
    *pi.last_mut().unwrap() = 0.0;
    let mut rho = rho;
    *rho.last_mut().unwrap() = 0.5;
    (rho, pi)
}

fn solve_from(s: f64, u: f64, grid: &GridSpec, mut rho: Vec<f64>, mut pi: Vec<f64>) -> Result<SaddleSolution> {
    let z = grid.nodes();
    rho[0] = 0.0;
    pi[0] = -s;
    *rho.last_mut().unwrap() = 0.5;
    *pi.last_mut().unwrap() = 0.0;
    let prob = Problem { s, u, h: grid.step(), n: z.len() };
    let (residual_norm, newton_iterations) = prob.solve(&mut rho, &mut pi)?;
    Ok(SaddleSolution { s, u, h: grid.step(), z, rho_hat: rho, pi_hat: pi, residual_norm, newton_iterations })
}

/// Solve the stationary void saddle at tilt `s`.
pub fn solve_stationary_void(s: f64, grid: GridSpec) -> Result<SaddleSolution> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("stationary saddle needs finite s > 0, got {s}")));
    }
    check_grid(&grid)?;
    let z = grid.nodes();
    let (rho, pi) = initial_guess(&z, s);
    match solve_from(s, 0.0, &grid, rho, pi) {
        Ok(sol) => Ok(sol),
        Err(_) => {
            // Continuation in s from small tilt.
            let mut sc = 0.05f64.min(s);
            let (rho, pi) = initial_guess(&z, sc);
            let mut sol = solve_from(sc, 0.0, &grid, rho, pi)?;
            while sc < s {
                sc = (sc + 0.05).min(s);
                sol = solve_from(sc, 0.0, &grid, sol.rho_hat, sol.pi_hat)?;
            }
            Ok(sol)
        }
    }
}

/// Slowest far-field decay rate of the drifted linearization.
fn slow_decay(u: f64) -> f64 {
    0.5 * ((u * u + 4.0).sqrt() - u.abs())
}

/// Grid for drift `u`: same spacing, domain long enough for the slow tail.
pub fn comoving_grid(u: f64, grid: &GridSpec) -> GridSpec {
    let need = grid.max / slow_decay(u);
    if need <= grid.max {
        return *grid;
    }
    let h = grid.step();
    let intervals = (need / h).ceil() as usize;
    GridSpec { max: intervals as f64 * h, points: intervals + 1 }
}

/// Solve the drifted saddle at scaled velocity `u`, by continuation from u = 0.
pub fn solve_comoving_void(s: f64, u: f64, grid: GridSpec) -> Result<ComovingSolution> {
    if !(u.abs() <= 2.0) {
        return Err(Error::domain(format!("|u| must be <= 2, got {u}")));
    }
    let base = solve_stationary_void(s, grid)?;
    if u == 0.0 {
        return Ok(base);
    }
    let target = comoving_grid(u, &grid);
    let extend = |v: &[f64], fill: f64| {
        let mut out = v.to_vec();
        out.resize(target.points, fill);
        out
    };
    let mut rho = extend(&base.rho_hat, 0.5);
    let mut pi = extend(&base.pi_hat, 0.0);
    let steps = ((u.abs() / 0.1).ceil() as usize).max(1);
    let mut last_ok = 0.0;
    let mut sol = None;
    for k in 1..=steps {
        let uk = u * k as f64 / steps as f64;
        match solve_from(s, uk, &target, rho.clone(), pi.clone()) {
            Ok(next) => {
                rho = next.rho_hat.clone();
                pi = next.pi_hat.clone();
                last_ok = uk;
                sol = Some(next);
            }
            Err(e) => {
                let res = if let Error::Numerical { residual, .. } = e { residual } else { f64::NAN };
                return Err(Error::numerical(format!("comoving continuation failed; last converged u = {last_ok}"), res));
            }
        }
    }
    Ok(sol.expect("at least one continuation step"))
}

/// Cell-midpoint quadrature of the comoving functional.
fn functional(sol: &SaddleSolution, u: f64) -> f64 {
    let h = sol.h;
    let (r, p) = (&sol.rho_hat, &sol.pi_hat);
    let mut acc = 0.0;
    for i in 0..r.len() - 1 {
        let dr = (r[i + 1] - r[i]) / h;
        let dp = (p[i + 1] - p[i]) / h;
        let rm = 0.5 * (r[i] + r[i + 1]);
        let pm = 0.5 * (p[i] + p[i + 1]);
        acc += dp * dr - 0.5 * sigma(rm) * dp * dp - h_bath(rm, pm) - u * pm * dr;
    }
    acc * h
}

/// Dimensionless half-line rate `Λ̂(s)`.
pub fn rate_hat_lambda(sol: &SaddleSolution) -> f64 {
    functional(sol, 0.0)
}

/// Comoving functional `Φ(u)` evaluated on its own saddle.
pub fn rate_phi(sol: &ComovingSolution) -> f64 {
    functional(sol, sol.u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureFit {
    pub s: f64,
    pub a: f64,
    pub quartic: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Fit `Φ(u)+Φ(−u)−2Φ(0) = 2a u² + c u⁴` over the given velocities.
pub fn fit_curvature(s: f64, us: &[f64], grid: GridSpec) -> Result<CurvatureFit> {
    if us.len() < 2 {
        return Err(Error::domain("need at least two velocities"));
    }
    let phi0 = rate_phi(&solve_stationary_void(s, grid)?);
    let mut samples = Vec::new();
    for &u in us {
        let plus = rate_phi(&solve_comoving_void(s, u, grid)?);
        let minus = rate_phi(&solve_comoving_void(s, -u, grid)?);
        samples.push((u, plus + minus - 2.0 * phi0));
    }
    // Least squares for y = A u² + B u⁴.
    let (mut s22, mut s24, mut s44, mut y2, mut y4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(u, y) in &samples {
        let (u2, u4) = (u * u, u.powi(4));
        s22 += u2 * u2;
        s24 += u2 * u4;
        s44 += u4 * u4;
        y2 += y * u2;
        y4 += y * u4;
    }
    let det = s22 * s44 - s24 * s24;
    let aa = (y2 * s44 - y4 * s24) / det;
    let bb = (s22 * y4 - s24 * y2) / det;
    Ok(CurvatureFit { s, a: 0.5 * aa, quartic: bb, samples })
}

/// Dressed diffusivity from the comoving curvature `a(s)`.
///
/// Both replicas contribute a pair of fluid half-lines, so the fluid part of
/// `I(v)` is `2 sqrt(Dγ)(Φ(u)+Φ(−u)−2Φ(0))` and
/// `D_eff = sqrt(Dγ) D / (sqrt(Dγ) + 16 a D)`.
pub fn deff_from_curvature(a: f64, p: &KernelParams) -> f64 {
    let sg = (p.d * p.gamma).sqrt();
    sg * p.d / (sg + 16.0 * a * p.d)
}

/// Same as [`deff_from_curvature`] but with a single fluid copy
/// (`sqrt(Dγ) D / (sqrt(Dγ) + 8 a D)`).
pub fn deff_from_curvature_single_copy(a: f64, p: &KernelParams) -> f64 {
    let sg = (p.d * p.gamma).sqrt();
    sg * p.d / (sg + 8.0 * a * p.d)
}

/// Least-squares slope of `log|f|` over `z ∈ [lo, hi]`.
pub fn decay_rate(z: &[f64], f: &[f64], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = z
        .iter()
        .zip(f)
        .filter(|(z, v)| **z >= lo && **z <= hi && v.abs() > 0.0)
        .map(|(z, v)| (*z, v.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_tilt() {
        assert!(solve_stationary_void(0.0, default_grid()).is_err());
        assert!(solve_stationary_void(0.5, GridSpec { max: 8.0, points: 1000 }).is_err());
    }

    #[test]
    fn stationary_solution_properties() {
        let sol = solve_stationary_void(0.5, default_grid()).unwrap();
        assert!(sol.residual_norm < 1e-9);
        assert_eq!(sol.rho_hat[0], 0.0);
        assert_eq!(sol.pi_hat[0], -0.5);
        assert!(sol.rho_hat.windows(2).all(|w| w[1] >= w[0]));
        let drho: Vec<f64> = sol.rho_hat.iter().map(|r| r - 0.5).collect();
        let k_rho = decay_rate(&sol.z, &drho, 6.0, 10.0);
        let k_pi = decay_rate(&sol.z, &sol.pi_hat, 6.0, 10.0);
        assert!((k_rho - 1.0).abs() < 0.05, "rho decay {k_rho}");
        assert!((k_pi - 1.0).abs() < 0.05, "pi decay {k_pi}");
    }

    #[test]
    fn small_tilt_linear_response() {
        // To first order in s the cost is s/2.
        let l = rate_hat_lambda(&solve_stationary_void(0.02, default_grid()).unwrap());
        assert!((l / 0.01 - 1.0).abs() < 0.02, "{l}");
        let l5 = rate_hat_lambda(&solve_stationary_void(0.05, default_grid()).unwrap());
        assert!(l5 > l && l > 0.0);
    }

    #[test]
    fn rate_increases_with_tilt() {
        let v: Vec<f64> = [0.1, 0.325, 0.55, 0.775, 1.0]
            .iter()
            .map(|&s| rate_hat_lambda(&solve_stationary_void(s, default_grid()).unwrap()))
            .collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    }

    #[test]
    fn grid_refinement() {
        let a = rate_hat_lambda(&solve_stationary_void(0.5, default_grid()).unwrap());
        let g = GridSpec { max: 14.0, points: 5600 };
        let b = rate_hat_lambda(&solve_stationary_void(0.5, g).unwrap());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn comoving_reduces_at_zero_drift() {
        let a = solve_stationary_void(0.5, default_grid()).unwrap();
        let b = solve_comoving_void(0.5, 0.0, default_grid()).unwrap();
        for (x, y) in a.rho_hat.iter().zip(&b.rho_hat) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((rate_phi(&b) - rate_hat_lambda(&a)).abs() < 1e-14);
    }

    #[test]
    fn comoving_even_part_nonnegative() {
        let g = default_grid();
        let phi0 = rate_phi(&solve_comoving_void(0.5, 0.0, g).unwrap());
        for u in [0.2, 0.5, 1.0] {
            let p = rate_phi(&solve_comoving_void(0.5, u, g).unwrap());
            let m = rate_phi(&solve_comoving_void(0.5, -u, g).unwrap());
            assert!(p.is_finite() && m.is_finite());
            assert!(p + m - 2.0 * phi0 >= 0.0, "u={u}: {}", p + m - 2.0 * phi0);
        }
    }

    #[test]
    fn comoving_continuity() {
        // Φ carries a linear-in-u term, so steps are near-uniform; a jump would
        // show up as a large second difference.
        let g = default_grid();
        let phi: Vec<f64> = (0..=10).map(|k| rate_phi(&solve_comoving_void(0.5, 0.1 * k as f64, g).unwrap())).collect();
        let steps: Vec<f64> = phi.windows(2).map(|w| w[1] - w[0]).collect();
        for (k, w) in phi.windows(2).enumerate() {
            assert!(((w[1] - w[0]) / w[0]).abs() < 0.06, "step {k}");
        }
        for w in steps.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.1 * w[0].abs());
        }
    }
}
