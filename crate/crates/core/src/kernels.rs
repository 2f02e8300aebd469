//! Diffusion kernels and the Volterra closure for the coherence filtering rate.

use serde::{Deserialize, Serialize};
use libm::erf;
use std::f64::consts::PI;

use crate::quad;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Bare diffusivity.
    pub d: f64,
    /// Noise (bath) rate.
    pub gamma: f64,
    /// Tilt strength.
    pub s: f64,
}

impl KernelParams {
    pub fn new(d: f64, gamma: f64, s: f64) -> Result<Self> {
        let p = Self { d, gamma, s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !(self.gamma >= 0.0) || !(self.s >= 0.0) {
            return Err(Error::domain(format!("invalid kernel params {self:?}")));
        }
        Ok(())
    }

    /// Pinned stationary rate `e^{-s} sqrt(D gamma)`.
    pub fn r0(&self) -> f64 {
        (-self.s).exp() * (self.d * self.gamma).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub positions: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, positions: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || positions.len() < 2 || positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("trajectory needs dt > 0 and at least two finite points"));
        }
        Ok(Self { dt, positions })
    }

    pub fn pinned(dt: f64, t_max: f64) -> Self {
        let n = (t_max / dt).round() as usize;
        Self { dt, positions: vec![0.0; n + 1] }
    }

    pub fn constant_velocity(v: f64, dt: f64, t_max: f64) -> Self {
        let n = (t_max / dt).round() as usize;
        Self { dt, positions: (0..=n).map(|i| v * i as f64 * dt).collect() }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.positions.len()).map(|i| i as f64 * self.dt).collect()
    }

    pub fn duration(&self) -> f64 {
        (self.positions.len() - 1) as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateHistory {
    pub times: Vec<f64>,
    pub rates: Vec<f64>,
}

impl RateHistory {
    /// Integral of r over the run, consistent with the piecewise-constant rule.
    pub fn integral(&self) -> f64 {
        let dt = self.times[1] - self.times[0];
        self.rates[1..].iter().sum::<f64>() * dt
    }
}

/// Screened heat kernel `e^{-γτ} exp(-dx²/4Dτ) / sqrt(4πDτ)`.
pub fn kernel_screened(dx: f64, tau: f64, p: &KernelParams) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("kernel needs tau > 0, got {tau}")));
    }
    Ok((-p.gamma * tau).exp() / (4.0 * PI * p.d * tau).sqrt() * (-dx * dx / (4.0 * p.d * tau)).exp())
}

/// Exact integral of `e^{-γu}/sqrt(4πDu)` over `[a, b]`.
fn kernel_mass(a: f64, b: f64, p: &KernelParams) -> f64 {
    if p.gamma == 0.0 {
        (b.sqrt() - a.sqrt()) / (PI * p.d).sqrt()
    } else {
        let g = p.gamma;
        (erf((g * b).sqrt()) - erf((g * a).sqrt())) / (2.0 * (p.d * g).sqrt())
    }
}

/// Solve `∫_0^t G(X(t)-X(τ), t-τ) r(τ) dτ = e^{-s}/2` by product integration.
///
/// `r` is piecewise constant on each step; `rates[n]` is the value on
/// `(t_{n-1}, t_n]` and `rates[0]` copies the first step.
pub fn solve_rate_history(traj: &Trajectory, p: &KernelParams) -> Result<RateHistory> {
    p.validate()?;
    let dt = traj.dt;
    let x = &traj.positions;
    let n_steps = x.len() - 1;
    let rhs = 0.5 * (-p.s).exp();

    // Kernel masses depend only on the lag index.
    let mass: Vec<f64> = (0..n_steps)
        .map(|k| kernel_mass(k as f64 * dt, (k + 1) as f64 * dt, p))
        .collect();
    let mid: Vec<f64> = (0..n_steps).map(|j| 0.5 * (x[j] + x[j + 1])).collect();
    let denom = 4.0 * p.d;

    let mut r = vec![0.0; n_steps + 1];
    let mut scale = 0.0f64;
    for n in 1..=n_steps {
        let xn = x[n];
        let mut acc = 0.0;
        for j in 1..n {
            let lag = n - j;
            let u_mid = (lag as f64 + 0.5) * dt;
            let dx = xn - mid[j - 1];
            acc += mass[lag] * (-dx * dx / (denom * u_mid)).exp() * r[j];
        }
        let dx = xn - mid[n - 1];
        let w = mass[0] * (-dx * dx / (denom * 0.5 * dt)).exp();
        let rn = (rhs - acc) / w;
        if n == 1 {
            scale = rn.abs().max(p.r0());
        }
        if !rn.is_finite() || rn.abs() > 1e3 * scale {
            return Err(Error::numerical(
                format!("rate growth at step {n} exceeds 1e3 x reference"),
                rn.abs(),
            ));
        }
        r[n] = rn;
    }
    r[0] = r[1];
    Ok(RateHistory { times: traj.times(), rates: r })
}

/// Stationary rate for a coherence moving at constant velocity.
pub fn rate_constant_velocity(v: f64, p: &KernelParams) -> Result<f64> {
    p.validate()?;
    if p.gamma == 0.0 && v == 0.0 {
        return Err(Error::domain("no stationary rate at gamma = 0, v = 0"));
    }
    Ok((-p.s).exp() * (p.d * p.gamma + 0.25 * v * v).sqrt())
}

/// Kinetic part of the coherence action, `∫ Ẋ²/(4D) dt`.
pub fn kinetic_action(traj: &Trajectory, d: f64) -> f64 {
    traj.positions
        .windows(2)
        .map(|w| (w[1] - w[0]).powi(2))
        .sum::<f64>()
        / (4.0 * d * traj.dt)
}

/// Effective coherence action `S_X + 2(e^s - 1) ∫ r dt`.
pub fn action_eff(traj: &Trajectory, p: &KernelParams) -> Result<f64> {
    let hist = solve_rate_history(traj, p)?;
    Ok(kinetic_action(traj, p.d) + 2.0 * p.s.exp_m1() * hist.integral())
}

/// Large-deviation cost per unit time of steady motion, relative to v = 0.
pub fn velocity_cost(v: f64, p: &KernelParams) -> Result<f64> {
    let rv = rate_constant_velocity(v, p)?;
    let r0 = rate_constant_velocity(0.0, p)?;
    Ok(v * v / (4.0 * p.d) + 2.0 * p.s.exp_m1() * (rv - r0))
}

/// Dressed diffusivity `(1/D + (1 - e^{-s})/sqrt(Dγ))^{-1}`.
pub fn deff_weak_noise(p: &KernelParams) -> Result<f64> {
    p.validate()?;
    if !(p.gamma > 0.0) {
        return Err(Error::domain("deff needs gamma > 0"));
    }
    Ok(1.0 / (1.0 / p.d + (-(-p.s).exp_m1()) / (p.d * p.gamma).sqrt()))
}

/// Annealed kernel at zero displacement, averaged over Gaussian increments
/// with variance `Σ(u) = 2 deff u + 2ℓ²(1 - e^{-Du/ℓ²})`.
pub fn annealed_kernel(u: f64, ell: f64, deff: f64, p: &KernelParams) -> f64 {
    let sigma = increment_variance(u, ell, deff, p.d);
    (-p.gamma * u).exp() / (4.0 * PI * p.d * u).sqrt() / (1.0 + sigma / (2.0 * p.d * u)).sqrt()
}

fn increment_variance(u: f64, ell: f64, deff: f64, d: f64) -> f64 {
    let bound = if ell > 0.0 { -2.0 * ell * ell * (-d * u / (ell * ell)).exp_m1() } else { 0.0 };
    2.0 * deff * u + bound
}

/// Time integral of a kernel of the form `e^{-γu} u^{-1/2} g(u)` over `(0, ∞)`,
/// split at `1/γ` with `u = w²` on the inner piece.
fn integrate_singular<F: Fn(f64) -> f64>(k: F, gamma: f64) -> Result<f64> {
    let split = 1.0 / gamma;
    let tol = 1e-13;
    let inner = quad::integrate(|w| 2.0 * w * k(w * w), 0.0, split.sqrt(), tol)?;
    let outer = quad::integrate_to_inf(&k, split, tol)?;
    Ok(inner + outer)
}

/// `∫_0^∞ G_γ(0, u) du` by quadrature (equals `1/(2 sqrt(Dγ))`).
pub fn pinned_kernel_integral(p: &KernelParams) -> Result<f64> {
    if !(p.gamma > 0.0) {
        return Err(Error::domain("pinned integral diverges at gamma = 0"));
    }
    integrate_singular(|u| kernel_screened(0.0, u, p).unwrap_or(0.0), p.gamma)
}

/// Time-translation-invariant annealed rate `e^{-s} / (2 ∫ Ḡ)`.
pub fn annealed_rate(ell: f64, p: &KernelParams, deff: f64) -> Result<f64> {
    p.validate()?;
    if !(ell >= 0.0) || !(p.gamma > 0.0) || !(deff >= 0.0) {
        return Err(Error::domain("annealed rate needs ell >= 0, deff >= 0, gamma > 0"));
    }
    if ell == 0.0 && deff == 0.0 {
        // Kernel reduces to the pinned one; use the exact mass.
        return rate_constant_velocity(0.0, p);
    }
    let total = integrate_singular(|u| annealed_kernel(u, ell, deff, p), p.gamma)?;
    Ok(0.5 * (-p.s).exp() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(gamma: f64, s: f64) -> KernelParams {
        KernelParams::new(1.0, gamma, s).unwrap()
    }

    #[test]
    fn kernel_values() {
        let a = 1.0 / (4.0 * PI).sqrt();
        assert_relative_eq!(kernel_screened(0.0, 1.0, &p(0.0, 0.0)).unwrap(), a, max_relative = 1e-14);
        assert_relative_eq!(kernel_screened(0.0, 1.0, &p(0.04, 0.0)).unwrap(), 0.271_033, max_relative = 1e-5);
        assert_relative_eq!(kernel_screened(2.0, 1.0, &p(0.0, 0.0)).unwrap(), 0.103_777, max_relative = 1e-5);
        assert!(kernel_screened(0.0, 0.0, &p(0.0, 0.0)).is_err());
    }

    #[test]
    fn kernel_mass_matches_quadrature() {
        let q = p(0.3, 0.0);
        let exact = kernel_mass(0.2, 1.7, &q);
        let num = quad::integrate(|u| kernel_screened(0.0, u, &q).unwrap(), 0.2, 1.7, 1e-14).unwrap();
        assert_relative_eq!(exact, num, max_relative = 1e-12);
    }

    #[test]
    fn pinned_identity() {
        let q = p(0.04, 0.5);
        assert_relative_eq!(pinned_kernel_integral(&q).unwrap(), 1.0 / (2.0 * 0.2), max_relative = 1e-10);
    }

    #[test]
    fn constant_velocity_closed_form() {
        assert_relative_eq!(rate_constant_velocity(0.0, &p(0.04, 0.5)).unwrap(), 0.121_306_1, max_relative = 1e-6);
        assert_relative_eq!(rate_constant_velocity(0.2, &p(0.04, 0.5)).unwrap(), 0.135_624_4, max_relative = 1e-6);
        assert_relative_eq!(rate_constant_velocity(0.0, &p(1.0, 0.0)).unwrap(), 1.0);
        assert!(rate_constant_velocity(0.0, &p(0.0, 0.5)).is_err());
    }

    #[test]
    fn deff_closed_form() {
        assert_relative_eq!(deff_weak_noise(&p(0.04, 0.5)).unwrap(), 0.337_003, max_relative = 1e-5);
        assert_relative_eq!(deff_weak_noise(&p(0.01, 0.5)).unwrap(), 0.202_647, max_relative = 1e-5);
        assert_eq!(deff_weak_noise(&p(0.3, 0.0)).unwrap(), 1.0);
        assert!(deff_weak_noise(&p(0.0, 0.5)).is_err());
    }

    #[test]
    fn deff_is_velocity_curvature() {
        let q = p(0.04, 0.5);
        let h = 1e-3;
        let c2 = (velocity_cost(h, &q).unwrap() + velocity_cost(-h, &q).unwrap()) / (h * h);
        let c2b = (velocity_cost(2.0 * h, &q).unwrap() + velocity_cost(-2.0 * h, &q).unwrap()) / (4.0 * h * h);
        let curv = (4.0 * c2 - c2b) / 3.0;
        assert_relative_eq!(curv, 1.0 / (2.0 * deff_weak_noise(&q).unwrap()), max_relative = 1e-6);
    }

    #[test]
    fn pinned_screened_rate_converges() {
        let q = p(0.04, 0.5);
        let h = solve_rate_history(&Trajectory::pinned(0.05, 200.0), &q).unwrap();
        assert_relative_eq!(*h.rates.last().unwrap(), q.r0(), max_relative = 1e-3);
    }

    #[test]
    fn pinned_noiseless_rate() {
        // r(t) = e^{-s} sqrt(D/(π t)); first-order convergence at t = 1.
        let q = p(0.0, 0.5);
        let exact = (-0.5f64).exp() / PI.sqrt();
        let err = |dt: f64| {
            let h = solve_rate_history(&Trajectory::pinned(dt, 1.0), &q).unwrap();
            (h.rates.last().unwrap() - exact).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e2 < 0.01 * exact);
        assert!(e1 / e2 > 1.7 && e1 / e2 < 2.3, "ratio {}", e1 / e2);
        assert_relative_eq!(exact, 0.342_209, max_relative = 1e-4);
    }

    #[test]
    fn untilted_pinned_rate() {
        let q = p(0.04, 0.0);
        let h = solve_rate_history(&Trajectory::pinned(0.05, 300.0), &q).unwrap();
        assert_relative_eq!(*h.rates.last().unwrap(), 0.2, max_relative = 1e-3);
    }

    #[test]
    fn zero_action_without_tilt() {
        assert_eq!(action_eff(&Trajectory::pinned(0.05, 10.0), &p(0.04, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn annealed_pinned_limit() {
        let q = p(0.04, 0.5);
        assert_relative_eq!(annealed_rate(0.0, &q, 0.0).unwrap(), rate_constant_velocity(0.0, &q).unwrap(), max_relative = 1e-12);
        // Same result through the quadrature path with a vanishing excursion.
        assert_relative_eq!(annealed_rate(1e-9, &q, 0.0).unwrap(), q.r0(), max_relative = 1e-8);
    }

    #[test]
    fn annealed_monotone_and_bounded() {
        let q = p(0.04, 0.5);
        let mut prev = q.r0();
        for ell in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0] {
            let r = annealed_rate(ell, &q, 0.0).unwrap();
            assert!(r > prev && r.is_finite());
            assert!(r < q.r0() * 2f64.sqrt());
            prev = r;
        }
    }
}
