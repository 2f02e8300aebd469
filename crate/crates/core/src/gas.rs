//! Ballistic point gas with velocity-randomizing collisions.
//!
//! Particles on a ring move at constant velocity in `[-1, 1]`. When two
//! neighbours cross during a step they are treated as having collided: the
//! ordering is kept and both velocities are redrawn. A weak bath injects
//! particles uniformly at rate `γ/2` per unit length and removes each one at
//! rate `γ`, so the untilted density relaxes to `1/2`. A coherence at the
//! origin is killed at rate `λ` per particle inside the window `(-a/2, a/2)`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cloning::{run_population, PopulationConfig, Process, QssEstimate};
use crate::rng::{uniform, StreamRng};
use crate::{Error, Result};

/// Integrator step.
pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub l: f64,
    /// Sorted positions in `[0, L)`.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    /// Collisions resolved so far.
    pub collisions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub lambda: f64,
    pub a: f64,
    pub gamma: f64,
}

impl TiltParams {
    pub fn new(lambda: f64, a: f64, gamma: f64) -> Result<Self> {
        let p = Self { lambda, a, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.a > 0.0 && self.gamma >= 0.0) {
            return Err(Error::domain("tilt needs lambda >= 0, a > 0, gamma >= 0"));
        }
        Ok(())
    }
}

fn velocity(rng: &mut StreamRng) -> f64 {
    2.0 * uniform(rng) - 1.0
}

impl GasState {
    pub fn new(l: f64, mut particles: Vec<(f64, f64)>) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::domain("ring length must be positive"));
        }
        if particles.iter().any(|&(x, v)| !(0.0..l).contains(&x) || v.abs() > 1.0) {
            return Err(Error::domain("particles need 0 <= x < L and |v| <= 1"));
        }
        particles.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, v) = particles.into_iter().unzip();
        Ok(Self { l, x, v, t: 0.0, collisions: 0 })
    }

    /// Poisson configuration at density `1/2`, the bath fixed point.
    pub fn equilibrium(l: f64, rng: &mut StreamRng) -> Result<Self> {
        let n = Poisson::new(0.5 * l).map_err(|e| Error::domain(e.to_string()))?.sample(rng) as usize;
        let parts = (0..n).map(|_| (l * uniform(rng), velocity(rng))).collect();
        Self::new(l, parts)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn insert(&mut self, x: f64, v: f64) {
        let i = self.x.partition_point(|&y| y < x);
        self.x.insert(i, x);
        self.v.insert(i, v);
    }

    /// Particles with position in `(lo, hi)` taken modulo `L`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        if hi - lo >= self.l {
            return self.len();
        }
        let lo = lo.rem_euclid(self.l);
        let hi = hi.rem_euclid(self.l);
        let below = |b: f64| self.x.partition_point(|&y| y <= b);
        let above = |b: f64| self.x.partition_point(|&y| y < b);
        if lo < hi {
            above(hi) - below(lo)
        } else {
            (self.len() - below(lo)) + above(hi)
        }
    }
}

/// Ballistic drift, collision resolution and bath events over one step.
pub fn evolve_gas(state: &mut GasState, dt: f64, gamma: f64, rng: &mut StreamRng) {
    let n = state.len();
    let l = state.l;
    for (x, v) in state.x.iter_mut().zip(&state.v) {
        *x += v * dt;
    }
    // Sweep left to right until the order is restored; each swap is one
    // collision and redraws both partners.
    if n >= 2 {
        let mut dirty = true;
        while dirty {
            dirty = false;
            for i in 0..n - 1 {
                if state.x[i] > state.x[i + 1] {
                    state.x.swap(i, i + 1);
                    state.v[i] = velocity(rng);
                    state.v[i + 1] = velocity(rng);
                    state.collisions += 1;
                    dirty = true;
                }
            }
            if state.x[n - 1] > state.x[0] + l {
                let last = state.x[n - 1];
                state.x[n - 1] = state.x[0] + l;
                state.x[0] = last - l;
                state.v[0] = velocity(rng);
                state.v[n - 1] = velocity(rng);
                state.collisions += 1;
                dirty = true;
            }
        }
    }
    // Wrap into [0, L) by rotation, which keeps the cyclic order.
    let over = state.x.iter().rev().take_while(|&&x| x >= l).count();
    if over > 0 {
        state.x.rotate_right(over);
        state.v.rotate_right(over);
        state.x[..over].iter_mut().for_each(|x| *x -= l);
    }
    let under = state.x.iter().take_while(|&&x| x < 0.0).count();
    if under > 0 {
        state.x.rotate_left(under);
        state.v.rotate_left(under);
        state.x[n - under..].iter_mut().for_each(|x| *x += l);
    }
    for x in state.x.iter_mut() {
        // Guards the rare x == L after adding L to a tiny negative value.
        if *x >= l {
            *x -= l;
        }
    }
    if gamma > 0.0 {
        let p_remove = -(-gamma * dt).exp_m1();
        let mut k = 0;
        while k < state.x.len() {
            if uniform(rng) < p_remove {
                state.x.remove(k);
                state.v.remove(k);
            } else {
                k += 1;
            }
        }
        let mean = 0.5 * gamma * l * dt;
        let injected = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
        for _ in 0..injected {
            let x = l * uniform(rng);
            let v = velocity(rng);
            state.insert(x, v);
        }
    }
    state.t += dt;
}

/// Log weight `-λ dt n` with `n` the occupation of `(-a/2, a/2)` mod `L`.
pub fn tilt_weight(state: &GasState, dt: f64, p: &TiltParams) -> f64 {
    if p.lambda == 0.0 {
        return 0.0;
    }
    -p.lambda * dt * state.count_in(-0.5 * p.a, 0.5 * p.a) as f64
}

/// Tilted gas seen by the cloning driver. One barrier spans
/// `substeps` integrator steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasProcess {
    pub l: f64,
    pub tilt: TiltParams,
    pub dt: f64,
    pub substeps: usize,
}

impl GasProcess {
    pub fn new(l: f64, tilt: TiltParams, dt: f64, substeps: usize) -> Result<Self> {
        tilt.validate()?;
        if !(l > tilt.a && dt > 0.0 && substeps > 0) {
            return Err(Error::domain("gas process needs L > a, dt > 0 and substeps > 0"));
        }
        if dt > 0.5 {
            return Err(Error::domain("dt must resolve collisions (dt <= 0.5)"));
        }
        Ok(Self { l, tilt, dt, substeps })
    }
}

impl Process for GasProcess {
    type State = GasState;

    fn dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    fn init(&self, rng: &mut StreamRng) -> GasState {
        // Construction cannot fail for a validated process.
        GasState::equilibrium(self.l, rng).expect("validated ring length")
    }

    fn step(&self, state: &mut GasState, rng: &mut StreamRng) -> f64 {
        let mut logw = 0.0;
        for _ in 0..self.substeps {
            evolve_gas(state, self.dt, self.tilt.gamma, rng);
            logw += tilt_weight(state, self.dt, &self.tilt);
        }
        logw
    }
}

/// Settings for a quasi-stationary rate measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasRun {
    pub l: f64,
    pub clones: usize,
    /// Total simulated time.
    pub t_max: f64,
    /// Plateau window as fractions of `t_max`.
    pub window_frac: (f64, f64),
    pub dt: f64,
    /// Barrier interval.
    pub barrier: f64,
    pub seed: u64,
}

impl GasRun {
    pub fn reduced(seed: u64) -> Self {
        Self { l: 120.0, clones: 2000, t_max: 1200.0, window_frac: (0.5, 1.0), dt: DEFAULT_DT, barrier: 1.0, seed }
    }
}

/// Quasi-stationary decay rate of the tilted gas.
pub fn qss_rate_gas(p: &TiltParams, run: &GasRun) -> Result<QssEstimate> {
    let substeps = (run.barrier / run.dt).round().max(1.0) as usize;
    let proc = GasProcess::new(run.l, *p, run.dt, substeps)?;
    let bt = proc.dt();
    let steps = (run.t_max / bt).round() as usize;
    let t_end = steps as f64 * bt;
    let cfg = PopulationConfig {
        clones: run.clones,
        steps,
        burn_in: t_end,
        window: (run.window_frac.0 * t_end, run.window_frac.1 * t_end),
        seed: run.seed,
        bootstrap: 200,
    };
    run_population(&proc, &cfg, |_, _| {})
}

/// Random occupation count, exposed for property tests of the bath.
pub fn random_gas(l: f64, n: usize, rng: &mut StreamRng) -> Result<GasState> {
    let parts = (0..n).map(|_| (rng.random_range(0.0..l), velocity(rng))).collect();
    GasState::new(l, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn single_particle_moves_ballistically() {
        let mut s = GasState::new(10.0, vec![(9.0, 0.7)]).unwrap();
        let mut rng = stream(1, 0, 0);
        for _ in 0..100 {
            evolve_gas(&mut s, 0.05, 0.0, &mut rng);
        }
        let expect = (9.0 + 0.7 * 5.0_f64).rem_euclid(10.0);
        assert!((s.x[0] - expect).abs() < 1e-12);
        assert_eq!(s.v[0], 0.7);
    }

    #[test]
    fn approaching_pair_collides_once() {
        let mut s = GasState::new(100.0, vec![(10.0, 1.0), (10.1, -1.0)]).unwrap();
        let mut rng = stream(2, 0, 0);
        evolve_gas(&mut s, 0.1, 0.0, &mut rng);
        assert_eq!(s.collisions, 1);
        assert!(s.v[0] != 1.0 && s.v[1] != -1.0);
        assert!(s.x[0] <= s.x[1]);
    }

    #[test]
    fn collision_across_the_seam() {
        let mut s = GasState::new(10.0, vec![(0.02, -1.0), (9.98, 1.0)]).unwrap();
        let mut rng = stream(3, 0, 0);
        evolve_gas(&mut s, 0.05, 0.0, &mut rng);
        assert_eq!(s.collisions, 1);
        assert!(s.x.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.x.iter().all(|&x| (0.0..10.0).contains(&x)));
    }

    #[test]
    fn tilt_examples() {
        let p = TiltParams::new(0.5, 1.0, 0.0).unwrap();
        let empty = GasState::new(10.0, vec![(3.0, 0.0)]).unwrap();
        assert_eq!(tilt_weight(&empty, 0.1, &p), 0.0);
        let one = GasState::new(10.0, vec![(9.7, 0.0), (3.0, 0.0)]).unwrap();
        assert!((tilt_weight(&one, 0.1, &p) + 0.05).abs() < 1e-15);
        let free = TiltParams::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(tilt_weight(&one, 0.1, &free), 0.0);
        // Open interval: the endpoints are excluded.
        let edge = GasState::new(10.0, vec![(0.5, 0.0), (9.5, 0.0)]).unwrap();
        assert_eq!(edge.count_in(-0.5, 0.5), 0);
    }

    #[test]
    fn bath_relaxes_to_half_density() {
        let mut rng = stream(4, 0, 0);
        let mut s = GasState::new(200.0, vec![]).unwrap();
        let mut acc = 0.0;
        let mut m = 0;
        for k in 0..40_000 {
            evolve_gas(&mut s, 0.05, 0.2, &mut rng);
            if k > 10_000 && k % 50 == 0 {
                acc += s.len() as f64 / 200.0;
                m += 1;
            }
        }
        let mean = acc / m as f64;
        // Number fluctuations are Poisson with mean 100; about 600 samples
        // that are nearly independent.
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn untilted_rate_is_zero() {
        let p = TiltParams::new(0.0, 1.0, 0.01).unwrap();
        let run = GasRun { l: 20.0, clones: 50, t_max: 20.0, window_frac: (0.5, 1.0), dt: 0.05, barrier: 1.0, seed: 1 };
        let e = qss_rate_gas(&p, &run).unwrap();
        assert!(e.lambda_qss.abs() < 1e-15);
    }

    #[test]
    fn process_validation() {
        let p = TiltParams::new(0.5, 1.0, 0.01).unwrap();
        assert!(GasProcess::new(0.5, p, 0.05, 1).is_err());
        assert!(GasProcess::new(10.0, p, 1.0, 1).is_err());
        assert!(TiltParams::new(-1.0, 1.0, 0.0).is_err());
    }
}
