//! Population dynamics for substochastic processes.
//!
//! Clones advance independently between barriers, each returning the log of
//! its survival weight over the interval. At every barrier the mean weight
//! gives the instantaneous decay rate and the population is restored to `N`
//! equal-weight clones by systematic resampling.

use serde::{Deserialize, Serialize};

use crate::rng::{stream, uniform, StreamRng};
use crate::{Error, Result};

/// Stream id reserved for resampling offsets.
const RESAMPLE_STREAM: u64 = u64::MAX;

/// A substochastic process advanced one barrier interval at a time.
pub trait Process: Sync {
    type State: Clone + Send + Sync;

    /// Barrier interval in the process's time unit.
    fn dt(&self) -> f64;

    fn init(&self, rng: &mut StreamRng) -> Self::State;

    /// Advance one interval and return the log survival weight accrued
    /// (`-inf` for a killed clone).
    fn step(&self, state: &mut Self::State, rng: &mut StreamRng) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub clones: usize,
    /// Number of barrier intervals.
    pub steps: usize,
    /// Observables are reported only for `t ≥ burn_in`.
    pub burn_in: f64,
    /// Plateau window `[t_start, t_end]` for the quasi-stationary rate,
    /// declared before the run.
    pub window: (f64, f64),
    pub seed: u64,
    pub bootstrap: usize,
}

impl PopulationConfig {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if self.clones == 0 || self.steps == 0 {
            return Err(Error::Config("clone count and step count must be positive".into()));
        }
        let t_end = self.steps as f64 * dt;
        let (a, b) = self.window;
        if !(a >= 0.0 && b > a && b <= t_end + 1e-9) {
            return Err(Error::Config(format!("plateau window ({a}, {b}) must lie inside (0, {t_end}]")));
        }
        if self.bootstrap < 50 {
            return Err(Error::Config("at least 50 bootstrap resamples are required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QssEstimate {
    pub dt: f64,
    /// Barrier times `t_k = (k + 1) dt`.
    pub times: Vec<f64>,
    /// Instantaneous rate on each interval.
    pub lambda_t: Vec<f64>,
    /// `log Z(t_k)`, the cumulative log mean weight.
    pub log_z: Vec<f64>,
    /// Clones alive before resampling.
    pub n_alive: Vec<usize>,
    pub window: (f64, f64),
    pub lambda_qss: f64,
    pub stderr: f64,
}

impl QssEstimate {
    /// Mean of `Λ(t)` over an arbitrary window, for analysis after the run.
    pub fn plateau(&self, window: (f64, f64)) -> Option<f64> {
        let v: Vec<f64> = self.window_values(window);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn window_values(&self, (a, b): (f64, f64)) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.lambda_t)
            .filter(|(t, _)| **t > a + 1e-12 && **t <= b + 1e-12)
            .map(|(_, l)| *l)
            .collect()
    }
}

/// Systematic resampling: `n` offspring indices from one uniform offset.
///
/// Expected offspring of clone `i` is `n w_i / Σw`, and each count differs
/// from its expectation by less than one.
pub fn resample_systematic(weights: &[f64], n: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Extinction { step: 0, time: 0.0 });
    }
    let step = total / n as f64;
    let mut u = uniform(rng) * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut i = 0;
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    for _ in 0..n {
        while i < last && cum + weights[i] <= u {
            cum += weights[i];
            i += 1;
        }
        out.push(i);
        u += step;
    }
    Ok(out)
}

/// Moving-block bootstrap standard error of the mean of a correlated series.
pub fn block_bootstrap_stderr(values: &[f64], resamples: usize, rng: &mut StreamRng) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let block = ((n as f64).sqrt().round() as usize).clamp(1, n);
    let nblocks = n.div_ceil(block);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut s = 0.0;
        let mut c = 0usize;
        for _ in 0..nblocks {
            let start = (uniform(rng) * (n - block + 1) as f64) as usize;
            for v in &values[start..start + block] {
                if c < n {
                    s += v;
                    c += 1;
                }
            }
        }
        means.push(s / c as f64);
    }
    let m = means.iter().sum::<f64>() / resamples as f64;
    (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

#[cfg(feature = "parallel")]
fn advance<P: Process>(p: &P, states: &mut [P::State], logw: &mut [f64], seed: u64, k: usize) {
    use rayon::prelude::*;
    states.par_iter_mut().zip(logw.par_iter_mut()).enumerate().for_each(|(i, (s, w))| {
        let mut rng = stream(seed, i as u64, k as u64 + 1);
        *w = p.step(s, &mut rng);
    });
}

#[cfg(not(feature = "parallel"))]
fn advance<P: Process>(p: &P, states: &mut [P::State], logw: &mut [f64], seed: u64, k: usize) {
    for (i, (s, w)) in states.iter_mut().zip(logw.iter_mut()).enumerate() {
        let mut rng = stream(seed, i as u64, k as u64 + 1);
        *w = p.step(s, &mut rng);
    }
}

/// Run the cloning algorithm. `observe(t, clones)` is called after every
/// barrier with `t ≥ burn_in` on the resampled, equal-weight population.
pub fn run_population<P, F>(process: &P, cfg: &PopulationConfig, mut observe: F) -> Result<QssEstimate>
where
    P: Process,
    F: FnMut(f64, &[P::State]),
{
    let dt = process.dt();
    cfg.validate(dt)?;
    let n = cfg.clones;
    let mut states: Vec<P::State> = (0..n)
        .map(|i| process.init(&mut stream(cfg.seed, i as u64, 0)))
        .collect();
    let mut logw = vec![0.0; n];
    let mut est = QssEstimate {
        dt,
        times: Vec::with_capacity(cfg.steps),
        lambda_t: Vec::with_capacity(cfg.steps),
        log_z: Vec::with_capacity(cfg.steps),
        n_alive: Vec::with_capacity(cfg.steps),
        window: cfg.window,
        lambda_qss: f64::NAN,
        stderr: f64::NAN,
    };
    let mut log_z = 0.0;
    for k in 0..cfg.steps {
        let t = (k + 1) as f64 * dt;
        advance(process, &mut states, &mut logw, cfg.seed, k);
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::Extinction { step: k as u64 + 1, time: t });
        }
        // Weights relative to the largest keep the mean representable.
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        let inc = top + mean.ln();
        log_z += inc;
        est.times.push(t);
        est.lambda_t.push(-inc / dt);
        est.log_z.push(log_z);
        est.n_alive.push(logw.iter().filter(|l| l.is_finite()).count());
        let mut rng = stream(cfg.seed, RESAMPLE_STREAM, k as u64);
        let idx = resample_systematic(&w, n, &mut rng)
            .map_err(|_| Error::Extinction { step: k as u64 + 1, time: t })?;
        states = idx.iter().map(|&i| states[i].clone()).collect();
        if t >= cfg.burn_in - 1e-12 {
            observe(t, &states);
        }
    }
    let v = est.window_values(cfg.window);
    if v.is_empty() {
        return Err(Error::Config("plateau window contains no barrier".into()));
    }
    est.lambda_qss = v.iter().sum::<f64>() / v.len() as f64;
    let mut rng = stream(cfg.seed, RESAMPLE_STREAM - 1, 0);
    est.stderr = block_bootstrap_stderr(&v, cfg.bootstrap, &mut rng);
    Ok(est)
}

/// Discrete-time Markov chain on a finite state space with state-dependent
/// killing, used as an analytic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    /// Row-stochastic transition matrix.
    pub transition: Vec<Vec<f64>>,
    /// Killing rate per state (1/time).
    pub kill: Vec<f64>,
    pub dt: f64,
}

impl FiniteChain {
    /// Decay rate of the tilted matrix `diag(e^{−k dt}) P`, from its
    /// principal eigenvalue.
    pub fn exact_rate(&self) -> Result<f64> {
        let n = self.kill.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| (-self.kill[i] * self.dt).exp() * self.transition[i][j]);
        let top = m
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if top <= 0.0 {
            return Err(Error::numerical("non-positive principal eigenvalue", top));
        }
        Ok(-top.ln() / self.dt)
    }
}

impl Process for FiniteChain {
    type State = usize;

    fn dt(&self) -> f64 {
        self.dt
    }

    fn init(&self, _rng: &mut StreamRng) -> usize {
        0
    }

    fn step(&self, s: &mut usize, rng: &mut StreamRng) -> f64 {
        let logw = -self.kill[*s] * self.dt;
        let u = uniform(rng);
        let row = &self.transition[*s];
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        *s = next;
        logw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(clones: usize, steps: usize, window: (f64, f64)) -> PopulationConfig {
        PopulationConfig { clones, steps, burn_in: 0.0, window, seed: 11, bootstrap: 60 }
    }

    #[test]
    fn uniform_weights_give_each_clone_once() {
        let mut rng = stream(1, 0, 0);
        let idx = resample_systematic(&[1.0; 7], 7, &mut rng).unwrap();
        assert_eq!(idx, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_weights() {
        let mut rng = stream(1, 0, 0);
        assert_eq!(resample_systematic(&[2.0, 0.0], 2, &mut rng).unwrap(), vec![0, 0]);
        assert!(matches!(resample_systematic(&[0.0, 0.0], 2, &mut rng), Err(Error::Extinction { .. })));
    }

    #[test]
    fn offspring_mean_proportional_to_weight() {
        let w = [0.1, 2.0, 0.7, 0.0, 1.2, 3.0];
        let n = 6;
        let total: f64 = w.iter().sum();
        let trials = 100_000;
        let mut counts = [0.0f64; 6];
        let mut sq = [0.0f64; 6];
        for t in 0..trials {
            let mut rng = stream(5, t, 0);
            let mut c = [0.0f64; 6];
            for i in resample_systematic(&w, n, &mut rng).unwrap() {
                c[i] += 1.0;
            }
            for i in 0..6 {
                counts[i] += c[i];
                sq[i] += c[i] * c[i];
            }
        }
        for i in 0..6 {
            let mean = counts[i] / trials as f64;
            let var = sq[i] / trials as f64 - mean * mean;
            let expect = n as f64 * w[i] / total;
            let se = (var / trials as f64).sqrt().max(1e-12);
            assert!((mean - expect).abs() <= 3.0 * se + 1e-12, "clone {i}: {mean} vs {expect}");
        }
    }

    struct Constant(f64);

    impl Process for Constant {
        type State = ();
        fn dt(&self) -> f64 {
            0.5
        }
        fn init(&self, _: &mut StreamRng) {}
        fn step(&self, _: &mut (), _: &mut StreamRng) -> f64 {
            -self.0 * 0.5
        }
    }

    #[test]
    fn constant_killing_gives_constant_rate() {
        let est = run_population(&Constant(0.3), &cfg(50, 20, (2.0, 10.0)), |_, _| {}).unwrap();
        assert!(est.lambda_t.iter().all(|l| (l - 0.3).abs() < 1e-12));
        assert!((est.lambda_qss - 0.3).abs() < 1e-12);
        let zero = run_population(&Constant(0.0), &cfg(50, 20, (2.0, 10.0)), |_, _| {}).unwrap();
        assert!(zero.lambda_t.iter().all(|l| l.abs() < 1e-15));
    }

    fn two_state() -> FiniteChain {
        FiniteChain { transition: vec![vec![0.7, 0.3], vec![0.2, 0.8]], kill: vec![0.1, 1.5], dt: 0.2 }
    }

    #[test]
    fn two_state_principal_eigenvalue() {
        let chain = two_state();
        // closed-form 2x2 eigenvalue
        let a = [[0.7 * (-0.02f64).exp(), 0.3 * (-0.02f64).exp()], [0.2 * (-0.3f64).exp(), 0.8 * (-0.3f64).exp()]];
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let mu = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        let exact = -mu.ln() / 0.2;
        assert!((chain.exact_rate().unwrap() - exact).abs() < 1e-12);
        let est = run_population(&chain, &cfg(10_000, 400, (20.0, 80.0)), |_, _| {}).unwrap();
        assert!(
            (est.lambda_qss - exact).abs() < 3.0 * est.stderr.max(1e-4),
            "{} ± {} vs {exact}",
            est.lambda_qss,
            est.stderr
        );
    }

    #[test]
    fn seed_determinism() {
        let chain = two_state();
        let a = run_population(&chain, &cfg(300, 50, (2.0, 10.0)), |_, _| {}).unwrap();
        let b = run_population(&chain, &cfg(300, 50, (2.0, 10.0)), |_, _| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn total_extinction_is_reported() {
        struct Dead;
        impl Process for Dead {
            type State = ();
            fn dt(&self) -> f64 {
                1.0
            }
            fn init(&self, _: &mut StreamRng) {}
            fn step(&self, _: &mut (), _: &mut StreamRng) -> f64 {
                f64::NEG_INFINITY
            }
        }
        let err = run_population(&Dead, &cfg(10, 5, (1.0, 5.0)), |_, _| {}).unwrap_err();
        assert_eq!(err, Error::Extinction { step: 1, time: 1.0 });
    }

    #[test]
    fn window_must_be_declared_inside_run() {
        assert!(run_population(&two_state(), &cfg(10, 5, (0.0, 5.0)), |_, _| {}).is_err());
    }
}
