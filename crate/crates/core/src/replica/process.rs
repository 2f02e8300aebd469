//! The dilute replica process as a cloning [`Process`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::dilute::{step_dilute_mc, DiluteParams, EnvInit, ReplicaConfig};
use super::observe::polaron_coords;
use crate::cloning::Process;
use crate::rng::{uniform, StreamRng};
use crate::{Error, Result};

/// A clone together with the reference positions its displacements are
/// measured from. References travel with the clone through resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracked {
    pub cfg: ReplicaConfig,
    pub sweeps: u64,
    pub x_ref: f64,
    pub com_ref: f64,
    /// Recent `(X, x_com)` checkpoints, oldest first; `x_com` is NaN when
    /// the clone has no polarized site.
    pub trail: VecDeque<(f64, f64)>,
}

impl AsRef<ReplicaConfig> for Tracked {
    fn as_ref(&self) -> &ReplicaConfig {
        &self.cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaProcess {
    pub l: usize,
    /// Initial coherence site.
    pub x0: usize,
    /// Optional second start site, chosen with probability 1/2.
    pub x0_alt: Option<usize>,
    pub env: EnvInit,
    pub params: DiluteParams,
    /// Brickwork periods per barrier.
    pub sweeps_per_barrier: usize,
    /// Sweep at which displacement references are taken.
    pub reference_sweep: u64,
    /// Checkpoint trail for lagged displacements, if enabled.
    pub trail: Option<TrailSpec>,
}

/// Checkpoints every `every` sweeps from the reference sweep on, keeping
/// the latest `len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailSpec {
    pub every: u64,
    pub len: usize,
}

impl ReplicaProcess {
    pub fn new(l: usize, x0: usize, env: EnvInit, params: DiluteParams) -> Result<Self> {
        if x0 >= l || l < 2 {
            return Err(Error::domain(format!("coherence site {x0} invalid for L = {l}")));
        }
        Ok(Self { l, x0, x0_alt: None, env, params, sweeps_per_barrier: 1, reference_sweep: 0, trail: None })
    }

    /// Coherence at the chain centre.
    pub fn centred(l: usize, env: EnvInit, params: DiluteParams) -> Result<Self> {
        Self::new(l, l / 2, env, params)
    }

    pub fn with_alternative_start(mut self, x: usize) -> Result<Self> {
        if x >= self.l {
            return Err(Error::domain("alternative start outside chain"));
        }
        self.x0_alt = Some(x);
        Ok(self)
    }

    pub fn with_reference_sweep(mut self, sweep: u64) -> Self {
        self.reference_sweep = sweep;
        self
    }

    /// Record checkpoints so that [`lagged_displacements`] can average over
    /// time origins.
    pub fn with_trail(mut self, every: u64, len: usize) -> Result<Self> {
        if every == 0 || len < 2 {
            return Err(Error::Config("trail needs every >= 1 and len >= 2".into()));
        }
        self.trail = Some(TrailSpec { every, len });
        Ok(self)
    }

    fn record(&self, s: &mut Tracked) {
        let Some(spec) = self.trail else { return };
        if s.sweeps < self.reference_sweep || (s.sweeps - self.reference_sweep) % spec.every != 0 {
            return;
        }
        let Some((x, com)) = polaron_coords(&s.cfg, 0.0) else { return };
        if s.trail.len() == spec.len {
            s.trail.pop_front();
        }
        s.trail.push_back((x, com.unwrap_or(f64::NAN)));
    }

    fn set_reference(&self, s: &mut Tracked) {
        if let Some((x, com)) = polaron_coords(&s.cfg, 0.0) {
            s.x_ref = x;
            s.com_ref = com.unwrap_or(x);
        }
    }
}

impl Process for ReplicaProcess {
    type State = Tracked;

    fn dt(&self) -> f64 {
        self.sweeps_per_barrier as f64
    }

    fn init(&self, rng: &mut StreamRng) -> Tracked {
        let x0 = match self.x0_alt {
            Some(x) if uniform(rng) < 0.5 => x,
            _ => self.x0,
        };
        let cfg = ReplicaConfig::new(self.l, x0, self.env, rng).expect("validated at construction");
        let mut s = Tracked { cfg, sweeps: 0, x_ref: x0 as f64, com_ref: x0 as f64, trail: VecDeque::new() };
        if self.reference_sweep == 0 {
            self.set_reference(&mut s);
        }
        self.record(&mut s);
        s
    }

    fn step(&self, s: &mut Tracked, rng: &mut StreamRng) -> f64 {
        s.cfg.log_weight = 0.0;
        for _ in 0..self.sweeps_per_barrier {
            step_dilute_mc(&mut s.cfg, &self.params, rng);
            s.sweeps += 1;
            if !s.cfg.alive {
                break;
            }
            if s.sweeps == self.reference_sweep {
                self.set_reference(s);
            }
            self.record(s);
        }
        if s.cfg.alive {
            s.cfg.log_weight
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Displacement moments of an equal-weight population since the reference
/// sweep: `⟨(X − X_ref)²⟩`, `⟨(x_com − x_com,ref)²⟩` and the relative
/// coordinate `⟨(X − x_com)²⟩`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Displacements {
    pub t: f64,
    pub n: usize,
    pub excluded: usize,
    pub msd_x: f64,
    pub msd_com: f64,
    pub msd_rel: f64,
}

pub fn displacements(t: f64, states: &[Tracked]) -> Displacements {
    let mut d = Displacements { t, ..Default::default() };
    let (mut sx, mut sc, mut sr, mut nc) = (0.0, 0.0, 0.0, 0usize);
    for s in states.iter().filter(|s| s.cfg.alive) {
        let Some((x, com)) = polaron_coords(&s.cfg, 0.0) else { continue };
        d.n += 1;
        sx += (x - s.x_ref).powi(2);
        match com {
            Some(c) => {
                nc += 1;
                sc += (c - s.com_ref).powi(2);
                sr += (x - c).powi(2);
            }
            None => d.excluded += 1,
        }
    }
    if d.n > 0 {
        d.msd_x = sx / d.n as f64;
    }
    if nc > 0 {
        d.msd_com = sc / nc as f64;
        d.msd_rel = sr / nc as f64;
    }
    d
}

/// Mean squared displacements at lags `1..len` checkpoints, summed over
/// clones whose trail reaches back that far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LaggedSums {
    pub sum_x: Vec<f64>,
    pub n_x: Vec<usize>,
    pub sum_com: Vec<f64>,
    pub n_com: Vec<usize>,
}

impl LaggedSums {
    pub fn new(len: usize) -> Self {
        Self { sum_x: vec![0.0; len], n_x: vec![0; len], sum_com: vec![0.0; len], n_com: vec![0; len] }
    }

    /// Averages per lag index; lag 0 is zero by construction.
    pub fn means(&self) -> (Vec<f64>, Vec<f64>) {
        let avg = |s: &[f64], n: &[usize]| s.iter().zip(n).map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN }).collect();
        (avg(&self.sum_x, &self.n_x), avg(&self.sum_com, &self.n_com))
    }
}

/// Add the squared increments between each clone's latest checkpoint and
/// the earlier ones. Clones inherit their ancestors' trails, so every
/// increment follows one ancestral path.
pub fn lagged_displacements(states: &[Tracked], acc: &mut LaggedSums) {
    for s in states.iter().filter(|s| s.cfg.alive) {
        let Some(&(x, c)) = s.trail.back() else { continue };
        for (lag, &(x0, c0)) in s.trail.iter().rev().enumerate().skip(1) {
            if lag >= acc.sum_x.len() {
                break;
            }
            acc.sum_x[lag] += (x - x0).powi(2);
            acc.n_x[lag] += 1;
            if c.is_finite() && c0.is_finite() {
                acc.sum_com[lag] += (c - c0).powi(2);
                acc.n_com[lag] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloning::{run_population, PopulationConfig};
    use crate::replica::BondParams;

    #[test]
    fn references_follow_resampling() {
        let p = DiluteParams::new(0.05, BondParams::default()).unwrap();
        let pr = ReplicaProcess::centred(30, EnvInit::Identity, p).unwrap().with_reference_sweep(10);
        let cfg = PopulationConfig { clones: 200, steps: 10, burn_in: 10.0, window: (5.0, 10.0), seed: 1, bootstrap: 50 };
        let mut seen = None;
        run_population(&pr, &cfg, |_, s| seen = Some(displacements(10.0, s))).unwrap();
        let d = seen.unwrap();
        assert_eq!(d.msd_x, 0.0);
        assert_eq!(d.msd_com, 0.0);
    }

    #[test]
    fn trail_keeps_latest_checkpoints() {
        let p = DiluteParams::new(0.0, BondParams::default()).unwrap();
        let pr = ReplicaProcess::new(40, 20, EnvInit::Polarized(super::super::dilute::D), p)
            .unwrap()
            .with_reference_sweep(4)
            .with_trail(2, 3)
            .unwrap();
        let mut rng = crate::rng::stream(5, 0, 0);
        let mut s = pr.init(&mut rng);
        assert!(s.trail.is_empty());
        for _ in 0..10 {
            pr.step(&mut s, &mut rng);
        }
        // Checkpoints at sweeps 4, 6, 8, 10; the first has been dropped.
        assert_eq!(s.trail.len(), 3);
        assert_eq!(s.trail.back().unwrap().0, s.cfg.coh_pos.unwrap() as f64);
        let mut acc = LaggedSums::new(3);
        lagged_displacements(std::slice::from_ref(&s), &mut acc);
        assert_eq!(acc.n_x, vec![0, 1, 1]);
        assert_eq!(acc.n_com, vec![0, 1, 1]);
        assert!(pr.with_trail(0, 3).is_err());
    }

    #[test]
    fn lagged_msd_of_free_walk() {
        // A perfect void at zero noise: lagged MSD grows as 2 D tau.
        let p = DiluteParams::new(0.0, BondParams::default()).unwrap();
        let pr = ReplicaProcess::new(200, 100, EnvInit::Polarized(super::super::dilute::D), p)
            .unwrap()
            .with_trail(10, 4)
            .unwrap();
        let mut acc = LaggedSums::new(4);
        for k in 0..4000 {
            let mut rng = crate::rng::stream(6, k, 0);
            let mut s = pr.init(&mut rng);
            for _ in 0..30 {
                pr.step(&mut s, &mut rng);
            }
            lagged_displacements(std::slice::from_ref(&s), &mut acc);
        }
        let (mx, _) = acc.means();
        let d = (mx[3] - mx[1]) / (2.0 * 20.0);
        assert!((d - super::super::LATTICE_D).abs() < 0.1, "{mx:?}");
    }

    #[test]
    fn alternative_start_splits_population() {
        let p = DiluteParams::new(0.0, BondParams::default()).unwrap();
        let pr = ReplicaProcess::new(20, 9, EnvInit::Polarized(super::super::dilute::D), p)
            .unwrap()
            .with_alternative_start(10)
            .unwrap();
        let n10 = (0..2000).filter(|&i| pr.init(&mut crate::rng::stream(3, i, 0)).cfg.coh_pos == Some(10)).count();
        assert!((900..1100).contains(&n10));
    }
}
