//! Two-replica U(1) circuit: exact dense evolution at small L and the
//! dilute-coherence Monte Carlo.

pub mod dense;
pub mod dilute;
pub mod haar;
pub mod observe;
pub mod process;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NSYM: usize = 6;

/// Exact diffusivity of a free particle under the brickwork, in sites² per
/// period. A particle that hops keeps its direction for the next layer, so
/// consecutive half-steps are correlated and `⟨x²⟩ = 2t − ½` from an even site.
pub const LATTICE_D: f64 = 1.0;

/// Measured free-walk diffusivity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityEstimate {
    pub d: f64,
    pub stderr: f64,
    pub walkers: usize,
    pub periods: usize,
}

/// Measure `D` from the coherence MSD in a perfect void at zero noise.
///
/// `D` is half the slope of the MSD between `periods / 2` and `periods`,
/// which removes the constant short-time offset. The error comes from
/// batch means over 20 walker groups.
pub fn measure_free_diffusivity(walkers: usize, periods: usize, seed: u64) -> Result<DiffusivityEstimate> {
    use dilute::{step_dilute_mc, DiluteParams, EnvInit, ReplicaConfig, D};
    const BATCHES: usize = 20;
    if walkers < BATCHES || periods < 4 {
        return Err(Error::Config(format!("need at least {BATCHES} walkers and 4 periods")));
    }
    let l = 2 * periods + 6;
    let x0 = (l / 2) & !1;
    let p = DiluteParams::new(0.0, BondParams::default())?;
    let half = periods / 2;
    let mut batch = [0.0f64; BATCHES];
    let mut count = [0usize; BATCHES];
    for k in 0..walkers {
        let mut rng = crate::rng::stream(seed, k as u64, 0);
        let mut c = ReplicaConfig::new(l, x0, EnvInit::Polarized(D), &mut rng)?;
        let mut mid = 0.0;
        for t in 1..=periods {
            step_dilute_mc(&mut c, &p, &mut rng);
            if t == half {
                mid = (c.coh_pos.unwrap_or(x0) as f64 - x0 as f64).powi(2);
            }
        }
        let end = (c.coh_pos.unwrap_or(x0) as f64 - x0 as f64).powi(2);
        batch[k % BATCHES] += end - mid;
        count[k % BATCHES] += 1;
    }
    let span = 2.0 * (periods - half) as f64;
    let est: Vec<f64> = batch.iter().zip(&count).map(|(s, &n)| s / n as f64 / span).collect();
    let mean = est.iter().sum::<f64>() / BATCHES as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(DiffusivityEstimate { d: mean, stderr: (var / BATCHES as f64).sqrt(), walkers, periods })
}

/// Continuum dephasing rate of a depolarizing probability `γ` per layer:
/// one period holds two layers, each multiplying a coherence by `1 − γ`
/// in both replicas.
pub fn continuum_gamma(gamma: f64) -> f64 {
    -2.0 * (-gamma).ln_1p()
}

/// Log-weight a pinned coherence loses per period to its own dephasing.
pub fn self_dephasing_rate(gamma: f64) -> f64 {
    2.0 * continuum_gamma(gamma)
}

/// Joint two-replica site state. The first letter is replica 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Sym {
    DD = 0,
    DU = 1,
    UD = 2,
    UU = 3,
    /// `2 σ+ ⊠ σ−`
    P = 4,
    /// `2 σ− ⊠ σ+`
    M = 5,
}

impl Sym {
    pub const ALL: [Sym; 6] = [Sym::DD, Sym::DU, Sym::UD, Sym::UU, Sym::P, Sym::M];
    pub const DIAGONAL: [Sym; 4] = [Sym::DD, Sym::DU, Sym::UD, Sym::UU];

    pub fn from_index(i: usize) -> Sym {
        Sym::ALL[i]
    }

    pub fn is_coherence(self) -> bool {
        matches!(self, Sym::P | Sym::M)
    }

    /// Occupation (u = 1) of each replica for diagonal symbols.
    pub fn occupations(self) -> Option<(u8, u8)> {
        match self {
            Sym::DD => Some((0, 0)),
            Sym::DU => Some((0, 1)),
            Sym::UD => Some((1, 0)),
            Sym::UU => Some((1, 1)),
            _ => None,
        }
    }

    /// Operator charge contribution.
    pub fn charge(self) -> i32 {
        match self {
            Sym::P => 1,
            Sym::M => -1,
            _ => 0,
        }
    }
}

/// Gate rates per bond; an optional slow bond applies its gate with probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondParams {
    pub q: f64,
    pub slow_bond_index: Option<usize>,
}

impl Default for BondParams {
    fn default() -> Self {
        Self { q: 1.0, slow_bond_index: None }
    }
}

impl BondParams {
    pub fn slow(q: f64, index: usize) -> Result<Self> {
        let b = Self { q, slow_bond_index: Some(index) };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::domain(format!("bond rate q must lie in (0, 1], got {}", self.q)));
        }
        Ok(())
    }

    /// Gate application probability on the bond `(x, x+1)`.
    pub fn rate(&self, x: usize) -> f64 {
        if self.slow_bond_index == Some(x) { self.q } else { 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_diffusivity_matches_exact_value() {
        let e = measure_free_diffusivity(20_000, 40, 9).unwrap();
        assert!((e.d - LATTICE_D).abs() < 4.0 * e.stderr + 1e-3, "{e:?}");
        assert!(e.stderr < 0.03);
    }

    #[test]
    fn calibration_rejects_tiny_runs() {
        assert!(measure_free_diffusivity(5, 40, 1).is_err());
        assert!(measure_free_diffusivity(100, 2, 1).is_err());
    }
}
