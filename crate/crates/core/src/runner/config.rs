use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    StationaryVoid,
    AgingVoid,
    Volterra,
    PolaronMsd,
    SlowBond,
    GasQss,
    Spectra,
    CloningBench,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::StationaryVoid,
        ExperimentId::AgingVoid,
        ExperimentId::Volterra,
        ExperimentId::PolaronMsd,
        ExperimentId::SlowBond,
        ExperimentId::GasQss,
        ExperimentId::Spectra,
        ExperimentId::CloningBench,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::StationaryVoid => "stationary-void",
            ExperimentId::AgingVoid => "aging-void",
            ExperimentId::Volterra => "volterra",
            ExperimentId::PolaronMsd => "polaron-msd",
            ExperimentId::SlowBond => "slow-bond",
            ExperimentId::GasQss => "gas-qss",
            ExperimentId::Spectra => "spectra",
            ExperimentId::CloningBench => "cloning-bench",
        }
    }

    pub fn default_params(self) -> Params {
        match self {
            ExperimentId::StationaryVoid => Params::StationaryVoid(Default::default()),
            ExperimentId::AgingVoid => Params::AgingVoid(Default::default()),
            ExperimentId::Volterra => Params::Volterra(Default::default()),
            ExperimentId::PolaronMsd => Params::PolaronMsd(Default::default()),
            ExperimentId::SlowBond => Params::SlowBond(Default::default()),
            ExperimentId::GasQss => Params::GasQss(Default::default()),
            ExperimentId::Spectra => Params::Spectra(Default::default()),
            ExperimentId::CloningBench => Params::CloningBench(Default::default()),
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

fn check_window(w: [f64; 2], max: f64, what: &str) -> Result<()> {
    check(w[0] >= 0.0 && w[0] < w[1] && w[1] <= max, &format!("{what} must satisfy 0 <= lo < hi <= {max}"))
}

fn check_gammas(g: &[f64], lo: f64, hi: f64) -> Result<()> {
    check(!g.is_empty() && g.iter().all(|&x| x > lo && x < hi), &format!("gammas must be non-empty and inside ({lo}, {hi})"))
}

/// Pinned Volterra rates, the velocity cost `I(v)` and the comoving-saddle
/// curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolterraParams {
    pub d: f64,
    pub gamma: f64,
    pub s: f64,
    pub dt: f64,
    pub t_max: f64,
    pub velocities: Vec<f64>,
    /// Scaled drifts sampled for the comoving-saddle curvature.
    pub curvature_u: Vec<f64>,
}

impl Default for VolterraParams {
    fn default() -> Self {
        Self {
            d: 1.0,
            gamma: 0.04,
            s: 0.5,
            dt: 0.05,
            t_max: 200.0,
            velocities: (0..=10).map(|i| i as f64 / 20.0).collect(),
            curvature_u: vec![0.1, 0.2, 0.3, 0.4],
        }
    }
}

impl VolterraParams {
    fn validate(&self) -> Result<()> {
        check(self.d > 0.0 && self.gamma > 0.0 && self.s >= 0.0, "volterra needs d > 0, gamma > 0, s >= 0")?;
        check(self.dt > 0.0 && self.t_max > 10.0 * self.dt, "volterra needs dt > 0 and t_max > 10 dt")?;
        check(self.curvature_u.len() >= 2, "curvature fit needs at least two drifts")
    }
}

/// Stationary weak-noise void: BVP and cloning at fixed depolarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryVoidParams {
    pub s: f64,
    /// Per-layer depolarizing probabilities; empty runs the BVP alone.
    pub gammas: Vec<f64>,
    pub l: usize,
    pub clones: usize,
    pub steps: usize,
    /// Quasi-stationary window in periods.
    pub window: [f64; 2],
    pub mobile: bool,
    pub radius: usize,
    /// Largest scaled distance entering the profile comparison.
    pub z_max: f64,
}

impl Default for StationaryVoidParams {
    fn default() -> Self {
        Self {
            s: 0.5,
            gammas: vec![0.01, 0.015, 0.02, 0.03, 0.04, 0.05],
            l: 120,
            clones: 5000,
            steps: 240,
            window: [120.0, 240.0],
            mobile: true,
            radius: 40,
            z_max: 3.0,
        }
    }
}

impl StationaryVoidParams {
    fn validate(&self) -> Result<()> {
        check(self.s > 0.0, "s must be positive")?;
        if !self.gammas.is_empty() {
            check_gammas(&self.gammas, 0.0, 1.0)?;
            check(self.l >= 8 && self.clones >= 2 && self.radius >= 1, "need l >= 8, clones >= 2, radius >= 1")?;
            check_window(self.window, self.steps as f64, "window")?;
        }
        check(self.z_max > 0.0, "z_max must be positive")
    }
}

/// Noiseless aging void: Ω/Φ solution, return-conditioned profiles,
/// survival and polaron displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgingVoidParams {
    pub s: f64,
    pub l: usize,
    /// Clones of the mobile run.
    pub clones: usize,
    pub pinned_clones: usize,
    /// Duration of the pinned run (profiles and survival).
    pub pinned_t_max: usize,
    /// Duration of the mobile run (displacements).
    pub mobile_t_max: usize,
    pub msd_window: [f64; 2],
    pub log_z_window: [f64; 2],
    pub u_max: f64,
}

impl Default for AgingVoidParams {
    fn default() -> Self {
        Self {
            s: 0.5,
            l: 200,
            clones: 20_000,
            pinned_clones: 5000,
            pinned_t_max: 800,
            mobile_t_max: 400,
            msd_window: [100.0, 400.0],
            log_z_window: [200.0, 800.0],
            u_max: 3.0,
        }
    }
}

impl AgingVoidParams {
    fn validate(&self) -> Result<()> {
        check(self.s > 0.0 && self.l >= 8 && self.clones >= 2 && self.pinned_clones >= 2, "need s > 0, l >= 8, clones >= 2")?;
        check_window(self.msd_window, self.mobile_t_max as f64, "msd_window")?;
        check_window(self.log_z_window, self.pinned_t_max as f64, "log_z_window")?;
        check(self.u_max > 0.0, "u_max must be positive")
    }
}

/// Weak-noise polaron displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolaronMsdParams {
    pub gammas: Vec<f64>,
    pub l: usize,
    pub clones: usize,
    /// Independent populations averaged per gamma.
    pub runs: usize,
    /// Burn-in in units of `1/γ`.
    pub burn_in_factor: f64,
    /// Periods measured after the burn-in.
    pub measure: usize,
    pub fit_window: [f64; 2],
    /// Start of the relative-coordinate plateau.
    pub plateau_from: f64,
    /// Smallest gamma entering the late-time `D_X = D_com` comparison.
    pub agreement_gamma_min: f64,
    /// Checkpoint spacing (periods) for the lagged MSD.
    pub lag_every: usize,
    /// Largest lag, in checkpoints.
    pub lag_max: usize,
    /// Lag window (periods) for the diffusion-constant fits.
    pub lag_fit: [f64; 2],
}

impl Default for PolaronMsdParams {
    fn default() -> Self {
        Self {
            gammas: vec![0.007, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1],
            l: 600,
            clones: 1000,
            runs: 4,
            burn_in_factor: 5.0,
            measure: 400,
            fit_window: [150.0, 400.0],
            plateau_from: 150.0,
            agreement_gamma_min: 0.04,
            lag_every: 5,
            lag_max: 40,
            lag_fit: [50.0, 200.0],
        }
    }
}

impl PolaronMsdParams {
    fn validate(&self) -> Result<()> {
        check_gammas(&self.gammas, 0.0, 1.0)?;
        check(self.l >= 8 && self.clones >= 2 && self.runs >= 1, "need l >= 8, clones >= 2, runs >= 1")?;
        check(self.burn_in_factor >= 0.0, "burn_in_factor must be >= 0")?;
        check_window(self.fit_window, self.measure as f64, "fit_window")?;
        check(self.plateau_from < self.measure as f64, "plateau_from must precede the end")?;
        let span = self.lag_every * self.lag_max;
        check(self.lag_every >= 1 && self.lag_max >= 2 && span < self.measure, "need lag_every * lag_max < measure")?;
        check_window(self.lag_fit, span as f64, "lag_fit")
    }
}

/// Slow-bond localization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlowBondParams {
    pub q: f64,
    pub gammas: Vec<f64>,
    pub l: usize,
    pub clones: usize,
    pub runs: usize,
    pub steps: usize,
    /// Histograms are averaged over periods after this time.
    pub hist_from: f64,
    pub msd_window: [f64; 2],
    /// Half width of the rescaled-coordinate grid for the CDF comparison.
    pub y_max: f64,
}

impl Default for SlowBondParams {
    fn default() -> Self {
        Self {
            q: 0.2,
            gammas: (0..=10).map(|k| (35 + 5 * k) as f64 / 10_000.0).collect(),
            l: 200,
            clones: 1000,
            runs: 8,
            steps: 250,
            hist_from: 150.0,
            msd_window: [200.0, 250.0],
            y_max: 3.0,
        }
    }
}

impl SlowBondParams {
    fn validate(&self) -> Result<()> {
        check(self.q > 0.0 && self.q <= 1.0, "q must lie in (0, 1]")?;
        check_gammas(&self.gammas, 0.0, 1.0)?;
        check(self.l >= 8 && self.l % 2 == 0, "l must be even and >= 8")?;
        check(self.clones >= 2 && self.runs >= 1, "need clones >= 2 and runs >= 1")?;
        check(self.hist_from < self.steps as f64, "hist_from must precede the end")?;
        check_window(self.msd_window, self.steps as f64, "msd_window")?;
        check(self.y_max > 0.0, "y_max must be positive")
    }
}

/// Tilted ballistic gas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasQssParams {
    pub gammas: Vec<f64>,
    pub lambda: f64,
    pub a: f64,
    pub l: f64,
    pub clones: usize,
    pub t_max: f64,
    pub dt: f64,
    pub barrier: f64,
    pub window_frac: [f64; 2],
}

impl Default for GasQssParams {
    fn default() -> Self {
        Self {
            gammas: vec![0.0035, 0.005, 0.007, 0.01, 0.013, 0.016],
            lambda: 0.5,
            a: 1.0,
            l: 120.0,
            clones: 2000,
            t_max: 1200.0,
            dt: crate::gas::DEFAULT_DT,
            barrier: 1.0,
            window_frac: [0.5, 1.0],
        }
    }
}

impl GasQssParams {
    fn validate(&self) -> Result<()> {
        check_gammas(&self.gammas, 0.0, f64::INFINITY)?;
        check(self.lambda >= 0.0 && self.a > 0.0 && self.l > self.a, "need lambda >= 0, 0 < a < l")?;
        check(self.clones >= 2 && self.dt > 0.0 && self.barrier >= self.dt, "need clones >= 2, 0 < dt <= barrier")?;
        check(self.t_max >= 2.0 * self.barrier, "t_max must span at least two barriers")?;
        check_window(self.window_frac, 1.0, "window_frac")
    }
}

/// KLS spectra, cascade bound and the Airy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraParams {
    pub l: usize,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Dissipation used for the exact one-magnon band check.
    pub band_gamma: f64,
    /// Momentum index `m` (`k = 2πm/L`) for the γ-scaling fit.
    pub scaling_m: usize,
    pub scaling_delta: f64,
}

impl Default for SpectraParams {
    fn default() -> Self {
        Self {
            l: 12,
            deltas: vec![0.0, 0.4],
            gammas: (0..=5).map(|i| 0.02 * 10f64.powf(i as f64 / 5.0)).collect(),
            band_gamma: 0.03,
            scaling_m: 3,
            scaling_delta: 0.4,
        }
    }
}

impl SpectraParams {
    fn validate(&self) -> Result<()> {
        check(self.l >= 3 && self.l <= crate::spectral::MAX_SITES, "l must lie in 3..=16")?;
        check(self.deltas.iter().all(|d| d.abs() < 1.0), "|delta| must be < 1")?;
        check_gammas(&self.gammas, 0.0, f64::INFINITY)?;
        check(self.band_gamma >= 0.0, "band_gamma must be >= 0")?;
        check(self.scaling_m >= 1 && self.scaling_m <= self.l / 2, "scaling_m must lie in 1..=l/2")
    }
}

/// Cloning benchmarks and the dense-versus-Monte-Carlo oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloningBenchParams {
    pub l: usize,
    pub gamma: f64,
    pub x0: usize,
    pub t_max: usize,
    pub samples: usize,
    pub chain_clones: usize,
    pub chain_steps: usize,
}

impl Default for CloningBenchParams {
    fn default() -> Self {
        Self { l: 6, gamma: 0.05, x0: 2, t_max: 12, samples: 200_000, chain_clones: 10_000, chain_steps: 400 }
    }
}

impl CloningBenchParams {
    fn validate(&self) -> Result<()> {
        check(self.l >= 2 && self.l <= crate::replica::dense::MAX_DENSE_L, "l must lie in 2..=8")?;
        check(self.x0 < self.l, "x0 must lie on the chain")?;
        check(self.gamma > 0.0 && self.gamma < 1.0, "gamma must lie in (0, 1)")?;
        check(self.samples >= 100 && self.t_max >= 1, "need samples >= 100 and t_max >= 1")?;
        check(self.chain_clones >= 2 && self.chain_steps >= 20, "need chain_clones >= 2, chain_steps >= 20")
    }
}

/// Parameters of the selected experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Volterra(VolterraParams),
    StationaryVoid(StationaryVoidParams),
    AgingVoid(AgingVoidParams),
    PolaronMsd(PolaronMsdParams),
    SlowBond(SlowBondParams),
    GasQss(GasQssParams),
    Spectra(SpectraParams),
    CloningBench(CloningBenchParams),
}

impl Params {
    fn validate(&self) -> Result<()> {
        match self {
            Params::Volterra(p) => p.validate(),
            Params::StationaryVoid(p) => p.validate(),
            Params::AgingVoid(p) => p.validate(),
            Params::PolaronMsd(p) => p.validate(),
            Params::SlowBond(p) => p.validate(),
            Params::GasQss(p) => p.validate(),
            Params::Spectra(p) => p.validate(),
            Params::CloningBench(p) => p.validate(),
        }
    }
}

/// On-disk layout: the experiment id, a seed, an optional output
/// directory and one section named after the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub experiment: Option<ExperimentId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary_void: Option<StationaryVoidParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aging_void: Option<AgingVoidParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volterra: Option<VolterraParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polaron_msd: Option<PolaronMsdParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_bond: Option<SlowBondParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gas_qss: Option<GasQssParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloning_bench: Option<CloningBenchParams>,
}

pub const DEFAULT_SEED: u64 = 20_240_901;

/// Fully typed configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigFile", into = "ConfigFile")]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub params: Params,
}

impl ExperimentConfig {
    /// Defaults for `id`.
    pub fn preset(id: ExperimentId) -> Self {
        Self { experiment: id, seed: DEFAULT_SEED, out: None, params: id.default_params() }
    }

    /// Validated copy.
    pub fn resolved(&self) -> Result<Self> {
        let expected = std::mem::discriminant(&self.experiment.default_params());
        if std::mem::discriminant(&self.params) != expected {
            return Err(Error::Config(format!("parameters do not belong to `{}`", self.experiment)));
        }
        self.params.validate()?;
        Ok(self.clone())
    }
}

impl TryFrom<ConfigFile> for ExperimentConfig {
    type Error = Error;

    fn try_from(f: ConfigFile) -> Result<Self> {
        let id = f.experiment.ok_or_else(|| Error::Config("missing `experiment`".into()))?;
        let sections: Vec<(ExperimentId, Option<Params>)> = vec![
            (ExperimentId::StationaryVoid, f.stationary_void.map(Params::StationaryVoid)),
            (ExperimentId::AgingVoid, f.aging_void.map(Params::AgingVoid)),
            (ExperimentId::Volterra, f.volterra.map(Params::Volterra)),
            (ExperimentId::PolaronMsd, f.polaron_msd.map(Params::PolaronMsd)),
            (ExperimentId::SlowBond, f.slow_bond.map(Params::SlowBond)),
            (ExperimentId::GasQss, f.gas_qss.map(Params::GasQss)),
            (ExperimentId::Spectra, f.spectra.map(Params::Spectra)),
            (ExperimentId::CloningBench, f.cloning_bench.map(Params::CloningBench)),
        ];
        let mut params = None;
        for (sid, p) in sections {
            match (sid == id, p) {
                (true, p) => params = p,
                (false, Some(_)) => {
                    return Err(Error::Config(format!("section `{sid}` does not apply to experiment `{id}`")))
                }
                (false, None) => {}
            }
        }
        let cfg = Self {
            experiment: id,
            seed: f.seed.unwrap_or(DEFAULT_SEED),
            out: f.out,
            params: params.unwrap_or_else(|| id.default_params()),
        };
        cfg.resolved()
    }
}

impl From<ExperimentConfig> for ConfigFile {
    fn from(c: ExperimentConfig) -> Self {
        let mut f = ConfigFile { experiment: Some(c.experiment), seed: Some(c.seed), out: c.out, ..Default::default() };
        match c.params {
            Params::StationaryVoid(p) => f.stationary_void = Some(p),
            Params::AgingVoid(p) => f.aging_void = Some(p),
            Params::Volterra(p) => f.volterra = Some(p),
            Params::PolaronMsd(p) => f.polaron_msd = Some(p),
            Params::SlowBond(p) => f.slow_bond = Some(p),
            Params::GasQss(p) => f.gas_qss = Some(p),
            Params::Spectra(p) => f.spectra = Some(p),
            Params::CloningBench(p) => f.cloning_bench = Some(p),
        }
        f
    }
}
