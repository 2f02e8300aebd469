//! Exact evolution of the averaged two-replica state on `{dd,du,ud,uu,p,m}^L`.

use serde::{Deserialize, Serialize};

use super::haar::{dilute_bond_map, haar_bond_map, BondMap};
use super::{BondParams, Sym, NSYM};
use crate::{Error, Result};

pub const MAX_DENSE_L: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    /// Full circuit average, including coherence-pair creation.
    Full,
    /// Coherence-pair creation from diagonal inputs removed.
    Dilute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseState {
    pub l: usize,
    /// Amplitude of each basis string, index `Σ_x s_x 6^x`.
    pub amps: Vec<f64>,
}

/// Identity environment on one site, `(uu + ud + du + dd)/4`.
pub const IDENTITY_SITE: [f64; 6] = [0.25, 0.25, 0.25, 0.25, 0.0, 0.0];

fn pow6(l: usize) -> usize {
    NSYM.pow(l as u32)
}

impl DenseState {
    pub fn product(sites: &[[f64; 6]]) -> Result<Self> {
        let l = sites.len();
        if l == 0 || l > MAX_DENSE_L {
            return Err(Error::Capacity(format!("dense evolution supports 1..={MAX_DENSE_L} sites, got {l}")));
        }
        let mut amps = vec![1.0; 1];
        for site in sites.iter() {
            let mut next = Vec::with_capacity(amps.len() * 6);
            for &c in site.iter() {
                next.extend(amps.iter().map(|a| a * c));
            }
            amps = next;
        }
        Ok(Self { l, amps })
    }

    /// `p` at `x0` in an infinite-temperature environment.
    pub fn coherence_in_identity(l: usize, x0: usize) -> Result<Self> {
        Self::coherence_in(l, x0, IDENTITY_SITE)
    }

    pub fn coherence_in(l: usize, x0: usize, env: [f64; 6]) -> Result<Self> {
        if x0 >= l {
            return Err(Error::domain("coherence site outside chain"));
        }
        let mut sites = vec![env; l];
        sites[x0] = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        Self::product(&sites)
    }

    pub fn digit(&self, idx: usize, x: usize) -> usize {
        (idx / pow6(x)) % NSYM
    }

    /// Visit every basis string with its decoded symbols.
    pub fn for_each<F: FnMut(&[u8], f64)>(&self, mut f: F) {
        let mut digits = vec![0u8; self.l];
        for (idx, &a) in self.amps.iter().enumerate() {
            if idx > 0 {
                for d in digits.iter_mut() {
                    *d += 1;
                    if *d as usize == NSYM {
                        *d = 0;
                    } else {
                        break;
                    }
                }
            }
            if a != 0.0 {
                f(&digits, a);
            }
        }
    }

    /// Total amplitude weight per operator charge, keyed by charge.
    pub fn charge_weights(&self) -> std::collections::BTreeMap<i32, f64> {
        let mut out = std::collections::BTreeMap::new();
        self.for_each(|d, a| {
            let q: i32 = d.iter().map(|&s| Sym::from_index(s as usize).charge()).sum();
            *out.entry(q).or_insert(0.0) += a.abs();
        });
        out
    }
}

type Sparse = Vec<Vec<(usize, f64)>>;

fn sparsify(m: &BondMap, q: f64) -> Sparse {
    (0..36)
        .map(|j| {
            (0..36)
                .filter_map(|i| {
                    let mut v = q * m[i][j];
                    if i == j {
                        v += 1.0 - q;
                    }
                    (v != 0.0).then_some((i, v))
                })
                .collect()
        })
        .collect()
}

/// Single-site depolarizing channel on both replicas, `m[out][in]`.
pub fn depolarizing_map(gamma: f64) -> [[f64; 6]; 6] {
    let keep = 1.0 - 0.5 * gamma;
    let flip = 0.5 * gamma;
    let mut m = [[0.0; 6]; 6];
    for a in Sym::DIAGONAL {
        let (n1, n2) = a.occupations().unwrap();
        for b in Sym::DIAGONAL {
            let (m1, m2) = b.occupations().unwrap();
            let f1 = if n1 == m1 { keep } else { flip };
            let f2 = if n2 == m2 { keep } else { flip };
            m[b as usize][a as usize] = f1 * f2;
        }
    }
    m[4][4] = (1.0 - gamma).powi(2);
    m[5][5] = (1.0 - gamma).powi(2);
    m
}

pub struct DenseEvolver {
    l: usize,
    gamma: f64,
    bulk: Sparse,
    slow: Option<(usize, Sparse)>,
    depol: [[f64; 6]; 6],
}

impl DenseEvolver {
    pub fn new(l: usize, gamma: f64, bonds: BondParams, kind: MapKind) -> Result<Self> {
        if l > MAX_DENSE_L {
            return Err(Error::Capacity(format!("dense evolution supports L <= {MAX_DENSE_L}, got {l}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        bonds.validate()?;
        let map = match kind {
            MapKind::Full => haar_bond_map(),
            MapKind::Dilute => dilute_bond_map(),
        };
        let slow = bonds.slow_bond_index.map(|x| (x, sparsify(&map, bonds.q)));
        Ok(Self { l, gamma, bulk: sparsify(&map, 1.0), slow, depol: depolarizing_map(gamma) })
    }

    fn apply_bond(&self, amps: &mut [f64], x: usize) {
        let map = match &self.slow {
            Some((s, m)) if *s == x => m,
            _ => &self.bulk,
        };
        let sx = pow6(x);
        let sy = sx * NSYM;
        let block = sy * NSYM;
        let outer = amps.len() / block;
        let mut inp = [0.0; 36];
        let mut out = [0.0; 36];
        for hi in 0..outer {
            for lo in 0..sx {
                let base = hi * block + lo;
                let mut any = false;
                for a in 0..6 {
                    for b in 0..6 {
                        let v = amps[base + a * sx + b * sy];
                        inp[a * 6 + b] = v;
                        any |= v != 0.0;
                    }
                }
                if !any {
                    continue;
                }
                out.fill(0.0);
                for (j, &v) in inp.iter().enumerate() {
                    if v != 0.0 {
                        for &(i, c) in &map[j] {
                            out[i] += c * v;
                        }
                    }
                }
                for a in 0..6 {
                    for b in 0..6 {
                        amps[base + a * sx + b * sy] = out[a * 6 + b];
                    }
                }
            }
        }
    }

    fn apply_depolarization(&self, amps: &mut [f64]) {
        if self.gamma == 0.0 {
            return;
        }
        for x in 0..self.l {
            let sx = pow6(x);
            let block = sx * NSYM;
            for hi in 0..amps.len() / block {
                for lo in 0..sx {
                    let base = hi * block + lo;
                    let mut v = [0.0; 6];
                    for a in 0..6 {
                        v[a] = amps[base + a * sx];
                    }
                    for b in 0..6 {
                        let mut acc = 0.0;
                        for a in 0..6 {
                            acc += self.depol[b][a] * v[a];
                        }
                        amps[base + b * sx] = acc;
                    }
                }
            }
        }
    }

    /// One brickwork period: even bonds, depolarization, odd bonds, depolarization.
    pub fn step(&self, state: &mut DenseState) -> Result<()> {
        if state.l != self.l {
            return Err(Error::domain("state length does not match evolver"));
        }
        for parity in [0, 1] {
            let mut x = parity;
            while x + 1 < self.l {
                self.apply_bond(&mut state.amps, x);
                x += 2;
            }
            self.apply_depolarization(&mut state.amps);
        }
        Ok(())
    }
}

/// One period of the full averaged dynamics on an open chain with uniform bonds.
pub fn step_dense(state: &DenseState, gamma: f64) -> Result<DenseState> {
    let ev = DenseEvolver::new(state.l, gamma, BondParams::default(), MapKind::Full)?;
    let mut next = state.clone();
    ev.step(&mut next)?;
    Ok(next)
}

/// Sum of coherence-sector amplitudes with the coherence at each site
/// (the overlap with the identity environment).
pub fn coherence_weights(state: &DenseState) -> Vec<f64> {
    let mut w = vec![0.0; state.l];
    state.for_each(|d, a| {
        let mut pos = None;
        for (x, &s) in d.iter().enumerate() {
            match s {
                4 if pos.is_none() => pos = Some(x),
                0..=3 => {}
                _ => return,
            }
        }
        if let Some(x) = pos {
            w[x] += a;
        }
    });
    w
}

/// Total surviving coherence weight.
pub fn survival(state: &DenseState) -> f64 {
    coherence_weights(state).iter().sum()
}

/// Normalized coherence-position distribution.
pub fn coherence_distribution(state: &DenseState) -> Result<Vec<f64>> {
    let w = coherence_weights(state);
    let z: f64 = w.iter().sum();
    if !(z.abs() > 0.0) {
        return Err(Error::Undefined("coherence sector has no weight".into()));
    }
    Ok(w.iter().map(|v| v / z).collect())
}

fn z_sign(s: u8) -> f64 {
    match s {
        0 | 3 => 1.0,
        1 | 2 => -1.0,
        _ => 0.0,
    }
}

/// `C(x)` with the coherence held at `coh`: ratio of the `Z⊠Z`-weighted and
/// plain overlaps.
pub fn measure_c(state: &DenseState, x: usize, coh: usize) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    state.for_each(|d, a| {
        if d[coh] != 4 || d.iter().enumerate().any(|(y, &s)| y != coh && s > 3) {
            return;
        }
        den += a;
        num += a * z_sign(d[x]);
    });
    if den.abs() < 1e-300 {
        return Err(Error::Undefined("vanishing coherence overlap".into()));
    }
    Ok(num / den)
}

/// Density reconstructed from `C = (1 − 2ρ)²`.
pub fn rho_from_c(c: f64) -> f64 {
    0.5 * (1.0 - c.max(0.0).sqrt())
}

/// Density in replica 2 at `x` with replica 1 projected onto `P↓` away from `coh`.
pub fn measure_branch_profile(state: &DenseState, x: usize, coh: usize) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    state.for_each(|d, a| {
        if d[coh] != 4 {
            return;
        }
        // replica 1 must be d (symbols dd, du) everywhere else
        if d.iter().enumerate().any(|(y, &s)| y != coh && s > 1) {
            return;
        }
        den += a;
        if d[x] == 1 {
            num += a;
        }
    });
    if den.abs() < 1e-300 {
        return Err(Error::Undefined("vanishing projected overlap".into()));
    }
    Ok(num / den)
}

/// Many-body-weight distribution `φ(w)`, normalized to unit total.
///
/// Diagonal symbols are rewritten in the `{1⊠1, Z⊠Z, 1⊠Z, Z⊠1}` basis;
/// strings with a mixed `1⊠Z`/`Z⊠1` factor are skipped, `Z⊠Z`, `p`, `m`
/// count as weight one.
pub fn measure_mbw(state: &DenseState) -> Vec<f64> {
    // Per-site change of basis, order [11, zz, 1z, z1, p, m].
    let t: [[f64; 6]; 6] = [
        [0.25, 0.25, 0.25, 0.25, 0.0, 0.0],
        [0.25, -0.25, -0.25, 0.25, 0.0, 0.0],
        [-0.25, 0.25, -0.25, 0.25, 0.0, 0.0],
        [-0.25, -0.25, 0.25, 0.25, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ];
    let mut amps = state.amps.clone();
    for x in 0..state.l {
        let sx = pow6(x);
        let block = sx * NSYM;
        for hi in 0..amps.len() / block {
            for lo in 0..sx {
                let base = hi * block + lo;
                let v: Vec<f64> = (0..6).map(|a| amps[base + a * sx]).collect();
                for b in 0..6 {
                    amps[base + b * sx] = (0..6).map(|a| t[b][a] * v[a]).sum();
                }
            }
        }
    }
    let transformed = DenseState { l: state.l, amps };
    let mut phi = vec![0.0; state.l + 1];
    transformed.for_each(|d, a| {
        if d.iter().any(|&s| s == 2 || s == 3) {
            return;
        }
        let w = d.iter().filter(|&&s| s != 0).count();
        phi[w] += a;
    });
    let total: f64 = phi.iter().sum();
    if total != 0.0 {
        for p in phi.iter_mut() {
            *p /= total;
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(s: Sym) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[s as usize] = 1.0;
        v
    }

    #[test]
    fn flat_pair_unchanged() {
        let st = DenseState::product(&[delta(Sym::DD), delta(Sym::DD)]).unwrap();
        assert_eq!(step_dense(&st, 0.0).unwrap(), st);
    }

    #[test]
    fn coherence_next_to_disagreement_dies() {
        let st = DenseState::product(&[delta(Sym::P), delta(Sym::UD)]).unwrap();
        let next = step_dense(&st, 0.0).unwrap();
        assert!(next.amps.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn zero_noise_depolarization_is_identity() {
        let m = depolarizing_map(0.0);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn coherence_on_down_background() {
        let l = 5;
        let mut st = DenseState::coherence_in(l, 2, delta(Sym::DD)).unwrap();
        let ev = DenseEvolver::new(l, 0.0, BondParams::default(), MapKind::Full).unwrap();
        ev.step(&mut st).unwrap();
        let w = coherence_weights(&st);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // Even layer mixes sites 2,3; odd layer mixes (1,2) and (3,4).
        let expect = [0.0, 0.25, 0.25, 0.25, 0.25];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn charge_sector_conserved() {
        let mut st = DenseState::coherence_in_identity(6, 3).unwrap();
        let ev = DenseEvolver::new(6, 0.05, BondParams::default(), MapKind::Full).unwrap();
        for _ in 0..4 {
            ev.step(&mut st).unwrap();
            let q = st.charge_weights();
            assert!(q.keys().all(|&k| k == 1), "{q:?}");
        }
    }

    #[test]
    fn c_vanishes_initially() {
        let st = DenseState::coherence_in_identity(6, 3).unwrap();
        for x in [0, 1, 2, 4, 5] {
            assert_eq!(measure_c(&st, x, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn branch_profile_in_perfect_void() {
        let mut st = DenseState::coherence_in(6, 3, delta(Sym::DD)).unwrap();
        let ev = DenseEvolver::new(6, 0.0, BondParams::default(), MapKind::Full).unwrap();
        for _ in 0..3 {
            ev.step(&mut st).unwrap();
        }
        for x in [0, 1, 2, 4, 5] {
            assert_eq!(measure_branch_profile(&st, x, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn mbw_simple_states() {
        let id = DenseState::product(&[IDENTITY_SITE; 4]).unwrap();
        let phi = measure_mbw(&id);
        assert!((phi[0] - 1.0).abs() < 1e-14 && phi[1..].iter().all(|v| v.abs() < 1e-14));
        let zz = [1.0, -1.0, -1.0, 1.0, 0.0, 0.0];
        let z = DenseState::product(&[IDENTITY_SITE, zz, IDENTITY_SITE, IDENTITY_SITE]).unwrap();
        let phi = measure_mbw(&z);
        assert!((phi[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn capacity_error() {
        assert!(DenseState::product(&vec![IDENTITY_SITE; 9]).is_err());
        assert!(DenseEvolver::new(9, 0.0, BondParams::default(), MapKind::Full).is_err());
    }
}
