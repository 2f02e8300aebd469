//! Spectral diagnostics of the depolarized KLS generator and the Airy wedge
//! problem of the slow bond.
//!
//! The generator acts on occupation configurations of a chain of `L` sites.
//! Exchange across a bond happens at rate `r0 w`, where `w` is `1 + δ` with
//! both outer neighbours empty, `1 - δ` with both full and `1` otherwise.
//! Each site flips at rate `γ/2`. With `r0 = 1/4` a single density
//! excitation (a `Z` string of weight one) decays at exactly
//! `sin²(k/2) + γ`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exchange rate fixing the one-magnon band to `sin²(k/2) + γ`.
pub const R0: f64 = 0.25;

/// Largest chain handled by exact diagonalization.
pub const MAX_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub l: usize,
    pub delta: f64,
    pub gamma: f64,
    pub periodic: bool,
}

impl GeneratorSpec {
    pub fn new(l: usize, delta: f64, gamma: f64, periodic: bool) -> Result<Self> {
        let s = Self { l, delta, gamma, periodic };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l > MAX_SITES {
            return Err(Error::Capacity(format!("L = {} exceeds {MAX_SITES} sites", self.l)));
        }
        if self.l < 2 || self.delta.abs() >= 1.0 || self.gamma < 0.0 {
            return Err(Error::domain("generator needs L >= 2, |delta| < 1, gamma >= 0"));
        }
        if self.periodic && self.l < 3 {
            return Err(Error::domain("a periodic chain needs L >= 3"));
        }
        Ok(())
    }

    fn bonds(&self) -> usize {
        if self.periodic {
            self.l
        } else {
            self.l - 1
        }
    }

    /// Outer-neighbour occupation, `None` past an open end.
    fn occ(&self, c: usize, i: isize) -> Option<u8> {
        let l = self.l as isize;
        if self.periodic {
            Some(((c >> i.rem_euclid(l)) & 1) as u8)
        } else if (0..l).contains(&i) {
            Some(((c >> i) & 1) as u8)
        } else {
            None
        }
    }

    /// KLS factor for the bond `(i, i+1)`. A missing neighbour is neutral.
    fn kls_factor(&self, c: usize, i: usize) -> f64 {
        let i = i as isize;
        let score = |n: Option<u8>| match n {
            Some(0) => 0.5,
            Some(_) => -0.5,
            None => 0.0,
        };
        1.0 + self.delta * (score(self.occ(c, i - 1)) + score(self.occ(c, i + 2)))
    }

    /// Nonzero elements `(row, value)` of column `c` of `H = -L`.
    pub fn column(&self, c: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let l = self.l;
        let mut diag = 0.0;
        for b in 0..self.bonds() {
            let j = (b + 1) % l;
            if (c >> b) & 1 != (c >> j) & 1 {
                let rate = R0 * self.kls_factor(c, b);
                out.push((c ^ (1 << b) ^ (1 << j), -rate));
                diag += rate;
            }
        }
        if self.gamma > 0.0 {
            for i in 0..l {
                out.push((c ^ (1 << i), -0.5 * self.gamma));
            }
            diag += 0.5 * self.gamma * l as f64;
        }
        out.push((c, diag));
    }
}

/// Generator `H = -L` as a sparse column list.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub spec: GeneratorSpec,
    /// `(row, col, value)` triplets.
    pub entries: Vec<(usize, usize, f64)>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        1 << self.spec.l
    }

    /// Dense copy, for chains small enough to hold one.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.spec.l > 12 {
            return Err(Error::Capacity("dense generator limited to L <= 12".into()));
        }
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        Ok(m)
    }
}

pub fn build_generator(spec: GeneratorSpec) -> Result<Generator> {
    spec.validate()?;
    let mut entries = Vec::new();
    let mut col = Vec::new();
    for c in 0..1usize << spec.l {
        spec.column(c, &mut col);
        entries.extend(col.iter().map(|&(r, v)| (r, c, v)));
    }
    Ok(Generator { spec, entries })
}

/// Coefficients of a configuration-space vector on `Z` strings: the
/// Walsh-Hadamard transform with `P_occupied = (I+Z)/2`.
pub fn z_string_amplitudes(v: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut a = v.to_vec();
    let n = a.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (x, y) = (a[i], a[i + h]);
                // Bit set means occupied, sign +1 for Z.
                a[i] = x + y;
                a[i + h] = y - x;
            }
        }
        h *= 2;
    }
    a
}

/// Mean magnon number (Z-string weight) of a configuration-space vector.
pub fn mean_magnon_number(v: &[Complex<f64>]) -> f64 {
    let a = z_string_amplitudes(v);
    let (mut num, mut den) = (0.0, 0.0);
    for (s, c) in a.iter().enumerate() {
        let w = c.norm_sqr();
        num += w * s.count_ones() as f64;
        den += w;
    }
    num / den
}

/// Translation orbits: representative (minimal rotation) of every
/// configuration, the shift taking the representative to it, and periods.
struct Orbits {
    rep: Vec<u32>,
    shift: Vec<u8>,
    period: Vec<u8>,
}

fn rotate(c: usize, l: usize) -> usize {
    ((c << 1) | (c >> (l - 1))) & ((1 << l) - 1)
}

impl Orbits {
    fn new(l: usize) -> Self {
        let n = 1usize << l;
        let mut rep = vec![u32::MAX; n];
        let mut shift = vec![0u8; n];
        let mut period = vec![0u8; n];
        for c in 0..n {
            if rep[c] != u32::MAX {
                continue;
            }
            // `c` is the smallest member of its orbit: visited in order.
            let mut x = c;
            let mut p = 0;
            loop {
                if rep[x] == u32::MAX {
                    rep[x] = c as u32;
                    shift[x] = p as u8;
                }
                x = rotate(x, l);
                p += 1;
                if x == c {
                    break;
                }
            }
            let mut x = c;
            for _ in 0..p {
                period[x] = p as u8;
                x = rotate(x, l);
            }
        }
        Self { rep, shift, period }
    }
}

/// One row of a momentum-resolved spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: f64,
    pub n_magnon_mean: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub spec: GeneratorSpec,
    pub rows: Vec<SpectrumRow>,
}

/// Hermitian block of `H` at momentum `2πm/L` and its basis.
pub struct MomentumBlock {
    pub k: f64,
    pub reps: Vec<usize>,
    pub matrix: DMatrix<Complex<f64>>,
}

fn momentum_block(spec: &GeneratorSpec, orb: &Orbits, m: usize) -> MomentumBlock {
    let l = spec.l;
    let k = 2.0 * std::f64::consts::PI * m as f64 / l as f64;
    let allowed = |c: usize| (m * orb.period[c] as usize) % l == 0;
    let reps: Vec<usize> = (0..1usize << l).filter(|&c| orb.rep[c] as usize == c && allowed(c)).collect();
    let mut index = std::collections::HashMap::with_capacity(reps.len());
    for (i, &r) in reps.iter().enumerate() {
        index.insert(r, i);
    }
    let n = reps.len();
    let mut h = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    let mut col = Vec::new();
    for (ci, &r) in reps.iter().enumerate() {
        spec.column(r, &mut col);
        let pr = orb.period[r] as f64;
        for &(c2, v) in &col {
            let s = orb.rep[c2] as usize;
            if let Some(&si) = index.get(&s) {
                let ps = orb.period[s] as f64;
                let phase = k * orb.shift[c2] as f64;
                h[(si, ci)] += Complex::from_polar(v * (pr / ps).sqrt(), phase);
            }
        }
    }
    MomentumBlock { k, reps, matrix: h }
}

/// Expand a block eigenvector into configuration amplitudes.
fn expand(spec: &GeneratorSpec, orb: &Orbits, block: &MomentumBlock, c: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = 1usize << spec.l;
    let mut out = vec![Complex::new(0.0, 0.0); n];
    let mut pos = std::collections::HashMap::with_capacity(block.reps.len());
    for (i, &r) in block.reps.iter().enumerate() {
        pos.insert(r, i);
    }
    for (x, slot) in out.iter_mut().enumerate() {
        if let Some(&i) = pos.get(&(orb.rep[x] as usize)) {
            let p = orb.period[x] as f64;
            *slot = c[i] * Complex::from_polar(1.0 / p.sqrt(), -block.k * orb.shift[x] as f64);
        }
    }
    out
}

/// Full ascending spectrum of one momentum block.
pub fn block_spectrum(spec: &GeneratorSpec, m: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if !spec.periodic {
        return Err(Error::domain("momentum blocks need a periodic chain"));
    }
    let orb = Orbits::new(spec.l);
    let b = momentum_block(spec, &orb, m);
    let mut ev: Vec<f64> = SymmetricEigen::new(b.matrix).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Threshold separating the stationary eigenvalue from decaying modes.
const ZERO_MODE: f64 = 1e-9;

fn leading_row(spec: &GeneratorSpec, orb: &Orbits, m: usize) -> Result<SpectrumRow> {
    let block = momentum_block(spec, orb, m);
    let k = block.k;
    let eig = SymmetricEigen::try_new(block.matrix.clone(), 1e-14, 0)
        .ok_or_else(|| Error::numerical("momentum block eigensolver did not converge", f64::NAN))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // The stationary state lives at k = 0 and is excluded. At gamma = 0
    // every particle-number sector has its own zero mode.
    let idx = order
        .into_iter()
        .find(|&i| eig.eigenvalues[i] > ZERO_MODE)
        .ok_or_else(|| Error::Undefined("block has no decaying mode".into()))?;
    let v: Vec<Complex<f64>> = eig.eigenvectors.column(idx).iter().copied().collect();
    let full = expand(spec, orb, &block, &v);
    Ok(SpectrumRow { k, n_magnon_mean: mean_magnon_number(&full), lambda: eig.eigenvalues[idx] })
}

/// Smallest decay rate and its mean magnon number for `k = 2πm/L`,
/// `m = 0..=L/2`.
pub fn leading_eigs_by_momentum(spec: GeneratorSpec) -> Result<SpectrumTable> {
    spec.validate()?;
    if !spec.periodic {
        return Err(Error::domain("momentum resolution needs a periodic chain"));
    }
    let orb = Orbits::new(spec.l);
    let ms: Vec<usize> = (0..=spec.l / 2).collect();
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<SpectrumRow>> = {
        use rayon::prelude::*;
        ms.par_iter().map(|&m| leading_row(&spec, &orb, m)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<SpectrumRow>> = ms.iter().map(|&m| leading_row(&spec, &orb, m)).collect();
    Ok(SpectrumTable { spec, rows: rows.into_iter().collect::<Result<_>>()? })
}

/// Brute-force optimal split of momentum `k` into `n` equal magnons,
/// lattice form `n sin²(k/2n) + nγ`. Returns `(n*, Γ)`.
pub fn cascade_gap(k: f64, gamma: f64, n_max: usize) -> Result<(usize, f64)> {
    if !(k > 0.0 && k <= std::f64::consts::PI + 1e-12 && gamma > 0.0 && n_max >= 1) {
        return Err(Error::domain("cascade gap needs 0 < k <= pi, gamma > 0, n_max >= 1"));
    }
    Ok((1..=n_max)
        .map(|n| {
            let nf = n as f64;
            (n, nf * (k / (2.0 * nf)).sin().powi(2) + nf * gamma)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("n_max >= 1"))
}

/// Continuum cascade `D k²/n + nγ` minimized over integer `n`.
pub fn cascade_gap_continuum(k: f64, gamma: f64, d: f64, n_max: usize) -> Result<(usize, f64)> {
    if !(k > 0.0 && gamma > 0.0 && d > 0.0 && n_max >= 1) {
        return Err(Error::domain("cascade gap needs positive k, gamma and D"));
    }
    Ok((1..=n_max)
        .map(|n| (n, d * k * k / n as f64 + n as f64 * gamma))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("n_max >= 1"))
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`
/// (Sturm count).
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        let b2 = if i == 0 { 0.0 } else { off * off };
        q = d - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = 1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `j`-th eigenvalue (from zero) of `-ψ'' + |z| ψ` on `[-z_max, z_max]`
/// with Dirichlet ends, grid spacing `h`.
fn fd_eigenvalue(j: usize, z_max: f64, h: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let n = (2.0 * z_max / h).round() as usize - 1;
    let h = 2.0 * z_max / (n + 1) as f64;
    let z: Vec<f64> = (1..=n).map(|i| -z_max + i as f64 * h).collect();
    let diag: Vec<f64> = z.iter().map(|x| 2.0 / (h * h) + x.abs()).collect();
    let off = -1.0 / (h * h);
    let (mut lo, mut hi) = (0.0, z_max + 4.0 / (h * h));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, off, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let e = 0.5 * (lo + hi);
    (e, z, inverse_iteration(&diag, off, e))
}

/// Eigenvector of a symmetric tridiagonal matrix near the shift `e`.
fn inverse_iteration(diag: &[f64], off: f64, e: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = e + 1e-10 * e.abs().max(1.0);
    let mut v = vec![1.0; n];
    for _ in 0..4 {
        // Thomas algorithm on (T - shift) x = v.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut b = diag[0] - shift;
        c[0] = off / b;
        d[0] = v[0] / b;
        for i in 1..n {
            b = diag[i] - shift - off * c[i - 1];
            c[i] = off / b;
            d[i] = (v[i] - off * d[i - 1]) / b;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = x.into_iter().map(|a| a / norm).collect();
    }
    if v[n / 2] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    v
}

/// Eigenpair of the Airy wedge operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiryState {
    /// Richardson-extrapolated eigenvalue.
    pub epsilon: f64,
    /// Eigenvalues at spacing `h` and `h/2`.
    pub coarse: f64,
    pub fine: f64,
    pub z: Vec<f64>,
    /// Normalized so that `Σ ψ² h = 1`, on the fine grid.
    pub psi: Vec<f64>,
    pub h: f64,
}

impl AiryState {
    /// `⟨z²⟩` under the density `ψ²`.
    pub fn second_moment(&self) -> f64 {
        self.z.iter().zip(&self.psi).map(|(z, p)| z * z * p * p).sum::<f64>() * self.h
    }
}

/// `j`-th state of `(-∂² + |z|)ψ = εψ` on `[-z_max, z_max]`.
pub fn airy_state(j: usize, z_max: f64, h: f64) -> Result<AiryState> {
    if !(z_max > 0.0 && h > 0.0 && h < z_max) {
        return Err(Error::domain("need 0 < h < z_max"));
    }
    let (coarse, _, _) = fd_eigenvalue(j, z_max, h);
    let (fine, z, psi) = fd_eigenvalue(j, z_max, 0.5 * h);
    let hf = z[1] - z[0];
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * hf).sqrt();
    let psi = psi.into_iter().map(|p| p / norm).collect();
    // Second-order scheme: the h² error term cancels.
    let epsilon = (4.0 * fine - coarse) / 3.0;
    Ok(AiryState { epsilon, coarse, fine, z, psi, h: hf })
}

/// Ground state on `[-20, 20]`.
pub fn airy_ground_state() -> Result<AiryState> {
    airy_state(0, 20.0, 0.01)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeProblem {
    pub d_eff: f64,
    /// Coefficient of `|y|` in the potential.
    pub slope: f64,
    /// Range of the exact potential; the wedge is its small-`|y|` form.
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeSolution {
    pub ell_loc: f64,
    pub msd_saturation: f64,
    pub energy: f64,
    /// `ell_loc / xi`; the wedge form needs this small.
    pub locality: f64,
}

/// Ground state of `-D ψ'' + slope |y| ψ = E ψ` via the universal rescaling
/// `y = ℓ z`, `ℓ = (D/slope)^{1/3}`.
pub fn wedge_localization(p: &WedgeProblem, airy: &AiryState) -> Result<WedgeSolution> {
    if !(p.d_eff > 0.0 && p.slope > 0.0 && p.xi > 0.0) {
        return Err(Error::domain("wedge problem parameters must be positive"));
    }
    let ell = (p.d_eff / p.slope).cbrt();
    Ok(WedgeSolution {
        ell_loc: ell,
        msd_saturation: ell * ell * airy.second_moment(),
        energy: p.d_eff.cbrt() * p.slope.powf(2.0 / 3.0) * airy.epsilon,
        locality: ell / p.xi,
    })
}
