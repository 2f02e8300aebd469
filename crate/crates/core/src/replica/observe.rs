//! Observables of Monte Carlo ensembles of the dilute process.

use serde::{Deserialize, Serialize};

use super::dilute::{ReplicaConfig, D, U};

fn z(s: u8) -> f64 {
    match s {
        U => 1.0,
        D => -1.0,
        _ => 0.0,
    }
}

/// `C(d)` for offsets `d = −radius..=radius` measured from the coherence,
/// averaged with the given weights over live clones. Offsets that fall
/// outside the chain are skipped.
pub fn comoving_c_profile<C: AsRef<ReplicaConfig>>(clones: &[C], weights: Option<&[f64]>, radius: usize) -> Vec<f64> {
    let n = 2 * radius + 1;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for (k, c) in clones.iter().enumerate() {
        let c = c.as_ref();
        let Some(x0) = c.coh_pos else { continue };
        if !c.alive {
            continue;
        }
        let w = weights.map_or(1.0, |w| w[k]);
        for (j, d) in (-(radius as isize)..=radius as isize).enumerate() {
            let x = x0 as isize + d;
            if x < 0 || x >= c.len() as isize || d == 0 {
                continue;
            }
            let x = x as usize;
            num[j] += w * z(c.r1[x]) * z(c.r2[x]);
            den[j] += w;
        }
    }
    num.iter().zip(&den).map(|(a, b)| if *b > 0.0 { a / b } else { f64::NAN }).collect()
}

/// `C(x)` over the whole chain, averaged over live clones whose coherence
/// sits at `site` (the return-conditioned overlap of the Green's function
/// `G(site, t)`). Returns the profile and the number of contributing clones.
pub fn c_profile_at<C: AsRef<ReplicaConfig>>(clones: &[C], site: usize) -> (Vec<f64>, usize) {
    let l = clones.first().map_or(0, |c| c.as_ref().len());
    let mut num = vec![0.0; l];
    let mut n = 0usize;
    for c in clones.iter().map(|c| c.as_ref()).filter(|c| c.alive && c.coh_pos == Some(site)) {
        n += 1;
        for x in 0..l {
            num[x] += z(c.r1[x]) * z(c.r2[x]);
        }
    }
    let prof = num
        .iter()
        .enumerate()
        .map(|(x, v)| if n == 0 || x == site { f64::NAN } else { v / n as f64 })
        .collect();
    (prof, n)
}

/// Coherence position and void centre of mass of one clone, relative to `origin`.
///
/// The void is the majority polarized symbol over both replicas; the result
/// has `None` for the centre of mass when no site is polarized.
pub fn polaron_coords(c: &ReplicaConfig, origin: f64) -> Option<(f64, Option<f64>)> {
    let x = c.coh_pos? as f64 - origin;
    let (mut nu, mut nd, mut su, mut sd) = (0usize, 0usize, 0.0, 0.0);
    for r in [&c.r1, &c.r2] {
        for (i, &s) in r.iter().enumerate() {
            match s {
                U => {
                    nu += 1;
                    su += i as f64;
                }
                D => {
                    nd += 1;
                    sd += i as f64;
                }
                _ => {}
            }
        }
    }
    let com = if nu == 0 && nd == 0 {
        None
    } else if nu > nd {
        Some(su / nu as f64 - origin)
    } else if nd > nu {
        Some(sd / nd as f64 - origin)
    } else {
        // Tie: break towards the symbol nearer the coherence on average.
        let cu = su / nu.max(1) as f64 - origin;
        let cd = sd / nd.max(1) as f64 - origin;
        Some(if (cu - x).abs() <= (cd - x).abs() && nu > 0 { cu } else { cd })
    };
    Some((x, com))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolaronMoments {
    pub t: f64,
    pub n: usize,
    /// Clones with no polarized symbol, excluded from the COM averages.
    pub excluded: usize,
    pub msd_x: f64,
    pub msd_com: f64,
    pub msd_rel: f64,
    pub mean_x: f64,
}

/// Equal-weight moments of an (already resampled) ensemble.
pub fn polaron_moments<C: AsRef<ReplicaConfig>>(t: f64, clones: &[C], origin: f64) -> PolaronMoments {
    let mut m = PolaronMoments { t, ..Default::default() };
    let (mut sx, mut sx2, mut sc2, mut sr2, mut nc) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for c in clones.iter().map(|c| c.as_ref()).filter(|c| c.alive) {
        let Some((x, com)) = polaron_coords(c, origin) else { continue };
        m.n += 1;
        sx += x;
        sx2 += x * x;
        match com {
            Some(xc) => {
                nc += 1;
                sc2 += xc * xc;
                sr2 += (x - xc).powi(2);
            }
            None => m.excluded += 1,
        }
    }
    if m.n > 0 {
        m.mean_x = sx / m.n as f64;
        m.msd_x = sx2 / m.n as f64;
    }
    if nc > 0 {
        m.msd_com = sc2 / nc as f64;
        m.msd_rel = sr2 / nc as f64;
    }
    m
}

/// Normalized coherence-position histogram over the chain.
pub fn position_histogram<C: AsRef<ReplicaConfig>>(clones: &[C], l: usize) -> Vec<f64> {
    let mut h = vec![0.0; l];
    let mut n = 0.0;
    for c in clones.iter().map(|c| c.as_ref()).filter(|c| c.alive) {
        if let Some(x) = c.coh_pos {
            h[x] += 1.0;
            n += 1.0;
        }
    }
    if n > 0.0 {
        for v in h.iter_mut() {
            *v /= n;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::dilute::{COH, I};

    #[test]
    fn majority_com() {
        let c = ReplicaConfig {
            r1: vec![I, D, D, COH, D, U, I],
            r2: vec![I, D, D, COH, D, D, I],
            coh_pos: Some(3),
            log_weight: 0.0,
            alive: true,
        };
        let (x, com) = polaron_coords(&c, 3.0).unwrap();
        assert_eq!(x, 0.0);
        // d sites: 1,2,4 in r1 and 1,2,4,5 in r2 -> mean 19/7.
        assert!((com.unwrap() - (19.0 / 7.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn c_profile_signs() {
        let c = ReplicaConfig { r1: vec![U, COH, D], r2: vec![D, COH, D], coh_pos: Some(1), log_weight: 0.0, alive: true };
        let p = comoving_c_profile(&[c], None, 1);
        assert_eq!(p[0], -1.0);
        assert_eq!(p[2], 1.0);
        assert!(p[1].is_nan());
    }
}
