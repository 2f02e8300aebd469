//! Local two-replica bond map from Haar averages over U(1)-symmetric gates.
//!
//! A gate on two qubits is block diagonal in the charge `n_x + n_{x+1}`:
//! independent Haar blocks of size 1, 2, 1. Both replicas evolve in the
//! Heisenberg picture, `O ↦ U† O U`, with replica 2 carrying the adjoint
//! operator. The second-moment average is taken with the 2×2 Weingarten
//! function (`Wg(e) = 1/3`, `Wg((12)) = −1/6`).

use super::{Sym, NSYM};

/// Per-site two-replica state as matrix units `E_{ab}` on each replica.
struct Units {
    r1: (usize, usize),
    r2: (usize, usize),
    scale: f64,
}

fn units(s: Sym) -> Units {
    // Basis |0> = down, |1> = up; σ+ = E_{10}, σ− = E_{01}.
    match s {
        Sym::DD => Units { r1: (0, 0), r2: (0, 0), scale: 1.0 },
        Sym::DU => Units { r1: (0, 0), r2: (1, 1), scale: 1.0 },
        Sym::UD => Units { r1: (1, 1), r2: (0, 0), scale: 1.0 },
        Sym::UU => Units { r1: (1, 1), r2: (1, 1), scale: 1.0 },
        Sym::P => Units { r1: (1, 0), r2: (0, 1), scale: 2.0 },
        Sym::M => Units { r1: (0, 1), r2: (1, 0), scale: 2.0 },
    }
}

fn block_of(i: usize) -> (usize, usize) {
    match i {
        0 => (0, 0),
        1 => (1, 0),
        2 => (1, 1),
        _ => (2, 0),
    }
}

/// `E[U_{j1 l1} U_{j2 l2} conj(U_{i1 k1}) conj(U_{i2 k2})]` for the block gate.
fn moment(us: [(usize, usize); 2], ucs: [(usize, usize); 2]) -> f64 {
    let mut by_block: [(Vec<(usize, usize)>, Vec<(usize, usize)>); 3] = Default::default();
    for &(r, c) in &us {
        let (br, ir) = block_of(r);
        let (bc, ic) = block_of(c);
        if br != bc {
            return 0.0;
        }
        by_block[br].0.push((ir, ic));
    }
    for &(r, c) in &ucs {
        let (br, ir) = block_of(r);
        let (bc, ic) = block_of(c);
        if br != bc {
            return 0.0;
        }
        by_block[br].1.push((ir, ic));
    }
    let mut value = 1.0;
    for (b, (u, uc)) in by_block.iter().enumerate() {
        if u.len() != uc.len() {
            return 0.0;
        }
        if b != 1 || u.is_empty() {
            continue;
        }
        value *= match u.len() {
            1 => {
                if u[0] == uc[0] { 0.5 } else { 0.0 }
            }
            _ => weingarten_2(u, uc),
        };
    }
    value
}

fn weingarten_2(u: &[(usize, usize)], uc: &[(usize, usize)]) -> f64 {
    let perms: [[usize; 2]; 2] = [[0, 1], [1, 0]];
    let mut acc = 0.0;
    for (si, sigma) in perms.iter().enumerate() {
        if !(0..2).all(|k| u[k].0 == uc[sigma[k]].0) {
            continue;
        }
        for (ti, tau) in perms.iter().enumerate() {
            if !(0..2).all(|k| u[k].1 == uc[tau[k]].1) {
                continue;
            }
            acc += if si == ti { 1.0 / 3.0 } else { -1.0 / 6.0 };
        }
    }
    acc
}

/// Coefficient of the output two-site operator `E_{kl} ⊠ E_{k'l'}` produced
/// from the input `E_{IJ} ⊠ E_{I'J'}` (two-site indices `2 n_x + n_{x+1}`).
pub fn doubled_coefficient(i: usize, j: usize, ip: usize, jp: usize, k: usize, l: usize, kp: usize, lp: usize) -> f64 {
    // (U† E_{IJ} U)_{kl} = conj(U_{I k}) U_{J l}
    moment([(j, l), (jp, lp)], [(i, k), (ip, kp)])
}

/// Dense 36×36 bond map, `m[out][in]` with pair index `6 a + b`.
pub type BondMap = [[f64; NSYM * NSYM]; NSYM * NSYM];

fn two_site(a: &Units, b: &Units) -> (usize, usize, usize, usize) {
    (
        2 * a.r1.0 + b.r1.0,
        2 * a.r1.1 + b.r1.1,
        2 * a.r2.0 + b.r2.0,
        2 * a.r2.1 + b.r2.1,
    )
}

/// Exact circuit-averaged bond map on the six-state space.
pub fn haar_bond_map() -> BondMap {
    let mut m = [[0.0; 36]; 36];
    for a in Sym::ALL {
        for b in Sym::ALL {
            let (ua, ub) = (units(a), units(b));
            let (i, j, ip, jp) = two_site(&ua, &ub);
            for c in Sym::ALL {
                for d in Sym::ALL {
                    let (uc, ud) = (units(c), units(d));
                    let (k, l, kp, lp) = two_site(&uc, &ud);
                    let coef = doubled_coefficient(i, j, ip, jp, k, l, kp, lp);
                    let scale = ua.scale * ub.scale / (uc.scale * ud.scale);
                    m[c as usize * 6 + d as usize][a as usize * 6 + b as usize] = coef * scale;
                }
            }
        }
    }
    m
}

/// Bond map with the coherence-pair creation channels removed.
pub fn dilute_bond_map() -> BondMap {
    let mut m = haar_bond_map();
    for a in Sym::DIAGONAL {
        for b in Sym::DIAGONAL {
            let input = a as usize * 6 + b as usize;
            for c in Sym::ALL {
                for d in Sym::ALL {
                    if c.is_coherence() || d.is_coherence() {
                        m[c as usize * 6 + d as usize][input] = 0.0;
                    }
                }
            }
        }
    }
    m
}
