//! Statistical checks of the stochastic engines against exact distributions.

use polaron_core::cloning::{run_population, FiniteChain, PopulationConfig};
use polaron_core::gas::{evolve_gas, random_gas, GasState};
use polaron_core::replica::dense::{survival, DenseEvolver, DenseState, MapKind};
use polaron_core::replica::dilute::{step_dilute_mc, DiluteParams, EnvInit, ReplicaConfig, D, U};
use polaron_core::replica::{BondParams, LATTICE_D};
use polaron_core::rng::stream;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Pearson statistic and its upper-tail probability.
fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    ChiSquared::new((observed.len() - 1) as f64).unwrap().sf(stat)
}

fn void_walker(l: usize, x0: usize, env: u8, seed: u64, k: u64) -> ReplicaConfig {
    ReplicaConfig::new(l, x0, EnvInit::Polarized(env), &mut stream(seed, k, 0)).unwrap()
}

#[test]
fn free_walk_one_period_is_uniform_on_four_sites() {
    // From an even site the two half-steps each move with probability 1/2,
    // giving displacements -1, 0, 1, 2 with equal weight.
    let p = DiluteParams::new(0.0, BondParams::default()).unwrap();
    let mut counts = [0.0; 4];
    let n = 40_000;
    for k in 0..n {
        let mut c = void_walker(20, 10, U, 101, k);
        step_dilute_mc(&mut c, &p, &mut stream(101, k, 1));
        let d = c.coh_pos.unwrap() as i64 - 10;
        counts[(d + 1) as usize] += 1.0;
    }
    let p_value = chi_square(&counts, &[n as f64 / 4.0; 4]);
    assert!(p_value > 1e-4, "{counts:?} p = {p_value}");
}

#[test]
fn free_walk_diffuses_with_lattice_constant() {
    let p = DiluteParams::new(0.0, BondParams::default()).unwrap();
    let (l, x0, t, n) = (200, 100, 60, 10_000u64);
    let mut sum2 = 0.0;
    for k in 0..n {
        let mut c = void_walker(l, x0, D, 202, k);
        let mut rng = stream(202, k, 1);
        for _ in 0..t {
            step_dilute_mc(&mut c, &p, &mut rng);
        }
        sum2 += (c.coh_pos.unwrap() as f64 - x0 as f64).powi(2);
    }
    let msd = sum2 / n as f64;
    let expect = 2.0 * LATTICE_D * t as f64;
    // Relative standard error is about sqrt(2 / n) = 1.4%.
    assert!((msd / expect - 1.0).abs() < 0.06, "msd {msd} expected {expect}");
}

#[test]
fn dilute_mc_reproduces_dense_survival() {
    let (l, x0, gamma, t_max, n) = (5, 2, 0.08, 6, 40_000u64);
    let ev = DenseEvolver::new(l, gamma, BondParams::default(), MapKind::Dilute).unwrap();
    let mut st = DenseState::coherence_in_identity(l, x0).unwrap();
    let p = DiluteParams::new(gamma, BondParams::default()).unwrap();
    let mut samples: Vec<ReplicaConfig> =
        (0..n).map(|k| ReplicaConfig::new(l, x0, EnvInit::Identity, &mut stream(303, k, 0)).unwrap()).collect();
    for t in 1..=t_max {
        ev.step(&mut st).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (k, c) in samples.iter_mut().enumerate() {
            step_dilute_mc(c, &p, &mut stream(303, k as u64, t));
            let w = if c.alive { c.log_weight.exp() } else { 0.0 };
            s1 += w;
            s2 += w * w;
        }
        let m = s1 / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        let z = (m - survival(&st)) / se;
        assert!(z.abs() < 4.0, "t = {t}: mc {m} dense {} z {z}", survival(&st));
    }
}

#[test]
fn cloning_matches_three_state_chain() {
    let chain = FiniteChain {
        transition: vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]],
        kill: vec![0.0, 0.6, 2.0],
        dt: 0.1,
    };
    let exact = chain.exact_rate().unwrap();
    let cfg = PopulationConfig { clones: 4000, steps: 400, burn_in: 0.0, window: (10.0, 40.0), seed: 404, bootstrap: 100 };
    let est = run_population(&chain, &cfg, |_, _| {}).unwrap();
    let z = (est.lambda_qss - exact) / est.stderr;
    assert!(z.abs() < 4.0 && (est.lambda_qss / exact - 1.0).abs() < 0.02, "exact {exact} est {} z {z}", est.lambda_qss);
}

#[test]
fn equilibrium_bath_is_poisson() {
    let l = 12.0;
    let n = 20_000u64;
    let hist = count_histogram((0..n).map(|k| GasState::equilibrium(l, &mut stream(505, k, 0)).unwrap().len()));
    assert_poisson(&hist, l / 2.0, n);
}

#[test]
fn open_bath_relaxes_to_poisson_occupation() {
    // Injection at rate gamma L / 2 and loss at rate gamma per particle give
    // a Poisson(L / 2) occupation in the steady state.
    let (l, gamma, dt) = (10.0, 0.5, 0.05);
    let n = 4000u64;
    let hist = count_histogram((0..n).map(|k| {
        let mut rng = stream(606, k, 0);
        let mut g = random_gas(l, 0, &mut rng).unwrap();
        for _ in 0..(30.0 / (gamma * dt)) as usize {
            evolve_gas(&mut g, dt, gamma, &mut rng);
        }
        g.len()
    }));
    assert_poisson(&hist, l / 2.0, n);
}

fn count_histogram(counts: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut h = vec![0.0; 64];
    for c in counts {
        h[c.min(63)] += 1.0;
    }
    h
}

/// Chi-square against Poisson(mean), pooling tails with expectation below 5.
fn assert_poisson(hist: &[f64], mean: f64, n: u64) {
    let pois = Poisson::new(mean).unwrap();
    let (mut obs, mut exp) = (vec![], vec![]);
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (k, h) in hist.iter().enumerate() {
        o_acc += h;
        e_acc += n as f64 * pois.pmf(k as u64);
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    *obs.last_mut().unwrap() += o_acc;
    *exp.last_mut().unwrap() += e_acc + n as f64 * (1.0 - exp.iter().sum::<f64>() / n as f64 - e_acc / n as f64).max(0.0);
    let p = chi_square(&obs, &exp);
    assert!(p > 1e-4, "p = {p}, observed {obs:?}, expected {exp:?}");
}
