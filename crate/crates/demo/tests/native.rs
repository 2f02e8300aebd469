use polaron_demo::{kls_dispersion, pinned_rate, void_profile, DEMO_MAX_SITES};

#[test]
fn profile_runs_from_empty_to_half() {
    let p = void_profile(0.5, 8.0).unwrap();
    assert!(p.rho[0].abs() < 1e-12);
    assert!((p.rho.last().unwrap() - 0.5).abs() < 0.01);
    assert!(p.z.len() <= 401 && p.z.len() == p.rho.len());
    assert!(p.hat_lambda > 0.0);
}

#[test]
fn pinned_rate_approaches_closed_form() {
    let c = pinned_rate(1.0, 0.04, 0.5, 150.0).unwrap();
    assert!((c.r.last().unwrap() / c.r0 - 1.0).abs() < 1e-2);
    assert_eq!(c.t.len(), c.r.len());
}

#[test]
fn dispersion_matches_single_magnon_at_delta_zero() {
    let d = kls_dispersion(8, 0.0, 0.5).unwrap();
    // Large gamma: the single magnon is the slowest mode at every k > 0.
    for (l, s) in d.lambda.iter().zip(&d.single_magnon).skip(1) {
        assert!((l - s).abs() < 1e-10);
    }
    assert!(kls_dispersion(DEMO_MAX_SITES + 1, 0.0, 0.1).is_err());
}
