use nahm::dirac::{
    asymptotic_fit, assemble_dirac, is_fredholm, kernel, null_space, spectral_flow_report, weitzenbock_residual, Which,
};
use nahm::field::{fiber_index, SpinorField};
use nahm::grid::{Discretization, Weight};
use nahm::linalg::{abs2, C64};
use nahm::models::{make_abelian_path, Profile};
use nahm::torus::{helicity_spinor, mode_momentum, Branch};
use nahm::Error;
use std::f64::consts::PI;

fn noise(disc: Discretization, seed: u64) -> SpinorField {
    SpinorField::from_fn(disc, |t, n, c| {
        let a = seed as f64 + 1.3 * t + 0.7 * n[0] as f64 - 0.4 * n[1] as f64 + 0.9 * n[2] as f64 + 2.1 * c as f64;
        C64::new((3.7 * a).sin(), (5.3 * a).cos())
    })
}

#[test]
fn generic_flat_twist_has_no_kernel_or_cokernel() {
    let disc = Discretization::new(3.0, 121, 1, 2).unwrap();
    let w = [0.1, 0.05, 0.0];
    let path = make_abelian_path(w, w, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let kr = kernel(&assemble_dirac(&path, [0.3, 0.2, 0.1], Weight::ZERO, &disc, Which::DStar).unwrap(), 4).unwrap();
    assert_eq!((kr.dim_ker, kr.dim_coker, kr.index), (0, 0, 0));
    assert!(kr.threshold_report.gap_ratio > 10.0);
}

#[test]
fn adjoint_matches_apply() {
    let disc = Discretization::new(2.0, 41, 1, 2).unwrap();
    let path = make_abelian_path([0.1, 0.05, 0.0], [0.3, 0.1, -0.05], Profile::Tanh, 1.0).to_connection(&disc).unwrap();
    for which in [Which::D, Which::DStar] {
        let op = assemble_dirac(&path, [0.2, -0.1, 0.3], Weight::ZERO, &disc, which).unwrap();
        let phi = nahm::transform::restrict(&op, &noise(disc, 1));
        let psi = noise(op.range_disc(), 2);
        let lhs = op.apply(&phi).midpoint_inner(&psi);
        let rhs = phi.inner(&op.apply_adjoint(&psi));
        assert!(abs2(lhs - rhs).sqrt() < 1e-10 * abs2(lhs).sqrt().max(1.0), "{which:?}: {lhs:?} vs {rhs:?}");
    }
}

#[test]
fn weitzenbock_vanishes_on_flat_paths() {
    let disc = Discretization::new(2.5, 401, 1, 2).unwrap();
    let w = [0.2, -0.1, 0.05];
    let path = make_abelian_path(w, w, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let phi = SpinorField::from_fn(disc, |t, n, c| C64::new((-(t * t)).exp() * (1.0 + c as f64), n[2] as f64 * 0.1));
    assert!(weitzenbock_residual(&path, [0.3, 0.0, 0.1], &phi, &disc).unwrap() < 1e-10);
}

#[test]
fn twist_on_the_path_gives_a_balanced_pair() {
    let disc = Discretization::new(3.0, 121, 1, 2).unwrap();
    let (wm, wp) = ([0.1, 0.05, 0.0], [0.3, 0.1, -0.05]);
    let path = make_abelian_path(wm, wp, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let z = [0.2, 0.075, -0.025];
    let kr = kernel(&assemble_dirac(&path, z, Weight::ZERO, &disc, Which::DStar).unwrap(), 4).unwrap();
    assert_eq!((kr.dim_ker, kr.dim_coker), (1, 1));
    let sf = spectral_flow_report(&path, z, &disc).unwrap();
    assert_eq!(sf.flow, 0);
    assert!(!sf.events.is_empty());
}

#[test]
fn fredholm_fails_exactly_on_end_spectra() {
    let disc = Discretization::new(2.0, 41, 1, 2).unwrap();
    let w = [0.1, 0.05, 0.0];
    let path = make_abelian_path(w, w, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let z = [0.1, 0.05, 0.2];
    let lam = 2.0 * PI * 0.2;
    assert!(is_fredholm(&path, z, Weight::ZERO));
    assert!(!is_fredholm(&path, z, Weight::new(0.0, lam)));
    assert!(!is_fredholm(&path, z, Weight::new(-lam, 0.0)));
    assert!(!is_fredholm(&path, w, Weight::ZERO));
}

fn flat_sigma_min(n_t: usize) -> f64 {
    let disc = Discretization::new(3.0, n_t, 1, 2).unwrap();
    let w = [0.3, 0.0, 0.0];
    let path = make_abelian_path(w, w, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let ns = null_space(&assemble_dirac(&path, [0.0, 0.0, 0.0], Weight::ZERO, &disc, Which::DStar).unwrap(), 2).unwrap();
    assert_eq!(ns.dim, 0);
    ns.singular_values[0]
}

#[test]
fn flat_smallest_singular_value_sits_at_the_gap_and_refines() {
    let gap = 2.0 * PI * 0.3;
    let s = [61, 121, 241].map(flat_sigma_min);
    assert!(s[2] >= gap - 1e-3, "{s:?} vs {gap}");
    let ratio = (s[0] - s[1]) / (s[1] - s[2]);
    assert!(ratio >= 3.5, "refinement ratio {ratio}");
}

#[test]
fn growing_weight_admits_the_decaying_mode_count() {
    // with δ₊ above the first positive level, that eigenspace becomes admissible
    let disc = Discretization::new(3.0, 121, 1, 2).unwrap();
    let w = [0.1, 0.05, 0.0];
    let path = make_abelian_path(w, w, Profile::LinearSmoothed, 1.0).to_connection(&disc).unwrap();
    let z = [0.1, 0.05, 0.15];
    let lam = 2.0 * PI * 0.15;
    let at = |d: Weight| kernel(&assemble_dirac(&path, z, d, &disc, Which::DStar).unwrap(), 6).unwrap().index;
    assert_eq!(at(Weight::new(0.0, lam - 0.1)) - at(Weight::new(0.0, lam + 0.1)), -1);
}

#[test]
fn asymptotic_fit_recovers_a_pure_exponential() {
    let disc = Discretization::new(4.0, 201, 1, 2).unwrap();
    let (w, z) = ([0.1, 0.05, 0.0], [0.25, 0.1, 0.05]);
    let k = mode_momentum([0, 0, 0], Branch::Plus, w, z);
    let lam = 2.0 * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let v = helicity_spinor(k, 1.0);
    let f0 = fiber_index(disc.modes().index([0, 0, 0]).unwrap(), 0, 0);
    let mut phi = SpinorField::zeros(disc);
    for j in 0..disc.n_t {
        let e = (-lam * disc.time(j)).exp();
        let node = phi.node_mut(j);
        node[f0] = v[0] * e;
        node[f0 + 1] = v[1] * e;
    }
    let fit = asymptotic_fit(&phi, w, z, (1.5, 4.0)).unwrap();
    assert!((fit.lambda_hat + lam).abs() < 1e-8, "{} vs {}", fit.lambda_hat, -lam);
    assert!((fit.level.abs() - lam).abs() < 1e-9);
    assert!(fit.remainder_max < 1e-8);
    assert!(matches!(asymptotic_fit(&phi, w, z, (3.9, 4.0)), Err(Error::WindowTooShort(_))));
}
