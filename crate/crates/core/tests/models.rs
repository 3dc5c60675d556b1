use nahm::cache::{load_kernel, load_path, save_kernel, save_path, Container};
use nahm::curvature::energy_charge;
use nahm::dirac::{assemble_dirac, kernel, Which};
use nahm::grid::{Discretization, Twist, Weight};
use nahm::models::{builtin_model, check_flat_path, make_abelian_path, make_cutoff_interpolation, partition, perturb, Profile};
use nahm::torus::{singular_set, End};
use nahm::Error;

fn disc() -> Discretization {
    Discretization::new(4.0, 161, 1, 2).unwrap()
}

#[test]
fn builtin_singular_set_lies_on_the_fine_lattice() {
    let path = builtin_model().to_connection(&nahm::models::builtin_disc()).unwrap();
    let set = singular_set(&path.limits.1, &path.limits.0);
    assert_eq!(set.len(), 4);
    for p in set {
        for x in p.coords {
            assert!((32.0 * x - (32.0 * x).round()).abs() < 1e-12);
        }
    }
}

#[test]
fn abelian_energy_matches_closed_form_and_carries_no_charge() {
    for profile in [Profile::LinearSmoothed, Profile::Tanh] {
        let ab = make_abelian_path([0.1, 0.05, 0.0], [0.3, 0.1, -0.05], profile, 1.0);
        let d = Discretization::new(6.0, 1201, 1, 2).unwrap();
        let fi = energy_charge(&ab.to_connection(&d).unwrap(), &d).unwrap();
        assert!((fi.energy - ab.energy()).abs() < 1e-3 * ab.energy(), "{profile:?}: {} vs {}", fi.energy, ab.energy());
        assert!(fi.charge.abs() < 1e-12);
    }
}

#[test]
fn perturbation_decays_at_the_requested_rate() {
    let base = builtin_model().to_connection(&disc()).unwrap();
    let p = perturb(&base, 0.2, 2.0, 3).unwrap();
    let n = disc().n_t;
    let (a, b) = (p.deviation(n - 1, End::Plus), p.deviation(n - 41, End::Plus));
    let (ta, tb) = (disc().time(n - 41), disc().time(n - 1));
    let rate = (b / a).ln() / (tb - ta);
    let want = 2.0 * ((tb * tb + 1.0f64).sqrt() - (ta * ta + 1.0f64).sqrt()) / (tb - ta);
    assert!((rate - want).abs() < 1e-6, "rate {rate} vs {want}");
    assert_eq!(perturb(&base, 0.2, 2.0, 3).unwrap().samples, p.samples);
    assert_ne!(perturb(&base, 0.2, 2.0, 4).unwrap().samples, p.samples);
}

#[test]
fn partition_of_unity() {
    for k in 0..=80 {
        let t = -4.0 + 0.1 * k as f64;
        let (m, c, p) = partition(t, 1.5);
        assert!((m + c + p - 1.0).abs() < 1e-15 && m >= 0.0 && c >= 0.0 && p >= 0.0);
        if t.abs() <= 1.5 {
            assert_eq!(c, 1.0);
        }
        if t >= 2.5 {
            assert_eq!(p, 1.0);
        }
    }
}

#[test]
fn cutoff_interpolation_ends_on_the_flat_limits() {
    let base = perturb(&builtin_model().to_connection(&disc()).unwrap(), 0.2, 2.0, 5).unwrap();
    let ci = make_cutoff_interpolation(&base, 2.0, Some(Twist([0.35, -0.2, 0.15]))).unwrap();
    let n = disc().n_t;
    assert!(ci.a_r.deviation(0, End::Minus) < 1e-14 && ci.a_r.deviation(n - 1, End::Plus) < 1e-14);
    let a1 = ci.a_rs(1.0).unwrap();
    assert_eq!(a1.end_w[0], base.end_w[1]);
    assert!(make_cutoff_interpolation(&base, 3.5, None).is_err());
    let ab = builtin_model();
    let mid = [0, 1, 2].map(|i| 0.5 * (ab.w_minus[i] + ab.w_plus[i]));
    assert!(matches!(check_flat_path(ab.w_minus, ab.w_plus, Twist(mid)), Err(Error::WallHit(_))));
}

#[test]
fn kernel_and_path_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = Discretization::new(3.0, 121, 1, 2).unwrap();
    let path = builtin_model().to_connection(&d).unwrap();
    let z = [6.5 / 32.0, 5.5 / 32.0, 4.0 / 32.0];
    let kr = kernel(&assemble_dirac(&path, z, Weight::ZERO, &d, Which::DStar).unwrap(), 4).unwrap();
    assert_eq!(kr.dim_ker, 1);
    let stem = dir.path().join("kernel");
    save_kernel(&stem, &kr, Twist(z), Weight::ZERO, &d).unwrap();
    let (basis, side) = load_kernel(&stem).unwrap();
    assert_eq!(basis.len(), 1);
    assert_eq!(basis[0].values, kr.basis[0].values);
    assert_eq!(side.singular_values, kr.singular_values);

    let pstem = dir.path().join("path");
    save_path(&pstem, &path).unwrap();
    let back = load_path(&pstem).unwrap();
    assert_eq!(back.samples, path.samples);
    assert_eq!(back.end_w, path.end_w);

    std::fs::write(pstem.with_extension("nahm"), b"NAHM\x02\x00\x00\x00").unwrap();
    assert!(matches!(Container::load(&pstem.with_extension("nahm")), Err(Error::Format(_))));
}
