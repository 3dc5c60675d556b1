use nahm::dirac::Which;
use nahm::field::SpinorField;
use nahm::grid::Discretization;
use nahm::linalg::{abs2, C64};
use nahm::models::{builtin_model, make_abelian_path, perturb, Profile};
use nahm::path::ConnectionPath;
use nahm::torus::{safe_radius, singular_set, TorusPoint};
use nahm::transform::{
    assemble_monopole, bogomolny_residual, clifford_two_form, curvature_identity_check, gauge_periodicity, monopole_records,
    rank_audit, self_dual_contraction, transform_fiber, Greens, TreeOrder, ZBox,
};
use nahm::Error;
use std::f64::consts::PI;

fn disc() -> Discretization {
    Discretization::new(3.0, 121, 1, 2).unwrap()
}

fn wavy(d: Discretization, seed: f64) -> SpinorField {
    SpinorField::from_fn(d, |t, n, c| {
        let a = seed + 0.9 * t + 1.7 * n[0] as f64 - 0.6 * n[1] as f64 + 0.3 * n[2] as f64 + 1.1 * c as f64;
        C64::new(a.sin(), (2.0 * a).cos())
    })
}

fn perturbed() -> ConnectionPath {
    perturb(&builtin_model().to_connection(&disc()).unwrap(), 0.3, 2.0, 7).unwrap()
}

fn on_segment(s: f64) -> [f64; 3] {
    let ab = builtin_model();
    [0, 1, 2].map(|i| ab.w_minus[i] + (ab.w_plus[i] - ab.w_minus[i]) * s)
}

#[test]
fn greens_inverts_the_normal_operator() {
    let path = perturbed();
    let g = Greens::new(&path, [0.2, -0.3, 0.4], &disc()).unwrap();
    assert_eq!(g.op.which, Which::DStar);
    let x = wavy(g.op.range_disc(), 0.5);
    let (y, stats) = g.solve(&g.normal_apply(&x)).unwrap();
    let err = y.sub(&x).midpoint_inner(&y.sub(&x)).re.sqrt() / x.midpoint_inner(&x).re.sqrt();
    assert!(err < 1e-8, "relative error {err}, {stats:?}");
    assert!(stats.iterations > 1);
}

#[test]
fn projector_kills_the_adjoint_range_and_vanishes_without_kernel() {
    let path = perturbed();
    let g = Greens::new(&path, [0.2, -0.3, 0.4], &disc()).unwrap();
    let r = g.op.apply_adjoint(&wavy(g.op.range_disc(), 1.0));
    assert!(g.project(&r).unwrap().norm() < 1e-8 * r.norm());
    let psi = wavy(disc(), 2.0);
    assert!(g.project(&psi).unwrap().norm() < 1e-8 * psi.norm());
}

#[test]
fn greens_refuses_a_cokernel() {
    let path = builtin_model().to_connection(&disc()).unwrap();
    assert!(matches!(Greens::new(&path, on_segment(0.5), &disc()), Err(Error::NotInvertible(_))));
    assert!(matches!(Greens::new(&path, builtin_model().w_plus, &disc()), Err(Error::NotInvertible(_))));
    let phi = wavy(disc(), 0.0);
    let r = curvature_identity_check(&path, on_segment(0.3), &phi, &phi, 0, 1, &disc(), 1e-3);
    assert!(matches!(r, Err(Error::NotInvertible(_))));
}

#[test]
fn higgs_field_is_anti_hermitian_and_centred() {
    let path = builtin_model().to_connection(&disc()).unwrap();
    let tp = transform_fiber(&path, on_segment(0.5), &disc(), 4).unwrap();
    assert_eq!((tp.rank, tp.index), (1, 0));
    let h = &tp.higgs;
    for a in 0..tp.rank {
        for b in 0..tp.rank {
            assert!(abs2(h.read(a, b) + h.read(b, a).conj()) < 1e-24);
        }
    }
    // a symmetric profile crosses z at t = 0, where the section concentrates
    assert!(tp.higgs_eigenvalues()[0].abs() < 1e-6);
    assert!((tp.basis[0].norm() - 1.0).abs() < 1e-12);
}

/// `⟨t⟩` of the exact crossing section `|u|² ∝ exp(−4π|Δ| ∫₀ᵗ (p − s))`.
fn mean_time(ab: &nahm::models::AbelianPath, s: f64, t_max: f64) -> f64 {
    let dw: f64 = (0..3).map(|i| (ab.w_plus[i] - ab.w_minus[i]).powi(2)).sum::<f64>().sqrt();
    let n = 40001;
    let h = 2.0 * t_max / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|k| -t_max + h * k as f64).collect();
    let mut expo = vec![0.0; n];
    for k in 1..n {
        let f = |t: f64| ab.progress(t) - s;
        expo[k] = expo[k - 1] - 4.0 * PI * dw * 0.5 * h * (f(ts[k - 1]) + f(ts[k]));
    }
    let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let q = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * (expo[k] - top).exp();
        num += q * ts[k];
        den += q;
    }
    num / den
}

#[test]
fn higgs_matches_the_exact_section() {
    let ab = make_abelian_path([0.1, 0.05, 0.0], [0.3, 0.1, -0.05], Profile::LinearSmoothed, 1.0);
    let d = Discretization::new(4.0, 321, 1, 2).unwrap();
    let path = ab.to_connection(&d).unwrap();
    for s in [0.3, 0.5, 0.7] {
        let z = [0, 1, 2].map(|i| ab.w_minus[i] + (ab.w_plus[i] - ab.w_minus[i]) * s);
        assert_eq!(ab.crossings(z, 4000).len(), 1);
        let ev = transform_fiber(&path, z, &d, 4).unwrap().higgs_eigenvalues()[0];
        let want = 2.0 * PI * mean_time(&ab, s, d.t_max);
        assert!((ev - want).abs() < 5e-3, "s = {s}: {ev} vs {want}");
    }
}

#[test]
fn rank_zero_monopole_is_flagged_in_both_tree_orders() {
    let path = perturbed();
    let zbox = ZBox { origin: [-0.4, 0.3, 0.1], step: 0.05, n: [2, 3, 2] };
    for l in 0..zbox.len() {
        assert_eq!(zbox.linear(zbox.unlinear(l)), l);
    }
    for order in [TreeOrder::Xyz, TreeOrder::Zyx] {
        let m = assemble_monopole(&path, zbox, &disc(), 2, order).unwrap();
        assert_eq!(m.rank, 0);
        assert!(bogomolny_residual(&m).unwrap().rank_zero);
        assert_eq!(monopole_records(&m).unwrap().len(), zbox.len());
    }
}

#[test]
fn two_forms_are_antisymmetric_and_self_dual_part_vanishes() {
    for a in 0..4 {
        for b in 0..4 {
            let (x, y) = (clifford_two_form(a, b), clifford_two_form(b, a));
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    assert!(abs2(x.read(i, j) + y.read(i, j)) < 1e-28);
                }
            }
        }
    }
    assert!(self_dual_contraction() <= 1e-14);
}

#[test]
fn audits_close_near_a_singular_point() {
    let path = builtin_model().to_connection(&disc()).unwrap();
    let w = path.end_w[1];
    let set = singular_set(&path.limits.1, &path.limits.0);
    let r = safe_radius(TorusPoint::new(w), &set, 2.0).unwrap();
    let z = [w[0] + 0.5 * r, w[1], w[2]];
    let a = rank_audit(&path, z, 2.0 * PI * r, &disc(), 4).unwrap();
    assert_eq!(a.residuals, [0, 0, 0]);
    assert_eq!(a.h, a.rk_h_case);
    assert_eq!(a.w_prime, a.w_prime_direct);
}

#[test]
fn integer_shifts_of_the_twist_are_gauge_equivalent() {
    let path = builtin_model().to_connection(&disc()).unwrap();
    for shift in [[1, 0, 0], [0, -1, 0], [0, 0, 1]] {
        let pc = gauge_periodicity(&path, on_segment(0.4), shift, &disc(), 2).unwrap();
        assert_eq!(pc.rank, [1, 1]);
        assert!(pc.spectrum_diff < 1e-8 && pc.kernel_diff < 1e-8, "{pc:?}");
    }
}
