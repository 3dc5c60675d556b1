use nahm::grid::ModeBox;
use nahm::torus::{
    dist_to_set, eigenspace_rank_formula, exact_spectrum, safe_radius, singular_set, End, FlatLimit, TorusPoint,
};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Every `2π|n ± w − z|` with the sign of both helicities, by enumeration.
fn brute_spectrum(w: [f64; 3], z: [f64; 3], cutoff: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for n in ModeBox::new(4).modes() {
        for s in [1.0, -1.0] {
            let k: f64 = (0..3).map(|i| (n[i] as f64 + s * w[i] - z[i]).powi(2)).sum::<f64>().sqrt();
            let lam = 2.0 * PI * k;
            if lam <= cutoff {
                out.push(lam);
                out.push(-lam);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_matches_enumeration(w in point(), z in point()) {
        let got = exact_spectrum(TorusPoint::new(w), TorusPoint::new(z), 9.0).expanded();
        let want = brute_spectrum(w, z, 9.0);
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn spectrum_is_periodic_and_symmetric(w in point(), z in point(), n in -3i32..3) {
        let a = exact_spectrum(TorusPoint::new(w), TorusPoint::new(z), 7.0);
        let b = exact_spectrum(TorusPoint::new(w), TorusPoint::new([z[0] + n as f64, z[1], z[2] - n as f64]), 7.0);
        let (ea, eb) = (a.expanded(), b.expanded());
        prop_assert_eq!(ea.len(), eb.len());
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        for e in &a.entries {
            prop_assert_eq!(a.multiplicity_of(-e.value), e.multiplicity);
        }
    }
}

#[test]
fn count_between_is_open() {
    let s = exact_spectrum(TorusPoint::new([0.1, 0.0, 0.0]), TorusPoint::origin(), 3.0);
    let lam = 2.0 * PI * 0.1;
    assert_eq!(s.count_between(0.0, lam), 0);
    assert_eq!(s.count_between(0.0, lam + 1e-9), 2);
    assert_eq!(s.count_between(-lam - 1e-9, lam + 1e-9), 4);
}

#[test]
fn rank_formula_agrees_with_lowest_level() {
    let dir = [0.6, 0.0, -0.8];
    for w in [[0.1, 0.2, 0.3], [0.5, 0.0, 0.5], [0.0, 0.0, 0.0], [0.25, 0.5, 0.0]] {
        let wp = TorusPoint::new(w);
        let r = 0.03;
        let z = TorusPoint::new([0, 1, 2].map(|i| w[i] + r * dir[i]));
        let s = exact_spectrum(wp, z, 1.0);
        let lowest = s.smallest_positive().unwrap();
        assert!((lowest.value - 2.0 * PI * r).abs() < 1e-10);
        assert_eq!(lowest.multiplicity, eigenspace_rank_formula(wp, false), "w = {w:?}");
        assert_eq!(exact_spectrum(wp, wp, 1.0).multiplicity_of(0.0), eigenspace_rank_formula(wp, true), "w = {w:?}");
    }
}

#[test]
fn singular_set_merges_coincident_points() {
    let half = FlatLimit::new(TorusPoint::new([0.5, 0.0, 0.5]), End::Plus);
    let generic = FlatLimit::new(TorusPoint::new([0.1, 0.2, 0.3]), End::Minus);
    assert_eq!(singular_set(&half, &generic).len(), 3);
    assert_eq!(singular_set(&generic, &generic).len(), 2);
    let set = singular_set(&half, &generic);
    assert!(dist_to_set(TorusPoint::new([-0.1, 0.8, -0.3]), &set) < 1e-12);
}

#[test]
fn safe_radius_is_a_quarter_of_the_separation() {
    let w = TorusPoint::new([0.1, 0.0, 0.0]);
    let set = vec![w, w.neg()];
    let r = safe_radius(w, &set, 10.0).unwrap();
    assert!((r - 0.05).abs() < 1e-12);
    assert!((safe_radius(w, &set, 0.1).unwrap() - 0.025).abs() < 1e-12);
    assert!(safe_radius(w, &[w, w], 1.0).is_err());
}
