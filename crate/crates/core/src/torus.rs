//! Exact harmonic analysis of flat twisted Dirac operators on T³ = ℝ³/ℤ³.
//!
//! A flat SU(2) limit with holonomy parameter `w` splits the bundle into the
//! branches `+w` and `-w`. On the Fourier mode `n` of branch `b` the twisted
//! operator acts on the 2-spinor as `2π σ·k` with `k = n + b·w − z`, so its
//! eigenvalues are `±2π|k|`.

use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tolerance used to merge coinciding eigenvalues and to match levels.
pub const LEVEL_TOL: f64 = 1e-12;

/// A point of ℝ³/ℤ³ with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub coords: [f64; 3],
}

fn reduce_coord(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub fn new(coords: [f64; 3]) -> Self {
        TorusPoint { coords: coords.map(reduce_coord) }
    }

    pub fn origin() -> Self {
        TorusPoint { coords: [0.0; 3] }
    }

    pub fn reduce(self) -> Self {
        TorusPoint::new(self.coords)
    }

    pub fn neg(self) -> Self {
        TorusPoint::new(self.coords.map(|x| -x))
    }

    /// Translate by an arbitrary real vector and reduce.
    pub fn shifted(self, v: [f64; 3]) -> Self {
        TorusPoint::new([self.coords[0] + v[0], self.coords[1] + v[1], self.coords[2] + v[2]])
    }

    /// Shortest representative of `self - other` over the lattice.
    pub fn delta(self, other: TorusPoint) -> [f64; 3] {
        let mut d = [0.0; 3];
        for i in 0..3 {
            let x = self.coords[i] - other.coords[i];
            d[i] = x - x.round();
        }
        d
    }

    /// Flat distance on the torus.
    pub fn dist(self, other: TorusPoint) -> f64 {
        norm3(self.delta(other))
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Minus,
    Plus,
}

/// A flat SU(2) limit, stored by its canonical holonomy representative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatLimit {
    pub w: TorusPoint,
    pub label: End,
}

fn lex_less(a: &[f64; 3], b: &[f64; 3]) -> bool {
    for i in 0..3 {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

impl FlatLimit {
    pub fn new(w: TorusPoint, label: End) -> Self {
        let w = w.reduce();
        let m = w.neg();
        let w = if lex_less(&m.coords, &w.coords) { m } else { w };
        FlatLimit { w, label }
    }

    /// Same flat connection up to bundle automorphism.
    pub fn same_connection(&self, other: &FlatLimit) -> bool {
        self.w.dist(other.w) < LEVEL_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "+w")]
    Plus,
    #[serde(rename = "-w")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
    pub fn index(self) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => 1,
        }
    }
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub n: [i32; 3],
    pub branch: Branch,
    pub sign: i8,
}

impl Witness {
    pub fn momentum(&self, w: TorusPoint, z: TorusPoint) -> [f64; 3] {
        mode_momentum(self.n, self.branch, w.coords, z.coords)
    }
    pub fn value(&self, w: TorusPoint, z: TorusPoint) -> f64 {
        self.sign as f64 * 2.0 * PI * norm3(self.momentum(w, z))
    }
}

/// `k = n + b·w − z` for literal (unreduced) coordinates.
pub fn mode_momentum(n: [i32; 3], branch: Branch, w: [f64; 3], z: [f64; 3]) -> [f64; 3] {
    let s = branch.sign();
    [
        n[0] as f64 + s * w[0] - z[0],
        n[1] as f64 + s * w[1] - z[1],
        n[2] as f64 + s * w[2] - z[2],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub value: f64,
    pub multiplicity: usize,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMultiset {
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumMultiset {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Expanded list, each value repeated by its multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat(e.value).take(e.multiplicity))
            .collect()
    }

    pub fn contains(&self, level: f64, tol: f64) -> bool {
        self.entries.iter().any(|e| (e.value - level).abs() <= tol)
    }

    pub fn multiplicity_of(&self, level: f64) -> usize {
        self.entries
            .iter()
            .find(|e| (e.value - level).abs() <= LEVEL_TOL)
            .map_or(0, |e| e.multiplicity)
    }

    /// Number of eigenvalues (with multiplicity) strictly between `a` and `b`.
    pub fn count_between(&self, a: f64, b: f64) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.entries
            .iter()
            .filter(|e| e.value > lo && e.value < hi)
            .map(|e| e.multiplicity)
            .sum()
    }

    pub fn smallest_positive(&self) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| e.value > LEVEL_TOL)
    }
}

/// All eigenvalues of the flat twisted operator with `|value| <= cutoff`.
pub fn exact_spectrum(w: TorusPoint, z: TorusPoint, cutoff: f64) -> SpectrumMultiset {
    let radius = cutoff / (2.0 * PI) + norm3(w.coords) + norm3(z.coords) + 1.0;
    let r = radius.ceil() as i32;
    let mut raw: Vec<(f64, Witness)> = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let n = [a, b, c];
                for branch in Branch::BOTH {
                    let k = mode_momentum(n, branch, w.coords, z.coords);
                    let v = 2.0 * PI * norm3(k);
                    if v > cutoff {
                        continue;
                    }
                    raw.push((v, Witness { n, branch, sign: 1 }));
                    if v < LEVEL_TOL {
                        // the zero mode keeps both spinor directions
                        raw.push((0.0, Witness { n, branch, sign: -1 }));
                    } else {
                        raw.push((-v, Witness { n, branch, sign: -1 }));
                    }
                }
            }
        }
    }
    raw.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(witness_order(&x.1, &y.1)));
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    for (v, wit) in raw {
        match entries.last_mut() {
            Some(e) if (v - e.value).abs() <= LEVEL_TOL => {
                e.multiplicity += 1;
                e.witnesses.push(wit);
            }
            _ => entries.push(SpectrumEntry { value: v, multiplicity: 1, witnesses: vec![wit] }),
        }
    }
    SpectrumMultiset { entries }
}

fn witness_order(a: &Witness, b: &Witness) -> std::cmp::Ordering {
    (a.n, a.branch.index(), -a.sign).cmp(&(b.n, b.branch.index(), -b.sign))
}

/// A vector of the exact eigenbasis: one spinor on one Fourier mode of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpinor {
    pub n: [i32; 3],
    pub branch: Branch,
    pub spinor: [C64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspace {
    pub level: f64,
    pub basis: Vec<ModeSpinor>,
    pub rank: usize,
}

/// Unit eigenvector of `σ·k̂` for eigenvalue `sign` (±1).
pub fn helicity_spinor(k: [f64; 3], sign: f64) -> [C64; 2] {
    let nk = norm3(k);
    let (x, y, z) = (sign * k[0] / nk, sign * k[1] / nk, sign * k[2] / nk);
    if z >= 0.0 {
        let s = (2.0 * (1.0 + z)).sqrt();
        [C64::new((1.0 + z) / s, 0.0), C64::new(x / s, y / s)]
    } else {
        let s = (2.0 * (1.0 - z)).sqrt();
        [C64::new(x / s, -y / s), C64::new((1.0 - z) / s, 0.0)]
    }
}

/// Exact orthonormal eigenbasis of the flat operator at `level`.
pub fn eigenspace(w: TorusPoint, z: TorusPoint, level: f64) -> Result<Eigenspace> {
    let spec = exact_spectrum(w, z, level.abs() + 1.0);
    let entry = spec
        .entries
        .iter()
        .find(|e| (e.value - level).abs() <= LEVEL_TOL)
        .ok_or(Error::LevelNotInSpectrum { level })?;
    let basis = entry
        .witnesses
        .iter()
        .map(|wit| {
            let k = wit.momentum(w, z);
            let spinor = if norm3(k) < LEVEL_TOL / (2.0 * PI) {
                if wit.sign > 0 {
                    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
                } else {
                    [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
                }
            } else {
                helicity_spinor(k, wit.sign as f64)
            };
            ModeSpinor { n: wit.n, branch: wit.branch, spinor }
        })
        .collect::<Vec<_>>();
    Ok(Eigenspace { level: entry.value, rank: basis.len(), basis })
}

/// The reduced, deduplicated singular set `{±w₊, ±w₋}`.
pub fn singular_set(gamma_plus: &FlatLimit, gamma_minus: &FlatLimit) -> Vec<TorusPoint> {
    let cands = [gamma_plus.w, gamma_plus.w.neg(), gamma_minus.w, gamma_minus.w.neg()];
    let mut out: Vec<TorusPoint> = Vec::new();
    for p in cands {
        if !out.iter().any(|q| q.dist(p) < LEVEL_TOL) {
            out.push(p);
        }
    }
    out
}

/// Distance from `z` to the nearest point of `set`.
pub fn dist_to_set(z: TorusPoint, set: &[TorusPoint]) -> f64 {
    set.iter().map(|p| z.dist(*p)).fold(f64::INFINITY, f64::min)
}

/// `ε = ¼ min(β, dist(w, (ℤ³ + W) ∖ {w}))`.
pub fn safe_radius(w: TorusPoint, set: &[TorusPoint], beta: f64) -> Result<f64> {
    for i in 0..set.len() {
        for j in 0..i {
            if set[i].dist(set[j]) < LEVEL_TOL {
                return Err(Error::DegenerateConfiguration(format!(
                    "{:?} and {:?} coincide",
                    set[i].coords, set[j].coords
                )));
            }
        }
    }
    if !set.iter().any(|p| p.dist(w) < LEVEL_TOL) {
        return Err(Error::DegenerateConfiguration(format!("{:?} is not in the set", w.coords)));
    }
    let mut best = f64::INFINITY;
    for p in set {
        let d0 = w.delta(*p);
        for a in -2..=2 {
            for b in -2..=2 {
                for c in -2..=2 {
                    let d = norm3([d0[0] + a as f64, d0[1] + b as f64, d0[2] + c as f64]);
                    if d > LEVEL_TOL {
                        best = best.min(d);
                    }
                }
            }
        }
    }
    Ok(0.25 * beta.min(best))
}

/// Rank of `V_λ` at `λ = 2π|z − w|` for `z` in the punctured ball around `w`.
pub fn eigenspace_rank_formula(w: TorusPoint, at_zero: bool) -> usize {
    let two_w_integral = w.coords.iter().all(|&x| {
        let y = 2.0 * x;
        (y - y.round()).abs() < LEVEL_TOL
    });
    match (at_zero, two_w_integral) {
        (false, false) => 1,
        (false, true) => 2,
        (true, false) => 2,
        (true, true) => 4,
    }
}
