//! Test configurations: abelian paths, cutoff interpolations and random
//! decaying SU(2) perturbations.

use crate::curvature::FieldStrength;
use crate::error::{Error, Result};
use crate::grid::{smoothstep, smoothstep_deriv, Discretization, Twist};
use crate::linalg::C64;
use crate::path::{diagonal_flat, m2_add, m2_scale, ConnectionPath, M2, M2_ZERO};
use crate::torus::{self, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    LinearSmoothed,
    Tanh,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_smoothed" => Ok(Profile::LinearSmoothed),
            "tanh" => Ok(Profile::Tanh),
            _ => Err(Error::InvalidPath(format!("unknown profile {s:?}"))),
        }
    }
}

/// `w(t) = w₋ + (w₊ − w₋)·p(t)` with `p` rising from 0 to 1 on `[−t_flat, t_flat]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelianPath {
    pub w_minus: [f64; 3],
    pub w_plus: [f64; 3],
    pub profile: Profile,
    pub t_flat: f64,
    /// declared decay rate (the tails are exactly flat)
    pub beta: f64,
}

const TANH_KAPPA: f64 = 1.0;

impl AbelianPath {
    pub fn progress(&self, t: f64) -> f64 {
        let u = (t + self.t_flat) / (2.0 * self.t_flat);
        match self.profile {
            Profile::LinearSmoothed => smoothstep(u),
            Profile::Tanh => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    let x = PI * t / (2.0 * self.t_flat);
                    0.5 * (1.0 + (TANH_KAPPA * x.tan()).tanh())
                }
            }
        }
    }

    pub fn progress_deriv(&self, t: f64) -> f64 {
        let u = (t + self.t_flat) / (2.0 * self.t_flat);
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::LinearSmoothed => smoothstep_deriv(u) / (2.0 * self.t_flat),
            Profile::Tanh => {
                let x = PI * t / (2.0 * self.t_flat);
                let th = (TANH_KAPPA * x.tan()).tanh();
                let sec2 = 1.0 / (x.cos() * x.cos());
                0.5 * (1.0 - th * th) * TANH_KAPPA * sec2 * PI / (2.0 * self.t_flat)
            }
        }
    }

    pub fn w(&self, t: f64) -> [f64; 3] {
        let p = self.progress(t);
        [0, 1, 2].map(|i| self.w_minus[i] + (self.w_plus[i] - self.w_minus[i]) * p)
    }

    pub fn w_dot(&self, t: f64) -> [f64; 3] {
        let d = self.progress_deriv(t);
        [0, 1, 2].map(|i| (self.w_plus[i] - self.w_minus[i]) * d)
    }

    /// Embedding as `a_l = 2πi·diag(1,−1)·w_l(t)` on the zero mode.
    pub fn to_connection(&self, disc: &Discretization) -> Result<ConnectionPath> {
        ConnectionPath::from_fn(*disc, vec![[0, 0, 0]], [self.w_minus, self.w_plus], self.beta, |t| {
            let w = self.w(t);
            vec![[diagonal_flat(w[0]), diagonal_flat(w[1]), diagonal_flat(w[2])]]
        })
    }

    /// Closed-form field strength: `F_{tl} = 2πi·diag(1,−1)·ẇ_l`, no magnetic part.
    pub fn curvature(&self, t: f64) -> FieldStrength {
        let wd = self.w_dot(t);
        FieldStrength {
            modes: vec![[0, 0, 0]],
            electric: vec![[diagonal_flat(wd[0]), diagonal_flat(wd[1]), diagonal_flat(wd[2])]],
            magnetic: vec![[M2_ZERO; 3]],
        }
    }

    /// `∫ 8π²|ẇ|² dt`, exact for the smoothstep profile.
    pub fn energy(&self) -> f64 {
        let d2: f64 = (0..3).map(|i| (self.w_plus[i] - self.w_minus[i]).powi(2)).sum();
        match self.profile {
            Profile::LinearSmoothed => 8.0 * PI * PI * d2 * (10.0 / 7.0) / (2.0 * self.t_flat),
            Profile::Tanh => {
                // Simpson on the closed-form integrand
                let n = 20000;
                let a = -self.t_flat;
                let h = 2.0 * self.t_flat / n as f64;
                let f = |t: f64| self.progress_deriv(t).powi(2);
                let mut s = f(a) + f(self.t_flat);
                for k in 1..n {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
                }
                8.0 * PI * PI * d2 * s * h / 3.0
            }
        }
    }

    /// Times where a branch momentum `n ± w(t) − z` vanishes for some `n`.
    pub fn crossings(&self, z: [f64; 3], samples: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let dist = |t: f64| {
            let w = self.w(t);
            let a = torus::TorusPoint::new([w[0] - z[0], w[1] - z[1], w[2] - z[2]]);
            let b = torus::TorusPoint::new([-w[0] - z[0], -w[1] - z[1], -w[2] - z[2]]);
            a.dist(TorusPoint::origin()).min(b.dist(TorusPoint::origin()))
        };
        let ts: Vec<f64> = (0..=samples)
            .map(|k| -self.t_flat + 2.0 * self.t_flat * k as f64 / samples as f64)
            .collect();
        for k in 1..samples {
            let (a, b, c) = (dist(ts[k - 1]), dist(ts[k]), dist(ts[k + 1]));
            if b <= a && b < c {
                // refine the bracketed minimum
                let (mut lo, mut hi) = (ts[k - 1], ts[k + 1]);
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if dist(m1) < dist(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t = 0.5 * (lo + hi);
                if dist(t) < 1e-9 {
                    out.push(t);
                }
            }
        }
        out
    }
}

pub fn make_abelian_path(
    w_minus: impl Into<[f64; 3]>,
    w_plus: impl Into<[f64; 3]>,
    profile: Profile,
    t_flat: f64,
) -> AbelianPath {
    AbelianPath { w_minus: w_minus.into(), w_plus: w_plus.into(), profile, t_flat, beta: 2.0 }
}

/// Reference abelian model; every point of its singular set lies on the
/// lattice `ℤ³/32`.
pub fn builtin_model() -> AbelianPath {
    make_abelian_path([3.0 / 32.0, 7.0 / 32.0, 2.0 / 32.0], [10.0 / 32.0, 4.0 / 32.0, 6.0 / 32.0], Profile::LinearSmoothed, 1.0)
}

/// Grid used with [`builtin_model`] for scans.
pub fn builtin_disc() -> Discretization {
    Discretization::new(1.5, 41, 1, 2).expect("valid builtin grid")
}

impl From<TorusPoint> for [f64; 3] {
    fn from(p: TorusPoint) -> Self {
        p.coords
    }
}

fn random_su2_direction(rng: &mut ChaCha8Rng) -> M2 {
    // i·(x·σ), traceless anti-Hermitian
    let x: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    [
        [C64::new(0.0, x[2]), C64::new(x[1], x[0])],
        [C64::new(-x[1], x[0]), C64::new(0.0, -x[2])],
    ]
}

fn random_traceless(rng: &mut ChaCha8Rng) -> M2 {
    let mut g = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let d = g();
    [[d, g()], [g(), -d]]
}

fn neg_adjoint(a: &M2) -> M2 {
    [[-a[0][0].conj(), -a[1][0].conj()], [-a[0][1].conj(), -a[1][1].conj()]]
}

/// Adds `ε·e^{−β√(t²+1)}·X` with random SU(2) data `X` on the modes
/// `{0, ±e₁}` to a path carried on the zero mode.
pub fn perturb(base: &ConnectionPath, amplitude: f64, beta: f64, seed: u64) -> Result<ConnectionPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: [M2; 3] = [0, 1, 2].map(|_| random_su2_direction(&mut rng));
    let x1: [M2; 3] = [0, 1, 2].map(|_| random_traceless(&mut rng));
    let modes = vec![[0, 0, 0], [1, 0, 0], [-1, 0, 0]];
    let k0 = base.mode_index([0, 0, 0]).ok_or_else(|| Error::InvalidPath("base lacks the zero mode".into()))?;
    let disc = base.disc;
    let mut samples = Vec::with_capacity(disc.n_t * 9);
    for j in 0..disc.n_t {
        let t = disc.time(j);
        let f = amplitude * (-beta * (t * t + 1.0).sqrt()).exp();
        for (mi, m) in modes.iter().enumerate() {
            for l in 0..3 {
                let b = match base.mode_index(*m) {
                    Some(k) => *base.coeff(j, k, l),
                    None => M2_ZERO,
                };
                let extra = match mi {
                    0 => m2_scale(&x0[l], f),
                    1 => m2_scale(&x1[l], f),
                    _ => m2_scale(&neg_adjoint(&x1[l]), f),
                };
                samples.push(m2_add(&b, &extra));
            }
        }
        for (k, m) in base.modes.iter().enumerate() {
            if k != k0 && !modes.contains(m) {
                return Err(Error::InvalidPath(format!("base mode {m:?} outside the perturbation support")));
            }
        }
    }
    ConnectionPath::from_samples(disc, modes, samples, base.end_w, beta.min(base.decay_rate))
}

/// Partition of unity on the time axis: `χ⁺ = S(t−R)`, `χ⁻ = S(−t−R)`,
/// `χ⁰ = 1 − χ⁺ − χ⁻`.
pub fn partition(t: f64, r: f64) -> (f64, f64, f64) {
    let p = smoothstep(t - r);
    let m = smoothstep(-t - r);
    (m, 1.0 - p - m, p)
}

#[derive(Debug, Clone)]
pub struct CutoffInterpolation {
    pub base: ConnectionPath,
    pub r: f64,
    /// `(w at s = 0, w at s = 1)` of the straight flat path replacing `Γ₋`
    pub flat_path: Option<([f64; 3], [f64; 3])>,
    pub a_r: ConnectionPath,
}

impl CutoffInterpolation {
    /// `a_R^s`: the minus tail is `Γ_s`, moving from `Γ₋` (s = 0) to `Γ₊` (s = 1).
    pub fn a_rs(&self, s: f64) -> Result<ConnectionPath> {
        let (w0, w1) = self.flat_path.ok_or_else(|| Error::InvalidPath("no flat path given".into()))?;
        let ws = [0, 1, 2].map(|i| w0[i] + (w1[i] - w0[i]) * s);
        glue(&self.base, self.r, ws)
    }
}

fn glue(base: &ConnectionPath, r: f64, w_minus: [f64; 3]) -> Result<ConnectionPath> {
    let disc = base.disc;
    let k0 = base.mode_index([0, 0, 0]);
    let mut modes = base.modes.clone();
    if k0.is_none() {
        modes.insert(0, [0, 0, 0]);
    }
    let wp = base.end_w[1];
    let mut samples = Vec::with_capacity(disc.n_t * modes.len() * 3);
    for j in 0..disc.n_t {
        let t = disc.time(j);
        let (cm, c0, cp) = partition(t, r);
        for m in &modes {
            for l in 0..3 {
                let a = match base.mode_index(*m) {
                    Some(k) => *base.coeff(j, k, l),
                    None => M2_ZERO,
                };
                let mut v = m2_scale(&a, c0);
                if *m == [0, 0, 0] {
                    v = m2_add(&v, &m2_scale(&diagonal_flat(wp[l]), cp));
                    v = m2_add(&v, &m2_scale(&diagonal_flat(w_minus[l]), cm));
                }
                samples.push(v);
            }
        }
    }
    ConnectionPath::from_samples(disc, modes, samples, [w_minus, wp], base.decay_rate)
}

/// Build `a_R` and, when `flat_path = Some(z)`, check that the straight flat
/// path from `Γ₋` to `Γ₊` avoids the walls of twist `z`.
pub fn make_cutoff_interpolation(
    base: &ConnectionPath,
    r: f64,
    flat_path_twist: Option<Twist>,
) -> Result<CutoffInterpolation> {
    if r + 1.0 > base.disc.t_max + 1e-12 {
        return Err(Error::InvalidPath(format!("R + 1 = {} exceeds t_max = {}", r + 1.0, base.disc.t_max)));
    }
    let a_r = glue(base, r, base.end_w[0])?;
    let flat_path = match flat_path_twist {
        None => None,
        Some(z) => {
            let (w0, w1) = (base.end_w[0], base.end_w[1]);
            check_flat_path(w0, w1, z)?;
            Some((w0, w1))
        }
    };
    Ok(CutoffInterpolation { base: base.clone(), r, flat_path, a_r })
}

/// `WallHit(s)` when `0 ∈ spec(D_{Γ_s, z})` somewhere on the straight path.
pub fn check_flat_path(w0: [f64; 3], w1: [f64; 3], z: Twist) -> Result<()> {
    let samples = 2000;
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        let ws = TorusPoint::new([0, 1, 2].map(|i| w0[i] + (w1[i] - w0[i]) * s));
        let d = torus::dist_to_set(z.point(), &[ws, ws.neg()]);
        let seg = ((0..3).map(|i| (w1[i] - w0[i]).powi(2)).sum::<f64>()).sqrt() / samples as f64;
        if d <= 0.5 * seg + 1e-9 {
            return Err(Error::WallHit(s));
        }
    }
    Ok(())
}

