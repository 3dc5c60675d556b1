//! Temporal-gauge SU(2) connections on the cylinder, sampled in time and
//! truncated in Fourier modes.

use crate::error::{Error, Result};
use crate::grid::Discretization;
use crate::linalg::{abs2, C64, ZERO};
use crate::torus::{End, FlatLimit, TorusPoint};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// A 2×2 complex matrix in row-major order.
pub type M2 = [[C64; 2]; 2];

pub const M2_ZERO: M2 = [[ZERO, ZERO], [ZERO, ZERO]];

pub fn m2_add(a: &M2, b: &M2) -> M2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn m2_sub(a: &M2, b: &M2) -> M2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

pub fn m2_scale(a: &M2, s: f64) -> M2 {
    let f = |x: C64| C64::new(x.re * s, x.im * s);
    [[f(a[0][0]), f(a[0][1])], [f(a[1][0]), f(a[1][1])]]
}

pub fn m2_norm2(a: &M2) -> f64 {
    abs2(a[0][0]) + abs2(a[0][1]) + abs2(a[1][0]) + abs2(a[1][1])
}

/// `2πi·w·diag(1, −1)`, the flat diagonal connection coefficient.
pub fn diagonal_flat(w: f64) -> M2 {
    [[C64::new(0.0, 2.0 * PI * w), ZERO], [ZERO, C64::new(0.0, -2.0 * PI * w)]]
}

/// Connection coefficients `a_i(t, m)` on a time grid.
///
/// `samples[(j·modes.len() + k)·3 + i]` is the 2×2 coefficient of direction
/// `i` on connection mode `modes[k]` at time node `j`. The limits are the
/// diagonal flat connections `2πi·diag(1,−1)·w` with the literal parameters
/// `end_w = [w₋, w₊]` that the samples approach.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionPath {
    pub disc: Discretization,
    pub modes: Vec<[i32; 3]>,
    pub samples: Vec<M2>,
    pub end_w: [[f64; 3]; 2],
    pub limits: (FlatLimit, FlatLimit),
    pub decay_rate: f64,
    pub decay_constant: f64,
    pub temporal_gauge: bool,
    mode_lookup: HashMap<[i32; 3], usize>,
}

/// Header fields serialized next to the coefficient container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathHeader {
    pub disc: Discretization,
    pub modes: Vec<[i32; 3]>,
    pub end_w: [[f64; 3]; 2],
    pub limits: (FlatLimit, FlatLimit),
    pub decay_rate: f64,
    pub temporal_gauge: bool,
}

impl ConnectionPath {
    /// Build from a sampler returning, for each time, the coefficients of
    /// every mode in `modes` (three directions each).
    pub fn from_fn(
        disc: Discretization,
        modes: Vec<[i32; 3]>,
        end_w: [[f64; 3]; 2],
        decay_rate: f64,
        f: impl Fn(f64) -> Vec<[M2; 3]>,
    ) -> Result<Self> {
        disc.validate()?;
        let mut samples = Vec::with_capacity(disc.n_t * modes.len() * 3);
        for j in 0..disc.n_t {
            let coeffs = f(disc.time(j));
            if coeffs.len() != modes.len() {
                return Err(Error::InvalidPath("sampler returned wrong mode count".into()));
            }
            for c in coeffs {
                samples.extend_from_slice(&c);
            }
        }
        Self::from_samples(disc, modes, samples, end_w, decay_rate)
    }

    pub fn from_samples(
        disc: Discretization,
        modes: Vec<[i32; 3]>,
        samples: Vec<M2>,
        end_w: [[f64; 3]; 2],
        decay_rate: f64,
    ) -> Result<Self> {
        if samples.len() != disc.n_t * modes.len() * 3 {
            return Err(Error::InvalidPath("sample array has the wrong length".into()));
        }
        if !(decay_rate > 0.0) {
            return Err(Error::InvalidPath(format!("decay rate {decay_rate} must be positive")));
        }
        let mode_lookup: HashMap<[i32; 3], usize> =
            modes.iter().enumerate().map(|(k, m)| (*m, k)).collect();
        if mode_lookup.len() != modes.len() {
            return Err(Error::InvalidPath("duplicate connection modes".into()));
        }
        let limits = (
            FlatLimit::new(TorusPoint::new(end_w[0]), End::Minus),
            FlatLimit::new(TorusPoint::new(end_w[1]), End::Plus),
        );
        let mut p = ConnectionPath {
            disc,
            modes,
            samples,
            end_w,
            limits,
            decay_rate,
            decay_constant: 0.0,
            temporal_gauge: true,
            mode_lookup,
        };
        p.check_algebra()?;
        p.decay_constant = p.check_decay()?;
        Ok(p)
    }

    pub fn header(&self) -> PathHeader {
        PathHeader {
            disc: self.disc,
            modes: self.modes.clone(),
            end_w: self.end_w,
            limits: self.limits,
            decay_rate: self.decay_rate,
            temporal_gauge: self.temporal_gauge,
        }
    }

    pub fn mode_index(&self, m: [i32; 3]) -> Option<usize> {
        self.mode_lookup.get(&m).copied()
    }

    pub fn coeff(&self, j: usize, k: usize, dir: usize) -> &M2 {
        &self.samples[(j * self.modes.len() + k) * 3 + dir]
    }

    /// The flat limit coefficient on mode 0 at one end.
    pub fn limit_coeff(&self, end: End, dir: usize) -> M2 {
        let w = match end {
            End::Minus => self.end_w[0][dir],
            End::Plus => self.end_w[1][dir],
        };
        diagonal_flat(w)
    }

    /// `‖a(t_j) − γ‖` summed over modes and directions.
    pub fn deviation(&self, j: usize, end: End) -> f64 {
        let mut s = 0.0;
        for (k, m) in self.modes.iter().enumerate() {
            for dir in 0..3 {
                let a = self.coeff(j, k, dir);
                let d = if *m == [0, 0, 0] { m2_sub(a, &self.limit_coeff(end, dir)) } else { *a };
                s += m2_norm2(&d);
            }
        }
        s.sqrt()
    }

    fn check_algebra(&self) -> Result<()> {
        let scale = self.samples.iter().map(m2_norm2).fold(0.0, f64::max).sqrt().max(1.0);
        let tol = 1e-12 * scale;
        for j in 0..self.disc.n_t {
            for (k, m) in self.modes.iter().enumerate() {
                let neg = [-m[0], -m[1], -m[2]];
                let kn = self.mode_index(neg).ok_or_else(|| {
                    Error::InvalidPath(format!("mode {m:?} present without its reflection"))
                })?;
                for dir in 0..3 {
                    let a = self.coeff(j, k, dir);
                    if (a[0][0] + a[1][1]).abs() > tol {
                        return Err(Error::InvalidPath(format!("trace of a_{dir}{m:?} at node {j}")));
                    }
                    let b = self.coeff(j, kn, dir);
                    for r in 0..2 {
                        for c in 0..2 {
                            if (b[r][c] + a[c][r].conj()).abs() > tol {
                                return Err(Error::InvalidPath(format!(
                                    "a_{dir}({neg:?}) != -a_{dir}({m:?})^dagger at node {j}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Fits `C` in `‖a(t) − γ±‖ <= C e^{−β|t|}` on the outer quarters and
    /// rejects tails that decay more slowly than declared.
    fn check_decay(&self) -> Result<f64> {
        let n = self.disc.n_t;
        let q = n / 4;
        let beta = self.decay_rate;
        let mut c_fit: f64 = 0.0;
        for (end, range) in [(End::Plus, (n - q)..n), (End::Minus, 0..q)] {
            let g: Vec<f64> = range
                .clone()
                .map(|j| self.deviation(j, end) * (beta * self.disc.time(j).abs()).exp())
                .collect();
            let amp = range.clone().map(|j| self.deviation(j, end)).fold(0.0, f64::max);
            let (inner, outer) = match end {
                End::Plus => (g[0], g[g.len() - 1]),
                End::Minus => (g[g.len() - 1], g[0]),
            };
            if outer > 1.5 * inner + 1e-12 * (1.0 + amp) {
                return Err(Error::InvalidPath(format!(
                    "tail at the {end:?} end decays slower than rate {beta}"
                )));
            }
            c_fit = c_fit.max(g.iter().cloned().fold(0.0, f64::max));
        }
        Ok(c_fit)
    }

    /// True when every coefficient is diagonal and lives on mode 0.
    pub fn is_abelian(&self) -> bool {
        for j in 0..self.disc.n_t {
            for (k, m) in self.modes.iter().enumerate() {
                for dir in 0..3 {
                    let a = self.coeff(j, k, dir);
                    let off = a[0][1].abs() + a[1][0].abs();
                    let diag = a[0][0].abs() + a[1][1].abs();
                    if off > 0.0 || (*m != [0, 0, 0] && diag > 0.0) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// The same connection restricted to its diagonal mode-0 part.
    pub fn abelian_part(&self) -> ConnectionPath {
        let mut out = self.clone();
        for j in 0..self.disc.n_t {
            for (k, m) in self.modes.iter().enumerate() {
                for dir in 0..3 {
                    let idx = (j * self.modes.len() + k) * 3 + dir;
                    let a = self.samples[idx];
                    out.samples[idx] = if *m == [0, 0, 0] {
                        [[a[0][0], ZERO], [ZERO, a[1][1]]]
                    } else {
                        M2_ZERO
                    };
                }
            }
        }
        out
    }

    /// Time reversal `t ↦ −t`, swapping the limits.
    pub fn reversed(&self) -> ConnectionPath {
        let n = self.disc.n_t;
        let per = self.modes.len() * 3;
        let mut samples = Vec::with_capacity(self.samples.len());
        for j in (0..n).rev() {
            samples.extend_from_slice(&self.samples[j * per..(j + 1) * per]);
        }
        ConnectionPath::from_samples(
            self.disc,
            self.modes.clone(),
            samples,
            [self.end_w[1], self.end_w[0]],
            self.decay_rate,
        )
        .expect("reversal preserves validity")
    }

    /// Resample on another grid by linear interpolation in time.
    pub fn resampled(&self, disc: Discretization) -> Result<ConnectionPath> {
        let per = self.modes.len() * 3;
        let h = self.disc.h();
        let mut samples = Vec::with_capacity(disc.n_t * per);
        for j in 0..disc.n_t {
            let t = disc.time(j);
            let x = ((t + self.disc.t_max) / h).clamp(0.0, (self.disc.n_t - 1) as f64);
            let i0 = (x.floor() as usize).min(self.disc.n_t - 2);
            let f = x - i0 as f64;
            for p in 0..per {
                let a = self.samples[i0 * per + p];
                let b = self.samples[(i0 + 1) * per + p];
                samples.push(m2_add(&m2_scale(&a, 1.0 - f), &m2_scale(&b, f)));
            }
        }
        ConnectionPath::from_samples(disc, self.modes.clone(), samples, self.end_w, self.decay_rate)
    }

    pub fn limits_equal(&self) -> bool {
        self.limits.0.same_connection(&self.limits.1)
    }
}
