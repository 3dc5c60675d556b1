//! Sections of S⁻⊗E on the truncated cylinder.

use crate::error::{Error, Result};
use crate::grid::{Discretization, ModeBox, Weight};
use crate::linalg::{abs2, C64, ZERO};

/// Fiber index of (mode, bundle branch, spin): bundle-major, spin fastest.
pub fn fiber_index(mode: usize, branch: usize, spin: usize) -> usize {
    mode * 4 + branch * 2 + spin
}

/// Values indexed by (time node, Fourier mode, 4 fiber components).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub disc: Discretization,
    pub values: Vec<C64>,
}

impl SpinorField {
    pub fn zeros(disc: Discretization) -> Self {
        let len = disc.n_t * disc.modes().len() * 4;
        SpinorField { disc, values: vec![ZERO; len] }
    }

    pub fn from_fn(disc: Discretization, f: impl Fn(f64, [i32; 3], usize) -> C64) -> Self {
        let mb = disc.modes();
        let mut out = Self::zeros(disc);
        for j in 0..disc.n_t {
            let t = disc.time(j);
            for m in 0..mb.len() {
                let n = mb.mode(m);
                for c in 0..4 {
                    let o = out.offset(j, m);
                    out.values[o + c] = f(t, n, c);
                }
            }
        }
        out
    }

    pub fn n_modes(&self) -> usize {
        self.disc.modes().len()
    }

    pub fn fiber_len(&self) -> usize {
        self.n_modes() * 4
    }

    pub fn offset(&self, j: usize, mode: usize) -> usize {
        (j * self.n_modes() + mode) * 4
    }

    pub fn node(&self, j: usize) -> &[C64] {
        let f = self.fiber_len();
        &self.values[j * f..(j + 1) * f]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [C64] {
        let f = self.fiber_len();
        &mut self.values[j * f..(j + 1) * f]
    }

    /// `‖σ_δ f‖` with the trapezoid rule on the node grid.
    pub fn weighted_norm(&self, w: &Weight) -> f64 {
        self.weighted_inner(self, w).re.max(0.0).sqrt()
    }

    /// `⟨σ_δ f, σ_δ g⟩` by the trapezoid rule, antilinear in `self`.
    pub fn weighted_inner(&self, other: &SpinorField, w: &Weight) -> C64 {
        let n = self.disc.n_t;
        let h = self.disc.h();
        let mut acc = ZERO;
        for j in 0..n {
            let q = if j == 0 || j == n - 1 { 0.5 * h } else { h };
            let s2 = (2.0 * w.log_sigma(self.disc.time(j))).exp() * q;
            let d = crate::linalg::dot(self.node(j), other.node(j));
            acc += C64::new(d.re * s2, d.im * s2);
        }
        acc
    }

    /// `h Σ_i ⟨f_i, g_i⟩` for fields on the midpoint grid, where the
    /// midpoint rule has no end correction.
    pub fn midpoint_inner(&self, other: &SpinorField) -> C64 {
        let d = crate::linalg::dot(&self.values, &other.values);
        let h = self.disc.h();
        C64::new(d.re * h, d.im * h)
    }

    pub fn norm(&self) -> f64 {
        self.weighted_norm(&Weight::ZERO)
    }

    pub fn inner(&self, other: &SpinorField) -> C64 {
        self.weighted_inner(other, &Weight::ZERO)
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn axpy(&mut self, a: C64, x: &SpinorField) {
        for (v, u) in self.values.iter_mut().zip(&x.values) {
            *v += a * *u;
        }
    }

    pub fn sub(&self, other: &SpinorField) -> SpinorField {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    /// Multiply by the time coordinate.
    pub fn times_t(&self) -> SpinorField {
        let mut out = self.clone();
        for j in 0..self.disc.n_t {
            let t = self.disc.time(j);
            for v in out.node_mut(j) {
                *v = C64::new(v.re * t, v.im * t);
            }
        }
        out
    }

    /// Largest modulus per Fourier mode, over time and fiber.
    pub fn mode_profile(&self) -> Vec<f64> {
        let nm = self.n_modes();
        let mut prof = vec![0.0f64; nm];
        for j in 0..self.disc.n_t {
            for m in 0..nm {
                let o = self.offset(j, m);
                for c in 0..4 {
                    prof[m] = prof[m].max(abs2(self.values[o + c]).sqrt());
                }
            }
        }
        prof
    }
}

/// Multiply by the character `e^{2πi n₀·x}`: a shift of Fourier labels by
/// `n₀`. Maps the kernel at twist `z` to the kernel at twist `z + n₀`.
pub fn gauge_shift(phi: &SpinorField, shift: [i32; 3]) -> Result<SpinorField> {
    let mb: ModeBox = phi.disc.modes();
    let prof = phi.mode_profile();
    let top = prof.iter().cloned().fold(0.0, f64::max);
    let occupied = 1e-13 * top.max(f64::MIN_POSITIVE);
    let mut out = SpinorField::zeros(phi.disc);
    for m in 0..mb.len() {
        let n = mb.mode(m);
        let target = [n[0] + shift[0], n[1] + shift[1], n[2] + shift[2]];
        match mb.index(target) {
            Some(tm) => {
                for j in 0..phi.disc.n_t {
                    let (src, dst) = (phi.offset(j, m), out.offset(j, tm));
                    out.values[dst..dst + 4].copy_from_slice(&phi.values[src..src + 4]);
                }
            }
            None if prof[m] > occupied => return Err(Error::ModeOverflow),
            None => {}
        }
    }
    Ok(out)
}
