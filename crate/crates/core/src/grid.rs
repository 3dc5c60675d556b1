//! Time grid, Fourier box, twists and exponential weights.

use crate::error::{Error, Result};
use crate::torus::TorusPoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub t_max: f64,
    pub n_t: usize,
    pub fourier_cut: usize,
    pub fd_order: usize,
}

impl Discretization {
    pub fn new(t_max: f64, n_t: usize, fourier_cut: usize, fd_order: usize) -> Result<Self> {
        let d = Discretization { t_max, n_t, fourier_cut, fd_order };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidDiscretization(format!("t_max = {}", self.t_max)));
        }
        if self.n_t < 16 {
            return Err(Error::InvalidDiscretization(format!("n_t = {} < 16", self.n_t)));
        }
        if self.fourier_cut < 1 {
            return Err(Error::InvalidDiscretization("fourier_cut must be >= 1".into()));
        }
        if self.fd_order != 2 && self.fd_order != 4 {
            return Err(Error::InvalidDiscretization(format!("fd_order = {}", self.fd_order)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.t_max / (self.n_t - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        -self.t_max + j as f64 * self.h()
    }

    pub fn mid(&self, i: usize) -> f64 {
        -self.t_max + (i as f64 + 0.5) * self.h()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.time(j)).collect()
    }

    pub fn modes(&self) -> ModeBox {
        ModeBox::new(self.fourier_cut)
    }

    /// Same cylinder and box with a different number of time samples.
    pub fn with_n_t(&self, n_t: usize) -> Self {
        Discretization { n_t, ..*self }
    }
}

/// The retained Fourier modes `|n_i| <= cut`, in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeBox {
    pub cut: usize,
}

impl ModeBox {
    pub fn new(cut: usize) -> Self {
        ModeBox { cut }
    }

    pub fn side(&self) -> usize {
        2 * self.cut + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, n: [i32; 3]) -> Option<usize> {
        let c = self.cut as i32;
        if n.iter().any(|&x| x < -c || x > c) {
            return None;
        }
        let s = self.side();
        Some(((n[0] + c) as usize * s + (n[1] + c) as usize) * s + (n[2] + c) as usize)
    }

    pub fn mode(&self, idx: usize) -> [i32; 3] {
        let s = self.side();
        let c = self.cut as i32;
        [(idx / (s * s)) as i32 - c, ((idx / s) % s) as i32 - c, (idx % s) as i32 - c]
    }

    pub fn modes(&self) -> Vec<[i32; 3]> {
        (0..self.len()).map(|i| self.mode(i)).collect()
    }
}

/// A twist parameter kept as a literal real vector. Integer translates are
/// gauge equivalent but act on the truncated Fourier box differently, so the
/// lift matters numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist(pub [f64; 3]);

impl Twist {
    pub fn point(&self) -> TorusPoint {
        TorusPoint::new(self.0)
    }
    pub fn shifted(&self, v: [f64; 3]) -> Twist {
        Twist([self.0[0] + v[0], self.0[1] + v[1], self.0[2] + v[2]])
    }
}

impl From<TorusPoint> for Twist {
    fn from(p: TorusPoint) -> Self {
        Twist(p.coords)
    }
}

impl From<[f64; 3]> for Twist {
    fn from(v: [f64; 3]) -> Self {
        Twist(v)
    }
}

/// Growth exponents `(δ₋, δ₊)` of the weight `σ_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub delta_minus: f64,
    pub delta_plus: f64,
}

/// Quintic smoothstep on `[0, 1]`, clamped outside.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

pub fn smoothstep_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

impl Weight {
    pub const ZERO: Weight = Weight { delta_minus: 0.0, delta_plus: 0.0 };

    pub fn new(delta_minus: f64, delta_plus: f64) -> Self {
        Weight { delta_minus, delta_plus }
    }

    pub fn neg(&self) -> Weight {
        Weight { delta_minus: -self.delta_minus, delta_plus: -self.delta_plus }
    }

    /// `log σ_δ(t) = −t·ρ(t)`, with `ρ` blending `δ₋` into `δ₊` on `[−1, 1]`.
    pub fn log_sigma(&self, t: f64) -> f64 {
        let b = smoothstep((t + 1.0) / 2.0);
        -t * (self.delta_minus * (1.0 - b) + self.delta_plus * b)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.log_sigma(t).exp()
    }
}

/// The six weights built from one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSextet {
    pub eps: f64,
    /// ⌜ε = (−ε, ε)
    pub upper_left: Weight,
    /// ε̄ = (0, ε)
    pub upper: Weight,
    /// ⌐ε = (ε, ε)
    pub upper_right: Weight,
    /// ⌞ε = (−ε, −ε)
    pub lower_left: Weight,
    /// ε̲ = (0, −ε)
    pub lower: Weight,
    /// ε⌟ = (ε, −ε)
    pub lower_right: Weight,
}

impl WeightSextet {
    /// `eps` in eigenvalue units.
    pub fn new(eps: f64) -> Self {
        WeightSextet {
            eps,
            upper_left: Weight::new(-eps, eps),
            upper: Weight::new(0.0, eps),
            upper_right: Weight::new(eps, eps),
            lower_left: Weight::new(-eps, -eps),
            lower: Weight::new(0.0, -eps),
            lower_right: Weight::new(eps, -eps),
        }
    }

    /// From a radius on the torus: eigenvalues carry a factor 2π.
    pub fn from_radius(radius: f64) -> Self {
        Self::new(2.0 * std::f64::consts::PI * radius)
    }

    pub fn all(&self) -> [Weight; 6] {
        [
            self.upper_left,
            self.upper,
            self.upper_right,
            self.lower_left,
            self.lower,
            self.lower_right,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_box_round_trips() {
        let b = ModeBox::new(2);
        for i in 0..b.len() {
            assert_eq!(b.index(b.mode(i)), Some(i));
        }
        assert_eq!(b.index([3, 0, 0]), None);
    }

    #[test]
    fn weight_tails_are_exact_exponentials() {
        let w = Weight::new(-0.3, 0.7);
        for t in [1.0, 2.5, 7.0] {
            assert!((w.log_sigma(t) + 0.7 * t).abs() < 1e-14);
            assert!((w.log_sigma(-t) + 0.3 * t).abs() < 1e-14);
        }
    }

    #[test]
    fn sextet_regenerates() {
        let s = WeightSextet::new(0.2);
        assert_eq!(s, WeightSextet::new(s.eps));
        assert_eq!(s.lower_right, Weight::new(0.2, -0.2));
    }
}
