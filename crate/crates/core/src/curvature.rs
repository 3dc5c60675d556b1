//! Field strength of a sampled path, energy and charge integrals.

use crate::error::Result;
use crate::grid::Discretization;
use crate::linalg::C64;
use crate::path::{m2_add, m2_norm2, m2_scale, m2_sub, ConnectionPath, M2, M2_ZERO};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Curvature at one time, by Fourier mode: `electric[l] = F_{tl}` and
/// `magnetic[l] = ½ε_{lmn}F_{mn}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStrength {
    pub modes: Vec<[i32; 3]>,
    pub electric: Vec<[M2; 3]>,
    pub magnetic: Vec<[M2; 3]>,
}

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = M2_ZERO;
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

impl FieldStrength {
    /// `∫_{T³} |F|²` by Parseval.
    pub fn energy_density(&self) -> f64 {
        self.electric
            .iter()
            .chain(&self.magnetic)
            .map(|x| x.iter().map(m2_norm2).sum::<f64>())
            .sum()
    }

    /// `∫_{T³} (|F⁻|² − |F⁺|²)` with `F^± = ½(E ∓ B)` and `|F^±|² = 2Σ_l|F^±_l|²`.
    pub fn charge_density(&self) -> f64 {
        let mut s = 0.0;
        for (e, b) in self.electric.iter().zip(&self.magnetic) {
            for l in 0..3 {
                let minus = m2_scale(&m2_add(&e[l], &b[l]), 0.5);
                let plus = m2_scale(&m2_sub(&e[l], &b[l]), 0.5);
                s += 2.0 * (m2_norm2(&minus) - m2_norm2(&plus));
            }
        }
        s
    }

    /// `(F⁺)_l = ½(F_{tl} − ½ε_{lmn}F_{mn})` by mode.
    pub fn self_dual(&self) -> Vec<[M2; 3]> {
        self.electric
            .iter()
            .zip(&self.magnetic)
            .map(|(e, b)| {
                [0, 1, 2].map(|l| m2_scale(&m2_sub(&e[l], &b[l]), 0.5))
            })
            .collect()
    }
}

/// Curvature of the sampled path at node `j`: time derivatives by
/// second-order differences, spatial derivatives exact in Fourier space.
pub fn field_strength(path: &ConnectionPath, j: usize) -> FieldStrength {
    let n = path.disc.n_t;
    let h = path.disc.h();
    let nm = path.modes.len();
    let (ja, jb, scale) = if j == 0 {
        (0, 1, 1.0 / h)
    } else if j == n - 1 {
        (n - 2, n - 1, 1.0 / h)
    } else {
        (j - 1, j + 1, 0.5 / h)
    };
    let mut electric: BTreeMap<[i32; 3], [M2; 3]> = BTreeMap::new();
    let mut magnetic: BTreeMap<[i32; 3], [M2; 3]> = BTreeMap::new();
    for k in 0..nm {
        let e = [0, 1, 2].map(|l| m2_scale(&m2_sub(path.coeff(jb, k, l), path.coeff(ja, k, l)), scale));
        electric.insert(path.modes[k], e);
    }
    let i2pi = C64::new(0.0, 2.0 * PI);
    for k in 0..nm {
        let m = path.modes[k];
        let entry = magnetic.entry(m).or_insert([M2_ZERO; 3]);
        for l in 0..3 {
            let (a, b) = ((l + 1) % 3, (l + 2) % 3);
            // ∂_a A_b − ∂_b A_a
            let ab = path.coeff(j, k, b);
            let aa = path.coeff(j, k, a);
            for r in 0..2 {
                for c in 0..2 {
                    entry[l][r][c] += i2pi * (m[a] as f64 * ab[r][c] - m[b] as f64 * aa[r][c]);
                }
            }
        }
    }
    for p in 0..nm {
        for q in 0..nm {
            let mp = path.modes[p];
            let mq = path.modes[q];
            let m = [mp[0] + mq[0], mp[1] + mq[1], mp[2] + mq[2]];
            let entry = magnetic.entry(m).or_insert([M2_ZERO; 3]);
            for l in 0..3 {
                let (a, b) = ((l + 1) % 3, (l + 2) % 3);
                let x = m2_mul(path.coeff(j, p, a), path.coeff(j, q, b));
                let y = m2_mul(path.coeff(j, p, b), path.coeff(j, q, a));
                entry[l] = m2_add(&entry[l], &m2_sub(&x, &y));
            }
        }
    }
    for m in magnetic.keys() {
        electric.entry(*m).or_insert([M2_ZERO; 3]);
    }
    let modes: Vec<[i32; 3]> = electric.keys().copied().collect();
    FieldStrength {
        electric: modes.iter().map(|m| electric[m]).collect(),
        magnetic: modes.iter().map(|m| magnetic.get(m).copied().unwrap_or([M2_ZERO; 3])).collect(),
        modes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldIntegrals {
    pub energy: f64,
    pub charge: f64,
    pub truncation_tail_bound: f64,
    /// rate `r` in the fit `energy density ≈ C e^{−r|t|}` on the outer quarters
    pub tail_rate: f64,
    pub tail_constant: f64,
}

fn trapezoid(h: f64, v: &[f64]) -> f64 {
    let n = v.len();
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

/// Least-squares slope and intercept of `(x, y)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub fn energy_charge(path: &ConnectionPath, disc: &Discretization) -> Result<FieldIntegrals> {
    let path = if path.disc.n_t != disc.n_t || (path.disc.t_max - disc.t_max).abs() > 1e-12 {
        path.resampled(Discretization { fourier_cut: path.disc.fourier_cut, fd_order: path.disc.fd_order, ..*disc })?
    } else {
        path.clone()
    };
    let n = disc.n_t;
    let fs: Vec<FieldStrength> = (0..n).map(|j| field_strength(&path, j)).collect();
    let dens: Vec<f64> = fs.iter().map(|f| f.energy_density()).collect();
    let ch: Vec<f64> = fs.iter().map(|f| f.charge_density()).collect();
    let h = disc.h();
    let energy = trapezoid(h, &dens);
    let charge = trapezoid(h, &ch) / (8.0 * PI * PI);

    // tail fit over the outer quarters where the density is resolvable
    let q = n / 4;
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in (0..q).chain(n - q..n) {
        if dens[j] > 1e-28 * peak.max(f64::MIN_POSITIVE) && dens[j] > 0.0 {
            xs.push(disc.time(j).abs());
            ys.push(dens[j].ln());
        }
    }
    let (tail_rate, tail_constant) = if xs.len() >= 4 && peak > 0.0 {
        let (s, c) = linear_fit(&xs, &ys);
        (-s, c.exp())
    } else {
        (f64::INFINITY, 0.0)
    };
    let truncation_tail_bound = if tail_rate.is_finite() && tail_rate > 0.0 {
        2.0 * tail_constant * (-tail_rate * disc.t_max).exp() / tail_rate
    } else {
        0.0
    };
    Ok(FieldIntegrals { energy, charge, truncation_tail_bound, tail_rate, tail_constant })
}
