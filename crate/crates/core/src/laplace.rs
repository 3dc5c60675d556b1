//! Kernel of the covariant Laplacian `∇*∇ = −∂_t² + Σ ∇_lᴴ∇_l` on the
//! truncated cylinder, with weight-dependent end conditions.
//!
//! On an end mode with `Σ∇ᴴ∇ = μ²` the solutions are `e^{±μt}` (or `1, t`
//! when `μ = 0`); `e^{at}` is admissible at `+T` iff `a < δ₊` and at `−T`
//! iff `a > δ₋`. The discrete equation has exact geometric solutions with
//! step ratio `r₊ = (1 + μh/2)/(1 − μh/2)`, which the end rows use.

use crate::banded::{smallest_eigenpairs, BlockRows, RowBlock};
use crate::dirac::{certify, components, end_basis, Component, Nabla, ThresholdReport, DEFAULT_SEED, KERNEL_REL_TOL, WALL_TOL};
use crate::error::Result;
use crate::grid::{Discretization, Twist, Weight};
use crate::path::ConnectionPath;
use crate::small::SMat;
use crate::torus::End;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct LaplaceKernel {
    pub dim: usize,
    pub singular_values: Vec<f64>,
    pub report: ThresholdReport,
}

/// `(growing e^{μt}, decaying e^{−μt})` admissible at `end`.
fn admissible(end: End, mu: f64, delta: &Weight) -> (bool, bool) {
    let tol = WALL_TOL * (1.0 + mu);
    match end {
        End::Plus => (mu < delta.delta_plus - tol, -mu < delta.delta_plus - tol),
        End::Minus => (mu > delta.delta_minus + tol, -mu > delta.delta_minus + tol),
    }
}

/// Rows `(on the end node, on its neighbour)` removing the inadmissible
/// end solutions along the unit vector `v`.
fn end_rows(v: &[crate::linalg::C64], mu: f64, h: f64, end: End, keep: (bool, bool)) -> Vec<(Vec<crate::linalg::C64>, f64, f64)> {
    let rp = (1.0 + 0.5 * mu * h) / (1.0 - 0.5 * mu * h);
    let rm = 1.0 / rp;
    // a solution with forward ratio ρ satisfies u_end = ρ u_nb at +T and
    // u_end = ρ⁻¹ u_nb at −T
    let keep_ratio = |rho: f64| match end {
        End::Plus => (1.0, -rho),
        End::Minus => (1.0, -1.0 / rho),
    };
    let vh: Vec<_> = v.iter().map(|x| x.conj()).collect();
    let rows: Vec<(f64, f64)> = match keep {
        (true, true) => vec![],
        (false, false) => vec![(1.0, 0.0), (0.0, 1.0)],
        (true, false) => vec![keep_ratio(rp)],
        (false, true) => vec![keep_ratio(rm)],
    };
    rows.into_iter().map(|(a, b)| (vh.clone(), a, b)).collect()
}

fn assemble_component(path: &ConnectionPath, z: &Twist, delta: &Weight, disc: &Discretization, comp: &Component) -> BlockRows {
    let mb = disc.modes();
    let n = disc.n_t;
    let h = disc.h();
    let m = comp.dim();
    let inv_h2 = 1.0 / (h * h);
    let nablas: Vec<Nabla> = (0..n).map(|j| Nabla::at_node(path, j, z, mb, comp)).collect();
    // midpoint potential from the averaged covariant derivatives
    let q_mid: Vec<SMat> = (0..n - 1)
        .map(|i| {
            let np = comp.pairs.len();
            let mut q = SMat::zeros(np, np);
            for dir in 0..3 {
                let mut a = nablas[i].l[dir].scaled(0.5);
                a.add_scaled(&nablas[i + 1].l[dir], 0.5);
                q.gemm_adj_acc(&a, &a, 1.0);
            }
            let mut out = SMat::zeros(m, m);
            for a in 0..np {
                for b in 0..np {
                    let v = q.get(a, b);
                    out.set(2 * a, 2 * b, v);
                    out.set(2 * a + 1, 2 * b + 1, v);
                }
            }
            out
        })
        .collect();

    let mut rows = Vec::with_capacity(n);
    for end in [End::Minus, End::Plus] {
        let eb = end_basis(path, end, z, mb, comp);
        let (e, nb) = match end {
            End::Minus => (0, 1),
            End::Plus => (n - 1, n - 2),
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (c, &lam) in eb.values.iter().enumerate() {
            let mu = lam.abs();
            for (vh, ca, cb) in end_rows(eb.vectors.col(c), mu, h, end, admissible(end, mu, delta)) {
                a.push(vh.iter().map(|x| *x * ca * inv_h2).collect::<Vec<_>>());
                b.push(vh.iter().map(|x| *x * cb * inv_h2).collect::<Vec<_>>());
            }
        }
        let k = a.len();
        let to_mat = |rs: &[Vec<crate::linalg::C64>]| {
            let mut s = SMat::zeros(k, m);
            for (r, row) in rs.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    s.set(r, c, *v);
                }
            }
            s
        };
        rows.push(RowBlock { nrows: k, entries: vec![(e, to_mat(&a)), (nb, to_mat(&b))] });
    }
    for j in 1..n - 1 {
        let mut lo = q_mid[j - 1].scaled(0.25);
        lo.add_diag(-inv_h2);
        let mut hi = q_mid[j].scaled(0.25);
        hi.add_diag(-inv_h2);
        let mut mid = q_mid[j - 1].scaled(0.25);
        mid.add_scaled(&q_mid[j], 0.25);
        mid.add_diag(2.0 * inv_h2);
        rows.push(RowBlock { nrows: m, entries: vec![(j - 1, lo), (j, mid), (j + 1, hi)] });
    }
    BlockRows::new(vec![m; n], rows)
}

/// Certified dimension of the Laplacian kernel at weight `δ`.
pub fn laplacian_kernel(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    delta: Weight,
    disc: &Discretization,
    k_max: usize,
) -> Result<LaplaceKernel> {
    let z = z.into();
    let comps = components(path, disc.modes());
    let mats: Vec<BlockRows> = comps.par_iter().map(|c| assemble_component(path, &z, &delta, disc, c)).collect();
    let q = k_max + 1;
    let mut found: Vec<f64> = Vec::new();
    for (ci, mat) in mats.iter().enumerate() {
        let nmat = mat.normal();
        if found.len() >= q && nmat.exceeds(found[q - 1]) {
            continue;
        }
        let ep = smallest_eigenpairs(&nmat, q, DEFAULT_SEED.wrapping_add(ci as u64))?;
        found.extend(ep.values);
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        found.truncate(q);
    }
    let scale = mats.iter().map(|m| m.scale()).fold(0.0, f64::max);
    let values: Vec<f64> = found.iter().map(|t| t.sqrt()).collect();
    let (dim, report) = certify(&values, KERNEL_REL_TOL * scale, k_max)?;
    Ok(LaplaceKernel { dim, singular_values: values, report })
}
