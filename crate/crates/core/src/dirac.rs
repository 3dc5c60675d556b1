//! Discrete twisted Dirac operators on the truncated cylinder `[−T, T]×T³`.
//!
//! Conventions (see `book/src/conventions.md`):
//! * `∇_j = ∂_j + a_j − 2πi z_j`, spatial Dirac `B = Σ_j (−iσ_j)∇_j`, which is
//!   `2π σ·k` on a flat mode;
//! * `D* = −∂_t + B` and `D = ∂_t + B`, both written `s∂_t + B`;
//! * time derivative: box scheme (order 2) or Hermite compact scheme
//!   (order 4), mapping node values to cell midpoints;
//! * spectral boundary conditions imposed as a restriction of the endpoint
//!   unknowns to the allowed eigenvectors of the exact flat end operator.

use crate::banded::{smallest_eigenpairs, BlockRows, RowBlock};
use crate::error::{Error, Result};
use crate::field::{fiber_index, SpinorField};
use crate::grid::{Discretization, ModeBox, Twist, Weight};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::small::SMat;
use crate::path::ConnectionPath;
use crate::torus::{self, helicity_spinor, norm3, Branch, End, TorusPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    D,
    DStar,
}

impl Which {
    /// Sign of `∂_t`.
    pub fn s(self) -> f64 {
        match self {
            Which::D => 1.0,
            Which::DStar => -1.0,
        }
    }
    pub fn other(self) -> Which {
        match self {
            Which::D => Which::DStar,
            Which::DStar => Which::D,
        }
    }
}

/// Relative tolerance deciding that an eigenvalue sits on a weight wall.
pub const WALL_TOL: f64 = 1e-12;

/// Default seed for eigensolver starting blocks.
pub const DEFAULT_SEED: u64 = 0x6e61_686d;

/// A set of (mode, branch) pairs closed under the coupling of the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pairs: Vec<(usize, usize)>,
}

impl Component {
    pub fn dim(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Global fiber indices of the local coordinates, spin fastest.
    pub fn fiber_indices(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.dim());
        for &(m, e) in &self.pairs {
            v.push(fiber_index(m, e, 0));
            v.push(fiber_index(m, e, 1));
        }
        v
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Connected components of the (mode, branch) coupling graph.
pub fn components(path: &ConnectionPath, mb: ModeBox) -> Vec<Component> {
    let npairs = mb.len() * 2;
    let mut parent: Vec<usize> = (0..npairs).collect();
    for (k, dm) in path.modes.iter().enumerate() {
        let mut mask = [[false; 2]; 2];
        for j in 0..path.disc.n_t {
            for dir in 0..3 {
                let a = path.coeff(j, k, dir);
                for r in 0..2 {
                    for c in 0..2 {
                        if a[r][c] != ZERO {
                            mask[r][c] = true;
                        }
                    }
                }
            }
        }
        for (e, row) in mask.iter().enumerate() {
            for (ep, &on) in row.iter().enumerate() {
                if !on || (*dm == [0, 0, 0] && e == ep) {
                    continue;
                }
                for q in 0..mb.len() {
                    let n = mb.mode(q);
                    if let Some(p) = mb.index([n[0] + dm[0], n[1] + dm[1], n[2] + dm[2]]) {
                        let a = find(&mut parent, p * 2 + e);
                        let b = find(&mut parent, q * 2 + ep);
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for id in 0..npairs {
        let r = find(&mut parent, id);
        groups.entry(r).or_default().push((id / 2, id % 2));
    }
    groups.into_values().map(|pairs| Component { pairs }).collect()
}

/// Spatial covariant derivatives `∇_l` restricted to a component, as
/// matrices over its (mode, branch) pairs.
pub(crate) struct Nabla {
    pub l: [SMat; 3],
}

impl Nabla {
    pub fn at_node(path: &ConnectionPath, j: usize, z: &Twist, mb: ModeBox, comp: &Component) -> Self {
        let np = comp.pairs.len();
        let mut l = [SMat::zeros(np, np), SMat::zeros(np, np), SMat::zeros(np, np)];
        for (p, &(mp, ep)) in comp.pairs.iter().enumerate() {
            let n_p = mb.mode(mp);
            for (q, &(mq, eq)) in comp.pairs.iter().enumerate() {
                let n_q = mb.mode(mq);
                let dm = [n_p[0] - n_q[0], n_p[1] - n_q[1], n_p[2] - n_q[2]];
                let k = path.mode_index(dm);
                for dir in 0..3 {
                    let mut v = ZERO;
                    if let Some(k) = k {
                        v += path.coeff(j, k, dir)[ep][eq];
                    }
                    if p == q {
                        v += C64::new(0.0, 2.0 * PI * (n_p[dir] as f64 - z.0[dir]));
                    }
                    if v != ZERO {
                        l[dir].set(p, q, v);
                    }
                }
            }
        }
        Nabla { l }
    }

    /// `B = Σ (−iσ_l) ⊗ ∇_l` on spin-fastest coordinates.
    pub fn dirac(&self) -> SMat {
        let np = self.l[0].r;
        let sig = linalg::pauli();
        let mi = C64::new(0.0, -1.0);
        let mut b = SMat::zeros(2 * np, 2 * np);
        for q in 0..np {
            for p in 0..np {
                for dir in 0..3 {
                    let v = self.l[dir].get(p, q);
                    if v == ZERO {
                        continue;
                    }
                    for s in 0..2 {
                        for sp in 0..2 {
                            let c = mi * sig[dir][s][sp] * v;
                            if c != ZERO {
                                b.add_at(2 * p + s, 2 * q + sp, c);
                            }
                        }
                    }
                }
            }
        }
        b
    }

    /// `Σ ∇_lᴴ ∇_l ⊗ 1_spin`.
    pub fn laplacian(&self) -> SMat {
        let np = self.l[0].r;
        let mut q = SMat::zeros(np, np);
        for dir in 0..3 {
            q.gemm_adj_acc(&self.l[dir], &self.l[dir], 1.0);
        }
        let mut out = SMat::zeros(2 * np, 2 * np);
        for a in 0..np {
            for b in 0..np {
                let v = q.get(a, b);
                out.set(2 * a, 2 * b, v);
                out.set(2 * a + 1, 2 * b + 1, v);
            }
        }
        out
    }
}

/// Exact eigen-decomposition of the flat end operator on a component.
#[derive(Debug, Clone)]
pub struct EndBasis {
    pub values: Vec<f64>,
    /// columns are unit eigenvectors in local coordinates
    pub vectors: SMat,
}

pub fn end_basis(path: &ConnectionPath, end: End, z: &Twist, mb: ModeBox, comp: &Component) -> EndBasis {
    let w = match end {
        End::Minus => path.end_w[0],
        End::Plus => path.end_w[1],
    };
    let m = comp.dim();
    let mut vectors = SMat::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    for (p, &(mode, e)) in comp.pairs.iter().enumerate() {
        let branch = if e == 0 { Branch::Plus } else { Branch::Minus };
        let k = torus::mode_momentum(mb.mode(mode), branch, w, z.0);
        let lam = 2.0 * PI * norm3(k);
        if lam < torus::LEVEL_TOL {
            vectors.set(2 * p, 2 * p, linalg::ONE);
            vectors.set(2 * p + 1, 2 * p + 1, linalg::ONE);
            values.push(0.0);
            values.push(0.0);
        } else {
            for (col, sign) in [(0usize, 1.0f64), (1, -1.0)] {
                let v = helicity_spinor(k, sign);
                vectors.set(2 * p, 2 * p + col, v[0]);
                vectors.set(2 * p + 1, 2 * p + col, v[1]);
                values.push(sign * lam);
            }
        }
    }
    EndBasis { values, vectors }
}

/// Whether the solution `e^{−sλt}` of `s∂_t + λ` is admissible at an end
/// under weight `δ`. Eigenvalues on the wall are excluded.
pub fn allowed(which: Which, end: End, lambda: f64, delta: &Weight) -> bool {
    let tol = WALL_TOL * (1.0 + lambda.abs());
    match (which, end) {
        (Which::DStar, End::Plus) => lambda < delta.delta_plus - tol,
        (Which::DStar, End::Minus) => lambda > delta.delta_minus + tol,
        (Which::D, End::Plus) => lambda > -delta.delta_plus + tol,
        (Which::D, End::Minus) => lambda < -delta.delta_minus - tol,
    }
}

/// One decoupled block of an assembled operator.
#[derive(Debug, Clone)]
pub struct ComponentOp {
    pub comp: Component,
    pub matrix: BlockRows,
    /// allowed eigenvectors at −T and +T (local coordinates)
    pub start_basis: SMat,
    pub end_basis: SMat,
}

impl ComponentOp {
    /// Embed a column-space vector as node values `u_j` (local coordinates).
    /// End coordinates carry the trapezoid weight: `u_end = √2·E x`, so
    /// `‖x‖²` is the trapezoid sum of `|u_j|²`.
    pub fn nodes_from_coords(&self, x: &[C64], n_t: usize) -> Vec<Vec<C64>> {
        let m = self.comp.dim();
        let mut out = Vec::with_capacity(n_t);
        for j in 0..n_t {
            let o = self.matrix.col_offset(j);
            let v: Vec<C64> = if j == 0 || j == n_t - 1 {
                let e = if j == 0 { &self.start_basis } else { &self.end_basis };
                (0..m)
                    .map(|r| (0..e.c).fold(ZERO, |acc, c| acc + e.get(r, c) * x[o + c]) * SQRT_2)
                    .collect()
            } else {
                x[o..o + m].to_vec()
            };
            out.push(v);
        }
        out
    }

    /// Orthogonal restriction of node values onto the column space.
    pub fn coords_from_nodes(&self, nodes: &[Vec<C64>]) -> Vec<C64> {
        let n_t = nodes.len();
        let mut x = vec![ZERO; self.matrix.ncols()];
        for (j, u) in nodes.iter().enumerate() {
            let o = self.matrix.col_offset(j);
            if j == 0 || j == n_t - 1 {
                let e = if j == 0 { &self.start_basis } else { &self.end_basis };
                for c in 0..e.c {
                    x[o + c] = linalg::dot(e.col(c), u) * FRAC_1_SQRT_2;
                }
            } else {
                x[o..o + u.len()].copy_from_slice(u);
            }
        }
        x
    }
}

/// Assembled, weight-conjugated discrete operator with spectral boundary data.
#[derive(Debug, Clone)]
pub struct DiracOperator {
    pub path: Arc<ConnectionPath>,
    pub twist: Twist,
    pub weight: Weight,
    pub which: Which,
    pub disc: Discretization,
    pub components: Vec<ComponentOp>,
    pub seed: u64,
}

impl DiracOperator {
    pub fn n_cols(&self) -> usize {
        self.components.iter().map(|c| c.matrix.ncols()).sum()
    }
    pub fn n_rows(&self) -> usize {
        self.components.iter().map(|c| c.matrix.nrows()).sum()
    }
    /// Fredholm index of the truncated boundary value problem.
    pub fn bvp_index(&self) -> i64 {
        self.n_cols() as i64 - self.n_rows() as i64
    }

    /// Discrete grid of the range: cell midpoints.
    pub fn range_disc(&self) -> Discretization {
        let h = self.disc.h();
        Discretization { t_max: self.disc.t_max - 0.5 * h, n_t: self.disc.n_t - 1, ..self.disc }
    }

    /// Apply to a node field (restricted to the boundary-compatible part).
    /// Result lives on the midpoint grid.
    pub fn apply(&self, phi: &SpinorField) -> SpinorField {
        let mut out = SpinorField::zeros(self.range_disc());
        for cop in &self.components {
            let idx = cop.comp.fiber_indices();
            let nodes: Vec<Vec<C64>> = (0..self.disc.n_t)
                .map(|j| {
                    let s = (self.weight.log_sigma(self.disc.time(j))).exp();
                    idx.iter().map(|&f| phi.node(j)[f] * s).collect()
                })
                .collect();
            let x = cop.coords_from_nodes(&nodes);
            let y = cop.matrix.apply(&x);
            let m = cop.comp.dim();
            for i in 0..self.disc.n_t - 1 {
                let s = (-self.weight.log_sigma(self.disc.mid(i))).exp();
                let node = out.node_mut(i);
                for (r, &f) in idx.iter().enumerate() {
                    node[f] = y[i * m + r] * s;
                }
            }
        }
        out
    }

    /// Exact adjoint of the assembled (weight-conjugated) matrix: midpoint
    /// field to boundary-compatible node field. At `δ = 0` this is the
    /// adjoint of [`apply`](Self::apply).
    pub fn apply_adjoint(&self, psi: &SpinorField) -> SpinorField {
        let mut out = SpinorField::zeros(self.disc);
        for cop in &self.components {
            let idx = cop.comp.fiber_indices();
            let m = cop.comp.dim();
            let mut y = vec![ZERO; cop.matrix.nrows()];
            for i in 0..self.disc.n_t - 1 {
                let node = psi.node(i);
                for (r, &f) in idx.iter().enumerate() {
                    y[i * m + r] = node[f];
                }
            }
            let x = cop.matrix.apply_adjoint(&y);
            let nodes = cop.nodes_from_coords(&x, self.disc.n_t);
            for (j, u) in nodes.iter().enumerate() {
                let node = out.node_mut(j);
                for (r, &f) in idx.iter().enumerate() {
                    node[f] = u[r];
                }
            }
        }
        out
    }
}

fn resolution_checks(path: &ConnectionPath, z: &Twist, delta: &Weight, disc: &Discretization) -> Result<()> {
    disc.validate()?;
    if (path.disc.t_max - disc.t_max).abs() > 1e-12 || path.disc.n_t != disc.n_t {
        return Err(Error::InvalidDiscretization(format!(
            "path sampled on (t_max {}, n_t {}), operator wants (t_max {}, n_t {})",
            path.disc.t_max, path.disc.n_t, disc.t_max, disc.n_t
        )));
    }
    if disc.t_max * path.decay_rate < 3.0 {
        return Err(Error::BoundaryMismatch(disc.t_max * path.decay_rate));
    }
    let scale = delta.delta_minus.abs().max(delta.delta_plus.abs());
    if 2.0 * PI * (disc.fourier_cut as f64) < 3.0 * scale {
        return Err(Error::ResolutionTooCoarse(format!(
            "fourier_cut {} cannot resolve weight scale {scale}",
            disc.fourier_cut
        )));
    }
    // the box scheme degenerates when h·|λ| reaches 2
    let kc = disc.fourier_cut as f64;
    let zmax = norm3(z.0);
    let mut amax: f64 = 0.0;
    for j in 0..path.disc.n_t {
        let mut s = 0.0;
        for (k, _) in path.modes.iter().enumerate() {
            for dir in 0..3 {
                s += crate::path::m2_norm2(path.coeff(j, k, dir));
            }
        }
        amax = amax.max(s.sqrt());
    }
    let lam_max = 2.0 * PI * (3f64.sqrt() * kc + zmax) + 3f64.sqrt() * amax;
    if disc.h() * lam_max >= 1.9 {
        return Err(Error::ResolutionTooCoarse(format!(
            "time step {} too coarse for spectral radius {lam_max:.3} (need h·λ < 1.9)",
            disc.h()
        )));
    }
    Ok(())
}

/// Time derivative of node matrices by fourth-order finite differences.
fn node_derivatives(mats: &[SMat], h: f64) -> Vec<SMat> {
    let n = mats.len();
    let comb = |coef: &[(usize, f64)]| {
        let mut acc = SMat::zeros(mats[0].r, mats[0].c);
        for &(k, c) in coef {
            acc.add_scaled(&mats[k], c / (12.0 * h));
        }
        acc
    };
    (0..n)
        .map(|j| {
            if j >= 2 && j + 2 < n {
                comb(&[(j - 2, 1.0), (j - 1, -8.0), (j + 1, 8.0), (j + 2, -1.0)])
            } else if j == 0 {
                comb(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)])
            } else if j == 1 {
                comb(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)])
            } else {
                let b = n - 1;
                if j == b {
                    comb(&[(b, 25.0), (b - 1, -48.0), (b - 2, 36.0), (b - 3, -16.0), (b - 4, 3.0)])
                } else {
                    comb(&[(b, 3.0), (b - 1, 10.0), (b - 2, -18.0), (b - 3, 6.0), (b - 4, -1.0)])
                }
            }
        })
        .collect()
}

fn select_columns(basis: &EndBasis, keep: impl Fn(f64) -> bool) -> SMat {
    let cols: Vec<usize> = (0..basis.values.len()).filter(|&c| keep(basis.values[c])).collect();
    basis.vectors.select_cols(&cols)
}

pub(crate) fn node_diracs(path: &ConnectionPath, z: &Twist, disc: &Discretization, comp: &Component) -> Vec<SMat> {
    let mb = disc.modes();
    (0..disc.n_t).map(|j| Nabla::at_node(path, j, z, mb, comp).dirac()).collect()
}

/// Midpoint row coefficients `(on u_i, on u_{i+1})` of `s∂_t + B`.
pub(crate) fn row_coefficients(b_nodes: &[SMat], s: f64, h: f64, fd_order: usize) -> Vec<(SMat, SMat)> {
    let n = b_nodes.len();
    if fd_order == 4 {
        let bdot = node_derivatives(b_nodes, h);
        let hc = s * h / 12.0;
        let q: Vec<SMat> = (0..n)
            .map(|j| {
                let mut b2 = b_nodes[j].mul(&b_nodes[j]);
                b2.add_scaled(&bdot[j], -s);
                b2
            })
            .collect();
        (0..n - 1)
            .map(|i| {
                let mut l = b_nodes[i].scaled(0.5);
                l.add_scaled(&q[i], -hc);
                l.add_diag(-s / h);
                let mut r = b_nodes[i + 1].scaled(0.5);
                r.add_scaled(&q[i + 1], hc);
                r.add_diag(s / h);
                (l, r)
            })
            .collect()
    } else {
        (0..n - 1)
            .map(|i| {
                let mut bm = b_nodes[i].scaled(0.25);
                bm.add_scaled(&b_nodes[i + 1], 0.25);
                let mut l = bm.clone();
                l.add_diag(-s / h);
                let mut r = bm;
                r.add_diag(s / h);
                (l, r)
            })
            .collect()
    }
}

fn assemble_component(
    path: &ConnectionPath,
    z: &Twist,
    delta: &Weight,
    disc: &Discretization,
    which: Which,
    comp: &Component,
) -> ComponentOp {
    let mb = disc.modes();
    let n = disc.n_t;
    let h = disc.h();
    let m = comp.dim();
    let b_nodes = node_diracs(path, z, disc, comp);
    let ls: Vec<f64> = (0..n).map(|j| delta.log_sigma(disc.time(j))).collect();

    let eb_minus = end_basis(path, End::Minus, z, mb, comp);
    let eb_plus = end_basis(path, End::Plus, z, mb, comp);
    let start_basis = select_columns(&eb_minus, |l| allowed(which, End::Minus, l, delta));
    let end_basis_m = select_columns(&eb_plus, |l| allowed(which, End::Plus, l, delta));

    let mut col_sizes = vec![m; n];
    col_sizes[0] = start_basis.c;
    col_sizes[n - 1] = end_basis_m.c;

    let coefs = row_coefficients(&b_nodes, which.s(), h, disc.fd_order);
    let mut rows = Vec::with_capacity(n - 1);
    for (i, (l, r)) in coefs.into_iter().enumerate() {
        let lm = delta.log_sigma(disc.mid(i));
        let mut l = l.scaled((lm - ls[i]).exp());
        let mut r = r.scaled((lm - ls[i + 1]).exp());
        if i == 0 {
            l = l.mul(&start_basis).scaled(SQRT_2);
        }
        if i + 1 == n - 1 {
            r = r.mul(&end_basis_m).scaled(SQRT_2);
        }
        rows.push(RowBlock { nrows: m, entries: vec![(i, l), (i + 1, r)] });
    }
    ComponentOp {
        comp: comp.clone(),
        matrix: BlockRows::new(col_sizes, rows),
        start_basis,
        end_basis: end_basis_m,
    }
}

/// Assemble `σ_δ ∘ op ∘ σ_δ⁻¹` for `op ∈ {D, D*}` at twist `z`.
pub fn assemble_dirac(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    delta: Weight,
    disc: &Discretization,
    which: Which,
) -> Result<DiracOperator> {
    let z = z.into();
    resolution_checks(path, &z, &delta, disc)?;
    let comps = components(path, disc.modes());
    let ops: Vec<ComponentOp> =
        comps.par_iter().map(|c| assemble_component(path, &z, &delta, disc, which, c)).collect();
    Ok(DiracOperator {
        path: Arc::new(path.clone()),
        twist: z,
        weight: delta,
        which,
        disc: *disc,
        components: ops,
        seed: DEFAULT_SEED,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub gap_ratio: f64,
    pub below: Vec<f64>,
    pub above: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelResult {
    pub basis: Vec<SpinorField>,
    pub singular_values: Vec<f64>,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub threshold_report: ThresholdReport,
}

/// Certified kernel of one operator, without the cokernel.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub basis: Vec<SpinorField>,
    pub singular_values: Vec<f64>,
    pub dim: usize,
    pub report: ThresholdReport,
}

/// Relative threshold on singular values (times the operator scale).
pub const KERNEL_REL_TOL: f64 = 1e-6;

/// Decide the kernel dimension from ascending singular values. The grey
/// zone `[τ/√10, τ√10]` must be empty, which forces a gap ratio ≥ 10.
pub fn certify(values: &[f64], threshold: f64, k_max: usize) -> Result<(usize, ThresholdReport)> {
    let lo = threshold / 10f64.sqrt();
    let hi = threshold * 10f64.sqrt();
    if let Some(v) = values.iter().find(|&&v| v >= lo && v <= hi) {
        return Err(Error::NoSpectralGap(format!(
            "singular value {v:.3e} within a factor √10 of the threshold {threshold:.3e}"
        )));
    }
    let dim = values.iter().filter(|&&v| v < threshold).count();
    if dim > k_max {
        return Err(Error::NoSpectralGap(format!("kernel dimension exceeds k_max = {k_max}")));
    }
    let gap_ratio = match (dim, values.get(dim)) {
        (_, None) => f64::INFINITY,
        (0, Some(&a)) => a / lo,
        (d, Some(&a)) => a / values[d - 1].max(f64::MIN_POSITIVE),
    };
    Ok((
        dim,
        ThresholdReport {
            threshold,
            gap_ratio,
            below: values[..dim].to_vec(),
            above: values[dim..].to_vec(),
        },
    ))
}

/// Heuristic distance of a component from singularity: smallest end
/// eigenvalue distance to the weight walls.
fn gap_estimate(cop: &ComponentOp, op: &DiracOperator) -> f64 {
    let mb = op.disc.modes();
    let mut g = f64::INFINITY;
    for end in [End::Minus, End::Plus] {
        let eb = end_basis(&op.path, end, &op.twist, mb, &cop.comp);
        let d = match end {
            End::Minus => op.weight.delta_minus,
            End::Plus => op.weight.delta_plus,
        };
        for l in eb.values {
            g = g.min((l - d).abs()).min((l + d).abs());
        }
    }
    g
}

/// Smallest singular triplets and certified null space of one operator.
///
/// Components are visited in order of their end gaps. Once `k_max + 1`
/// candidates are known, a component is skipped when the factorization of
/// `LᴴL − θ_{k_max+1}` succeeds, which certifies that it holds no smaller
/// singular value.
pub fn null_space(op: &DiracOperator, k_max: usize) -> Result<NullSpace> {
    let q = k_max + 1;
    let mut order: Vec<(f64, usize)> =
        op.components.iter().enumerate().map(|(ci, c)| (gap_estimate(c, op), ci)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut found: Vec<(f64, usize, usize)> = Vec::new();
    let mut vectors: std::collections::HashMap<usize, SMat> = Default::default();
    for &(_, ci) in &order {
        let cop = &op.components[ci];
        if cop.matrix.ncols() == 0 {
            continue;
        }
        let nmat = cop.matrix.normal();
        if found.len() >= q && nmat.exceeds(found[q - 1].0) {
            continue;
        }
        let ep = smallest_eigenpairs(&nmat, q, op.seed.wrapping_add(ci as u64))?;
        for (j, &t) in ep.values.iter().enumerate() {
            found.push((t, ci, j));
        }
        vectors.insert(ci, ep.vectors);
        found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
        found.truncate(q);
    }
    let scale = op.components.iter().map(|c| c.matrix.scale()).fold(0.0, f64::max);
    let threshold = KERNEL_REL_TOL * scale;
    let values: Vec<f64> = found.iter().map(|x| x.0.sqrt()).collect();
    let (dim, report) = certify(&values, threshold, k_max)?;
    let h = op.disc.h();
    let basis = found[..dim]
        .iter()
        .map(|&(_, ci, j)| {
            let cop = &op.components[ci];
            let x = vectors[&ci].col(j).to_vec();
            let nodes = cop.nodes_from_coords(&x, op.disc.n_t);
            let mut f = SpinorField::zeros(op.disc);
            let idx = cop.comp.fiber_indices();
            for (jn, u) in nodes.iter().enumerate() {
                let s = (-op.weight.log_sigma(op.disc.time(jn))).exp();
                let node = f.node_mut(jn);
                for (r, &fi) in idx.iter().enumerate() {
                    node[fi] = C64::new(u[r].re * s, u[r].im * s);
                }
            }
            let nrm = linalg::norm(&x) * h.sqrt();
            f.scale(C64::new(1.0 / nrm, 0.0));
            f
        })
        .collect();
    Ok(NullSpace { basis, singular_values: values, dim, report })
}

/// Kernel, cokernel (the other operator at weight −δ) and index.
pub fn kernel(op: &DiracOperator, k_max: usize) -> Result<KernelResult> {
    let ns = null_space(op, k_max)?;
    let mut adj = assemble_dirac(&op.path, op.twist, op.weight.neg(), &op.disc, op.which.other())?;
    adj.seed = op.seed ^ 0x9e37_79b9;
    let co = null_space(&adj, k_max)?;
    Ok(KernelResult {
        basis: ns.basis,
        singular_values: ns.singular_values,
        dim_ker: ns.dim,
        dim_coker: co.dim,
        index: ns.dim as i64 - co.dim as i64,
        threshold_report: ns.report,
    })
}

/// Whether `δ` avoids every wall `spec(D_{Γ₋,z})×ℝ ∪ ℝ×spec(D_{Γ₊,z})`.
pub fn is_fredholm(path: &ConnectionPath, z: impl Into<Twist>, delta: Weight) -> bool {
    let zp = z.into().point();
    let wm = TorusPoint::new(path.end_w[0]);
    let wp = TorusPoint::new(path.end_w[1]);
    let on = |w: TorusPoint, d: f64| torus::exact_spectrum(w, zp, d.abs() + 1.0).contains(d, 1e-10);
    !(on(wm, delta.delta_minus) || on(wp, delta.delta_plus))
}

/// Fredholm wall data at one twist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmGrid {
    pub spec_minus: torus::SpectrumMultiset,
    pub spec_plus: torus::SpectrumMultiset,
    pub cutoff: f64,
}

impl FredholmGrid {
    pub fn is_on_wall(&self, d: &Weight) -> bool {
        self.spec_minus.contains(d.delta_minus, 1e-12) || self.spec_plus.contains(d.delta_plus, 1e-12)
    }

    /// Distance from `δ = (0,0)` to the nearest wall.
    pub fn nearest_wall(&self) -> f64 {
        self.spec_minus
            .values()
            .into_iter()
            .chain(self.spec_plus.values())
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn fredholm_grid(path: &ConnectionPath, z: impl Into<Twist>, cutoff: f64) -> FredholmGrid {
    let zp = z.into().point();
    FredholmGrid {
        spec_minus: torus::exact_spectrum(TorusPoint::new(path.end_w[0]), zp, cutoff),
        spec_plus: torus::exact_spectrum(TorusPoint::new(path.end_w[1]), zp, cutoff),
        cutoff,
    }
}

/// Predicted and measured `index(δ) − index(η)` for a single-wall move.
pub fn wall_crossing_check(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    delta: Weight,
    eta: Weight,
    disc: &Discretization,
) -> Result<(i64, i64)> {
    let z = z.into();
    let cutoff = delta.delta_minus.abs().max(delta.delta_plus.abs()).max(eta.delta_minus.abs()).max(eta.delta_plus.abs()) + 1.0;
    let g = fredholm_grid(path, z, cutoff);
    let walls_minus: Vec<&torus::SpectrumEntry> = g
        .spec_minus
        .entries
        .iter()
        .filter(|e| between(e.value, delta.delta_minus, eta.delta_minus))
        .collect();
    let walls_plus: Vec<&torus::SpectrumEntry> = g
        .spec_plus
        .entries
        .iter()
        .filter(|e| between(e.value, delta.delta_plus, eta.delta_plus))
        .collect();
    let nwalls = walls_minus.len() + walls_plus.len();
    if nwalls > 1 {
        return Err(Error::NotAdjacent(nwalls));
    }
    // D* gains the eigenvectors at μ when δ₊ moves above μ, and when δ₋
    // moves below μ.
    let predicted: i64 = if let Some(e) = walls_plus.first() {
        let up = eta.delta_plus > delta.delta_plus;
        if up {
            -(e.multiplicity as i64)
        } else {
            e.multiplicity as i64
        }
    } else if let Some(e) = walls_minus.first() {
        let down = eta.delta_minus < delta.delta_minus;
        if down {
            -(e.multiplicity as i64)
        } else {
            e.multiplicity as i64
        }
    } else {
        0
    };
    let k = 8;
    let a = kernel(&assemble_dirac(path, z, delta, disc, Which::DStar)?, k)?;
    let b = kernel(&assemble_dirac(path, z, eta, disc, Which::DStar)?, k)?;
    Ok((predicted, a.index - b.index))
}

fn between(v: f64, a: f64, b: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    v > lo && v < hi
}

/// Net count of eigenvalues of `t ↦ B(t)` crossing zero upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFlowReport {
    pub flow: i64,
    /// (time of the step midpoint, net upward crossings in that step)
    pub events: Vec<(f64, i64)>,
}

pub fn spectral_flow(path: &ConnectionPath, z: impl Into<Twist>, disc: &Discretization) -> Result<i64> {
    spectral_flow_report(path, z, disc).map(|r| r.flow)
}

pub fn spectral_flow_report(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    disc: &Discretization,
) -> Result<SpectralFlowReport> {
    let z = z.into();
    let zp = z.point();
    for (end, w) in [(End::Minus, path.end_w[0]), (End::Plus, path.end_w[1])] {
        let spec = torus::exact_spectrum(TorusPoint::new(w), zp, 1.0);
        if spec.contains(0.0, 1e-10) {
            let t = if end == End::Minus { -disc.t_max } else { disc.t_max };
            return Err(Error::CrossingAtBoundary(t));
        }
    }
    if path.disc.n_t != disc.n_t {
        return Err(Error::InvalidDiscretization("path and discretization differ".into()));
    }
    let mb = disc.modes();
    let comps = components(path, mb);
    let n = disc.n_t;
    let counts: Vec<Vec<i64>> = comps
        .par_iter()
        .map(|comp| {
            (0..n)
                .map(|j| {
                    let b = Nabla::at_node(path, j, &z, mb, comp).dirac();
                    let ev = linalg::herm_eigvals(&b.to_cmat());
                    let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                    ev.iter().filter(|&&v| v < -1e-10 * scale).count() as i64
                })
                .collect()
        })
        .collect();
    let mut events = Vec::new();
    let mut flow = 0;
    for j in 0..n - 1 {
        let d: i64 = counts.iter().map(|c| c[j] - c[j + 1]).sum();
        if d != 0 {
            events.push((disc.mid(j), d));
        }
        flow += d;
    }
    Ok(SpectralFlowReport { flow, events })
}

/// Spatial Dirac operator of the path at node `j` on the full fiber.
pub fn cross_section_dirac(path: &ConnectionPath, j: usize, z: impl Into<Twist>, mb: ModeBox) -> CMat {
    let z = z.into();
    let all = Component { pairs: (0..mb.len() * 2).map(|id| (id / 2, id % 2)).collect() };
    Nabla::at_node(path, j, &z, mb, &all).dirac().to_cmat()
}

/// `cl(F⁺)φ` at one node on the full fiber: `−iσ_l (B_l − E_l)` convolved
/// over Fourier modes.
pub fn clifford_self_dual(fs: &crate::curvature::FieldStrength, node: &[C64], mb: ModeBox) -> Vec<C64> {
    let sig = linalg::pauli();
    let mi = C64::new(0.0, -1.0);
    let mut out = vec![ZERO; node.len()];
    for (k, m) in fs.modes.iter().enumerate() {
        let g: [crate::path::M2; 3] = [0, 1, 2].map(|l| crate::path::m2_sub(&fs.magnetic[k][l], &fs.electric[k][l]));
        for src in 0..mb.len() {
            let n = mb.mode(src);
            let Some(dst) = mb.index([n[0] + m[0], n[1] + m[1], n[2] + m[2]]) else { continue };
            for e in 0..2 {
                for ep in 0..2 {
                    for s in 0..2 {
                        let mut acc = ZERO;
                        for sp in 0..2 {
                            let v = node[fiber_index(src, ep, sp)];
                            if v == ZERO {
                                continue;
                            }
                            for (l, gl) in g.iter().enumerate() {
                                acc += mi * sig[l][s][sp] * gl[e][ep] * v;
                            }
                        }
                        out[fiber_index(dst, e, s)] += acc;
                    }
                }
            }
        }
    }
    out
}

fn smat_apply(m: &SMat, v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; m.r];
    for j in 0..m.c {
        if v[j] == ZERO {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.col(j)) {
            *o += *a * v[j];
        }
    }
    out
}

/// Relative residual `‖D*Dφ − ∇*∇φ − cl(F⁺)φ‖ / ‖φ‖` over interior nodes,
/// with the curvature from finite differences of the path.
pub fn weitzenbock_residual(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    phi: &SpinorField,
    disc: &Discretization,
) -> Result<f64> {
    let curv: Vec<crate::curvature::FieldStrength> =
        (0..disc.n_t).map(|j| crate::curvature::field_strength(path, j)).collect();
    weitzenbock_residual_with(path, z, phi, disc, |j| curv[j].clone())
}

/// As [`weitzenbock_residual`] with a caller-supplied curvature per node.
///
/// `D` is the box discretization `(φ_{i+1}−φ_i)/h + B_{i+½}(φ_i+φ_{i+1})/2`
/// and `D*` its exact adjoint; `∇*∇` uses the same midpoint averaging.
pub fn weitzenbock_residual_with(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    phi: &SpinorField,
    disc: &Discretization,
    curvature: impl Fn(usize) -> crate::curvature::FieldStrength,
) -> Result<f64> {
    let z = z.into();
    if path.disc.n_t != disc.n_t || phi.disc != *disc {
        return Err(Error::InvalidDiscretization("path, field and grid must share one time grid".into()));
    }
    let n = disc.n_t;
    let h = disc.h();
    let mb = disc.modes();
    let comps = components(path, mb);
    let fl = mb.len() * 4;
    let mut resid = vec![ZERO; n * fl];
    for comp in &comps {
        let idx = comp.fiber_indices();
        let m = idx.len();
        let nab: Vec<Nabla> = (0..n).map(|j| Nabla::at_node(path, j, &z, mb, comp)).collect();
        let mids: Vec<(SMat, SMat)> = (0..n - 1)
            .map(|i| {
                let avg = Nabla {
                    l: [0, 1, 2].map(|d| {
                        let mut a = nab[i].l[d].scaled(0.5);
                        a.add_scaled(&nab[i + 1].l[d], 0.5);
                        a
                    }),
                };
                (avg.dirac(), avg.laplacian())
            })
            .collect();
        let u: Vec<Vec<C64>> = (0..n).map(|j| idx.iter().map(|&f| phi.node(j)[f]).collect()).collect();
        // D u on midpoints
        let du: Vec<Vec<C64>> = (0..n - 1)
            .map(|i| {
                let sum: Vec<C64> = u[i].iter().zip(&u[i + 1]).map(|(a, b)| (*a + *b) * 0.5).collect();
                let bs = smat_apply(&mids[i].0, &sum);
                (0..m).map(|r| (u[i + 1][r] - u[i][r]) / h + bs[r]).collect()
            })
            .collect();
        for j in 1..n - 1 {
            let bp = smat_apply(&mids[j].0, &du[j]);
            let bm = smat_apply(&mids[j - 1].0, &du[j - 1]);
            let qp = smat_apply(&mids[j].1, &u[j].iter().zip(&u[j + 1]).map(|(a, b)| *a + *b).collect::<Vec<_>>());
            let qm = smat_apply(&mids[j - 1].1, &u[j - 1].iter().zip(&u[j]).map(|(a, b)| *a + *b).collect::<Vec<_>>());
            for r in 0..m {
                let dsd = (du[j - 1][r] - du[j][r]) / h + (bp[r] + bm[r]) * 0.5;
                let lap = -(u[j + 1][r] - u[j][r] * 2.0 + u[j - 1][r]) / (h * h) + (qp[r] + qm[r]) * 0.25;
                resid[j * fl + idx[r]] += dsd - lap;
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 1..n - 1 {
        let fs = curvature(j);
        let c = clifford_self_dual(&fs, phi.node(j), mb);
        for f in 0..fl {
            num += linalg::abs2(resid[j * fl + f] - c[f]);
            den += linalg::abs2(phi.node(j)[f]);
        }
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub lambda_hat: f64,
    /// eigenvalue of the end operator whose eigenspace dominates
    pub level: f64,
    /// window average of `e^{−λ̂t}` times the dominant eigencomponent, full fiber
    pub boundary_vector: Vec<C64>,
    /// fitted exponent of the remainder `φ − e^{λ̂t}ψ̄`
    pub remainder_rate: f64,
    /// largest remainder norm relative to the largest field norm in the window
    pub remainder_max: f64,
}

/// Log-linear fit of the dominant eigencomponent of `φ` with respect to the
/// exact end operator with literal parameter `w`, over nodes in `window`.
pub fn asymptotic_fit(
    phi: &SpinorField,
    w: [f64; 3],
    z: impl Into<Twist>,
    window: (f64, f64),
) -> Result<AsymptoticFit> {
    let z = z.into();
    let disc = phi.disc;
    let mb = disc.modes();
    let (t_lo, t_hi) = window;
    let nodes: Vec<usize> = (0..disc.n_t)
        .filter(|&j| {
            let t = disc.time(j);
            t >= t_lo.min(t_hi) - 1e-12 && t <= t_lo.max(t_hi) + 1e-12
        })
        .collect();
    if nodes.len() < 8 {
        return Err(Error::WindowTooShort(nodes.len()));
    }
    // exact eigenbasis, grouped by level
    let mut basis: Vec<(f64, usize, [C64; 2])> = Vec::new();
    for mode in 0..mb.len() {
        for (e, br) in [(0usize, Branch::Plus), (1, Branch::Minus)] {
            let k = torus::mode_momentum(mb.mode(mode), br, w, z.0);
            let lam = 2.0 * PI * norm3(k);
            for sign in [1.0, -1.0] {
                let v = if lam < torus::LEVEL_TOL {
                    if sign > 0.0 {
                        [linalg::ONE, ZERO]
                    } else {
                        [ZERO, linalg::ONE]
                    }
                } else {
                    helicity_spinor(k, sign)
                };
                basis.push((sign * lam, fiber_index(mode, e, 0), v));
            }
        }
    }
    let mut levels: Vec<f64> = Vec::new();
    for (l, _, _) in &basis {
        if !levels.iter().any(|x| (x - l).abs() < 1e-9) {
            levels.push(*l);
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let level_of = |l: f64| levels.iter().position(|x| (x - l).abs() < 1e-9).unwrap();
    let project = |node: &[C64]| -> Vec<Vec<C64>> {
        let mut out = vec![vec![ZERO; node.len()]; levels.len()];
        for (l, f0, v) in &basis {
            let c = v[0].conj() * node[*f0] + v[1].conj() * node[*f0 + 1];
            let li = level_of(*l);
            out[li][*f0] += v[0] * c;
            out[li][*f0 + 1] += v[1] * c;
        }
        out
    };
    let far = if t_hi.abs() >= t_lo.abs() { *nodes.last().unwrap() } else { nodes[0] };
    let pf = project(phi.node(far));
    let mut norms: Vec<(f64, usize)> = pf.iter().enumerate().map(|(i, v)| (linalg::norm(v), i)).collect();
    norms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if norms.len() > 1 && norms[0].0 < 3.0 * norms[1].0 {
        return Err(Error::NoDominantMode(norms[0].0 / norms[1].0.max(f64::MIN_POSITIVE)));
    }
    let li = norms[0].1;
    let comps: Vec<Vec<C64>> = nodes.iter().map(|&j| project(phi.node(j)).swap_remove(li)).collect();
    let ts: Vec<f64> = nodes.iter().map(|&j| disc.time(j)).collect();
    let logs: Vec<f64> = comps.iter().map(|v| linalg::norm(v).max(f64::MIN_POSITIVE).ln()).collect();
    let (lambda_hat, _) = crate::curvature::linear_fit(&ts, &logs);
    let mut bv = vec![ZERO; phi.fiber_len()];
    for (v, t) in comps.iter().zip(&ts) {
        let f = (-lambda_hat * t).exp() / ts.len() as f64;
        for (b, x) in bv.iter_mut().zip(v) {
            *b += *x * f;
        }
    }
    let mut rem_t = Vec::new();
    let mut rem_l = Vec::new();
    let mut rem_max: f64 = 0.0;
    let mut big: f64 = 0.0;
    for (&j, t) in nodes.iter().zip(&ts) {
        let f = (lambda_hat * t).exp();
        let r: Vec<C64> = phi.node(j).iter().zip(&bv).map(|(a, b)| *a - *b * f).collect();
        let rn = linalg::norm(&r);
        big = big.max(linalg::norm(phi.node(j)));
        rem_max = rem_max.max(rn);
        rem_t.push(*t);
        rem_l.push(rn.max(f64::MIN_POSITIVE).ln());
    }
    let (remainder_rate, _) = crate::curvature::linear_fit(&rem_t, &rem_l);
    Ok(AsymptoticFit {
        lambda_hat,
        level: levels[li],
        boundary_vector: bv,
        remainder_rate,
        remainder_max: rem_max / big.max(f64::MIN_POSITIVE),
    })
}
