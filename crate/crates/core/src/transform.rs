//! The transform: kernels of `D*` over a box of twists, their Higgs field
//! and induced connection.
//!
//! Everything here works at weight `δ = 0` with `L = D*` mapping node
//! fields to midpoint fields. `G = (LLᴴ)⁻¹` acts on midpoint fields and
//! `P = 1 − LᴴGL` projects node fields onto `ker L`.

use crate::banded::BandedChol;
use crate::dirac::{assemble_dirac, kernel, ComponentOp, DiracOperator, Which, KERNEL_REL_TOL};
use crate::error::{Error, Result};
use crate::field::{gauge_shift, SpinorField};
use crate::grid::{Discretization, Twist, Weight, WeightSextet};
use crate::laplace::laplacian_kernel;
use crate::linalg::{self, CMat, C64, ZERO};
use crate::path::ConnectionPath;
use crate::torus::{self, TorusPoint};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

/// Twists closer than this to the singular set are refused.
pub const SINGULAR_TOL: f64 = 1e-9;

fn gather_rows(cop: &ComponentOp, f: &SpinorField) -> Vec<C64> {
    let idx = cop.comp.fiber_indices();
    let m = idx.len();
    let mut y = vec![ZERO; cop.matrix.nrows()];
    for i in 0..f.disc.n_t {
        let node = f.node(i);
        for (r, &fi) in idx.iter().enumerate() {
            y[i * m + r] = node[fi];
        }
    }
    y
}

fn scatter_rows(cop: &ComponentOp, y: &[C64], f: &mut SpinorField) {
    let idx = cop.comp.fiber_indices();
    let m = idx.len();
    for i in 0..f.disc.n_t {
        let node = f.node_mut(i);
        for (r, &fi) in idx.iter().enumerate() {
            node[fi] = y[i * m + r];
        }
    }
}

fn dot(a: &SpinorField, b: &SpinorField) -> C64 {
    linalg::dot(&a.values, &b.values)
}

/// Orthogonal projection of a node field onto the boundary-compatible
/// subspace of `op`'s domain.
pub fn restrict(op: &DiracOperator, psi: &SpinorField) -> SpinorField {
    let mut out = SpinorField::zeros(op.disc);
    for cop in &op.components {
        let idx = cop.comp.fiber_indices();
        let nodes: Vec<Vec<C64>> =
            (0..op.disc.n_t).map(|j| idx.iter().map(|&f| psi.node(j)[f]).collect()).collect();
        let back = cop.nodes_from_coords(&cop.coords_from_nodes(&nodes), op.disc.n_t);
        for (j, u) in back.iter().enumerate() {
            let node = out.node_mut(j);
            for (r, &f) in idx.iter().enumerate() {
                node[f] = u[r];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Green's operator of `LLᴴ` at one twist, solved by preconditioned
/// conjugate gradients. The preconditioner is the exact inverse for the
/// diagonal mode-0 part of the path.
pub struct Greens {
    pub op: DiracOperator,
    pre: DiracOperator,
    pre_chol: Vec<BandedChol>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Greens {
    pub fn new(path: &ConnectionPath, z: impl Into<Twist>, disc: &Discretization) -> Result<Self> {
        let z = z.into();
        let set = torus::singular_set(&path.limits.1, &path.limits.0);
        let d = torus::dist_to_set(z.point(), &set);
        if d < SINGULAR_TOL {
            return Err(Error::NotInvertible(format!("twist {:?} lies on the singular set", z.0)));
        }
        let op = assemble_dirac(path, z, Weight::ZERO, disc, Which::DStar)?;
        for (ci, cop) in op.components.iter().enumerate() {
            if cop.matrix.nrows() == 0 {
                continue;
            }
            let tau = KERNEL_REL_TOL * cop.matrix.scale();
            if !cop.matrix.gram().exceeds(tau * tau) {
                return Err(Error::NotInvertible(format!(
                    "LLᴴ has an eigenvalue below {:.3e} on component {ci} (nonzero cokernel)",
                    tau * tau
                )));
            }
        }
        let pre = assemble_dirac(&path.abelian_part(), z, Weight::ZERO, disc, Which::DStar)?;
        let pre_chol = pre
            .components
            .iter()
            .map(|c| c.matrix.gram().cholesky(0.0))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::NotInvertible("preconditioner is singular".into()))?;
        Ok(Greens { op, pre, pre_chol, tol: 1e-11, max_iter: 2000 })
    }

    /// `LLᴴx` on midpoint fields.
    pub fn normal_apply(&self, x: &SpinorField) -> SpinorField {
        self.op.apply(&self.op.apply_adjoint(x))
    }

    fn precondition(&self, r: &SpinorField) -> SpinorField {
        let mut out = SpinorField::zeros(r.disc);
        for (cop, chol) in self.pre.components.iter().zip(&self.pre_chol) {
            if cop.matrix.nrows() == 0 {
                continue;
            }
            let y = chol.solve_vec(&gather_rows(cop, r));
            scatter_rows(cop, &y, &mut out);
        }
        out
    }

    /// Solve `LLᴴ x = b`.
    pub fn solve(&self, b: &SpinorField) -> Result<(SpinorField, PcgStats)> {
        if b.disc != self.op.range_disc() {
            return Err(Error::InvalidDiscretization("right-hand side must live on the midpoint grid".into()));
        }
        let bn = linalg::norm(&b.values);
        let mut x = SpinorField::zeros(b.disc);
        if bn == 0.0 {
            return Ok((x, PcgStats { iterations: 0, relative_residual: 0.0 }));
        }
        let mut r = b.clone();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z).re;
        for it in 1..=self.max_iter {
            let ap = self.normal_apply(&p);
            let alpha = rz / dot(&p, &ap).re;
            x.axpy(C64::new(alpha, 0.0), &p);
            r.axpy(C64::new(-alpha, 0.0), &ap);
            let rel = linalg::norm(&r.values) / bn;
            if rel <= self.tol {
                return Ok((x, PcgStats { iterations: it, relative_residual: rel }));
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z).re;
            let beta = rz_new / rz;
            rz = rz_new;
            let mut np = z.clone();
            np.axpy(C64::new(beta, 0.0), &p);
            p = np;
        }
        Err(Error::NoConvergence(linalg::norm(&r.values) / bn))
    }

    /// `Pψ = ψ − LᴴGLψ` after restriction to the boundary-compatible part.
    pub fn project(&self, psi: &SpinorField) -> Result<SpinorField> {
        let base = restrict(&self.op, psi);
        let (g, _) = self.solve(&self.op.apply(&base))?;
        Ok(base.sub(&self.op.apply_adjoint(&g)))
    }
}

/// `x = (D*D)⁻¹ b` for a midpoint field `b`.
pub fn greens_apply(path: &ConnectionPath, z: impl Into<Twist>, b: &SpinorField, disc: &Discretization) -> Result<SpinorField> {
    Greens::new(path, z, disc)?.solve(b).map(|r| r.0)
}

pub fn project(path: &ConnectionPath, z: impl Into<Twist>, psi: &SpinorField, disc: &Discretization) -> Result<SpinorField> {
    Greens::new(path, z, disc)?.project(psi)
}

/// Orthonormal kernel basis of `D*` at one twist with its Higgs matrix.
#[derive(Debug, Clone)]
pub struct TransformPoint {
    pub z: [f64; 3],
    pub rank: usize,
    pub index: i64,
    pub basis: Vec<SpinorField>,
    /// `Φ_ab = −2πi⟨φ_a, tφ_b⟩`, anti-Hermitian
    pub higgs: CMat,
    pub singular_values: Vec<f64>,
}

impl TransformPoint {
    /// Ascending eigenvalues of the Hermitian matrix `iΦ`.
    pub fn higgs_eigenvalues(&self) -> Vec<f64> {
        let ih = Mat::from_fn(self.rank, self.rank, |a, b| C64::new(0.0, 1.0) * self.higgs.read(a, b));
        linalg::herm_eigvals(&ih)
    }
}

pub fn higgs_matrix(basis: &[SpinorField]) -> CMat {
    let k = basis.len();
    let tb: Vec<SpinorField> = basis.iter().map(|b| b.times_t()).collect();
    Mat::from_fn(k, k, |a, b| C64::new(0.0, -2.0 * PI) * basis[a].inner(&tb[b]))
}

pub fn transform_fiber(path: &ConnectionPath, z: impl Into<Twist>, disc: &Discretization, k_max: usize) -> Result<TransformPoint> {
    let z = z.into();
    let set = torus::singular_set(&path.limits.1, &path.limits.0);
    let d = torus::dist_to_set(z.point(), &set);
    if d < SINGULAR_TOL {
        return Err(Error::SingularTwist(d));
    }
    let op = assemble_dirac(path, z, Weight::ZERO, disc, Which::DStar)?;
    let kr = kernel(&op, k_max)?;
    let higgs = higgs_matrix(&kr.basis);
    Ok(TransformPoint {
        z: z.0,
        rank: kr.dim_ker,
        index: kr.index,
        basis: kr.basis,
        higgs,
        singular_values: kr.singular_values,
    })
}

/// A regular grid of twists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZBox {
    pub origin: [f64; 3],
    pub step: f64,
    pub n: [usize; 3],
}

impl ZBox {
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn linear(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n[1] + i[1]) * self.n[2] + i[2]
    }
    pub fn unlinear(&self, l: usize) -> [usize; 3] {
        [l / (self.n[1] * self.n[2]), (l / self.n[2]) % self.n[1], l % self.n[2]]
    }
    pub fn point(&self, i: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.origin[a] + self.step * i[a] as f64)
    }
    /// Neighbour `i ± e_dir`, if inside.
    pub fn neighbour(&self, i: [usize; 3], dir: usize, up: bool) -> Option<[usize; 3]> {
        let mut j = i;
        if up {
            if i[dir] + 1 >= self.n[dir] {
                return None;
            }
            j[dir] += 1;
        } else {
            if i[dir] == 0 {
                return None;
            }
            j[dir] -= 1;
        }
        Some(j)
    }
}

/// Visiting order of the axes when growing the gauge-fixing tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeOrder {
    Xyz,
    Zyx,
}

impl TreeOrder {
    fn axes(self) -> [usize; 3] {
        match self {
            TreeOrder::Xyz => [0, 1, 2],
            TreeOrder::Zyx => [2, 1, 0],
        }
    }
}

/// Kernel bundle sampled over a box, in a gauge fixed along a spanning
/// tree, with unitary link variables between neighbours.
#[derive(Debug, Clone)]
pub struct MonopoleField {
    pub zbox: ZBox,
    pub rank: usize,
    pub points: Vec<TransformPoint>,
    /// `links[p][μ] = polar(⟨B_p, B_{p+e_μ}⟩)` where the neighbour exists
    pub links: Vec<[Option<CMat>; 3]>,
}

fn overlap(a: &[SpinorField], b: &[SpinorField]) -> CMat {
    Mat::from_fn(a.len(), b.len(), |i, j| a[i].inner(&b[j]))
}

/// Rotate a basis by `Uᴴ` so that its overlap with the parent becomes positive.
fn rotate_basis(tp: &mut TransformPoint, u: &CMat) {
    let k = tp.rank;
    let old = tp.basis.clone();
    for b in 0..k {
        let mut f = SpinorField::zeros(old[0].disc);
        for c in 0..k {
            f.axpy(u.read(b, c).conj(), &old[c]);
        }
        tp.basis[b] = f;
    }
    tp.higgs = u * &tp.higgs * u.adjoint();
}

pub fn assemble_monopole(
    path: &ConnectionPath,
    zbox: ZBox,
    disc: &Discretization,
    k_max: usize,
    order: TreeOrder,
) -> Result<MonopoleField> {
    let pts: Vec<Result<TransformPoint>> = (0..zbox.len())
        .into_par_iter()
        .map(|l| transform_fiber(path, zbox.point(zbox.unlinear(l)), disc, k_max))
        .collect();
    let mut points = Vec::with_capacity(pts.len());
    for p in pts {
        points.push(p?);
    }
    let rank = points.first().map_or(0, |p| p.rank);
    for (l, p) in points.iter().enumerate() {
        if p.rank != rank {
            return Err(Error::RankJump { from: rank, to: p.rank, at: zbox.unlinear(l) });
        }
    }
    let mut links: Vec<[Option<CMat>; 3]> = vec![[None, None, None]; zbox.len()];
    if rank > 0 {
        let mut seen = vec![false; zbox.len()];
        let mut queue = VecDeque::from([[0usize; 3]]);
        seen[0] = true;
        while let Some(p) = queue.pop_front() {
            for dir in order.axes() {
                for up in [true, false] {
                    let Some(q) = zbox.neighbour(p, dir, up) else { continue };
                    let lq = zbox.linear(q);
                    if seen[lq] {
                        continue;
                    }
                    seen[lq] = true;
                    let u = linalg::polar_unitary(&overlap(&points[zbox.linear(p)].basis, &points[lq].basis));
                    rotate_basis(&mut points[lq], &u);
                    queue.push_back(q);
                }
            }
        }
        links = (0..zbox.len())
            .into_par_iter()
            .map(|l| {
                let p = zbox.unlinear(l);
                [0, 1, 2].map(|dir| {
                    zbox.neighbour(p, dir, true).map(|q| {
                        linalg::polar_unitary(&overlap(&points[l].basis, &points[zbox.linear(q)].basis))
                    })
                })
            })
            .collect();
    }
    Ok(MonopoleField { zbox, rank, points, links })
}

#[derive(Debug, Clone)]
pub struct Plaquette {
    pub at: [usize; 3],
    pub mu: usize,
    pub nu: usize,
    /// `log(U_μ(p)U_ν(p+μ)U_μ(p+ν)ᴴU_ν(p)ᴴ)/h²`, anti-Hermitian
    pub f: CMat,
}

#[derive(Debug, Clone)]
pub struct LatticeCurvature {
    pub rank_zero: bool,
    pub plaquettes: Vec<Plaquette>,
}

impl LatticeCurvature {
    fn lookup(&self) -> HashMap<([usize; 3], usize), &CMat> {
        self.plaquettes.iter().map(|p| ((p.at, 3 - p.mu - p.nu), &p.f)).collect()
    }
}

pub fn curvature_fd(m: &MonopoleField) -> Result<LatticeCurvature> {
    if m.rank == 0 {
        return Ok(LatticeCurvature { rank_zero: true, plaquettes: vec![] });
    }
    let h2 = m.zbox.step * m.zbox.step;
    let mut plaquettes = Vec::new();
    for l in 0..m.zbox.len() {
        let p = m.zbox.unlinear(l);
        for (mu, nu) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let (Some(pm), Some(pn)) = (m.zbox.neighbour(p, mu, true), m.zbox.neighbour(p, nu, true)) else {
                continue;
            };
            let u_mu = m.links[l][mu].as_ref().unwrap();
            let u_nu = m.links[l][nu].as_ref().unwrap();
            let u_nu_pm = m.links[m.zbox.linear(pm)][nu].as_ref().unwrap();
            let u_mu_pn = m.links[m.zbox.linear(pn)][mu].as_ref().unwrap();
            let hol = u_mu * u_nu_pm * u_mu_pn.adjoint() * u_nu.adjoint();
            let lg = linalg::unitary_log(&hol).ok_or(Error::BranchCut)?;
            let f = Mat::from_fn(m.rank, m.rank, |a, b| linalg::cscale(lg.read(a, b), 1.0 / h2));
            plaquettes.push(Plaquette { at: p, mu, nu, f });
        }
    }
    Ok(LatticeCurvature { rank_zero: false, plaquettes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BogomolnyReport {
    /// `Σ‖∇Φ − *F‖ / Σ(‖∇Φ‖ + ‖*F‖)` over interior points
    pub residual: f64,
    /// the same with the opposite orientation, `∇Φ = −*F`
    pub residual_opposite: f64,
    pub local: Vec<([usize; 3], f64)>,
    pub rank_zero: bool,
}

fn conj_by(u: &CMat, x: &CMat) -> CMat {
    u * x * u.adjoint()
}

/// Central covariant derivative of `Φ` and the star-averaged dual
/// curvature at each interior point, compared by the Bogomolny equation.
pub fn bogomolny_residual(m: &MonopoleField) -> Result<BogomolnyReport> {
    let curv = curvature_fd(m)?;
    if curv.rank_zero {
        return Ok(BogomolnyReport { residual: 0.0, residual_opposite: 0.0, local: vec![], rank_zero: true });
    }
    let plaq = curv.lookup();
    let zb = &m.zbox;
    let h = zb.step;
    let link = |p: [usize; 3], dir: usize| m.links[zb.linear(p)][dir].as_ref().unwrap();
    let (mut num, mut num_opp, mut den) = (0.0, 0.0, 0.0);
    let mut local = Vec::new();
    for l in 0..zb.len() {
        let p = zb.unlinear(l);
        if (0..3).any(|d| p[d] == 0 || p[d] + 1 >= zb.n[d]) {
            continue;
        }
        let (mut r, mut ro, mut d) = (0.0, 0.0, 0.0);
        for lam in 0..3 {
            let (mu, nu) = ((lam + 1) % 3, (lam + 2) % 3);
            let up = zb.neighbour(p, lam, true).unwrap();
            let dn = zb.neighbour(p, lam, false).unwrap();
            let fwd = conj_by(link(p, lam), &m.points[zb.linear(up)].higgs);
            let bwd = conj_by(&link(dn, lam).adjoint().to_owned(), &m.points[zb.linear(dn)].higgs);
            let grad = Mat::from_fn(m.rank, m.rank, |a, b| linalg::cscale(fwd.read(a, b) - bwd.read(a, b), 0.5 / h));
            // the four plaquettes of the (μ, ν) plane touching p, moved to p
            let pm = zb.neighbour(p, mu, false).unwrap();
            let pn = zb.neighbour(p, nu, false).unwrap();
            let pmn = zb.neighbour(pm, nu, false).unwrap();
            let t_m = link(pm, mu).adjoint().to_owned();
            let t_n = link(pn, nu).adjoint().to_owned();
            let t_mn = link(pm, mu).adjoint() * link(pmn, nu).adjoint();
            let mut star = plaq[&(p, lam)].clone();
            star += conj_by(&t_m, plaq[&(pm, lam)]);
            star += conj_by(&t_n, plaq[&(pn, lam)]);
            star += conj_by(&t_mn, plaq[&(pmn, lam)]);
            let star = Mat::from_fn(m.rank, m.rank, |a, b| linalg::cscale(star.read(a, b), 0.25));
            r += linalg::frob_diff(&grad, &star).powi(2);
            ro += linalg::frob(&(&grad + &star)).powi(2);
            d += (linalg::frob(&grad) + linalg::frob(&star)).powi(2);
        }
        let (r, ro, d) = (r.sqrt(), ro.sqrt(), d.sqrt());
        local.push((p, if d > 0.0 { r / d } else { 0.0 }));
        num += r;
        num_opp += ro;
        den += d;
    }
    let ratio = |x: f64| if den > 0.0 { x / den } else { 0.0 };
    Ok(BogomolnyReport { residual: ratio(num), residual_opposite: ratio(num_opp), local, rank_zero: false })
}

/// One JSON-lines record of a monopole field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonopoleRecord {
    pub z: [f64; 3],
    pub rank: usize,
    pub higgs_eigenvalues: Vec<f64>,
    /// `‖F_{12}‖, ‖F_{23}‖, ‖F_{31}‖` of the plaquettes based here
    pub plaquette_norms: [Option<f64>; 3],
    pub bogomolny_residual_local: Option<f64>,
}

pub fn monopole_records(m: &MonopoleField) -> Result<Vec<MonopoleRecord>> {
    let curv = curvature_fd(m)?;
    let bog = bogomolny_residual(m)?;
    let plaq = curv.lookup();
    let local: HashMap<[usize; 3], f64> = bog.local.into_iter().collect();
    Ok((0..m.zbox.len())
        .map(|l| {
            let p = m.zbox.unlinear(l);
            MonopoleRecord {
                z: m.points[l].z,
                rank: m.points[l].rank,
                higgs_eigenvalues: m.points[l].higgs_eigenvalues(),
                plaquette_norms: [2, 0, 1].map(|lam| plaq.get(&(p, lam)).map(|f| linalg::frob(f))),
                bogomolny_residual_local: local.get(&p).copied(),
            }
        })
        .collect())
}

/// `Ω_μ = ∂L/∂z_μ` of the box scheme: `−2πσ_μ` on the averaged node values.
pub fn omega_apply(op: &DiracOperator, mu: usize, phi: &SpinorField) -> SpinorField {
    let sig = linalg::pauli();
    let rd = op.range_disc();
    let mut out = SpinorField::zeros(rd);
    let fl = phi.fiber_len();
    for i in 0..rd.n_t {
        let (a, b) = (phi.node(i), phi.node(i + 1));
        let node = out.node_mut(i);
        for base in (0..fl).step_by(2) {
            for s in 0..2 {
                let mut acc = ZERO;
                for sp in 0..2 {
                    acc += sig[mu][s][sp] * (a[base + sp] + b[base + sp]);
                }
                node[base + s] = linalg::cscale(acc, -PI);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureIdentity {
    /// `⟨ψ, (∂_μP ∂_νP − ∂_νP ∂_μP) φ⟩` by central differences in `z`
    pub lhs: [f64; 2],
    /// `⟨Ω_μψ, GΩ_νφ⟩ − ⟨Ω_νψ, GΩ_μφ⟩`
    pub rhs: [f64; 2],
    pub difference: f64,
    /// size of the end terms dropped by the closed form
    pub boundary_estimate: f64,
}

fn end_norms(f: &SpinorField) -> [f64; 2] {
    let n = f.disc.n_t;
    [linalg::norm(f.node(0)), linalg::norm(f.node(n - 1))]
}

/// Compare the curvature of the projected connection, by finite
/// differences of `P` with step `step`, against its Green's-operator form.
#[allow(clippy::too_many_arguments)]
pub fn curvature_identity_check(
    path: &ConnectionPath,
    z: impl Into<Twist>,
    phi: &SpinorField,
    psi: &SpinorField,
    mu: usize,
    nu: usize,
    disc: &Discretization,
    step: f64,
) -> Result<CurvatureIdentity> {
    let z = z.into();
    let g0 = Greens::new(path, z, disc)?;
    let mut shifted = HashMap::new();
    for dir in [mu, nu] {
        for s in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[dir] = s * step;
            shifted.insert((dir, s > 0.0), Greens::new(path, z.shifted(v), disc)?);
        }
    }
    let dp = |dir: usize, x: &SpinorField| -> Result<SpinorField> {
        let a = shifted[&(dir, true)].project(x)?;
        let b = shifted[&(dir, false)].project(x)?;
        let mut d = a.sub(&b);
        d.scale(C64::new(0.5 / step, 0.0));
        Ok(d)
    };
    let a = psi.inner(&dp(mu, &dp(nu, phi)?)?);
    let b = psi.inner(&dp(nu, &dp(mu, phi)?)?);
    let lhs = a - b;

    let om = |dir: usize, f: &SpinorField| omega_apply(&g0.op, dir, f);
    let (gmu_phi, _) = g0.solve(&om(mu, phi))?;
    let (gnu_phi, _) = g0.solve(&om(nu, phi))?;
    let rhs = om(mu, psi).midpoint_inner(&gnu_phi) - om(nu, psi).midpoint_inner(&gmu_phi);

    // sections entering the end terms: the kernel elements and the
    // first-order variations LᴴGΩφ, LᴴGΩψ
    let u: Vec<[f64; 2]> = [&gmu_phi, &gnu_phi, &g0.solve(&om(mu, psi))?.0, &g0.solve(&om(nu, psi))?.0]
        .iter()
        .map(|g| end_norms(&g0.op.apply_adjoint(g)))
        .collect();
    let (ep, es) = (end_norms(phi), end_norms(psi));
    let mut boundary = 0.0;
    for e in 0..2 {
        boundary += 2.0 * PI * (ep[e] * es[e] + u[0][e] * u[3][e] + u[1][e] * u[2][e]);
    }
    Ok(CurvatureIdentity {
        lhs: [lhs.re, lhs.im],
        rhs: [rhs.re, rhs.im],
        difference: (lhs - rhs).norm(),
        boundary_estimate: boundary,
    })
}

/// Clifford action of `e^a∧e^b` on the kernel half of the spinor bundle,
/// `E_ab = c_a c_b − c_b c_a` restricted there, indices `t = 0, 1, 2, 3`.
pub fn clifford_two_form(a: usize, b: usize) -> CMat {
    // c(e_a) = [[0, −τ_aᴴ], [τ_a, 0]] with τ_t = 1, τ_j = −iσ_j;
    // on the lower half c_a c_b = −τ_a τ_bᴴ
    let sig = linalg::pauli();
    let tau = |x: usize| -> CMat {
        if x == 0 {
            linalg::identity(2)
        } else {
            Mat::from_fn(2, 2, |i, j| C64::new(0.0, -1.0) * sig[x - 1][i][j])
        }
    };
    let cc = |x: usize, y: usize| -> CMat {
        let p = tau(x) * tau(y).adjoint();
        Mat::from_fn(2, 2, |i, j| -p.read(i, j))
    };
    &cc(a, b) - &cc(b, a)
}

/// `max_l ‖E_{tl} − ½ε_{lmn}E_{mn}‖`: self-dual two-forms act trivially.
pub fn self_dual_contraction() -> f64 {
    (1..=3)
        .map(|l| {
            let (m, n) = (l % 3 + 1, (l + 1) % 3 + 1);
            let sd = &clifford_two_form(0, l) - &clifford_two_form(m, n);
            linalg::frob(&sd)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayFit {
    pub direction: [f64; 3],
    pub radii: Vec<f64>,
    /// eigenvalues of `iΦ` per radius
    pub eigenvalues: Vec<Vec<f64>>,
    pub pole_rank: usize,
    /// fitted `c` in `λ ≈ c/r + b` for the largest pole eigenvalue, signed
    pub c_signed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    pub w: [f64; 3],
    pub rays: Vec<RayFit>,
    pub pole_rank: usize,
    pub predicted_pole_rank: usize,
    /// mean of `|c|` over rays
    pub c_mean: Option<f64>,
    /// `max_i |c_i − c̄| / c̄`
    pub isotropy_spread: Option<f64>,
}

/// Pole eigenvalues satisfy `|λ|·r ≥ POLE_CUT`; anything in
/// `[POLE_CUT/5, POLE_CUT)` is ambiguous.
pub const POLE_CUT: f64 = 0.1;

fn pole_cluster(ev: &[f64], r: f64) -> Result<Vec<f64>> {
    let mut pole = Vec::new();
    for &v in ev {
        let s = v.abs() * r;
        if s >= POLE_CUT {
            pole.push(v);
        } else if s >= POLE_CUT / 5.0 {
            return Err(Error::ClusterAmbiguous(POLE_CUT / s));
        }
    }
    Ok(pole)
}

pub fn higgs_singularity_scan(
    path: &ConnectionPath,
    w: [f64; 3],
    rays: &[[f64; 3]],
    radii: &[f64],
    disc: &Discretization,
    k_max: usize,
) -> Result<SingularReport> {
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut fits = Vec::new();
    for dir in rays {
        let nd = torus::norm3(*dir);
        let e = dir.map(|x| x / nd);
        let eigenvalues: Vec<Vec<f64>> = radii
            .par_iter()
            .map(|&r| transform_fiber(path, [0, 1, 2].map(|a| w[a] + r * e[a]), disc, k_max).map(|tp| tp.higgs_eigenvalues()))
            .collect::<Result<_>>()?;
        let pole = pole_cluster(&eigenvalues[0], radii[0])?;
        let c_signed = if pole.is_empty() || radii.len() < 3 {
            None
        } else {
            // follow the largest-modulus eigenvalue over the three smallest radii
            let pick = |ev: &[f64]| ev.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            let xs: Vec<f64> = radii[..3].iter().map(|r| 1.0 / r).collect();
            let ys: Vec<f64> = eigenvalues[..3].iter().map(|ev| pick(ev)).collect();
            Some(crate::curvature::linear_fit(&xs, &ys).0)
        };
        fits.push(RayFit { direction: e, radii: radii.clone(), eigenvalues, pole_rank: pole.len(), c_signed });
    }
    let pole_rank = fits.iter().map(|f| f.pole_rank).max().unwrap_or(0);
    let cs: Vec<f64> = fits.iter().filter_map(|f| f.c_signed.map(f64::abs)).collect();
    let (c_mean, isotropy_spread) = if cs.len() == fits.len() && !cs.is_empty() {
        let m = cs.iter().sum::<f64>() / cs.len() as f64;
        (Some(m), Some(cs.iter().map(|c| (c - m).abs()).fold(0.0, f64::max) / m))
    } else {
        (None, None)
    };
    Ok(SingularReport {
        w,
        rays: fits,
        pole_rank,
        predicted_pole_rank: torus::eigenspace_rank_formula(TorusPoint::new(w), false),
        c_mean,
        isotropy_spread,
    })
}

/// Dimensions entering the exact sequences around a singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAudit {
    pub z: [f64; 3],
    pub eps: f64,
    /// `ker D*` at `⌜ε`
    pub v_bar: usize,
    /// `ker D*` at `ε⌟`
    pub v_lower_right: usize,
    /// `ker D*` in `L²`, zero end modes excluded
    pub e_hat: usize,
    /// `ker D` at `⌜ε`
    pub k_bar: usize,
    /// harmonic sections of `∇*∇` at `⌜ε`
    pub h: usize,
    pub dh: i64,
    /// rank of the small eigenspaces, from the `+` end (doubled when the limits agree)
    pub w_prime: usize,
    /// the same counted at both ends directly
    pub w_prime_direct: usize,
    pub limits_equal: bool,
    /// `V̄ − Ê − W′`, `Ê − (V⌟ + W′ − K̄)`, `V̄ − (V⌟ + DH)`
    pub residuals: [i64; 3],
    /// `rk H` predicted from the end data, `2·W′`
    pub rk_h_case: usize,
}

pub fn rank_audit(path: &ConnectionPath, z: impl Into<Twist>, eps: f64, disc: &Discretization, k_max: usize) -> Result<RankAudit> {
    let z = z.into();
    let s = WeightSextet::new(eps);
    let dim = |w: Weight, which: Which| -> Result<usize> {
        Ok(crate::dirac::null_space(&assemble_dirac(path, z, w, disc, which)?, k_max)?.dim)
    };
    let v_bar = dim(s.upper_left, Which::DStar)?;
    let v_lower_right = dim(s.lower_right, Which::DStar)?;
    let e_hat = dim(Weight::ZERO, Which::DStar)?;
    let k_bar = dim(s.upper_left, Which::D)?;
    let h = laplacian_kernel(path, z, s.upper_left, disc, k_max)?.dim;
    let dh = h as i64 - k_bar as i64;
    let zp = z.point();
    let cutoff = eps + 1.0;
    let sp = torus::exact_spectrum(TorusPoint::new(path.end_w[1]), zp, cutoff);
    let sm = torus::exact_spectrum(TorusPoint::new(path.end_w[0]), zp, cutoff);
    let limits_equal = path.limits_equal();
    let w_prime = sp.count_between(0.0, eps) * if limits_equal { 2 } else { 1 };
    let w_prime_direct = sp.count_between(0.0, eps) + sm.count_between(-eps, 0.0);
    let (vb, vl, e, k, wp) = (v_bar as i64, v_lower_right as i64, e_hat as i64, k_bar as i64, w_prime as i64);
    Ok(RankAudit {
        z: z.0,
        eps,
        v_bar,
        v_lower_right,
        e_hat,
        k_bar,
        h,
        dh,
        w_prime,
        w_prime_direct,
        limits_equal,
        residuals: [vb - e - wp, e - (vl + wp - k), vb - (vl + dh)],
        rk_h_case: 2 * w_prime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityCheck {
    pub shift: [i32; 3],
    pub rank: [usize; 2],
    /// largest difference of the sorted eigenvalues of `iΦ`
    pub spectrum_diff: f64,
    /// largest distance of a shifted kernel vector from the kernel at `z + n`
    pub kernel_diff: f64,
}

/// Compare the transform at `z` and `z + n`, where the character
/// `e^{2πi n·x}` intertwines the two operators.
pub fn gauge_periodicity(path: &ConnectionPath, z: impl Into<Twist>, shift: [i32; 3], disc: &Discretization, k_max: usize) -> Result<PeriodicityCheck> {
    let z = z.into();
    let a = transform_fiber(path, z, disc, k_max)?;
    let b = transform_fiber(path, z.shifted(shift.map(|x| x as f64)), disc, k_max)?;
    let (ea, eb) = (a.higgs_eigenvalues(), b.higgs_eigenvalues());
    let spectrum_diff = if ea.len() == eb.len() {
        ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let mut kernel_diff: f64 = 0.0;
    for phi in &a.basis {
        let s = gauge_shift(phi, shift)?;
        let mut r = s.clone();
        for bb in &b.basis {
            r.axpy(-bb.inner(&s), bb);
        }
        kernel_diff = kernel_diff.max(r.norm());
    }
    if a.rank != b.rank {
        kernel_diff = f64::INFINITY;
    }
    Ok(PeriodicityCheck { shift, rank: [a.rank, b.rank], spectrum_diff, kernel_diff })
}

