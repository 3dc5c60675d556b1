//! Block-sparse rectangular operators and block-banded Hermitian solvers.
//!
//! Discretized cylinder operators couple only neighbouring time nodes, so
//! both normal products `LᴴL` and `LLᴴ` are block banded. Everything here
//! works on that structure: Cholesky, solves, and a seeded subspace inverse
//! iteration for the smallest eigenpairs.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::small::SMat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RowBlock {
    pub nrows: usize,
    /// (column block, dense `nrows × col_size` coefficient)
    pub entries: Vec<(usize, SMat)>,
}

/// Rectangular operator stored as row blocks over column blocks.
#[derive(Debug, Clone)]
pub struct BlockRows {
    pub col_sizes: Vec<usize>,
    col_offsets: Vec<usize>,
    pub rows: Vec<RowBlock>,
    row_offsets: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    o.push(0);
    for s in sizes {
        acc += s;
        o.push(acc);
    }
    o
}

impl BlockRows {
    pub fn new(col_sizes: Vec<usize>, rows: Vec<RowBlock>) -> Self {
        let rows: Vec<RowBlock> = rows.into_iter().filter(|r| r.nrows > 0).collect();
        let col_offsets = offsets(&col_sizes);
        let row_offsets = offsets(&rows.iter().map(|r| r.nrows).collect::<Vec<_>>());
        BlockRows { col_sizes, col_offsets, rows, row_offsets }
    }

    pub fn ncols(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    pub fn nrows(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn col_offset(&self, b: usize) -> usize {
        self.col_offsets[b]
    }

    pub fn row_offset(&self, r: usize) -> usize {
        self.row_offsets[r]
    }

    pub fn row_sizes(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.nrows).collect()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows()];
        for (r, row) in self.rows.iter().enumerate() {
            let ro = self.row_offsets[r];
            for (cb, m) in &row.entries {
                let co = self.col_offsets[*cb];
                for j in 0..m.c {
                    let xj = x[co + j];
                    if xj == ZERO {
                        continue;
                    }
                    for (i, v) in m.col(j).iter().enumerate() {
                        y[ro + i] += *v * xj;
                    }
                }
            }
        }
        y
    }

    pub fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut x = vec![ZERO; self.ncols()];
        for (r, row) in self.rows.iter().enumerate() {
            let ro = self.row_offsets[r];
            for (cb, m) in &row.entries {
                let co = self.col_offsets[*cb];
                for j in 0..m.c {
                    let mut acc = ZERO;
                    for (i, v) in m.col(j).iter().enumerate() {
                        acc += v.conj() * y[ro + i];
                    }
                    x[co + j] += acc;
                }
            }
        }
        x
    }

    /// `LᴴL`, banded over column blocks.
    pub fn normal(&self) -> BandedHerm {
        let mut bw = 0;
        for row in &self.rows {
            for (a, _) in &row.entries {
                for (b, _) in &row.entries {
                    bw = bw.max(a.abs_diff(*b));
                }
            }
        }
        let mut out = BandedHerm::zeros(self.col_sizes.clone(), bw);
        for row in &self.rows {
            for (a, ma) in &row.entries {
                for (b, mb) in &row.entries {
                    if a >= b {
                        out.blocks[*a][a - b].gemm_adj_acc(ma, mb, 1.0);
                    }
                }
            }
        }
        out
    }

    /// `LLᴴ`, banded over row blocks.
    pub fn gram(&self) -> BandedHerm {
        let nb = self.col_sizes.len();
        let mut touching: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
        for (r, row) in self.rows.iter().enumerate() {
            for (k, (cb, _)) in row.entries.iter().enumerate() {
                touching[*cb].push((r, k));
            }
        }
        let mut bw = 0;
        for t in &touching {
            for (r, _) in t {
                for (s, _) in t {
                    bw = bw.max(r.abs_diff(*s));
                }
            }
        }
        let mut out = BandedHerm::zeros(self.row_sizes(), bw);
        for t in &touching {
            for &(r, kr) in t {
                for &(s, ks) in t {
                    if r >= s {
                        let a = &self.rows[r].entries[kr].1;
                        let b = &self.rows[s].entries[ks].1;
                        out.blocks[r][r - s].gemm_acc_adj(a, b, 1.0);
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut d = linalg::zeros(self.nrows(), self.ncols());
        for (r, row) in self.rows.iter().enumerate() {
            let ro = self.row_offsets[r];
            for (cb, m) in &row.entries {
                let co = self.col_offsets[*cb];
                for j in 0..m.c {
                    for i in 0..m.r {
                        let v = d.read(ro + i, co + j) + m.get(i, j);
                        d.write(ro + i, co + j, v);
                    }
                }
            }
        }
        d
    }

    /// Largest absolute row sum, an upper bound for the operator norm's scale.
    pub fn scale(&self) -> f64 {
        let mut best: f64 = 0.0;
        for row in &self.rows {
            for i in 0..row.nrows {
                let mut s = 0.0;
                for (_, m) in &row.entries {
                    for j in 0..m.c {
                        s += m.get(i, j).abs();
                    }
                }
                best = best.max(s);
            }
        }
        best
    }
}

/// Hermitian block-banded matrix; `blocks[i][k]` holds `A[i][i-k]`.
#[derive(Debug, Clone)]
pub struct BandedHerm {
    pub sizes: Vec<usize>,
    offsets: Vec<usize>,
    pub bw: usize,
    blocks: Vec<Vec<SMat>>,
}

impl BandedHerm {
    pub fn zeros(sizes: Vec<usize>, bw: usize) -> Self {
        let blocks = (0..sizes.len())
            .map(|i| (0..=bw.min(i)).map(|k| SMat::zeros(sizes[i], sizes[i - k])).collect())
            .collect();
        let offsets = offsets(&sizes);
        BandedHerm { sizes, offsets, bw, blocks }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Accumulate into `A[i][j]`, `i >= j`.
    pub fn add(&mut self, i: usize, j: usize, m: &SMat) {
        self.blocks[i][i - j].add_assign(m);
    }

    pub fn block(&self, i: usize, j: usize) -> SMat {
        if i >= j {
            self.blocks[i][i - j].clone()
        } else {
            self.blocks[j][j - i].adjoint()
        }
    }

    pub fn max_diag(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, row) in self.blocks.iter().enumerate() {
            for d in 0..self.sizes[i] {
                m = m.max(row[0].get(d, d).re.abs());
            }
        }
        m
    }

    pub fn apply_mat(&self, x: &SMat) -> SMat {
        let mut y = SMat::zeros(x.r, x.c);
        for i in 0..self.sizes.len() {
            let oi = self.offsets[i];
            for k in 0..self.blocks[i].len() {
                let j = i - k;
                let oj = self.offsets[j];
                let a = &self.blocks[i][k];
                let xj = x.rows(oj, self.sizes[j]);
                let mut c = SMat::zeros(self.sizes[i], x.c);
                c.gemm_acc(a, &xj, 1.0);
                y.add_rows(oi, &c);
                if k > 0 {
                    let xi = x.rows(oi, self.sizes[i]);
                    let mut c = SMat::zeros(self.sizes[j], x.c);
                    c.gemm_adj_acc(a, &xi, 1.0);
                    y.add_rows(oj, &c);
                }
            }
        }
        y
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.apply_mat(&SMat { r: v.len(), c: 1, d: v.to_vec() }).d
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut d = linalg::zeros(n, n);
        for i in 0..self.sizes.len() {
            for k in 0..self.blocks[i].len() {
                let j = i - k;
                let a = &self.blocks[i][k];
                for r in 0..a.r {
                    for c in 0..a.c {
                        d.write(self.offsets[i] + r, self.offsets[j] + c, a.get(r, c));
                        d.write(self.offsets[j] + c, self.offsets[i] + r, a.get(r, c).conj());
                    }
                }
            }
        }
        d
    }

    /// Block Cholesky of `A + shift·1`.
    pub fn cholesky(&self, shift: f64) -> Result<BandedChol> {
        let nb = self.sizes.len();
        let mut l: Vec<Vec<SMat>> = Vec::with_capacity(nb);
        for i in 0..nb {
            let mut row: Vec<SMat> = vec![SMat::zeros(0, 0); self.blocks[i].len()];
            for k in (1..self.blocks[i].len()).rev() {
                let j = i - k;
                let mut s = self.blocks[i][k].clone();
                let lo = i.saturating_sub(self.bw);
                for lidx in lo..j {
                    if i - lidx >= row.len() || j - lidx >= l[j].len() {
                        continue;
                    }
                    s.gemm_acc_adj(&row[i - lidx], &l[j][j - lidx], -1.0);
                }
                // X L_jjᴴ = S  ⇔  L_jj Xᴴ = Sᴴ
                let mut xt = s.adjoint();
                l[j][0].solve_lower(&mut xt);
                row[k] = xt.adjoint();
            }
            let mut d = self.blocks[i][0].clone();
            d.add_diag(shift);
            for lik in row.iter().skip(1) {
                d.gemm_acc_adj(lik, lik, -1.0);
            }
            if d.r > 0 && !d.cholesky_in_place() {
                return Err(Error::NotInvertible(format!("block {i} lost positivity")));
            }
            row[0] = d;
            l.push(row);
        }
        Ok(BandedChol { sizes: self.sizes.clone(), offsets: self.offsets.clone(), bw: self.bw, l })
    }

    /// True iff every eigenvalue exceeds `s` (factorization of `A − s` succeeds).
    pub fn exceeds(&self, s: f64) -> bool {
        self.cholesky(-s).is_ok()
    }
}

#[derive(Debug, Clone)]
pub struct BandedChol {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    bw: usize,
    l: Vec<Vec<SMat>>,
}

impl BandedChol {
    /// Solve `(A + shift) X = B` in place.
    pub fn solve_in_place(&self, b: &mut SMat) {
        let nb = self.sizes.len();
        for i in 0..nb {
            let (oi, si) = (self.offsets[i], self.sizes[i]);
            if si == 0 {
                continue;
            }
            let mut rhs = b.rows(oi, si);
            for k in 1..self.l[i].len() {
                let j = i - k;
                if self.sizes[j] == 0 {
                    continue;
                }
                rhs.gemm_acc(&self.l[i][k], &b.rows(self.offsets[j], self.sizes[j]), -1.0);
            }
            self.l[i][0].solve_lower(&mut rhs);
            b.set_rows(oi, &rhs);
        }
        for i in (0..nb).rev() {
            let (oi, si) = (self.offsets[i], self.sizes[i]);
            if si == 0 {
                continue;
            }
            let mut rhs = b.rows(oi, si);
            for r in (i + 1)..nb.min(i + self.bw + 1) {
                let k = r - i;
                if k >= self.l[r].len() || self.sizes[r] == 0 {
                    continue;
                }
                rhs.gemm_adj_acc(&self.l[r][k], &b.rows(self.offsets[r], self.sizes[r]), -1.0);
            }
            self.l[i][0].solve_lower_adj(&mut rhs);
            b.set_rows(oi, &rhs);
        }
    }

    pub fn solve_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut m = SMat { r: v.len(), c: 1, d: v.to_vec() };
        self.solve_in_place(&mut m);
        m.d
    }
}

/// Smallest eigenpairs of a Hermitian positive semidefinite banded matrix.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// `n × q`, orthonormal columns
    pub vectors: SMat,
}

const DENSE_LIMIT: usize = 48;

/// Modified Gram–Schmidt, applied twice.
fn orthonormalize(x: &mut SMat) {
    for _ in 0..2 {
        for j in 0..x.c {
            for k in 0..j {
                let (a, b) = x.d.split_at_mut(j * x.r);
                let qk = &a[k * x.r..(k + 1) * x.r];
                let xj = &mut b[..x.r];
                let p = linalg::dot(qk, xj);
                for (v, q) in xj.iter_mut().zip(qk) {
                    *v -= p * *q;
                }
            }
            let xj = &mut x.d[j * x.r..(j + 1) * x.r];
            let nrm = linalg::norm(xj);
            let inv = if nrm > 0.0 { 1.0 / nrm } else { 0.0 };
            for v in xj.iter_mut() {
                *v = C64::new(v.re * inv, v.im * inv);
            }
        }
    }
}

/// `q` smallest eigenpairs by shifted subspace inverse iteration with
/// Rayleigh–Ritz; starting block drawn from a seeded ChaCha stream.
pub fn smallest_eigenpairs(a: &BandedHerm, q: usize, seed: u64) -> Result<Eigenpairs> {
    let n = a.dim();
    let q = q.min(n);
    if q == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: SMat::zeros(n, 0) });
    }
    if n <= DENSE_LIMIT {
        let (vals, vecs) = linalg::herm_eig(&a.to_dense());
        let v = SMat::from_cmat(&vecs.as_ref().subcols(0, q).to_owned());
        return Ok(Eigenpairs { values: vals[..q].iter().map(|x| x.max(0.0)).collect(), vectors: v });
    }
    let scale = a.max_diag().max(f64::MIN_POSITIVE);
    let mut chol = a.cholesky(1e-12 * scale)?;
    let b = (q + 6).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = SMat::from_cmat(&linalg::random_mat(n, b, &mut rng));
    orthonormalize(&mut x);
    let tol = 1e-11 * scale;
    let max_iter = 400;
    for it in 0..max_iter {
        if it == 3 || it == 10 {
            // Clustered spectra far from zero converge slowly; move the shift
            // up to a lower bound of the spectrum. Success of the
            // factorization certifies that every eigenvalue exceeds it.
            let h = {
                let ax = a.apply_mat(&x);
                let mut h = SMat::zeros(b, b);
                h.gemm_adj_acc(&x, &ax, 1.0);
                h
            };
            let theta0 = linalg::herm_eigvals(&h.to_cmat())[0];
            if theta0 > 1e-6 * scale {
                for f in [0.995, 0.95, 0.7] {
                    if let Ok(c) = a.cholesky(-f * theta0) {
                        chol = c;
                        break;
                    }
                }
            }
        }
        chol.solve_in_place(&mut x);
        orthonormalize(&mut x);
        let ay = a.apply_mat(&x);
        let mut h = SMat::zeros(b, b);
        h.gemm_adj_acc(&x, &ay, 1.0);
        let (theta, v) = linalg::herm_eig(&h.to_cmat());
        let v = SMat::from_cmat(&v);
        let xr = x.mul(&v);
        let axr = ay.mul(&v);
        let mut ok = true;
        for j in 0..q {
            let th = C64::new(theta[j], 0.0);
            let r2: f64 = axr.col(j).iter().zip(xr.col(j)).map(|(u, w)| linalg::abs2(*u - *w * th)).sum();
            if r2.sqrt() > tol {
                ok = false;
                break;
            }
        }
        x = xr;
        if ok {
            return Ok(Eigenpairs {
                values: theta[..q].iter().map(|t| t.max(0.0)).collect(),
                vectors: x.select_cols(&(0..q).collect::<Vec<_>>()),
            });
        }
    }
    Err(Error::IterationLimit(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(seed: u64) -> BlockRows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nb = 7;
        let sizes = vec![3; nb];
        let mut rows = Vec::new();
        rows.push(RowBlock { nrows: 2, entries: vec![(0, SMat::from_cmat(&linalg::random_mat(2, 3, &mut rng)))] });
        for i in 0..nb - 1 {
            rows.push(RowBlock {
                nrows: 3,
                entries: vec![
                    (i, SMat::from_cmat(&linalg::random_mat(3, 3, &mut rng))),
                    (i + 1, SMat::from_cmat(&linalg::random_mat(3, 3, &mut rng))),
                ],
            });
        }
        rows.push(RowBlock { nrows: 1, entries: vec![(nb - 1, SMat::from_cmat(&linalg::random_mat(1, 3, &mut rng)))] });
        BlockRows::new(sizes, rows)
    }

    #[test]
    fn normal_and_gram_match_dense_products() {
        let l = random_rows(1);
        let d = l.to_dense();
        let n = l.normal().to_dense();
        let g = l.gram().to_dense();
        assert!(linalg::frob_diff(&n, &(d.adjoint() * &d)) < 1e-12);
        assert!(linalg::frob_diff(&g, &(&d * d.adjoint())) < 1e-12);
    }

    #[test]
    fn apply_adjoint_is_the_adjoint() {
        let l = random_rows(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<C64> = (0..l.ncols()).map(|_| linalg::random_unit(&mut rng)).collect();
        let y: Vec<C64> = (0..l.nrows()).map(|_| linalg::random_unit(&mut rng)).collect();
        let lhs = linalg::dot(&l.apply(&x), &y);
        let rhs = linalg::dot(&x, &l.apply_adjoint(&y));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves_the_gram_system() {
        let l = random_rows(3);
        let g = l.gram();
        let ch = g.cholesky(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = SMat::from_cmat(&linalg::random_mat(g.dim(), 2, &mut rng));
        let mut x = b.clone();
        ch.solve_in_place(&mut x);
        let mut r = g.apply_mat(&x);
        r.sub_assign(&b);
        assert!(r.frob() < 1e-9 * b.frob());
    }

    #[test]
    fn subspace_iteration_matches_dense_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nb = 30;
        let rows: Vec<RowBlock> = (0..nb - 1)
            .map(|i| RowBlock {
                nrows: 2,
                entries: vec![
                    (i, SMat::from_cmat(&linalg::random_mat(2, 2, &mut rng))),
                    (i + 1, SMat::from_cmat(&linalg::random_mat(2, 2, &mut rng))),
                ],
            })
            .collect();
        let l = BlockRows::new(vec![2; nb], rows);
        let n = l.normal();
        let dense = linalg::herm_eigvals(&n.to_dense());
        let ep = smallest_eigenpairs(&n, 4, 11).unwrap();
        // rank-deficient by construction: 2 zero eigenvalues
        for j in 0..4 {
            assert!((ep.values[j] - dense[j].max(0.0)).abs() < 1e-8 * dense[dense.len() - 1], "{j}");
        }
    }
}
