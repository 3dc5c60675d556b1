//! Small dense complex matrices for block kernels.
//!
//! Time-banded operators have thousands of tiny blocks; general dense
//! routines pay per-call overhead that dominates at these sizes.

use crate::linalg::{CMat, C64, ZERO};
use faer::Mat;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SMat {
    pub r: usize,
    pub c: usize,
    pub d: Vec<C64>,
}

impl SMat {
    pub fn zeros(r: usize, c: usize) -> Self {
        SMat { r, c, d: vec![ZERO; r * c] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.d[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.d[j * self.r + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.d[j * self.r + i] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        self.d[j * self.r + i] += v;
    }

    pub fn from_cmat(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out.set(i, j, m.read(i, j));
            }
        }
        out
    }

    pub fn to_cmat(&self) -> CMat {
        Mat::from_fn(self.r, self.c, |i, j| self.get(i, j))
    }

    pub fn adjoint(&self) -> SMat {
        let mut out = Self::zeros(self.c, self.r);
        for j in 0..self.c {
            for i in 0..self.r {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SMat {
        SMat { r: self.r, c: self.c, d: self.d.iter().map(|v| C64::new(v.re * s, v.im * s)).collect() }
    }

    pub fn add_assign(&mut self, o: &SMat) {
        for (a, b) in self.d.iter_mut().zip(&o.d) {
            *a += *b;
        }
    }

    pub fn sub_assign(&mut self, o: &SMat) {
        for (a, b) in self.d.iter_mut().zip(&o.d) {
            *a -= *b;
        }
    }

    pub fn add_scaled(&mut self, o: &SMat, s: f64) {
        for (a, b) in self.d.iter_mut().zip(&o.d) {
            *a += C64::new(b.re * s, b.im * s);
        }
    }

    pub fn add_diag(&mut self, s: f64) {
        for i in 0..self.r.min(self.c) {
            self.d[i * self.r + i] += C64::new(s, 0.0);
        }
    }

    pub fn mul(&self, b: &SMat) -> SMat {
        let mut out = Self::zeros(self.r, b.c);
        out.gemm_acc(self, b, 1.0);
        out
    }

    /// `self += s·a·b`.
    pub fn gemm_acc(&mut self, a: &SMat, b: &SMat, s: f64) {
        debug_assert_eq!(a.c, b.r);
        for j in 0..b.c {
            for k in 0..a.c {
                let bkj = b.d[j * b.r + k];
                if bkj == ZERO {
                    continue;
                }
                let f = C64::new(bkj.re * s, bkj.im * s);
                let col = &a.d[k * a.r..(k + 1) * a.r];
                let dst = &mut self.d[j * self.r..(j + 1) * self.r];
                for (o, v) in dst.iter_mut().zip(col) {
                    *o += *v * f;
                }
            }
        }
    }

    /// `self += s·aᴴ·b`.
    pub fn gemm_adj_acc(&mut self, a: &SMat, b: &SMat, s: f64) {
        debug_assert_eq!(a.r, b.r);
        for j in 0..b.c {
            let bc = &b.d[j * b.r..(j + 1) * b.r];
            for i in 0..a.c {
                let ac = &a.d[i * a.r..(i + 1) * a.r];
                let mut acc = ZERO;
                for (x, y) in ac.iter().zip(bc) {
                    acc += x.conj() * *y;
                }
                self.d[j * self.r + i] += C64::new(acc.re * s, acc.im * s);
            }
        }
    }

    /// `self += s·a·bᴴ`.
    pub fn gemm_acc_adj(&mut self, a: &SMat, b: &SMat, s: f64) {
        debug_assert_eq!(a.c, b.c);
        for j in 0..b.r {
            for k in 0..a.c {
                let bjk = b.d[k * b.r + j].conj();
                if bjk == ZERO {
                    continue;
                }
                let f = C64::new(bjk.re * s, bjk.im * s);
                let col = &a.d[k * a.r..(k + 1) * a.r];
                let dst = &mut self.d[j * self.r..(j + 1) * self.r];
                for (o, v) in dst.iter_mut().zip(col) {
                    *o += *v * f;
                }
            }
        }
    }

    /// In-place lower Cholesky factor; `false` if not positive definite.
    pub fn cholesky_in_place(&mut self) -> bool {
        let n = self.r;
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= crate::linalg::abs2(self.get(j, k));
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let ljj = d.sqrt();
            self.set(j, j, C64::new(ljj, 0.0));
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= self.get(i, k) * self.get(j, k).conj();
                }
                self.set(i, j, C64::new(s.re / ljj, s.im / ljj));
            }
            for i in 0..j {
                self.set(i, j, ZERO);
            }
        }
        true
    }

    /// Solve `L X = B` in place for lower-triangular `self`.
    pub fn solve_lower(&self, b: &mut SMat) {
        let n = self.r;
        for col in 0..b.c {
            let x = &mut b.d[col * n..(col + 1) * n];
            for i in 0..n {
                let mut s = x[i];
                for k in 0..i {
                    s -= self.d[k * n + i] * x[k];
                }
                let l = self.d[i * n + i];
                x[i] = s / l;
            }
        }
    }

    /// Solve `Lᴴ X = B` in place for lower-triangular `self`.
    pub fn solve_lower_adj(&self, b: &mut SMat) {
        let n = self.r;
        for col in 0..b.c {
            let x = &mut b.d[col * n..(col + 1) * n];
            for i in (0..n).rev() {
                let mut s = x[i];
                let li = &self.d[i * n..(i + 1) * n];
                for k in i + 1..n {
                    s -= li[k].conj() * x[k];
                }
                x[i] = s / li[i].conj();
            }
        }
    }

    /// Rows `[o, o + len)` as a new matrix.
    pub fn rows(&self, o: usize, len: usize) -> SMat {
        let mut out = Self::zeros(len, self.c);
        for j in 0..self.c {
            out.d[j * len..(j + 1) * len].copy_from_slice(&self.d[j * self.r + o..j * self.r + o + len]);
        }
        out
    }

    pub fn set_rows(&mut self, o: usize, m: &SMat) {
        for j in 0..self.c {
            self.d[j * self.r + o..j * self.r + o + m.r].copy_from_slice(&m.d[j * m.r..(j + 1) * m.r]);
        }
    }

    pub fn add_rows(&mut self, o: usize, m: &SMat) {
        for j in 0..self.c {
            let dst = &mut self.d[j * self.r + o..j * self.r + o + m.r];
            for (a, b) in dst.iter_mut().zip(&m.d[j * m.r..(j + 1) * m.r]) {
                *a += *b;
            }
        }
    }

    /// Columns selected by index.
    pub fn select_cols(&self, cols: &[usize]) -> SMat {
        let mut out = Self::zeros(self.r, cols.len());
        for (k, &c) in cols.iter().enumerate() {
            out.d[k * self.r..(k + 1) * self.r].copy_from_slice(&self.d[c * self.r..(c + 1) * self.r]);
        }
        out
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.d[j * self.r..(j + 1) * self.r]
    }

    pub fn frob(&self) -> f64 {
        self.d.iter().map(|v| crate::linalg::abs2(*v)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn products_match_faer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = linalg::random_mat(4, 3, &mut rng);
        let b = linalg::random_mat(3, 5, &mut rng);
        let c = linalg::random_mat(4, 5, &mut rng);
        let (sa, sb, sc) = (SMat::from_cmat(&a), SMat::from_cmat(&b), SMat::from_cmat(&c));
        assert!(linalg::frob_diff(&sa.mul(&sb).to_cmat(), &(&a * &b)) < 1e-13);
        let mut x = SMat::zeros(3, 5);
        x.gemm_adj_acc(&sa, &sc, 1.0);
        assert!(linalg::frob_diff(&x.to_cmat(), &(a.adjoint() * &c)) < 1e-13);
        let mut y = SMat::zeros(4, 3);
        y.gemm_acc_adj(&sc, &sb, 1.0);
        assert!(linalg::frob_diff(&y.to_cmat(), &(&c * b.adjoint())) < 1e-13);
    }

    #[test]
    fn cholesky_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = linalg::random_mat(5, 5, &mut rng);
        let spd = SMat::from_cmat(&(a.adjoint() * &a + linalg::identity(5)));
        let mut l = spd.clone();
        assert!(l.cholesky_in_place());
        let b = SMat::from_cmat(&linalg::random_mat(5, 2, &mut rng));
        let mut x = b.clone();
        l.solve_lower(&mut x);
        l.solve_lower_adj(&mut x);
        let r = spd.mul(&x);
        assert!(linalg::frob_diff(&r.to_cmat(), &b.to_cmat()) < 1e-12);
    }
}
