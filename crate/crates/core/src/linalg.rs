//! Thin dense helpers over `faer`.

use faer::{Mat, Side};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use faer::complex_native::c64 as C64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cscale(a: C64, s: f64) -> C64 {
    C64::new(a.re * s, a.im * s)
}

pub fn abs2(a: C64) -> f64 {
    a.re * a.re + a.im * a.im
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn frob(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += abs2(a.read(i, j));
        }
    }
    s.sqrt()
}

/// `‖a − b‖_F`
pub fn frob_diff(a: &CMat, b: &CMat) -> f64 {
    frob(&(a - b))
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    // ⟨x, y⟩ = Σ conj(x) y
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| abs2(*a)).sum::<f64>().sqrt()
}

pub fn col_to_vec(a: &CMat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a.read(i, j)).collect()
}

pub fn from_cols(rows: usize, cols: &[Vec<C64>]) -> CMat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn herm_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    if n == 2 {
        return herm_eig2(a);
    }
    let e = a.selfadjoint_eigendecomposition(Side::Lower);
    let s = e.s().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s.read(i).re).collect();
    (vals, e.u().to_owned())
}

/// Closed form for 2×2 Hermitian matrices, the hot path for decoupled modes.
fn herm_eig2(a: &CMat) -> (Vec<f64>, CMat) {
    let p = a.read(0, 0).re;
    let q = a.read(1, 1).re;
    let b = C64::new(
        0.5 * (a.read(1, 0).re + a.read(0, 1).re),
        0.5 * (a.read(1, 0).im - a.read(0, 1).im),
    );
    let mean = 0.5 * (p + q);
    let half = 0.5 * (p - q);
    let r = (half * half + abs2(b)).sqrt();
    if r == 0.0 {
        return (vec![mean, mean], identity(2));
    }
    // σ·k form with k = (Re b, Im b, half)
    let k = [b.re, b.im, half];
    let lo = crate::torus::helicity_spinor(k, -1.0);
    let hi = crate::torus::helicity_spinor(k, 1.0);
    let u = Mat::from_fn(2, 2, |i, j| if j == 0 { lo[i] } else { hi[i] });
    (vec![mean - r, mean + r], u)
}

pub fn herm_eigvals(a: &CMat) -> Vec<f64> {
    herm_eig(a).0
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = a.singular_values();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Unitary factor `W V†` of the polar decomposition `a = W Σ V†`.
pub fn polar_unitary(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return zeros(0, 0);
    }
    let svd = a.svd();
    svd.u() * svd.v().adjoint()
}

/// Numerical rank with relative tolerance.
pub fn rank(a: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        None => 0,
        Some(&top) if top == 0.0 => 0,
        Some(&top) => s.iter().filter(|&&x| x > rel_tol * top).count(),
    }
}

/// Orthonormalize the columns of `a` (thin Q factor).
pub fn orthonormalize(a: &CMat) -> CMat {
    a.qr().compute_thin_q()
}

/// Principal logarithm of a unitary matrix, returned anti-Hermitian.
/// `None` when an eigenvalue sits on the negative real axis.
pub fn unitary_log(w: &CMat) -> Option<CMat> {
    let n = w.nrows();
    if n == 0 {
        return Some(zeros(0, 0));
    }
    // W is normal: its Hermitian and anti-Hermitian parts commute, so a
    // generic real combination of them shares W's eigenvectors.
    let kappa = 0.618_033_988_749_894_8;
    let wh = adjoint(w);
    let h = Mat::from_fn(n, n, |i, j| {
        let a = w.read(i, j);
        let b = wh.read(i, j);
        let herm = cscale(a + b, 0.5);
        let skew = (a - b) * C64::new(0.0, -0.5);
        herm + cscale(skew, kappa)
    });
    let (_, v) = herm_eig(&h);
    let d = v.adjoint() * w * &v;
    let mut theta = vec![0.0; n];
    for i in 0..n {
        let z = d.read(i, i);
        let arg = z.im.atan2(z.re);
        if (std::f64::consts::PI - arg.abs()) < 1e-9 {
            return None;
        }
        theta[i] = arg;
    }
    let diag = Mat::from_fn(n, n, |i, j| if i == j { C64::new(0.0, theta[i]) } else { ZERO });
    Some(&v * &diag * v.adjoint())
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
}

pub fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m.write(i, j, random_unit(rng));
        }
    }
    m
}

/// Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [[[C64; 2]; 2]; 3] {
    [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]],
        [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]],
    ]
}

pub fn mat2(a: [[C64; 2]; 2]) -> CMat {
    Mat::from_fn(2, 2, |i, j| a[i][j])
}
