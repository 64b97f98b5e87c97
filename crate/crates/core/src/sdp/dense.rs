//! Minimal dense kernels generic over the scalar type, so the interior-point
//! iteration can run in double-double arithmetic. Sizes here are tiny (a few
//! dozen rows), so plain loops and Jacobi methods are adequate.

use num_traits::Float;
use twofloat::TwoFloat;

use crate::linalg::RMatrix;

pub trait Real: Float + std::fmt::Debug {
    fn of(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Unit roundoff. `TwoFloat::epsilon` returns the smallest normal
    /// number instead.
    fn eps() -> Self;
    /// Correctly rounded quotient. `TwoFloat`'s `/` loses the low word.
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for TwoFloat {
    fn of(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn eps() -> Self {
        TwoFloat::from(2f64.powi(-104))
    }
    fn quot(self, rhs: Self) -> Self {
        let q = self / rhs;
        if !q.is_finite() || !rhs.is_finite() {
            return q;
        }
        let r = self - q * rhs;
        q + r / rhs.hi()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_f64(m: &RMatrix) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| T::of(m[(i, j)]))
    }

    pub fn to_f64(&self) -> RMatrix {
        RMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].to_f64())
    }

    pub fn t(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..o.cols {
                    out.data[i * o.cols + j] = out.data[i * o.cols + j] + a * o[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| dot(&self.data[i * self.cols..(i + 1) * self.cols], v))
            .collect()
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o = *o + self[(i, j)] * vi;
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// `self + s o`
    pub fn axpy(&self, s: T, o: &Self) -> Self {
        self.zip(o, |a, b| a + s * b)
    }

    fn zip(&self, o: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, o: &Self) -> T {
        dot(&self.data, &o.data)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * T::of(0.5))
    }

    pub fn max_diag(&self) -> T {
        (0..self.rows).map(|i| self[(i, i)]).fold(T::zero(), T::max)
    }

    /// Lower Cholesky factor, `None` unless positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s.quot(d);
            }
        }
        Some(l)
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for c in 0..n {
            for i in c..n {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in c..i {
                    s = s - self[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = s.quot(self[(i, i)]);
            }
        }
        inv
    }

    /// Solves `L Lᵀ x = b` with `self = L`.
    pub fn cholesky_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - self[(i, k)] * y[k];
            }
            y[i] = y[i].quot(self[(i, i)]);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - self[(k, i)] * y[k];
            }
            y[i] = y[i].quot(self[(i, i)]);
        }
        y
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.rows;
        let mut a = self.sym();
        let eps = T::eps();
        for _ in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .fold(T::zero(), |s, v| s + v);
            if off.sqrt() <= eps * a.norm() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let (c, s) = jacobi_rotation(a[(p, p)], a[(q, q)], apq);
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }

    /// One-sided Jacobi SVD of a square matrix: returns `(σ, V)` with
    /// `self · V = U · diag(σ)` for some orthogonal `U`.
    pub fn svd_right(&self) -> (Vec<T>, Self) {
        let n = self.cols;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let eps = T::eps();
        for _ in 0..100 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for k in 0..a.rows {
                        let (x, y) = (a[(k, p)], a[(k, q)]);
                        alpha = alpha + x * x;
                        beta = beta + y * y;
                        gamma = gamma + x * y;
                    }
                    if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                        continue;
                    }
                    rotated = true;
                    let (c, s) = jacobi_rotation(alpha, beta, gamma);
                    for m in [&mut a, &mut v] {
                        for k in 0..m.rows {
                            let (x, y) = (m[(k, p)], m[(k, q)]);
                            m[(k, p)] = c * x - s * y;
                            m[(k, q)] = s * x + c * y;
                        }
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let sigma = (0..n)
            .map(|j| (0..a.rows).map(|k| a[(k, j)] * a[(k, j)]).fold(T::zero(), |s, x| s + x).sqrt())
            .collect();
        (sigma, v)
    }
}

/// Rotation `(c, s)` annihilating the off-diagonal entry `apq` of the 2×2
/// symmetric matrix `[[app, apq], [apq, aqq]]`.
fn jacobi_rotation<T: Real>(app: T, aqq: T, apq: T) -> (T, T) {
    let diff = aqq - app;
    // For |θ| beyond 1e100, θ² overflows and t = 1/(2θ) to full precision.
    let t = if diff.abs() > T::of(1e100) * apq.abs() {
        apq.quot(diff)
    } else {
        let theta = diff.quot(T::of(2.0) * apq);
        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
        sign.quot(theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one().quot((t * t + T::one()).sqrt());
    (c, c * t)
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat<f64> {
        Mat::from_fn(4, 4, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn cholesky_round_trip() {
        let a = sample();
        let l = a.cholesky().unwrap();
        assert!(l.mul(&l.t()).sub(&a).norm() < 1e-14);
        let x = l.cholesky_solve(&[1.0, 2.0, 3.0, 4.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let li = l.lower_inverse();
        assert!(li.mul(&l).sub(&Mat::identity(4)).norm() < 1e-14);
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let a = sample();
        let mut ev = a.symmetric_eigenvalues();
        ev.sort_by(f64::total_cmp);
        let mut reference: Vec<f64> = a.to_f64().symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-13);
        }
        let b = Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 2.5);
        let (s, v) = b.svd_right();
        let mut s_ref: Vec<f64> = b.to_f64().singular_values().iter().copied().collect();
        let mut s_sorted = s.clone();
        s_sorted.sort_by(f64::total_cmp);
        s_ref.sort_by(f64::total_cmp);
        for (x, y) in s_sorted.iter().zip(&s_ref) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(v.t().mul(&v).sub(&Mat::identity(3)).norm() < 1e-14);
    }

    #[test]
    fn double_double_is_more_accurate() {
        // Hilbert matrix of order 8: condition number about 1.5e10.
        let h = |i: usize, j: usize| 1.0 / (1.0 + i as f64 + j as f64);
        let a: Mat<TwoFloat> = Mat::from_fn(8, 8, |i, j| TwoFloat::from(1.0).quot(TwoFloat::from(1.0 + (i + j) as f64)));
        let ones = vec![TwoFloat::from(1.0); 8];
        let b = a.mul_vec(&ones);
        let x = a.cholesky().unwrap().cholesky_solve(&b);
        let err = x.iter().map(|v| (v.to_f64() - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
        let af: Mat<f64> = Mat::from_fn(8, 8, h);
        let bf = af.mul_vec(&[1.0; 8]);
        let xf = af.cholesky().unwrap().cholesky_solve(&bf);
        let errf = xf.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(errf > err);
    }
}
