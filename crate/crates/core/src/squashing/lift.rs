//! The symmetric lift `f(A)` of a `d×d` matrix to the `n`-photon sector and
//! its zeroth and first moments.

use num_complex::Complex64;

use super::combinatorics::{enumerate_lines, enumerate_squares, multinomial_unchecked, Line};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, ZERO};

/// Tolerance on the off-diagonal part of `A·A†` for the closed-form moments.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// `f(A)_{kl} = Σ_{m(k,l)} √(∏ᵢ C(kᵢ; mᵢ·) ∏ⱼ C(lⱼ; m·ⱼ)) ∏ α_ab^{m_ab}`,
/// rows and columns indexed by [`enumerate_lines`].
pub fn symmetric_lift(a: &CMatrix, n: usize) -> CMatrix {
    let d = a.nrows();
    let lines = enumerate_lines(n, d);
    let size = lines.len();
    let mut out = CMatrix::zeros(size, size);
    for (r, k) in lines.iter().enumerate() {
        for (c, l) in lines.iter().enumerate() {
            out[(r, c)] = lift_entry(a, k, l);
        }
    }
    out
}

fn lift_entry(a: &CMatrix, k: &Line, l: &Line) -> Complex64 {
    let d = k.dim();
    let mut total = ZERO;
    for m in enumerate_squares(k, l) {
        let mut weight: u128 = 1;
        for i in 0..d {
            weight *= multinomial_unchecked(m.row(i).iter().copied());
            weight *= multinomial_unchecked(m.col(i));
        }
        let mut term = Complex64::new((weight as f64).sqrt(), 0.0);
        for (i, row) in m.entries.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e > 0 {
                    term *= a[(i, j)].powu(e as u32);
                }
            }
        }
        total += term;
    }
    total
}

/// `Σ_l |f(A)_{kl}|²` by direct summation.
pub fn moment0(a: &CMatrix, k: &Line) -> f64 {
    weighted_moment(a, k, |_| 1.0)
}

/// `Σ_l l_j |f(A)_{kl}|²` by direct summation.
pub fn moment1(a: &CMatrix, k: &Line, j: usize) -> f64 {
    weighted_moment(a, k, |l| l.parts[j] as f64)
}

fn weighted_moment(a: &CMatrix, k: &Line, w: impl Fn(&Line) -> f64) -> f64 {
    enumerate_lines(k.weight(), a.nrows())
        .iter()
        .map(|l| w(l) * lift_entry(a, k, l).norm_sqr())
        .sum()
}

fn row_norms_if_diagonal(a: &CMatrix) -> Result<Vec<f64>> {
    let g = a * a.adjoint();
    let mut off = g.clone();
    off.fill_diagonal(ZERO);
    let offdiag = max_abs(&off);
    if offdiag > DIAGONAL_TOL {
        return Err(Error::NotDiagonal { offdiag });
    }
    Ok((0..a.nrows()).map(|i| g[(i, i)].re).collect())
}

/// `∏ᵢ λᵢ^{kᵢ}` with `λᵢ = Σⱼ |α_ij|²`, valid when `A·A†` is diagonal.
pub fn moment0_closed(a: &CMatrix, k: &Line) -> Result<f64> {
    let lambda = row_norms_if_diagonal(a)?;
    Ok(lambda.iter().zip(&k.parts).map(|(&l, &e)| l.powi(e as i32)).product())
}

/// `Σᵢ kᵢ |α_ij|² λᵢ^{kᵢ-1} ∏_{i'≠i} λ_{i'}^{k_{i'}}`, valid when `A·A†` is
/// diagonal. For unitary `A` this is `Σᵢ kᵢ |u_ij|²`.
pub fn moment1_closed(a: &CMatrix, k: &Line, j: usize) -> Result<f64> {
    let lambda = row_norms_if_diagonal(a)?;
    let mut total = 0.0;
    for (i, &ki) in k.parts.iter().enumerate() {
        if ki == 0 {
            continue;
        }
        let mut term = ki as f64 * a[(i, j)].norm_sqr() * lambda[i].powi(ki as i32 - 1);
        for (ip, &kp) in k.parts.iter().enumerate() {
            if ip != i {
                term *= lambda[ip].powi(kp as i32);
            }
        }
        total += term;
    }
    Ok(total)
}
