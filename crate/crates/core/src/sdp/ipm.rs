//! Mehrotra predictor-corrector interior-point method with Nesterov-Todd
//! scaling for a real problem with one PSD block and one nonnegative block:
//!
//! ```text
//! max ⟨C, X⟩ + cₗᵀ x   s.t.  ⟨Aᵢ, X⟩ + aᵢᵀ x = bᵢ,  X ⪰ 0,  x ≥ 0
//! min bᵀ y             s.t.  Σ yᵢ Aᵢ − C ⪰ 0,  Σ yᵢ aᵢ − cₗ ≥ 0
//! ```
//!
//! The iteration runs in double-double arithmetic. The phase-error
//! programmes sit very close to a face, which makes the multipliers large
//! and the primal iterate sensitive to rounding in the Newton system.

use nalgebra::DVector;
use twofloat::TwoFloat;

use super::dense::{dot, norm, Mat, Real};
use super::SolveStatus;
use crate::linalg::RMatrix;

type RVector = DVector<f64>;

pub(crate) struct StandardForm {
    pub n: usize,
    pub nl: usize,
    pub a: Vec<RMatrix>,
    /// `m × nl`
    pub al: RMatrix,
    pub b: RVector,
    pub c: RMatrix,
    pub cl: RVector,
}

pub(crate) struct IpmResult {
    pub status: SolveStatus,
    pub x: RMatrix,
    pub xl: RVector,
    /// Multipliers of the maximisation form.
    pub y: RVector,
    pub dual: f64,
    pub rel_dual: f64,
    pub iterations: usize,
}

const DIVERGENCE: f64 = 1e12;
const REFINE_STEPS: usize = 2;
const STALL_STEP: f64 = 1e-12;

/// Problem data converted to the working precision, in minimisation form.
struct Data<T> {
    n: usize,
    nl: usize,
    a: Vec<Mat<T>>,
    al: Mat<T>,
    b: Vec<T>,
    c: Mat<T>,
    cl: Vec<T>,
}

struct Scaling<T> {
    g: Mat<T>,
    ginv: Mat<T>,
    w: Mat<T>,
    lambda: Vec<T>,
    wl: Vec<T>,
    lx: Mat<T>,
    lz: Mat<T>,
}

struct Schur<T> {
    chol: Mat<T>,
    d: Vec<T>,
}

impl<T: Real> Schur<T> {
    fn solve(&self, r: &[T]) -> Vec<T> {
        let scaled: Vec<T> = r.iter().zip(&self.d).map(|(&a, &b)| a * b).collect();
        let t = self.chol.cholesky_solve(&scaled);
        t.iter().zip(&self.d).map(|(&a, &b)| a * b).collect()
    }
}

struct Direction<T> {
    dx: Mat<T>,
    dxl: Vec<T>,
    dy: Vec<T>,
    dz: Mat<T>,
    dzl: Vec<T>,
}

struct Outcome<T> {
    status: SolveStatus,
    x: Mat<T>,
    xl: Vec<T>,
    y: Vec<T>,
    rel_dual: f64,
    iterations: usize,
}

fn chol_factor<T: Real>(m: &Mat<T>) -> Option<Mat<T>> {
    let s = m.sym();
    if let Some(l) = s.cholesky() {
        return Some(l);
    }
    let mut shift = s.max_diag().max(T::min_positive_value()) * T::eps();
    for _ in 0..8 {
        if let Some(l) = s.add(&Mat::identity(s.rows).scale(shift)).cholesky() {
            return Some(l);
        }
        shift = shift * T::of(100.0);
    }
    None
}

/// Largest step keeping `L Lᵀ + α d` PSD, given the Cholesky factor `L`.
fn psd_step<T: Real>(l: &Mat<T>, d: &Mat<T>) -> T {
    if l.rows == 0 {
        return unbounded();
    }
    let linv = l.lower_inverse();
    let scaled = linv.mul(d).mul(&linv.t());
    let min = scaled.symmetric_eigenvalues().into_iter().fold(unbounded(), T::min);
    if min >= T::zero() {
        unbounded()
    } else {
        -T::one().quot(min)
    }
}

/// Step bound standing in for +∞; double-double infinities produce NaNs.
fn unbounded<T: Real>() -> T {
    T::of(1e300)
}

fn lp_step<T: Real>(x: &[T], dx: &[T]) -> T {
    x.iter()
        .zip(dx)
        .filter(|(_, &d)| d < T::zero())
        .map(|(&v, &d)| (-v).quot(d))
        .fold(unbounded(), T::min)
}

fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

impl<T: Real> Data<T> {
    fn new(f: &StandardForm) -> Self {
        let m = f.b.len();
        Self {
            n: f.n,
            nl: f.nl,
            a: f.a.iter().map(Mat::from_f64).collect(),
            al: Mat::from_fn(m, f.nl, |i, k| T::of(f.al[(i, k)])),
            b: f.b.iter().map(|&v| T::of(v)).collect(),
            c: Mat::from_f64(&f.c).scale(-T::one()),
            cl: f.cl.iter().map(|&v| -T::of(v)).collect(),
        }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn op(&self, x: &Mat<T>, xl: &[T]) -> Vec<T> {
        let mut out = self.al.mul_vec(xl);
        for (o, a) in out.iter_mut().zip(&self.a) {
            *o = *o + a.dot(x);
        }
        out
    }

    fn adjoint(&self, y: &[T]) -> (Mat<T>, Vec<T>) {
        let mut s = Mat::zeros(self.n, self.n);
        for (a, &yi) in self.a.iter().zip(y) {
            if yi != T::zero() {
                s = s.axpy(yi, a);
            }
        }
        (s, self.al.tr_mul_vec(y))
    }

    fn scaling(&self, x: &Mat<T>, xl: &[T], z: &Mat<T>, zl: &[T]) -> Option<Scaling<T>> {
        let lx = chol_factor(x)?;
        let lz = chol_factor(z)?;
        let (lambda, v) = lz.t().mul(&lx).svd_right();
        if lambda.iter().any(|&s| !(s > T::zero())) {
            return None;
        }
        let inv_sqrt: Vec<T> = lambda.iter().map(|&s| T::one().quot(s.sqrt())).collect();
        let sqrt: Vec<T> = lambda.iter().map(|&s| s.sqrt()).collect();
        let g = lx.mul(&v).mul(&Mat::diag(&inv_sqrt));
        let ginv = Mat::diag(&sqrt).mul(&v.t()).mul(&lx.lower_inverse());
        let w = g.mul(&g.t()).sym();
        let wl = xl.iter().zip(zl).map(|(&a, &b)| a.quot(b)).collect();
        Some(Scaling {
            g,
            ginv,
            w,
            lambda,
            wl,
            lx,
            lz,
        })
    }

    fn schur(&self, sc: &Scaling<T>) -> Option<Schur<T>> {
        let m = self.m();
        let wa: Vec<Mat<T>> = self.a.iter().map(|a| sc.w.mul(a).mul(&sc.w)).collect();
        let mut mat = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let mut v = self.a[i].dot(&wa[j]);
                for k in 0..self.nl {
                    v = v + self.al[(i, k)] * sc.wl[k] * self.al[(j, k)];
                }
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        // Jacobi equilibration: slack weights span many decades.
        let d: Vec<T> = (0..m)
            .map(|i| {
                let v = mat[(i, i)];
                if v > T::zero() {
                    T::one().quot(v.sqrt())
                } else {
                    T::one()
                }
            })
            .collect();
        let scaled = Mat::from_fn(m, m, |i, j| mat[(i, j)] * d[i] * d[j]);
        let mut shift = T::zero();
        for _ in 0..8 {
            if let Some(chol) = scaled.add(&Mat::identity(m).scale(shift)).cholesky() {
                return Some(Schur { chol, d });
            }
            shift = if shift == T::zero() {
                T::eps()
            } else {
                shift * T::of(100.0)
            };
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        sc: &Scaling<T>,
        schur: &Schur<T>,
        rhs: &Mat<T>,
        rcl: &[T],
        rp: &[T],
        rd: &Mat<T>,
        rdl: &[T],
    ) -> Direction<T> {
        let n = self.n;
        let two = T::of(2.0);
        let scaled = Mat::from_fn(n, n, |i, j| (two * rhs[(i, j)]).quot(sc.lambda[i] + sc.lambda[j]));
        let rc = sc.g.mul(&scaled).mul(&sc.g.t());
        let t = rc.sub(&sc.w.mul(rd).mul(&sc.w));
        let tl: Vec<T> = (0..self.nl).map(|k| rcl[k] - sc.wl[k] * rdl[k]).collect();
        let mut dy = schur.solve(&sub(rp, &self.op(&t, &tl)));
        let mut refine = 0;
        loop {
            let (aty, atyl) = self.adjoint(&dy);
            let dz = rd.sub(&aty).sym();
            let dzl = sub(rdl, &atyl);
            let dx = rc.sub(&sc.w.mul(&dz).mul(&sc.w)).sym();
            let dxl: Vec<T> = (0..self.nl).map(|k| rcl[k] - sc.wl[k] * dzl[k]).collect();
            if refine >= REFINE_STEPS {
                return Direction {
                    dx,
                    dxl,
                    dy,
                    dz,
                    dzl,
                };
            }
            // iterative refinement on the primal block equation
            let res = sub(rp, &self.op(&dx, &dxl));
            dy = axpy(&dy, T::one(), &schur.solve(&res));
            refine += 1;
        }
    }

    fn run(&self, tol: f64, max_iter: usize) -> Outcome<T> {
        let (n, nl, m) = (self.n, self.nl, self.m());
        let dim = T::of((n + nl).max(1) as f64);
        let tol_t = T::of(tol);
        let one = T::one();

        let b_norm = norm(&self.b);
        let c_norm = (self.c.dot(&self.c) + dot(&self.cl, &self.cl)).sqrt();
        let sqrt_n = T::of((n.max(1) as f64).sqrt());
        let ten = T::of(10.0);
        let mut xi = ten.max(sqrt_n);
        let mut zeta = ten.max(sqrt_n).max(c_norm);
        for i in 0..m {
            let row = &self.al.data[i * nl..(i + 1) * nl];
            let an = (self.a[i].dot(&self.a[i]) + dot(row, row)).sqrt();
            xi = xi.max(sqrt_n * (one + self.b[i].abs()) / (one + an));
            zeta = zeta.max(an);
        }
        let mut x = Mat::identity(n).scale(xi);
        let mut xl = vec![xi; nl];
        let mut z = Mat::identity(n).scale(zeta);
        let mut zl = vec![zeta; nl];
        let mut y = vec![T::zero(); m];

        let mut stalls = 0;
        let mut status = SolveStatus::MaxIterations;
        let mut iterations = 0;
        let mut rel_d;
        loop {
            let rp = sub(&self.b, &self.op(&x, &xl));
            let (aty, atyl) = self.adjoint(&y);
            let rd = self.c.sub(&aty).sub(&z);
            let rdl: Vec<T> = (0..nl).map(|k| self.cl[k] - atyl[k] - zl[k]).collect();
            let pobj = self.c.dot(&x) + dot(&self.cl, &xl);
            let dobj = dot(&self.b, &y);
            let rel_p = norm(&rp) / (one + b_norm);
            rel_d = ((rd.dot(&rd) + dot(&rdl, &rdl)).sqrt() / (one + c_norm)).to_f64();
            let gap = (pobj - dobj).abs();
            if rel_p <= tol_t && T::of(rel_d) <= tol_t && gap <= tol_t * one.max(pobj.abs().min(dobj.abs())) {
                status = SolveStatus::Optimal;
                break;
            }
            let y_norm = norm(&y).to_f64();
            let d = dobj.to_f64();
            if y_norm > DIVERGENCE && d > 0.0 && d / y_norm > 1e-8 && rel_d < 1e-4 {
                status = SolveStatus::Infeasible;
                break;
            }
            if iterations >= max_iter || stalls >= 3 {
                break;
            }
            iterations += 1;

            let Some(sc) = self.scaling(&x, &xl, &z, &zl) else {
                break;
            };
            let Some(schur) = self.schur(&sc) else {
                break;
            };
            let mu = (x.dot(&z) + dot(&xl, &zl)).quot(dim);

            // predictor
            let rhs_aff = Mat::diag(&sc.lambda.iter().map(|&l| -l * l).collect::<Vec<_>>());
            let rcl_aff: Vec<T> = xl.iter().map(|&v| -v).collect();
            let aff = self.direction(&sc, &schur, &rhs_aff, &rcl_aff, &rp, &rd, &rdl);
            let ap_aff = psd_step(&sc.lx, &aff.dx).min(lp_step(&xl, &aff.dxl)).min(one);
            let ad_aff = psd_step(&sc.lz, &aff.dz).min(lp_step(&zl, &aff.dzl)).min(one);
            let x_aff = x.axpy(ap_aff, &aff.dx);
            let z_aff = z.axpy(ad_aff, &aff.dz);
            let xl_aff = axpy(&xl, ap_aff, &aff.dxl);
            let zl_aff = axpy(&zl, ad_aff, &aff.dzl);
            let mu_aff = (x_aff.dot(&z_aff) + dot(&xl_aff, &zl_aff)).quot(dim);
            let sigma = (mu_aff / mu).max(T::zero()).min(one).powi(3);

            // corrector
            let dxt = sc.ginv.mul(&aff.dx).mul(&sc.ginv.t());
            let dzt = sc.g.t().mul(&aff.dz).mul(&sc.g);
            let mut rhs = dxt.mul(&dzt).sym().scale(-one);
            for i in 0..n {
                rhs[(i, i)] = rhs[(i, i)] + sigma * mu - sc.lambda[i] * sc.lambda[i];
            }
            let rcl: Vec<T> = (0..nl)
                .map(|k| (sigma * mu - xl[k] * zl[k] - aff.dxl[k] * aff.dzl[k]).quot(zl[k]))
                .collect();
            let dir = self.direction(&sc, &schur, &rhs, &rcl, &rp, &rd, &rdl);

            let gamma = T::of(0.9) + T::of(0.09) * ap_aff.min(ad_aff);
            let ap = (gamma * psd_step(&sc.lx, &dir.dx).min(lp_step(&xl, &dir.dxl))).min(one);
            let ad = (gamma * psd_step(&sc.lz, &dir.dz).min(lp_step(&zl, &dir.dzl))).min(one);
            if ap.to_f64() < STALL_STEP && ad.to_f64() < STALL_STEP {
                stalls += 1;
            } else {
                stalls = 0;
            }
            x = x.axpy(ap, &dir.dx).sym();
            xl = axpy(&xl, ap, &dir.dxl);
            y = axpy(&y, ad, &dir.dy);
            z = z.axpy(ad, &dir.dz).sym();
            zl = axpy(&zl, ad, &dir.dzl);
        }
        Outcome {
            status,
            x,
            xl,
            y,
            rel_dual: rel_d,
            iterations,
        }
    }
}

impl StandardForm {
    /// Solves in minimisation form `min ⟨-C, X⟩ + ...` and reports the
    /// multipliers and dual value of the maximisation form.
    pub fn solve(&self, tol: f64, max_iter: usize) -> IpmResult {
        let data: Data<TwoFloat> = Data::new(self);
        let out = data.run(tol, max_iter);
        IpmResult {
            status: out.status,
            dual: -dot(&data.b, &out.y).to_f64(),
            x: out.x.to_f64(),
            xl: RVector::from_iterator(out.xl.len(), out.xl.iter().map(|v| v.to_f64())),
            y: RVector::from_iterator(out.y.len(), out.y.iter().map(|v| -v.to_f64())),
            rel_dual: out.rel_dual,
            iterations: out.iterations,
        }
    }
}
