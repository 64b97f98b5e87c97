//! Small dense semidefinite programming.
//!
//! Problems are stated over a complex Hermitian variable `X ⪰ 0` together
//! with a few nonnegative scalars, and solved as a real problem: real data is
//! used directly, complex data goes through [`hermitian_embed`]. Before the
//! interior-point iteration the problem is presolved: equalities that force
//! `X` onto a face of the cone are used to restrict `X` to that face, zero and
//! linearly dependent rows are removed, and rows are normalised.

mod dense;
mod ipm;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, max_abs, CMatrix, RMatrix};
use ipm::StandardForm;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Relative tolerance for kernels and dependent rows during presolve.
const PRESOLVE_TOL: f64 = 1e-10;
/// Mismatch in the right-hand side of a dependent row, after normalisation,
/// above which the system is reported inconsistent. Smaller mismatches come
/// from rounding in the data; the row is dropped, which only relaxes the
/// programme.
const INCONSISTENCY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIterations => "max-iterations",
        })
    }
}

/// `Re Tr(matrix · X) + scalars · s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub matrix: CMatrix,
    pub scalars: Vec<f64>,
}

impl LinearForm {
    pub fn new(matrix: CMatrix, scalars: Vec<f64>) -> Self {
        Self { matrix, scalars }
    }

    /// Form with no scalar part; padded to the problem's scalar count.
    pub fn matrix(matrix: CMatrix) -> Self {
        Self {
            matrix,
            scalars: Vec::new(),
        }
    }

    pub fn eval(&self, x: &CMatrix, s: &[f64]) -> f64 {
        let mut v = (&self.matrix * x).trace().re;
        for (a, b) in self.scalars.iter().zip(s) {
            v += a * b;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub form: LinearForm,
    pub target: f64,
}

/// `lower ≤ form ≤ upper`; either side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub form: LinearForm,
    pub lower: f64,
    pub upper: f64,
}

/// Maximise `objective` over Hermitian `X ⪰ 0` and scalars `s ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub num_scalars: usize,
    pub objective: LinearForm,
    pub equalities: Vec<Equality>,
    pub inequalities: Vec<Inequality>,
}

impl SdpProblem {
    pub fn new(dim: usize, num_scalars: usize, objective: LinearForm) -> Self {
        Self {
            dim,
            num_scalars,
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn add_equality(&mut self, form: LinearForm, target: f64) {
        self.equalities.push(Equality { form, target });
    }

    pub fn add_inequality(&mut self, form: LinearForm, lower: f64, upper: f64) {
        self.inequalities.push(Inequality { form, lower, upper });
    }

    /// Largest violation of any constraint at `(x, s)`, including negative
    /// scalars.
    pub fn primal_residual(&self, x: &CMatrix, s: &[f64]) -> f64 {
        let mut worst: f64 = s.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        for e in &self.equalities {
            worst = worst.max((e.form.eval(x, s) - e.target).abs());
        }
        for q in &self.inequalities {
            let v = q.form.eval(x, s);
            worst = worst.max(q.lower - v).max(v - q.upper);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let check = |f: &LinearForm| -> Result<()> {
            if f.matrix.nrows() != self.dim || f.matrix.ncols() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: f.matrix.nrows(),
                });
            }
            if f.scalars.len() > self.num_scalars {
                return Err(Error::DimensionMismatch {
                    expected: self.num_scalars,
                    found: f.scalars.len(),
                });
            }
            let deviation = hermitian_deviation(&f.matrix);
            if deviation > 1e-12 * max_abs(&f.matrix).max(1.0) {
                return Err(Error::NotHermitian { deviation });
            }
            Ok(())
        };
        check(&self.objective)?;
        for e in &self.equalities {
            check(&e.form)?;
            if !e.target.is_finite() {
                return Err(Error::InvalidConfig("non-finite equality target".into()));
            }
        }
        for q in &self.inequalities {
            check(&q.form)?;
            if q.lower.is_nan() || q.upper.is_nan() || q.lower > q.upper {
                return Err(Error::InvalidConfig(format!(
                    "inequality bounds [{}, {}] are not ordered",
                    q.lower, q.upper
                )));
            }
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("SDP dimension must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest absolute constraint violation in the original problem.
    pub primal: f64,
    /// Relative dual infeasibility reported by the iteration.
    pub dual: f64,
    /// Smallest eigenvalue of the returned primal matrix.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    /// Objective of the dual iterate; an upper bound on the maximum up to the
    /// dual residual.
    pub dual_value: f64,
    pub gap: f64,
    pub primal_matrix: CMatrix,
    pub primal_scalars: Vec<f64>,
    /// One multiplier per equality, in order.
    pub equality_multipliers: Vec<f64>,
    /// Net multiplier on each inequality form (zero when inactive).
    pub inequality_multipliers: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn hermitian_embed(h: &CMatrix) -> Result<RMatrix> {
    let deviation = hermitian_deviation(h);
    if deviation > 1e-12 * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(embed_unchecked(h))
}

fn embed_unchecked(h: &CMatrix) -> RMatrix {
    let d = h.nrows();
    RMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = h[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn solve(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_with(
        p,
        SolveOptions {
            tol,
            ..Default::default()
        },
    )
}

/// Which way a standard-form row enters the original constraint list.
#[derive(Debug, Clone, Copy)]
enum Origin {
    Equality(usize),
    Inequality(usize),
}

struct Row {
    a: RMatrix,
    al: Vec<f64>,
    b: f64,
    /// Norm before facial reduction; restricted rows far below it are noise.
    scale: f64,
    origin: Origin,
}

pub fn solve_with(p: &SdpProblem, opts: SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let real = std::iter::once(&p.objective)
        .chain(p.equalities.iter().map(|e| &e.form))
        .chain(p.inequalities.iter().map(|q| &q.form))
        .all(|f| f.matrix.iter().all(|z| z.im == 0.0));
    let to_real = |h: &CMatrix| -> RMatrix {
        if real {
            h.map(|z| z.re)
        } else {
            embed_unchecked(h) * 0.5
        }
    };
    let n_full = if real { p.dim } else { 2 * p.dim };
    let padded = |f: &LinearForm| -> Vec<f64> {
        let mut v = f.scalars.clone();
        v.resize(p.num_scalars, 0.0);
        v
    };

    // equalities, including zero-width inequalities
    let mut eqs: Vec<(RMatrix, Vec<f64>, f64, Origin)> = p
        .equalities
        .iter()
        .enumerate()
        .map(|(i, e)| (to_real(&e.form.matrix), padded(&e.form), e.target, Origin::Equality(i)))
        .collect();
    let mut ineqs = Vec::new();
    for (i, q) in p.inequalities.iter().enumerate() {
        if q.lower == q.upper {
            eqs.push((to_real(&q.form.matrix), padded(&q.form), q.lower, Origin::Inequality(i)));
        } else {
            ineqs.push((to_real(&q.form.matrix), padded(&q.form), q.lower, q.upper, i));
        }
    }

    let basis = facial_reduction(n_full, &eqs);
    let restrict = |a: &RMatrix| -> RMatrix {
        let r = match &basis {
            Some(v) => v.transpose() * a * v,
            None => a.clone(),
        };
        (&r + r.transpose()) * 0.5
    };
    let n = basis.as_ref().map_or(n_full, |v| v.ncols());

    let slack_count: usize = ineqs
        .iter()
        .map(|q| usize::from(q.2.is_finite()) + usize::from(q.3.is_finite()))
        .sum();
    let nl = p.num_scalars + slack_count;
    let mut rows = Vec::new();
    for (a, scal, target, origin) in &eqs {
        let mut al = scal.clone();
        al.resize(nl, 0.0);
        let scale = (a.norm_squared() + al.iter().map(|v| v * v).sum::<f64>()).sqrt();
        rows.push(Row {
            a: restrict(a),
            al,
            b: *target,
            scale,
            origin: *origin,
        });
    }
    let mut slack = p.num_scalars;
    for (a, scal, lower, upper, idx) in &ineqs {
        let ra = restrict(a);
        for (bound, sign) in [(*lower, -1.0), (*upper, 1.0)] {
            if bound.is_finite() {
                let mut al = scal.clone();
                al.resize(nl, 0.0);
                al[slack] = sign;
                slack += 1;
                let scale = (a.norm_squared() + al.iter().map(|v| v * v).sum::<f64>()).sqrt();
                rows.push(Row {
                    a: ra.clone(),
                    al,
                    b: bound,
                    scale,
                    origin: Origin::Inequality(*idx),
                });
            }
        }
    }

    let clean = clean_rows(&rows)?;
    let m = clean.a.len();
    let form = StandardForm {
        n,
        nl,
        a: clean.a.clone(),
        al: RMatrix::from_fn(m, nl, |i, k| clean.al[i][k]),
        b: DVector::from_vec(clean.b.clone()),
        c: restrict(&to_real(&p.objective.matrix)),
        cl: {
            let mut v = padded(&p.objective);
            v.resize(nl, 0.0);
            DVector::from_vec(v)
        },
    };
    let res = form.solve(opts.tol, opts.max_iter);

    let x_real = match &basis {
        Some(v) => v * &res.x * v.transpose(),
        None => res.x.clone(),
    };
    let primal_matrix = if real {
        x_real.map(|v| Complex64::new(v, 0.0))
    } else {
        let d = p.dim;
        CMatrix::from_fn(d, d, |i, j| {
            Complex64::new(
                0.5 * (x_real[(i, j)] + x_real[(i + d, j + d)]),
                0.5 * (x_real[(i + d, j)] - x_real[(i, j + d)]),
            )
        })
    };
    let primal_scalars: Vec<f64> = res.xl.iter().take(p.num_scalars).copied().collect();

    let mut equality_multipliers = vec![0.0; p.equalities.len()];
    let mut inequality_multipliers = vec![0.0; p.inequalities.len()];
    for (r, row) in rows.iter().enumerate() {
        let y: f64 = (0..m).map(|k| res.y[k] * clean.coef[k][r]).sum();
        match row.origin {
            Origin::Equality(k) => equality_multipliers[k] += y,
            Origin::Inequality(k) => inequality_multipliers[k] += y,
        }
    }

    let primal_value = p.objective.eval(&primal_matrix, &primal_scalars);
    let min_eigenvalue = crate::linalg::hermitian_eigenvalues(&primal_matrix)[0];
    let residuals = Residuals {
        primal: p.primal_residual(&primal_matrix, &primal_scalars),
        dual: res.rel_dual,
        min_eigenvalue,
    };
    Ok(SdpSolution {
        status: res.status,
        primal_value,
        dual_value: res.dual,
        gap: res.dual - primal_value,
        primal_matrix,
        primal_scalars,
        equality_multipliers,
        inequality_multipliers,
        residuals,
        iterations: res.iterations,
    })
}

/// Kernel basis of `a` when it is semidefinite. `scale` is the magnitude of
/// the unrestricted matrix, so round-off left after an earlier reduction is
/// not mistaken for a constraint.
fn semidefinite_kernel(a: &RMatrix, scale: f64) -> Option<RMatrix> {
    let tol = PRESOLVE_TOL * scale;
    if a.amax() <= tol {
        return None;
    }
    let eig = sym_eigen(a);
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if min < -tol && max > tol {
        return None;
    }
    let cols: Vec<usize> = (0..a.nrows()).filter(|&i| eig.eigenvalues[i].abs() <= tol).collect();
    if cols.is_empty() || cols.len() == a.nrows() {
        return None;
    }
    Some(eig.eigenvectors.select_columns(&cols))
}

fn sym_eigen(a: &RMatrix) -> nalgebra::SymmetricEigen<f64, nalgebra::Dyn> {
    ((a + a.transpose()) * 0.5).symmetric_eigen()
}

/// Orthonormal basis of the face cut out by equalities `⟨A, X⟩ = 0` with
/// semidefinite `A` and no scalar part, or `None` when no such face exists.
fn facial_reduction(n: usize, eqs: &[(RMatrix, Vec<f64>, f64, Origin)]) -> Option<RMatrix> {
    let mut v = RMatrix::identity(n, n);
    let mut reduced = false;
    loop {
        let mut changed = false;
        for (a, scal, target, _) in eqs {
            if *target != 0.0 || scal.iter().any(|&s| s != 0.0) {
                continue;
            }
            let ra = v.transpose() * a * &v;
            if let Some(k) = semidefinite_kernel(&ra, a.amax()) {
                v = &v * k;
                changed = true;
                reduced = true;
            }
        }
        if !changed {
            break;
        }
    }
    reduced.then_some(v)
}

/// Orthonormalised equality system equivalent to the input rows.
struct CleanRows {
    a: Vec<RMatrix>,
    al: Vec<DVector<f64>>,
    b: Vec<f64>,
    /// `coef[k][r]`: weight of input row `r` in output row `k`.
    coef: Vec<Vec<f64>>,
}

/// Modified Gram–Schmidt over the constraint rows. Zero and dependent rows
/// are dropped after checking their targets; the survivors are replaced by an
/// orthonormal basis of the row space, which keeps nearly parallel rows from
/// inflating the multipliers.
fn clean_rows(rows: &[Row]) -> Result<CleanRows> {
    let mut out = CleanRows {
        a: Vec::new(),
        al: Vec::new(),
        b: Vec::new(),
        coef: Vec::new(),
    };
    for (r, row) in rows.iter().enumerate() {
        let al = DVector::from_vec(row.al.clone());
        let norm = (row.a.norm_squared() + al.norm_squared()).sqrt();
        if norm <= PRESOLVE_TOL * row.scale {
            if row.b.abs() > PRESOLVE_TOL * row.scale.max(1.0) {
                return Err(Error::Infeasible);
            }
            continue;
        }
        let s = 1.0 / norm;
        let (mut ra, mut ral, mut rb) = (&row.a * s, &al * s, row.b * s);
        let mut w = vec![0.0; rows.len()];
        w[r] = s;
        for _ in 0..2 {
            for k in 0..out.a.len() {
                let t = ra.dot(&out.a[k]) + ral.dot(&out.al[k]);
                ra -= &out.a[k] * t;
                ral -= &out.al[k] * t;
                rb -= out.b[k] * t;
                for (wi, ci) in w.iter_mut().zip(&out.coef[k]) {
                    *wi -= t * ci;
                }
            }
        }
        let rn = (ra.norm_squared() + ral.norm_squared()).sqrt();
        if rn <= PRESOLVE_TOL {
            if rb.abs() > INCONSISTENCY_TOL * (1.0 + (row.b * s).abs()) {
                return Err(Error::Infeasible);
            }
            continue;
        }
        out.a.push(ra / rn);
        out.al.push(ral / rn);
        out.b.push(rb / rn);
        out.coef.push(w.into_iter().map(|v| v / rn).collect());
    }
    Ok(out)
}
