//! Source replacement, Bob's squashed qutrit measurement and the
//! phase-error semidefinite program that yields the key-rate bound.
//!
//! Bob's qutrit is spanned by the qubit `{|0⟩, |1⟩}` and a no-click flag
//! `|2⟩`. Joint operators act on `A ⊗ B` with index `a·3 + b`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigenvalues, ket_bra, kron, real_diag, real_matrix, CMatrix};
use crate::receiver::{expected_statistics, Basis, Outcome, ProtocolConfig};
use crate::sdp::{self, LinearForm, SdpProblem, SolveOptions, SolveStatus};
use crate::squashing::{squash_bounds, Interval, SquashedBounds, SQUASHED_OUTCOMES};

pub const QUTRIT: usize = 3;

/// Below this upper bound on the conclusive monitoring rate the phase error
/// is not estimable.
pub const MIN_PHASE_DENOMINATOR: f64 = 1e-12;

/// Binary entropy in bits, with `h₂(0) = h₂(1) = 0`.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

pub fn visibility(e_x: f64) -> f64 {
    1.0 - 2.0 * e_x
}

/// `⟨γ|δ⟩` for single-mode coherent states.
pub fn coherent_overlap(gamma: Complex64, delta: Complex64) -> Complex64 {
    (-0.5 * gamma.norm_sqr() - 0.5 * delta.norm_sqr() + gamma.conj() * delta).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceState {
    pub rho_a: CMatrix,
}

impl SourceState {
    pub fn dim(&self) -> usize {
        self.rho_a.nrows()
    }
}

/// `ρ_A[i][j] = √(pᵢpⱼ) ⟨φⱼ|φᵢ⟩`, the overlap taken mode by mode over the
/// two lit time bins.
pub fn gram_matrix(config: &ProtocolConfig) -> Result<SourceState> {
    config.validate()?;
    let d = config.num_states();
    let amps: Vec<[f64; 2]> = (0..d).map(|i| config.pulse_amplitudes(i)).collect::<Result<_>>()?;
    let rho_a = CMatrix::from_fn(d, d, |i, j| {
        let overlap: Complex64 = (0..2)
            .map(|t| coherent_overlap(c(amps[j][t]), c(amps[i][t])))
            .product();
        overlap * (config.probs[i] * config.probs[j]).sqrt()
    });
    Ok(SourceState { rho_a })
}

/// Squashed measurement `ops[basis][outcome]`, outcomes ordered as
/// [`SQUASHED_OUTCOMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct BobOperators {
    pub ops: [[CMatrix; 4]; 2],
}

impl BobOperators {
    pub fn get(&self, basis: Basis, outcome: Outcome) -> &CMatrix {
        let o = SQUASHED_OUTCOMES
            .iter()
            .position(|&x| x == outcome)
            .expect("no operator for double clicks");
        &self.ops[basis.index()][o]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Basis, Outcome, &CMatrix)> {
        Basis::ALL.into_iter().flat_map(move |b| {
            SQUASHED_OUTCOMES
                .into_iter()
                .enumerate()
                .map(move |(k, o)| (b, o, &self.ops[b.index()][k]))
        })
    }
}

pub fn bob_operators() -> BobOperators {
    let e = 0.125;
    let z = [
        real_diag(&[0.5, 0.0, 0.0]),
        real_diag(&[0.0, 0.5, 0.0]),
        real_diag(&[0.0, 0.0, 0.5]),
        CMatrix::zeros(QUTRIT, QUTRIT),
    ];
    let x = [
        real_matrix(&[&[e, e, 0.0], &[e, e, 0.0], &[0.0, 0.0, 0.0]]),
        real_matrix(&[&[e, -e, 0.0], &[-e, e, 0.0], &[0.0, 0.0, 0.0]]),
        real_diag(&[0.0, 0.0, 0.5]),
        real_diag(&[0.25, 0.25, 0.0]),
    ];
    BobOperators { ops: [z, x] }
}

/// Detection and error operators on `A ⊗ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOperators {
    pub det_z: CMatrix,
    pub det_x: CMatrix,
    pub det_phase: CMatrix,
    pub e_z: CMatrix,
    pub e_x: CMatrix,
    pub e_phase: CMatrix,
}

pub fn joint_operators(d_a: usize) -> JointOperators {
    let bob = bob_operators();
    let (z0, z1) = (bob.get(Basis::Z, Outcome::Zero), bob.get(Basis::Z, Outcome::One));
    let (x0, x1) = (bob.get(Basis::X, Outcome::Zero), bob.get(Basis::X, Outcome::One));
    let p = |i: usize| ket_bra(d_a, i, i);
    let key = p(0) + p(1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = CMatrix::zeros(d_a, d_a);
    let mut minus = CMatrix::zeros(d_a, d_a);
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let sign = if i != j { -1.0 } else { 1.0 };
        plus[(i, j)] = c(h * h);
        minus[(i, j)] = c(sign * h * h);
    }
    JointOperators {
        det_z: kron(&key, &(z0 + z1)),
        det_x: kron(&p(2), &(x0 + x1)),
        det_phase: kron(&(&plus + &minus), &(x0 + x1)),
        e_z: kron(&p(0), z1) + kron(&p(1), z0),
        e_x: kron(&p(2), x1),
        e_phase: kron(&plus, x1) + kron(&minus, x0),
    }
}

/// `|i⟩⟨i| ⊗ Π^B_{basis,outcome}` with bounds `pᵢ·[q↓, q↑]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedOperator {
    pub state: usize,
    pub basis: Basis,
    pub outcome: Outcome,
    pub operator: CMatrix,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub rho_a: CMatrix,
    pub operators: Vec<BoundedOperator>,
    /// Hermitian basis of Alice's operators; `Tr_B` is fixed through
    /// `Tr(ρ_AB (E ⊗ 1)) = Tr(ρ_A E)` for each element.
    pub marginal_basis: Vec<CMatrix>,
    pub joint: JointOperators,
}

impl ConstraintSet {
    /// Largest violation of the marginal, interval and positivity
    /// constraints by a normalised joint state, in probability units.
    pub fn violation(&self, sigma: &CMatrix) -> f64 {
        let d_a = self.d_a();
        let mut worst: f64 = 0.0;
        for i in 0..d_a {
            for j in 0..d_a {
                let tr: Complex64 = (0..QUTRIT).map(|b| sigma[(i * QUTRIT + b, j * QUTRIT + b)]).sum();
                worst = worst.max((tr - self.rho_a[(i, j)]).norm());
            }
        }
        for op in &self.operators {
            let v = (&op.operator * sigma).trace().re;
            worst = worst.max(op.lower - v).max(v - op.upper);
        }
        worst.max(-hermitian_eigenvalues(sigma)[0])
    }

    pub fn d_a(&self) -> usize {
        self.rho_a.nrows()
    }

    pub fn joint_dim(&self) -> usize {
        self.d_a() * QUTRIT
    }

    /// Upper bound on `Tr(ρ Π_det,phase)` implied by the click bounds.
    pub fn phase_denominator_upper(&self) -> f64 {
        self.operators
            .iter()
            .filter(|o| o.state < 2 && o.basis == Basis::X && matches!(o.outcome, Outcome::Zero | Outcome::One))
            .map(|o| o.upper)
            .sum()
    }

    /// Lower bound on `Tr(ρ Π_det,Z)`.
    pub fn det_z_lower(&self) -> f64 {
        self.key_z_sum(|o| matches!(o.outcome, Outcome::Zero | Outcome::One), |o| o.lower)
    }

    /// Bounds on `Tr(ρ Π_e,Z)`.
    pub fn z_error_mass(&self) -> Interval {
        let err = |o: &BoundedOperator| {
            (o.state == 0 && o.outcome == Outcome::One) || (o.state == 1 && o.outcome == Outcome::Zero)
        };
        Interval {
            lower: self.key_z_sum(err, |o| o.lower),
            upper: self.key_z_sum(err, |o| o.upper),
        }
    }

    fn key_z_sum(&self, keep: impl Fn(&BoundedOperator) -> bool, val: impl Fn(&BoundedOperator) -> f64) -> f64 {
        self.operators
            .iter()
            .filter(|o| o.state < 2 && o.basis == Basis::Z && keep(o))
            .map(val)
            .sum()
    }
}

/// Diagonal units, symmetric and antisymmetric off-diagonal pairs.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(ket_bra(d, i, i));
    }
    for i in 0..d {
        for j in i + 1..d {
            out.push(ket_bra(d, i, j) + ket_bra(d, j, i));
            let mut a = CMatrix::zeros(d, d);
            a[(i, j)] = Complex64::new(0.0, -1.0);
            a[(j, i)] = Complex64::new(0.0, 1.0);
            out.push(a);
        }
    }
    out
}

pub fn assemble_constraints(
    bounds: &SquashedBounds,
    source: &SourceState,
    config: &ProtocolConfig,
) -> Result<ConstraintSet> {
    let d_a = source.dim();
    if bounds.num_states() != d_a {
        return Err(Error::DimensionMismatch {
            expected: d_a,
            found: bounds.num_states(),
        });
    }
    if config.probs.len() != d_a {
        return Err(Error::DimensionMismatch {
            expected: d_a,
            found: config.probs.len(),
        });
    }
    let bob = bob_operators();
    let mut operators = Vec::with_capacity(d_a * 8);
    for i in 0..d_a {
        let pi = config.probs[i];
        let proj = ket_bra(d_a, i, i);
        for (basis, outcome, op) in bob.iter() {
            let iv = bounds.get(i, basis, outcome);
            operators.push(BoundedOperator {
                state: i,
                basis,
                outcome,
                operator: kron(&proj, op),
                lower: pi * iv.lower,
                upper: pi * iv.upper,
            });
        }
    }
    Ok(ConstraintSet {
        rho_a: source.rho_a.clone(),
        operators,
        marginal_basis: hermitian_basis(d_a),
        joint: joint_operators(d_a),
    })
}

/// Congruence `σ = K σ̃ K†`, `s = s̃ / P̂` with `K = R ⊗ diag(1, 1, P̂^{-1/2})`,
/// where `P̂` bounds the phase denominator and `R R† = ρ_A` spans the support
/// of `ρ_A`. Alice's marginal of `σ̃` becomes a multiple of the identity, so
/// directions of `ρ_A` with tiny weight are resolved on the same scale as
/// the dominant one.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub k: CMatrix,
    pub scale: f64,
    /// Rank of `ρ_A` kept in the whitened frame.
    pub rank: usize,
}

/// Eigenvalues of `ρ_A` below this fraction of the largest are dropped.
pub const SUPPORT_CUTOFF: f64 = 1e-15;

impl Preconditioner {
    fn new(rho_a: &CMatrix, denominator: f64) -> Self {
        let bob = real_diag(&[1.0, 1.0, denominator.sqrt().recip()]);
        let h = (rho_a + rho_a.adjoint()) * c(0.5);
        // A real ρ_A is factored in real arithmetic: complex eigenvectors
        // carry arbitrary phases.
        let (values, vectors) = if h.iter().all(|z| z.im == 0.0) {
            let eig = h.map(|z| z.re).symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors.map(|v| c(v)))
        } else {
            let eig = h.symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        };
        let top = values.max();
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > SUPPORT_CUTOFF * top).collect();
        let r = CMatrix::from_fn(rho_a.nrows(), keep.len(), |i, k| vectors[(i, keep[k])] * values[keep[k]].sqrt());
        Self {
            k: kron(&r, &bob),
            scale: denominator,
            rank: keep.len(),
        }
    }

    /// `K† M K`, the operator seen by the new variable.
    fn pull(&self, m: &CMatrix) -> CMatrix {
        let out = self.k.adjoint() * m * &self.k;
        (&out + out.adjoint()) * c(0.5)
    }

    /// `K X K†`, back to the original variable.
    fn push(&self, x: &CMatrix) -> CMatrix {
        &self.k * x * self.k.adjoint()
    }
}

/// Relative widening of point-valued statistics. Floating-point data cannot
/// satisfy a set of nearly parallel equalities exactly, and enforcing them
/// would cut into the feasible set; the widened intervals only relax it.
/// Exact zeros stay exact so the solver can reduce to their face.
pub const STAT_SLACK: f64 = 1e-9;

/// The homogenised phase-error programme in preconditioned variables.
pub fn phase_error_problem(cs: &ConstraintSet) -> Result<(SdpProblem, Preconditioner)> {
    let denominator = cs.phase_denominator_upper();
    if !(denominator >= MIN_PHASE_DENOMINATOR) {
        return Err(Error::NoConclusivePhaseStatistics(denominator));
    }
    let pre = Preconditioner::new(&cs.rho_a, denominator);
    let inv = 1.0 / pre.scale;
    let real_data = cs.rho_a.iter().all(|z| z.im == 0.0);

    let mut p = SdpProblem::new(pre.rank * QUTRIT, 1, LinearForm::matrix(pre.pull(&cs.joint.e_phase)));
    p.add_equality(LinearForm::matrix(pre.pull(&cs.joint.det_phase)), 1.0);
    // Tr_B of the original variable equals s ρ_A: in the whitened frame the
    // Alice marginal, weighted by Bob's scaling, is s̃/P̂ times the identity.
    let bob_weight = real_diag(&[1.0, 1.0, inv]);
    for f in hermitian_basis(pre.rank) {
        // With real data the imaginary parts vanish on the real optimiser.
        if real_data && f.iter().any(|z| z.im != 0.0) {
            continue;
        }
        let target = f.trace().re;
        p.add_equality(LinearForm::new(kron(&f, &bob_weight), vec![-target * inv]), 0.0);
    }
    for op in &cs.operators {
        if op.operator.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            if op.lower > 0.0 {
                return Err(Error::Infeasible);
            }
            continue;
        }
        let m = pre.pull(&op.operator);
        if op.lower == 0.0 && op.upper == 0.0 {
            p.add_equality(LinearForm::matrix(m), 0.0);
        } else {
            let (lower, upper) = if op.lower == op.upper {
                (op.lower * (1.0 - STAT_SLACK), op.upper * (1.0 + STAT_SLACK))
            } else {
                (op.lower, op.upper)
            };
            p.add_inequality(LinearForm::new(m.clone(), vec![-lower * inv]), 0.0, f64::INFINITY);
            p.add_inequality(LinearForm::new(m, vec![-upper * inv]), f64::NEG_INFINITY, 0.0);
        }
    }
    Ok((p, pre))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseErrorBound {
    /// Dual objective, clamped to `[0, 1]`.
    pub e_phase: f64,
    pub primal: f64,
    pub gap: f64,
    /// See [`ConstraintSet::violation`].
    pub primal_residual: f64,
    pub iterations: usize,
    /// Optimal `σ` in the original variables.
    pub sigma: CMatrix,
    pub scale: f64,
}

pub fn max_phase_error(cs: &ConstraintSet, tol: f64) -> Result<PhaseErrorBound> {
    let (problem, pre) = phase_error_problem(cs)?;
    let sol = sdp::solve_with(
        &problem,
        SolveOptions {
            tol,
            ..Default::default()
        },
    )?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        other => return Err(Error::Solver(other)),
    }
    let sigma = pre.push(&sol.primal_matrix);
    let scale = sol.primal_scalars[0] / pre.scale;
    let primal_residual = if scale > 0.0 {
        cs.violation(&(&sigma * c(1.0 / scale)))
    } else {
        f64::INFINITY
    };
    Ok(PhaseErrorBound {
        e_phase: sol.dual_value.clamp(0.0, 1.0),
        primal: sol.primal_value,
        gap: sol.gap,
        primal_residual,
        iterations: sol.iterations,
        sigma,
        scale,
    })
}

/// How `e_Z` is formed from interval statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorRateMode {
    /// Upper error mass over lower detection mass.
    #[default]
    WorstCase,
    /// Lower error mass over lower detection mass.
    Expected,
}

impl std::str::FromStr for ErrorRateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-case" | "worst" => Ok(Self::WorstCase),
            "expected" => Ok(Self::Expected),
            other => Err(Error::InvalidConfig(format!("unknown e_z mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub e_phase_certified: f64,
    pub e_z_worst: f64,
    pub p_det_z_lower: f64,
    pub key_rate: f64,
    /// Unclamped rate, negative when no key is possible; useful for
    /// optimisation over intensities.
    pub raw_rate: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
}

/// `p (1 − h₂(e_z) − h₂(min(e_phase, ½)))`; the cap keeps the bound
/// monotone past a phase error of one half.
pub fn shor_preskill(p_det: f64, e_z: f64, e_phase: f64) -> f64 {
    p_det * (1.0 - h2(e_z) - h2(e_phase.min(0.5)))
}

pub fn key_rate(config: &ProtocolConfig, tol: f64) -> Result<KeyRateResult> {
    key_rate_with(config, tol, ErrorRateMode::WorstCase)
}

pub fn key_rate_with(config: &ProtocolConfig, tol: f64, mode: ErrorRateMode) -> Result<KeyRateResult> {
    let stats = expected_statistics(config)?;
    let bounds = squash_bounds(&stats);
    key_rate_from_bounds(&bounds, config, tol, mode)
}

pub fn key_rate_from_bounds(
    bounds: &SquashedBounds,
    config: &ProtocolConfig,
    tol: f64,
    mode: ErrorRateMode,
) -> Result<KeyRateResult> {
    let source = gram_matrix(config)?;
    let cs = assemble_constraints(bounds, &source, config)?;
    let phase = max_phase_error(&cs, tol)?;
    let p_det = cs.det_z_lower();
    let err = cs.z_error_mass();
    let e_z = if p_det > 0.0 {
        let mass = match mode {
            ErrorRateMode::WorstCase => err.upper,
            ErrorRateMode::Expected => err.lower,
        };
        (mass / p_det).clamp(0.0, 0.5)
    } else {
        0.5
    };
    let raw_rate = if p_det > 0.0 {
        shor_preskill(p_det, e_z, phase.e_phase)
    } else {
        0.0
    };
    Ok(KeyRateResult {
        e_phase_certified: phase.e_phase,
        e_z_worst: e_z,
        p_det_z_lower: p_det,
        key_rate: raw_rate.max(0.0),
        raw_rate,
        duality_gap: phase.gap,
        primal_residual: phase.primal_residual,
    })
}

/// Smallest eigenvalue of `ρ_A` and its trace.
pub fn source_spectrum_check(source: &SourceState) -> (f64, f64) {
    let ev = hermitian_eigenvalues(&source.rho_a);
    (ev[0], source.rho_a.trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, ZERO};
    use crate::receiver::Variant;
    use crate::squashing::Interval;

    fn cfg(alpha: f64, beta: f64, eta: f64) -> ProtocolConfig {
        ProtocolConfig::new(alpha, beta, eta, Variant::ThreeState)
    }

    #[test]
    fn entropy() {
        assert_eq!(h2(0.0), 0.0);
        assert_eq!(h2(0.5), 1.0);
        assert!((h2(0.11) - h2(0.89)).abs() < 1e-15);
        assert_eq!(visibility(0.01), 0.98);
    }

    #[test]
    fn gram_examples() {
        let c0 = cfg(0.5, 0.25, 0.1);
        let s = gram_matrix(&c0).unwrap();
        for i in 0..3 {
            assert!((s.rho_a[(i, i)].re - c0.probs[i]).abs() < 1e-15);
        }
        let o01 = s.rho_a[(0, 1)].re / (c0.probs[0] * c0.probs[1]).sqrt();
        assert!((o01 - (-0.25f64).exp()).abs() < 1e-15);
        let (a, b) = (0.5f64, 0.25f64);
        let expect = (-(a * a + b * b) / 2.0 + a * b).exp() * (-b * b / 2.0).exp();
        let o20 = s.rho_a[(2, 0)].re / (c0.probs[2] * c0.probs[0]).sqrt();
        assert!((o20 - expect).abs() < 1e-15);
        let (min, tr) = source_spectrum_check(&s);
        assert!(min > -1e-12 && (tr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bob_measurement_is_complete() {
        let bob = bob_operators();
        let mut total = CMatrix::zeros(3, 3);
        for (_, _, op) in bob.iter() {
            assert!(hermitian_eigenvalues(op)[0] >= -1e-15);
            total += op;
        }
        assert!(max_abs(&(total - CMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn phase_detection_lives_on_key_subspace() {
        let j = joint_operators(3);
        let bob = bob_operators();
        let key = ket_bra(3, 0, 0) + ket_bra(3, 1, 1);
        let x = bob.get(Basis::X, Outcome::Zero) + bob.get(Basis::X, Outcome::One);
        assert!(max_abs(&(&j.det_phase - kron(&key, &x))) < 1e-15);
        // error operators are dominated by detection operators
        assert!(hermitian_eigenvalues(&(&j.det_phase - &j.e_phase))[0] > -1e-15);
        assert!(hermitian_eigenvalues(&(&j.det_z - &j.e_z))[0] > -1e-15);
        assert!(hermitian_eigenvalues(&(&j.det_x - &j.e_x))[0] > -1e-15);
    }

    #[test]
    fn constraint_counts() {
        let c0 = cfg(0.3, 0.15, 0.1);
        let b = squash_bounds(&expected_statistics(&c0).unwrap());
        let cs = assemble_constraints(&b, &gram_matrix(&c0).unwrap(), &c0).unwrap();
        assert_eq!(cs.operators.len(), 24);
        assert_eq!(cs.marginal_basis.len(), 9);
        // the diagonal marginal elements sum to the identity: unit trace
        let id: CMatrix = cs.marginal_basis.iter().take(3).sum();
        assert_eq!(id, CMatrix::identity(3, 3));
        for o in &cs.operators {
            assert!(0.0 <= o.lower && o.lower <= o.upper && o.upper <= 1.0);
        }
        let four = ProtocolConfig::new(0.3, 0.3, 0.1, Variant::FourStateVacuum);
        let err = assemble_constraints(&b, &gram_matrix(&four).unwrap(), &four);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    fn vacuous_bounds(states: usize) -> SquashedBounds {
        SquashedBounds {
            bounds: vec![[[Interval { lower: 0.0, upper: 1.0 }; 4]; 2]; states],
        }
    }

    #[test]
    fn vacuous_bounds_allow_full_phase_error() {
        let c0 = cfg(0.3, 0.15, 0.1);
        let cs = assemble_constraints(&vacuous_bounds(3), &gram_matrix(&c0).unwrap(), &c0).unwrap();
        let r = max_phase_error(&cs, 1e-9).unwrap();
        assert!((r.e_phase - 1.0).abs() < 1e-7, "{}", r.e_phase);
    }

    #[test]
    fn no_phase_statistics() {
        let c0 = cfg(0.3, 0.15, 0.1);
        let mut b = vacuous_bounds(3);
        for st in 0..2 {
            for o in 0..2 {
                b.bounds[st][1][o] = Interval { lower: 0.0, upper: 0.0 };
            }
        }
        let cs = assemble_constraints(&b, &gram_matrix(&c0).unwrap(), &c0).unwrap();
        assert!(matches!(max_phase_error(&cs, 1e-8), Err(Error::NoConclusivePhaseStatistics(_))));
    }

    #[test]
    fn regression_point() {
        let r = key_rate(&cfg(0.2, 0.1, 0.1), 1e-9).unwrap();
        assert!(r.e_phase_certified < 0.5);
        assert!((r.e_phase_certified - 0.106_162_40).abs() < 1e-7, "{}", r.e_phase_certified);
        assert!(r.duality_gap.abs() < 1e-6);
        assert!(r.key_rate > 0.0);
        let small = key_rate(&cfg(0.05, 0.025, 0.1), 1e-9).unwrap();
        assert!(small.e_phase_certified < r.e_phase_certified);
    }

    #[test]
    fn large_phase_error_gives_zero_rate() {
        assert_eq!(shor_preskill(0.3, 0.0, 0.7).max(0.0), 0.0);
        assert_eq!(shor_preskill(0.3, 0.0, 0.0), 0.3);
        let r = key_rate(&cfg(0.5, 0.5, 0.01), 1e-8).unwrap();
        assert!(r.e_phase_certified >= 0.5 || r.key_rate >= 0.0);
        if r.e_phase_certified >= 0.5 {
            assert_eq!(r.key_rate, 0.0);
        }
    }

    #[test]
    fn complex_marginal_is_respected() {
        // a complex ρ_A goes through the embedded path
        let c0 = cfg(0.3, 0.15, 0.1);
        let mut src = gram_matrix(&c0).unwrap();
        let phase = Complex64::from_polar(1.0, 0.3);
        let mut v = CMatrix::identity(3, 3);
        v[(2, 2)] = phase;
        src.rho_a = &v * &src.rho_a * v.adjoint();
        let cs = assemble_constraints(&vacuous_bounds(3), &src, &c0).unwrap();
        let r = max_phase_error(&cs, 1e-9).unwrap();
        assert!((r.e_phase - 1.0).abs() < 1e-7);
        assert!(cs.rho_a.iter().any(|z| z.im != 0.0) && cs.rho_a[(0, 0)] != ZERO);
    }
}
