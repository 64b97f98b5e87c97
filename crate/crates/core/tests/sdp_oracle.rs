use cowqkd::linalg::{c, ginibre, hermitian_eigenvalues, real_diag, CMatrix};
use cowqkd::sdp::{solve, LinearForm, SdpProblem, SolveStatus};
use cowqkd::security::{assemble_constraints, gram_matrix, max_phase_error, ConstraintSet};
use cowqkd::{expected_statistics, squash_bounds, Error, ProtocolConfig, Variant};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(d: usize, seed: u64, real: bool) -> CMatrix {
    let g = ginibre(d, &mut ChaCha8Rng::seed_from_u64(seed));
    let g = if real { g.map(|z| c(z.re)) } else { g };
    (&g + g.adjoint()) * c(0.5)
}

fn trace_one(objective: CMatrix) -> SdpProblem {
    let d = objective.nrows();
    let mut p = SdpProblem::new(d, 0, LinearForm::matrix(objective));
    p.add_equality(LinearForm::matrix(CMatrix::identity(d, d)), 1.0);
    p
}

/// Greedy optimum of `max c·x` over `Σx = 1`, `0 ≤ x ≤ cap`.
fn fractional_knapsack(cost: &[f64], cap: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..cost.len()).collect();
    order.sort_by(|&a, &b| cost[b].total_cmp(&cost[a]));
    let (mut left, mut value) = (1.0, 0.0);
    for i in order {
        let take = cap[i].min(left);
        value += take * cost[i];
        left -= take;
    }
    value
}

fn constraints(config: &ProtocolConfig) -> ConstraintSet {
    let bounds = squash_bounds(&expected_statistics(config).unwrap());
    assemble_constraints(&bounds, &gram_matrix(config).unwrap(), config).unwrap()
}

fn ratio(cs: &ConstraintSet, sigma: &CMatrix) -> f64 {
    (&cs.joint.e_phase * sigma).trace().re / (&cs.joint.det_phase * sigma).trace().re
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn trace_one_programme_finds_top_eigenvalue(seed in any::<u64>(), d in 1usize..=6, real in any::<bool>()) {
        let h = random_hermitian(d, seed, real);
        let top = *hermitian_eigenvalues(&h).last().unwrap();
        let s = solve(&trace_one(h), 1e-10).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        prop_assert!((s.dual_value - top).abs() < 1e-8, "{} vs {}", s.dual_value, top);
        prop_assert!((s.primal_value - top).abs() < 1e-8);
    }

    #[test]
    fn diagonal_programme_matches_greedy_linear_programme(
        cost in prop::collection::vec(-2.0f64..2.0, 2..=5),
        raw_cap in prop::collection::vec(0.05f64..0.8, 5),
    ) {
        let d = cost.len();
        let mut cap = raw_cap[..d].to_vec();
        let total: f64 = cap.iter().sum();
        if total < 1.0 {
            cap.iter_mut().for_each(|v| *v *= 1.2 / total);
        }
        let mut p = trace_one(real_diag(&cost));
        for (i, &u) in cap.iter().enumerate() {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            p.add_inequality(LinearForm::matrix(real_diag(&e)), f64::NEG_INFINITY, u);
        }
        let s = solve(&p, 1e-10).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        let want = fractional_knapsack(&cost, &cap);
        prop_assert!((s.dual_value - want).abs() < 1e-8, "{} vs {}", s.dual_value, want);
    }

    /// `max Re Tr(CX)` with fixed diagonal `(a, 1−a)` on a qubit has the
    /// closed form `C₀₀a + C₁₁(1−a) + 2|C₀₁|√(a(1−a))`.
    #[test]
    fn qubit_with_fixed_diagonal(a in 0.01f64..0.99, c00 in -1.0f64..1.0, c11 in -1.0f64..1.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let off = Complex64::new(re, im);
        let cm = CMatrix::from_row_slice(2, 2, &[c(c00), off, off.conj(), c(c11)]);
        let mut p = SdpProblem::new(2, 0, LinearForm::matrix(cm));
        p.add_equality(LinearForm::matrix(real_diag(&[1.0, 0.0])), a);
        p.add_equality(LinearForm::matrix(real_diag(&[0.0, 1.0])), 1.0 - a);
        let s = solve(&p, 1e-10).unwrap();
        let want = c00 * a + c11 * (1.0 - a) + 2.0 * off.norm() * (a * (1.0 - a)).sqrt();
        prop_assert!((s.dual_value - want).abs() < 1e-8, "{} vs {}", s.dual_value, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The reported optimiser is feasible, attains the primal value, and the
    /// certified bound only grows when the statistics are loosened.
    #[test]
    fn phase_error_bound_is_consistent(alpha in 0.05f64..0.6, ratio_ab in 0.25f64..=1.0, eta in 0.01f64..=0.5, q in 0.0f64..0.03, four in any::<bool>()) {
        let variant = if four { Variant::FourStateVacuum } else { Variant::ThreeState };
        let config = ProtocolConfig::new(alpha, alpha * ratio_ab, eta, variant).with_noise(q, q);
        let cs = constraints(&config);
        let bound = max_phase_error(&cs, 1e-9).unwrap();
        prop_assert!(bound.gap.abs() < 1e-6);
        prop_assert!(bound.primal_residual < 1e-8, "residual {:e}", bound.primal_residual);
        let attained = ratio(&cs, &bound.sigma);
        prop_assert!((attained - bound.primal).abs() < 1e-6, "{} vs {}", attained, bound.primal);
        prop_assert!(attained <= bound.e_phase + 1e-6);

        let mut loose = cs.clone();
        for op in &mut loose.operators {
            op.lower *= 0.9;
            op.upper = (op.upper * 1.1).min(1.0);
        }
        let relaxed = max_phase_error(&loose, 1e-9).unwrap();
        prop_assert!(relaxed.e_phase >= bound.e_phase - 1e-7, "{} < {}", relaxed.e_phase, bound.e_phase);
    }
}

#[test]
fn inconsistent_traces_are_reported() {
    let mut p = trace_one(real_diag(&[1.0, 0.0]));
    p.add_equality(LinearForm::matrix(CMatrix::identity(2, 2)), 3.0);
    assert!(matches!(solve(&p, 1e-9), Err(Error::Infeasible)));
}

#[test]
fn statistics_far_from_the_source_are_infeasible() {
    let config = ProtocolConfig::new(0.3, 0.15, 0.2, Variant::ThreeState);
    let mut cs = constraints(&config);
    // claim the key states never produce a Z click
    for op in cs.operators.iter_mut().filter(|o| o.state < 2 && o.basis == cowqkd::Basis::Z) {
        if op.outcome == cowqkd::Outcome::NoClick {
            op.lower = config.probs[op.state];
            op.upper = config.probs[op.state];
        }
    }
    match max_phase_error(&cs, 1e-9) {
        Err(Error::Infeasible) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
}
