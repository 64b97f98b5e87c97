//! Exhaustive checks of the combinatorial identities behind the lift
//! homomorphism, in any dimension `d ≥ 1`.

use super::combinatorics::{
    binomial, enumerate_cubes, enumerate_lines, enumerate_squares, multinomial_unchecked, Line,
    Square,
};

/// Vandermonde: `Σ_{k ∈ L(m)} ∏ᵢ C(lᵢ, kᵢ) = C(n, m)` with `n = |l|`.
pub fn lemma1(l: &Line, m: usize) -> (u128, u128) {
    let lhs = enumerate_lines(m, l.dim())
        .iter()
        .map(|k| l.parts.iter().zip(&k.parts).map(|(&li, &ki)| binomial(li, ki)).product::<u128>())
        .sum();
    (lhs, binomial(l.weight(), m))
}

/// `Σ_{m(k,l)} ∏ᵢ C(kᵢ; mᵢ·) = C(n; l)`.
pub fn lemma2(k: &Line, l: &Line) -> (u128, u128) {
    let lhs = enumerate_squares(k, l)
        .iter()
        .map(|m| {
            m.entries
                .iter()
                .map(|row| multinomial_unchecked(row.iter().copied()))
                .product::<u128>()
        })
        .sum();
    (lhs, multinomial_unchecked(l.parts.iter().copied()))
}

/// `Σ_{p(m̄,m̃)} ∏_ab √(C(m̄_ab; p_a·b) C(m̃_ab; p_·ba))`
/// against `√(∏_a C(l_a; m̃_a·) ∏_b C(l_b; m̄_·b))`.
///
/// `m̄` has row margins `k` and column margins `l`; `m̃` has row margins `l`.
pub fn lemma3(m_bar: &Square, m_tilde: &Square) -> (f64, f64) {
    let d = m_bar.dim();
    let l = m_bar.col_sums();
    let mut lhs = 0.0;
    for p in enumerate_cubes(m_bar, m_tilde, None) {
        let mut prod: u128 = 1;
        for a in 0..d {
            for b in 0..d {
                prod *= multinomial_unchecked((0..d).map(|j| p.get(a, j, b)));
                prod *= multinomial_unchecked((0..d).map(|i| p.get(i, b, a)));
            }
        }
        lhs += (prod as f64).sqrt();
    }
    let mut rhs: u128 = 1;
    for a in 0..d {
        rhs *= multinomial_unchecked(m_tilde.row(a).iter().copied());
        rhs *= multinomial_unchecked(m_bar.col(a));
    }
    debug_assert!(m_tilde.row_sums() == l);
    (lhs, (rhs as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LemmaReport {
    pub cases: usize,
    pub failures: usize,
    /// Largest relative deviation seen in the radical identity.
    pub max_rel_err: f64,
}

impl LemmaReport {
    fn record_exact(&mut self, (lhs, rhs): (u128, u128)) {
        self.cases += 1;
        if lhs != rhs {
            self.failures += 1;
        }
    }

    fn record_float(&mut self, (lhs, rhs): (f64, f64), tol: f64) {
        self.cases += 1;
        let rel = (lhs - rhs).abs() / rhs.max(1.0);
        self.max_rel_err = self.max_rel_err.max(rel);
        if rel > tol {
            self.failures += 1;
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            cases: self.cases + other.cases,
            failures: self.failures + other.failures,
            max_rel_err: self.max_rel_err.max(other.max_rel_err),
        }
    }
}

/// Runs all three identities over every admissible configuration with total
/// weight up to `n_max` in dimension `d`. The radical identity is compared at
/// relative tolerance `tol`.
pub fn verify_lemmas(n_max: usize, d: usize, tol: f64) -> [LemmaReport; 3] {
    let mut reports = [LemmaReport::default(); 3];
    for n in 0..=n_max {
        let lines = enumerate_lines(n, d);
        for l in &lines {
            for m in 0..=n {
                reports[0].record_exact(lemma1(l, m));
            }
            for k in &lines {
                reports[1].record_exact(lemma2(k, l));
            }
        }
        for k in &lines {
            for l in &lines {
                let bars = enumerate_squares(k, l);
                for lt in &lines {
                    let tildes = enumerate_squares(l, lt);
                    for mb in &bars {
                        for mt in &tildes {
                            reports[2].record_float(lemma3(mb, mt), tol);
                        }
                    }
                }
            }
        }
    }
    reports
}
