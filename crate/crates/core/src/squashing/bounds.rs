//! Two-sided bounds on the virtual single-photon statistics.

use serde::{Deserialize, Serialize};

use crate::receiver::{Basis, Outcome, StatTable};

/// Outcomes of the squashed qubit measurement in each basis.
pub const SQUASHED_OUTCOMES: [Outcome; 4] =
    [Outcome::Zero, Outcome::One, Outcome::NoClick, Outcome::Inconclusive];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lower - slack && x <= self.upper + slack
    }
}

/// `bounds[state][basis][outcome]` over the joint probability of announcing
/// that basis and outcome when the given state was prepared. Outcomes are
/// ordered as [`SQUASHED_OUTCOMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquashedBounds {
    pub bounds: Vec<[[Interval; 4]; 2]>,
}

impl SquashedBounds {
    pub fn get(&self, state: usize, basis: Basis, outcome: Outcome) -> Interval {
        let o = SQUASHED_OUTCOMES
            .iter()
            .position(|&x| x == outcome)
            .expect("double clicks have no squashed outcome");
        self.bounds[state][basis.index()][o]
    }

    pub fn num_states(&self) -> usize {
        self.bounds.len()
    }

    /// Sums of lower and upper bounds over both bases for one state.
    pub fn totals(&self, state: usize) -> (f64, f64) {
        self.bounds[state]
            .iter()
            .flatten()
            .fold((0.0, 0.0), |(lo, hi), iv| (lo + iv.lower, hi + iv.upper))
    }
}

/// Single-click mass as the lower bound; adds the double-click mass of the
/// basis for the upper bound. No-click is unambiguous and gets zero width.
pub fn squash_bounds(stats: &StatTable) -> SquashedBounds {
    let bounds = stats
        .states
        .iter()
        .map(|st| {
            Basis::ALL.map(|b| {
                let double = st.double_click(b);
                SQUASHED_OUTCOMES.map(|o| {
                    let lower = st.prob(b, o);
                    let upper = if o == Outcome::NoClick {
                        lower
                    } else {
                        (lower + double).min(1.0)
                    };
                    Interval { lower, upper }
                })
            })
        })
        .collect();
    SquashedBounds { bounds }
}
