//! Universal squashing: combinatorics of lines, squares and cubes, the
//! symmetric lift `f(A)`, and interval bounds on squashed statistics.

pub mod bounds;
pub mod combinatorics;
pub mod identities;
pub mod lift;

pub use bounds::{squash_bounds, Interval, SquashedBounds, SQUASHED_OUTCOMES};
pub use combinatorics::{
    enumerate_cubes, enumerate_lines, enumerate_squares, line_count, multinomial, Cube, Line,
    Square,
};
pub use identities::{lemma1, lemma2, lemma3, verify_lemmas, LemmaReport};
pub use lift::{moment0, moment0_closed, moment1, moment1_closed, symmetric_lift};
