//! Lines, squares and cubes: compositions and contingency arrays with fixed
//! margins, enumerated exhaustively.

use crate::error::{Error, Result};

/// `n! / ∏ parts!` when the parts sum to `n`, else 0.
pub fn multinomial(n: i64, parts: &[i64]) -> Result<u128> {
    if n < 0 {
        return Err(Error::NegativeInput(n));
    }
    if let Some(&p) = parts.iter().find(|&&p| p < 0) {
        return Err(Error::NegativeInput(p));
    }
    if parts.iter().sum::<i64>() != n {
        return Ok(0);
    }
    Ok(multinomial_unchecked(parts.iter().map(|&p| p as usize)))
}

/// Multinomial of non-negative parts with `n` taken as their sum. Built as a
/// product of binomials so intermediate values stay exact.
pub(crate) fn multinomial_unchecked(parts: impl IntoIterator<Item = usize>) -> u128 {
    let mut acc: u128 = 1;
    let mut total: u128 = 0;
    for p in parts {
        for i in 1..=p as u128 {
            total += 1;
            acc = acc * total / i;
        }
    }
    acc
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        0
    } else {
        multinomial_unchecked([k, n - k])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Line {
    pub parts: Vec<usize>,
}

impl Line {
    pub fn new(parts: Vec<usize>) -> Self {
        Self { parts }
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.parts.len()
    }

    pub fn factorial_product(&self) -> u128 {
        self.parts.iter().map(|&p| factorial(p)).product()
    }
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Number of lines of weight `n` in dimension `d`.
pub fn line_count(n: usize, d: usize) -> usize {
    if d == 0 {
        return usize::from(n == 0);
    }
    binomial(n + d - 1, d - 1) as usize
}

/// All lines of weight `n` in dimension `d`, largest first part first
/// (descending lexicographic order). This order indexes `f(A)`.
pub fn enumerate_lines(n: usize, d: usize) -> Vec<Line> {
    fn rec(n: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<Line>) {
        if d == 1 {
            prefix.push(n);
            out.push(Line::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=n).rev() {
            prefix.push(a);
            rec(n - a, d - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(line_count(n, d));
    if d == 0 {
        if n == 0 {
            out.push(Line::new(Vec::new()));
        }
        return out;
    }
    rec(n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Bounded compositions of `n` into `caps.len()` parts with `part[j] ≤ caps[j]`.
fn bounded_lines(n: usize, caps: &[usize]) -> Vec<Vec<usize>> {
    fn rec(n: usize, caps: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if caps.len() == 1 {
            if n <= caps[0] {
                prefix.push(n);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let rest: usize = caps[1..].iter().sum();
        let lo = n.saturating_sub(rest);
        for a in (lo..=n.min(caps[0])).rev() {
            prefix.push(a);
            rec(n - a, &caps[1..], prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if caps.is_empty() {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, caps, &mut Vec::new(), &mut out);
    out
}

/// `entries[i][j]`, rows summing to `k`, columns to `l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square {
    pub entries: Vec<Vec<usize>>,
}

impl Square {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self) -> usize {
        self.entries.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Line {
        Line::new(self.entries.iter().map(|r| r.iter().sum()).collect())
    }

    pub fn col_sums(&self) -> Line {
        let d = self.dim();
        Line::new((0..d).map(|j| self.entries.iter().map(|r| r[j]).sum()).collect())
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.entries[i]
    }

    pub fn col(&self, j: usize) -> Vec<usize> {
        self.entries.iter().map(|r| r[j]).collect()
    }
}

/// Contingency tables with row margins `k` and column margins `l`. Empty when
/// the margins are inconsistent.
pub fn enumerate_squares(k: &Line, l: &Line) -> Vec<Square> {
    let d = k.dim();
    if l.dim() != d || k.weight() != l.weight() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut rows = Vec::with_capacity(d);
    fill_rows(&k.parts, l.parts.clone(), &mut rows, &mut out);
    out
}

fn fill_rows(k: &[usize], remaining: Vec<usize>, rows: &mut Vec<Vec<usize>>, out: &mut Vec<Square>) {
    if rows.len() == k.len() {
        if remaining.iter().all(|&c| c == 0) {
            out.push(Square {
                entries: rows.clone(),
            });
        }
        return;
    }
    let i = rows.len();
    for row in bounded_lines(k[i], &remaining) {
        let next: Vec<usize> = remaining.iter().zip(&row).map(|(c, r)| c - r).collect();
        rows.push(row);
        fill_rows(k, next, rows, out);
        rows.pop();
    }
}

/// `entries[i][j][k] = p_ijk`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cube {
    pub entries: Vec<Vec<Vec<usize>>>,
}

impl Cube {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> usize {
        self.entries[i][j][k]
    }

    pub fn weight(&self) -> usize {
        self.entries.iter().flatten().flatten().sum()
    }

    /// `Σ_j p_ijk`, indexed `[i][k]`.
    pub fn sum_over_j(&self) -> Square {
        let d = self.dim();
        Square {
            entries: (0..d)
                .map(|i| (0..d).map(|k| (0..d).map(|j| self.get(i, j, k)).sum()).collect())
                .collect(),
        }
    }

    /// `Σ_i p_ijk`, indexed `[k][j]` (transposed).
    pub fn sum_over_i(&self) -> Square {
        let d = self.dim();
        Square {
            entries: (0..d)
                .map(|k| (0..d).map(|j| (0..d).map(|i| self.get(i, j, k)).sum()).collect())
                .collect(),
        }
    }

    /// `Σ_k p_ijk`, indexed `[i][j]`.
    pub fn sum_over_k(&self) -> Square {
        let d = self.dim();
        Square {
            entries: (0..d)
                .map(|i| (0..d).map(|j| self.entries[i][j].iter().sum()).collect())
                .collect(),
        }
    }
}

/// Cubes with `Σ_j p_ijk = m̄_ik` and `Σ_i p_ijk = m̃_kj`, optionally also
/// `Σ_k p_ijk = m_ij`. Each slice at fixed `k` is a square with row margins
/// taken from column `k` of `m̄` and column margins from row `k` of `m̃`.
pub fn enumerate_cubes(m_bar: &Square, m_tilde: &Square, m: Option<&Square>) -> Vec<Cube> {
    let d = m_bar.dim();
    if m_tilde.dim() != d || m.is_some_and(|s| s.dim() != d) {
        return Vec::new();
    }
    let slices: Vec<Vec<Square>> = (0..d)
        .map(|k| enumerate_squares(&Line::new(m_bar.col(k)), &Line::new(m_tilde.row(k).to_vec())))
        .collect();
    if slices.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let entries = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| slices[k][idx[k]].entries[i][j]).collect()).collect())
            .collect();
        let cube = Cube { entries };
        if m.is_none_or(|s| cube.sum_over_k() == *s) {
            out.push(cube);
        }
        let mut pos = 0;
        loop {
            if pos == d {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < slices[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
