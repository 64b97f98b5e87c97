//! Brute-force truncated Fock-space simulation of multimode linear optics.
//!
//! States are sparse maps from occupation vectors to amplitudes. Linear
//! optical elements act by substituting creation operators,
//! `a_r† -> Σ_c u[r][c] a_c†`, so a coherent input with amplitudes `γ`
//! leaves with amplitudes `uᵀ γ`. Every element preserves the total photon
//! number of each occupation, so truncation never mixes sectors.
//!
//! This module is deliberately independent of the closed-form receiver and
//! squashing code; tests use it as the reference for both.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, unitary_deviation, CMatrix, ONE};

/// Tolerance on unitarity for optical elements.
pub const UNITARY_TOL: f64 = 1e-12;

/// Default truncation for oracle comparisons.
pub const DEFAULT_N_MAX: u32 = 8;

/// Maximum tolerated norm deficit of a truncated coherent state.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-8;

/// Photon counts per mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector(pub Vec<u32>);

impl OccupationVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    n_max: u32,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
}

impl FockState {
    pub fn vacuum(modes: usize, n_max: u32) -> Self {
        Self::from_occupation(OccupationVector::vacuum(modes), n_max)
    }

    /// A single occupation with unit amplitude.
    pub fn from_occupation(occ: OccupationVector, n_max: u32) -> Self {
        let n_max = n_max.max(occ.total());
        let modes = occ.modes();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(occ, ONE);
        Self {
            modes,
            n_max,
            amplitudes,
        }
    }

    /// Build a state from explicit amplitudes. Occupations above `n_max`
    /// are rejected.
    pub fn from_amplitudes(
        modes: usize,
        n_max: u32,
        entries: impl IntoIterator<Item = (OccupationVector, Complex64)>,
    ) -> Result<Self> {
        let mut amplitudes = BTreeMap::new();
        for (occ, amp) in entries {
            if occ.modes() != modes {
                return Err(Error::DimensionMismatch {
                    expected: modes,
                    found: occ.modes(),
                });
            }
            if occ.total() > n_max {
                return Err(Error::InvalidConfig(format!(
                    "occupation with {} photons exceeds n_max = {n_max}",
                    occ.total()
                )));
            }
            *amplitudes.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Ok(Self {
            modes,
            n_max,
            amplitudes,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> Complex64 {
        self.amplitudes
            .get(occ)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// `1 - ‖ψ‖²`, the probability lost to truncation.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn ensure_truncation(&self, bound: f64) -> Result<()> {
        let deficit = self.norm_deficit();
        if deficit > bound {
            return Err(Error::TruncationTooSmall { deficit, bound });
        }
        Ok(())
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &FockState) -> Complex64 {
        self.amplitudes
            .iter()
            .filter_map(|(occ, a)| other.amplitudes.get(occ).map(|b| a.conj() * b))
            .sum()
    }

    /// Probability of each total photon number `0..=n_max`.
    pub fn photon_number_distribution(&self) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_max as usize + 1];
        for (occ, a) in &self.amplitudes {
            dist[occ.total() as usize] += a.norm_sqr();
        }
        dist
    }

    fn check_mode(&self, index: usize) -> Result<()> {
        if index >= self.modes {
            return Err(Error::ModeOutOfRange {
                index,
                modes: self.modes,
            });
        }
        Ok(())
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Truncated multimode coherent state `⊗ᵢ |γᵢ⟩`, keeping occupations with at
/// most `n_max` photons in total. No tail check is applied; see
/// [`coherent_state_checked`].
pub fn coherent_state(amplitudes: &[Complex64], n_max: u32) -> FockState {
    let modes = amplitudes.len();
    let prefactor = (-0.5 * amplitudes.iter().map(|g| g.norm_sqr()).sum::<f64>()).exp();
    let lit: Vec<usize> = (0..modes).filter(|&i| amplitudes[i].norm() > 0.0).collect();

    let mut entries = BTreeMap::new();
    let mut counts = vec![0u32; lit.len()];
    loop {
        let total: u32 = counts.iter().sum();
        if total <= n_max {
            let mut occ = vec![0u32; modes];
            let mut amp = c(prefactor);
            for (slot, &mode) in lit.iter().enumerate() {
                let n = counts[slot];
                occ[mode] = n;
                amp *= amplitudes[mode].powu(n) / factorial(n).sqrt();
            }
            entries.insert(OccupationVector(occ), amp);
        }
        // odometer over the lit modes
        let mut pos = 0;
        loop {
            if pos == lit.len() {
                return FockState {
                    modes,
                    n_max,
                    amplitudes: entries,
                };
            }
            counts[pos] += 1;
            if counts.iter().sum::<u32>() <= n_max {
                break;
            }
            counts[pos] = 0;
            pos += 1;
        }
    }
}

/// [`coherent_state`] followed by a norm-deficit check.
pub fn coherent_state_checked(
    amplitudes: &[Complex64],
    n_max: u32,
    tail_bound: f64,
) -> Result<FockState> {
    let state = coherent_state(amplitudes, n_max);
    state.ensure_truncation(tail_bound)?;
    Ok(state)
}

/// Expand `∏_r (Σ_c u[r][c] x_c)^{k_r}` into monomials over the output modes.
fn expand_product(k: &[u32], u: &CMatrix) -> Vec<(Vec<u32>, Complex64)> {
    let d = k.len();
    let mut poly: HashMap<Vec<u32>, Complex64> = HashMap::new();
    poly.insert(vec![0; d], ONE);
    for (r, &kr) in k.iter().enumerate() {
        for _ in 0..kr {
            let mut next: HashMap<Vec<u32>, Complex64> = HashMap::with_capacity(poly.len() * d);
            for (mono, coef) in &poly {
                for col in 0..d {
                    let w = u[(r, col)];
                    if w.norm() == 0.0 {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[col] += 1;
                    *next.entry(m).or_insert(Complex64::new(0.0, 0.0)) += coef * w;
                }
            }
            poly = next;
        }
    }
    let mut out: Vec<_> = poly.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Apply the linear-optical unitary `u` to the listed modes.
///
/// Input creation operators are substituted as
/// `a_{modes[r]}† -> Σ_c u[r][c] a_{modes[c]}†`.
pub fn apply_linear_optics(state: &FockState, modes: &[usize], u: &CMatrix) -> Result<FockState> {
    let d = modes.len();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.nrows(),
        });
    }
    for (i, &m) in modes.iter().enumerate() {
        state.check_mode(m)?;
        if modes[..i].contains(&m) {
            return Err(Error::SameMode(m));
        }
    }
    let deviation = unitary_deviation(u);
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }

    // cache of normalised expansions keyed by the sub-occupation
    let mut cache: HashMap<Vec<u32>, Vec<(Vec<u32>, Complex64)>> = HashMap::new();
    let mut out: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
    for (occ, amp) in &state.amplitudes {
        let k: Vec<u32> = modes.iter().map(|&m| occ.0[m]).collect();
        let terms = cache.entry(k.clone()).or_insert_with(|| {
            let norm_in: f64 = k.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
            expand_product(&k, u)
                .into_iter()
                .map(|(l, coef)| {
                    let norm_out: f64 = l.iter().map(|&n| factorial(n)).product::<f64>().sqrt();
                    (l, coef * (norm_out / norm_in))
                })
                .collect()
        });
        for (l, coef) in terms.iter() {
            let mut target = occ.0.clone();
            for (slot, &m) in modes.iter().enumerate() {
                target[m] = l[slot];
            }
            *out.entry(OccupationVector(target))
                .or_insert(Complex64::new(0.0, 0.0)) += amp * coef;
        }
    }
    out.retain(|_, a| a.norm() > 0.0);
    Ok(FockState {
        modes: state.modes,
        n_max: state.n_max,
        amplitudes: out,
    })
}

/// Two-mode element acting on modes `i` and `j` with the 2×2 unitary `u`.
pub fn apply_beamsplitter(state: &FockState, i: usize, j: usize, u: &CMatrix) -> Result<FockState> {
    if i == j {
        return Err(Error::SameMode(i));
    }
    apply_linear_optics(state, &[i, j], u)
}

/// Relabel modes: the photons of mode `i` move to mode `perm[i]`.
pub fn apply_mode_permutation(state: &FockState, perm: &[usize]) -> Result<FockState> {
    let d = state.modes;
    if perm.len() != d {
        return Err(Error::InvalidPermutation(d));
    }
    let mut seen = vec![false; d];
    for &p in perm {
        if p >= d || seen[p] {
            return Err(Error::InvalidPermutation(d));
        }
        seen[p] = true;
    }
    let amplitudes = state
        .amplitudes
        .iter()
        .map(|(occ, a)| {
            let mut next = vec![0; d];
            for (i, &n) in occ.0.iter().enumerate() {
                next[perm[i]] = n;
            }
            (OccupationVector(next), *a)
        })
        .collect();
    Ok(FockState {
        modes: d,
        n_max: state.n_max,
        amplitudes,
    })
}

/// The balanced beam splitter `H = [[1, 1], [1, -1]] / √2`.
pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
}

/// Number of detector modes of the receiver (3 spatial × 3 temporal).
pub const RECEIVER_MODES: usize = 9;

/// Mode index of spatial line `s` (0 = direct a₀, 1 = b₀, 2 = b₁) in time bin `t`.
pub const fn detector_mode(spatial: usize, time: usize) -> usize {
    3 * time + spatial
}

/// Bob's receiver: basis-choice splitter, first interferometer splitter,
/// delay of line b₀ by one time bin (wrapping c₂ back to c₀), and the
/// second interferometer splitter.
pub fn receiver_circuit(state: &FockState) -> Result<FockState> {
    if state.modes != RECEIVER_MODES {
        return Err(Error::DimensionMismatch {
            expected: RECEIVER_MODES,
            found: state.modes,
        });
    }
    let h = hadamard();
    let mut s = state.clone();
    for t in 0..3 {
        s = apply_beamsplitter(&s, detector_mode(0, t), detector_mode(1, t), &h)?;
    }
    for t in 0..3 {
        s = apply_beamsplitter(&s, detector_mode(1, t), detector_mode(2, t), &h)?;
    }
    let mut perm: Vec<usize> = (0..RECEIVER_MODES).collect();
    for t in 0..3 {
        perm[detector_mode(1, t)] = detector_mode(1, (t + 1) % 3);
    }
    s = apply_mode_permutation(&s, &perm)?;
    for t in 0..3 {
        s = apply_beamsplitter(&s, detector_mode(1, t), detector_mode(2, t), &h)?;
    }
    Ok(s)
}

/// Probability of every threshold-detector click pattern. Bit `j` of the
/// pattern index is set when mode `j` holds at least one photon.
pub fn threshold_click_distribution(state: &FockState) -> Vec<f64> {
    let mut dist = vec![0.0; 1usize << state.modes];
    for (occ, a) in &state.amplitudes {
        let pattern = occ
            .0
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .fold(0usize, |p, (j, _)| p | (1 << j));
        dist[pattern] += a.norm_sqr();
    }
    dist
}

/// Outcome statistics of the two virtual squashing situations for `n`
/// photons populating the input modes as `k` and the unitary `u`.
///
/// Situation 1 keeps one photon at random and sends it through `u`:
/// `Σᵢ (kᵢ/n)|u_ij|²`. Situation 2 sends all photons, resolves the photon
/// numbers `l` at the outputs and announces `j` with probability `l_j/n`.
pub fn situation_probs(k: &OccupationVector, u: &CMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = k.modes();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.nrows(),
        });
    }
    let n = k.total();
    if n == 0 {
        return Err(Error::NoPhotons);
    }
    let nf = f64::from(n);

    let situation1 = (0..d)
        .map(|j| {
            (0..d)
                .map(|i| f64::from(k.0[i]) / nf * u[(i, j)].norm_sqr())
                .sum()
        })
        .collect();

    let input = FockState::from_occupation(k.clone(), n);
    let modes: Vec<usize> = (0..d).collect();
    let output = apply_linear_optics(&input, &modes, u)?;
    let mut situation2 = vec![0.0; d];
    for (occ, a) in output.iter() {
        let p = a.norm_sqr();
        for (j, &l) in occ.0.iter().enumerate() {
            situation2[j] += p * f64::from(l) / nf;
        }
    }
    Ok((situation1, situation2))
}
