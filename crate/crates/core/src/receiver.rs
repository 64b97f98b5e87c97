//! Closed-form propagation of the prepared coherent states through the
//! channel and Bob's passive receiver, threshold click statistics, and the
//! classification of click patterns into basis and outcome values.
//!
//! Detector modes are numbered `d_{3t+s}` for time bin `t ∈ {0,1,2}` and
//! spatial line `s` (0: direct line a₀, 1: monitoring port b₀, 2: monitoring
//! port b₁), matching [`crate::fock::detector_mode`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{detector_mode, RECEIVER_MODES};

/// Number of click patterns over the nine detector modes.
pub const PATTERNS: usize = 1 << RECEIVER_MODES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Two key states and the test state `|β⟩|β⟩`.
    #[serde(rename = "three")]
    ThreeState,
    /// Adds an all-vacuum test state.
    #[serde(rename = "four")]
    FourStateVacuum,
}

impl Variant {
    pub fn num_states(self) -> usize {
        match self {
            Variant::ThreeState => 3,
            Variant::FourStateVacuum => 4,
        }
    }

    /// `p₀ = p₁ = 0.495` with the remaining 1% on the test state(s).
    pub fn default_probs(self) -> Vec<f64> {
        match self {
            Variant::ThreeState => vec![0.495, 0.495, 0.01],
            Variant::FourStateVacuum => vec![0.495, 0.495, 0.005, 0.005],
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three" | "three-state" => Ok(Variant::ThreeState),
            "four" | "four-state" | "four-state-vacuum" => Ok(Variant::FourStateVacuum),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Key-pulse amplitude.
    pub alpha: f64,
    /// Test-pulse amplitude, `0 ≤ β ≤ α`.
    pub beta: f64,
    /// Preparation probabilities, one per prepared state.
    pub probs: Vec<f64>,
    /// Channel transmittance.
    pub eta: f64,
    /// Target Z-basis error rate.
    pub e_z: f64,
    /// Target X-basis error rate.
    pub e_x: f64,
    pub variant: Variant,
}

impl ProtocolConfig {
    /// Loss-only channel with the default preparation probabilities.
    pub fn new(alpha: f64, beta: f64, eta: f64, variant: Variant) -> Self {
        Self {
            alpha,
            beta,
            probs: variant.default_probs(),
            eta,
            e_z: 0.0,
            e_x: 0.0,
            variant,
        }
    }

    pub fn with_noise(mut self, e_z: f64, e_x: f64) -> Self {
        self.e_z = e_z;
        self.e_x = e_x;
        self
    }

    pub fn with_probs(mut self, probs: Vec<f64>) -> Self {
        self.probs = probs;
        self
    }

    pub fn num_states(&self) -> usize {
        self.variant.num_states()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta <= self.alpha) {
            return bad(format!("beta must lie in [0, alpha], got {}", self.beta));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        for (name, e) in [("e_z", self.e_z), ("e_x", self.e_x)] {
            if !(0.0..0.5).contains(&e) {
                return bad(format!("{name} must lie in [0, 0.5), got {e}"));
            }
        }
        if self.probs.len() != self.num_states() {
            return bad(format!(
                "{} preparation probabilities given for a {}-state protocol",
                self.probs.len(),
                self.num_states()
            ));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return bad("preparation probabilities must be non-negative".into());
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("preparation probabilities sum to {total}"));
        }
        Ok(())
    }

    /// Source amplitudes of state `i` in time bins c₀ and c₁ (c₂ is always vacuum).
    pub fn pulse_amplitudes(&self, index: usize) -> Result<[f64; 2]> {
        match index {
            0 => Ok([self.alpha, 0.0]),
            1 => Ok([0.0, self.alpha]),
            2 => Ok([self.beta, self.beta]),
            3 if self.variant == Variant::FourStateVacuum => Ok([0.0, 0.0]),
            _ => Err(Error::InvalidStateIndex {
                index,
                states: self.num_states(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        self as usize
    }

    fn modes(self) -> &'static [usize] {
        match self {
            Basis::Z => &Z_MODES,
            Basis::X => &X_MODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Zero,
    One,
    NoClick,
    Inconclusive,
    Double,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Zero,
        Outcome::One,
        Outcome::NoClick,
        Outcome::Inconclusive,
        Outcome::Double,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

const Z_MODES: [usize; 3] = [0, 3, 6];
const X_MODES: [usize; 6] = [1, 2, 4, 5, 7, 8];

/// Outcome announced when detector `mode` is the only relevant click.
pub fn single_click_outcome(mode: usize) -> (Basis, Outcome) {
    match mode {
        0 => (Basis::Z, Outcome::Zero),
        3 => (Basis::Z, Outcome::One),
        6 => (Basis::Z, Outcome::Inconclusive),
        4 => (Basis::X, Outcome::Zero),
        5 => (Basis::X, Outcome::One),
        1 | 2 | 7 | 8 => (Basis::X, Outcome::Inconclusive),
        _ => panic!("detector mode {mode} out of range"),
    }
}

/// Field amplitudes at the nine detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub amps: [Complex64; RECEIVER_MODES],
}

impl ModeAmplitudes {
    pub fn intensities(&self) -> [f64; RECEIVER_MODES] {
        self.amps.map(|a| a.norm_sqr())
    }

    pub fn total_intensity(&self) -> f64 {
        self.intensities().iter().sum()
    }
}

/// Detector amplitudes for prepared state `index` after the lossy channel.
///
/// With channel amplitudes `mₜ = √η μₜ` (and `m₂ = 0`), the direct line gets
/// `mₜ/√2` and the monitoring ports get `(m_{t-1} ± mₜ)/(2√2)`, the b₀ line
/// being delayed by one bin with wrap-around.
pub fn propagate(index: usize, config: &ProtocolConfig) -> Result<ModeAmplitudes> {
    let [mu0, mu1] = config.pulse_amplitudes(index)?;
    let scale = config.eta.sqrt();
    let m = [mu0 * scale, mu1 * scale, 0.0];
    let s2 = std::f64::consts::SQRT_2;
    let mut amps = [Complex64::new(0.0, 0.0); RECEIVER_MODES];
    for t in 0..3 {
        let prev = m[(t + 2) % 3];
        amps[detector_mode(0, t)] = Complex64::new(m[t] / s2, 0.0);
        amps[detector_mode(1, t)] = Complex64::new((prev + m[t]) / (2.0 * s2), 0.0);
        amps[detector_mode(2, t)] = Complex64::new((prev - m[t]) / (2.0 * s2), 0.0);
    }
    Ok(ModeAmplitudes { amps })
}

/// Product-form click distribution: each detector clicks independently with
/// probability `1 - exp(-|amp|²)`. Index bit `j` is set when detector `j` clicks.
pub fn click_pattern_distribution(m: &ModeAmplitudes) -> Vec<f64> {
    let mut dist = Vec::with_capacity(PATTERNS);
    dist.push(1.0);
    for intensity in m.intensities() {
        let no_click = (-intensity).exp();
        let click = -(-intensity).exp_m1();
        let len = dist.len();
        for p in 0..len {
            let base = dist[p];
            dist[p] = base * no_click;
            dist.push(base * click);
        }
    }
    dist
}

/// Weighted basis/outcome assignment of a click pattern.
///
/// No click assigns the basis at random; clicks in both bases keep one basis
/// at random and ignore the other's detectors; two or more clicks within the
/// kept basis give a double click.
pub fn classify(pattern: usize) -> Vec<(Basis, Outcome, f64)> {
    let clicks = |basis: Basis| -> Vec<usize> {
        basis
            .modes()
            .iter()
            .copied()
            .filter(|&j| pattern & (1 << j) != 0)
            .collect()
    };
    let z = clicks(Basis::Z);
    let x = clicks(Basis::X);
    let resolve = |basis: Basis, modes: &[usize], weight: f64| match modes {
        [single] => {
            let (b, o) = single_click_outcome(*single);
            (b, o, weight)
        }
        _ => (basis, Outcome::Double, weight),
    };
    match (z.is_empty(), x.is_empty()) {
        (true, true) => vec![
            (Basis::Z, Outcome::NoClick, 0.5),
            (Basis::X, Outcome::NoClick, 0.5),
        ],
        (false, true) => vec![resolve(Basis::Z, &z, 1.0)],
        (true, false) => vec![resolve(Basis::X, &x, 1.0)],
        (false, false) => vec![resolve(Basis::Z, &z, 0.5), resolve(Basis::X, &x, 0.5)],
    }
}

fn mix_pair(amps: &mut [Complex64; RECEIVER_MODES], a: usize, b: usize, e: f64) {
    let (ia, ib) = (amps[a].norm_sqr(), amps[b].norm_sqr());
    let phase = |z: Complex64, fallback: Complex64| {
        if z.norm() > 0.0 {
            z / z.norm()
        } else if fallback.norm() > 0.0 {
            fallback / fallback.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    };
    let (pa, pb) = (phase(amps[a], amps[b]), phase(amps[b], amps[a]));
    amps[a] = pa * ((1.0 - e) * ia + e * ib).sqrt();
    amps[b] = pb * ((1.0 - e) * ib + e * ia).sqrt();
}

/// Symmetric intensity mixing between the two Z key bins (rate `e_z`) and
/// the two conclusive X ports (rate `e_x`). Total intensity is unchanged.
pub fn apply_noise(m: &ModeAmplitudes, config: &ProtocolConfig) -> ModeAmplitudes {
    let mut amps = m.amps;
    if config.e_z > 0.0 {
        mix_pair(&mut amps, detector_mode(0, 0), detector_mode(0, 1), config.e_z);
    }
    if config.e_x > 0.0 {
        mix_pair(&mut amps, detector_mode(1, 1), detector_mode(2, 1), config.e_x);
    }
    ModeAmplitudes { amps }
}

/// Classified outcome probabilities for one prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateStats {
    /// `classified[basis][outcome]`, joint over basis and outcome.
    pub classified: [[f64; 5]; 2],
    /// Probability that no detector clicks.
    pub no_click: f64,
}

impl StateStats {
    pub fn prob(&self, basis: Basis, outcome: Outcome) -> f64 {
        self.classified[basis.index()][outcome.index()]
    }

    /// Mass of double clicks assigned to `basis`.
    pub fn double_click(&self, basis: Basis) -> f64 {
        self.prob(basis, Outcome::Double)
    }

    /// Mass of single relevant clicks with the given outcome.
    pub fn single_click(&self, basis: Basis, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::NoClick | Outcome::Double => 0.0,
            _ => self.prob(basis, outcome),
        }
    }

    pub fn total(&self) -> f64 {
        self.classified.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTable {
    pub states: Vec<StateStats>,
}

impl StatTable {
    pub fn state(&self, index: usize) -> &StateStats {
        &self.states[index]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Conditional error rates among single conclusive clicks: Z from the
    /// two key states, X from the `|β⟩|β⟩` test state.
    pub fn observed_qber(&self, probs: &[f64]) -> (f64, f64) {
        let (s0, s1, s2) = (self.state(0), self.state(1), self.state(2));
        let z_err = probs[0] * s0.prob(Basis::Z, Outcome::One) + probs[1] * s1.prob(Basis::Z, Outcome::Zero);
        let z_all = probs[0] * (s0.prob(Basis::Z, Outcome::Zero) + s0.prob(Basis::Z, Outcome::One))
            + probs[1] * (s1.prob(Basis::Z, Outcome::Zero) + s1.prob(Basis::Z, Outcome::One));
        let x_err = s2.prob(Basis::X, Outcome::One);
        let x_all = s2.prob(Basis::X, Outcome::Zero) + x_err;
        (z_err / z_all, x_err / x_all)
    }
}

pub fn state_statistics(index: usize, config: &ProtocolConfig) -> Result<StateStats> {
    let amps = apply_noise(&propagate(index, config)?, config);
    let dist = click_pattern_distribution(&amps);
    let mut stats = StateStats {
        no_click: dist[0],
        ..Default::default()
    };
    for (pattern, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (basis, outcome, w) in classify(pattern) {
            stats.classified[basis.index()][outcome.index()] += p * w;
        }
    }
    Ok(stats)
}

/// Classified statistics of every prepared state.
pub fn expected_statistics(config: &ProtocolConfig) -> Result<StatTable> {
    config.validate()?;
    let states = (0..config.num_states())
        .map(|i| state_statistics(i, config))
        .collect::<Result<_>>()?;
    Ok(StatTable { states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, beta: f64, eta: f64) -> ProtocolConfig {
        ProtocolConfig::new(alpha, beta, eta, Variant::ThreeState)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.3, 0.15, 0.1).validate().is_ok());
        assert!(cfg(0.3, 0.4, 0.1).validate().is_err());
        assert!(cfg(0.3, 0.1, 0.0).validate().is_err());
        assert!(cfg(0.3, 0.1, 1.5).validate().is_err());
        assert!(cfg(0.3, 0.1, 0.5).with_noise(0.5, 0.0).validate().is_err());
        assert!(cfg(0.3, 0.1, 0.5).with_probs(vec![0.5, 0.5]).validate().is_err());
        assert!(cfg(0.3, 0.1, 0.5).with_probs(vec![0.5, 0.4, 0.2]).validate().is_err());
        assert!(cfg(0.3, 0.1, 0.5).pulse_amplitudes(3).is_err());
        let four = ProtocolConfig::new(0.3, 0.3, 0.5, Variant::FourStateVacuum);
        assert!(four.validate().is_ok());
        assert_eq!(four.pulse_amplitudes(3).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn test_state_is_dark_at_destructive_port() {
        let c = cfg(0.5, 0.3, 0.4);
        let m = propagate(2, &c).unwrap().intensities();
        assert!((m[4] - 0.4 * 0.09 / 2.0).abs() < 1e-15);
        assert_eq!(m[5], 0.0);
    }

    #[test]
    fn key_state_intensities() {
        let c = cfg(0.5, 0.3, 0.4);
        let m = propagate(0, &c).unwrap().intensities();
        assert!((m[0] - 0.4 * 0.25 / 2.0).abs() < 1e-15);
        assert!((m[4] - 0.4 * 0.25 / 8.0).abs() < 1e-15);
        assert!((m[5] - 0.4 * 0.25 / 8.0).abs() < 1e-15);
        for i in 0..3 {
            let total = propagate(i, &c).unwrap().total_intensity();
            let [a, b] = c.pulse_amplitudes(i).unwrap();
            assert!((total - 0.4 * (a * a + b * b)).abs() < 1e-15);
        }
    }

    #[test]
    fn click_distribution_examples() {
        let dark = ModeAmplitudes {
            amps: [Complex64::new(0.0, 0.0); 9],
        };
        let d = click_pattern_distribution(&dark);
        assert_eq!(d[0], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
        let mut half = dark;
        half.amps[3] = Complex64::new(2f64.ln().sqrt(), 0.0);
        let d = click_pattern_distribution(&half);
        assert!((d[1 << 3] - 0.5).abs() < 1e-15);
        assert!((d[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify(0),
            vec![(Basis::Z, Outcome::NoClick, 0.5), (Basis::X, Outcome::NoClick, 0.5)]
        );
        assert_eq!(classify(1), vec![(Basis::Z, Outcome::Zero, 1.0)]);
        assert_eq!(classify(1 | 1 << 3), vec![(Basis::Z, Outcome::Double, 1.0)]);
        assert_eq!(
            classify(1 | 1 << 4),
            vec![(Basis::Z, Outcome::Zero, 0.5), (Basis::X, Outcome::Zero, 0.5)]
        );
        assert_eq!(classify(1 << 5), vec![(Basis::X, Outcome::One, 1.0)]);
        assert_eq!(classify(1 << 7), vec![(Basis::X, Outcome::Inconclusive, 1.0)]);
        assert_eq!(classify(1 << 6), vec![(Basis::Z, Outcome::Inconclusive, 1.0)]);
        assert_eq!(classify(1 << 1 | 1 << 8), vec![(Basis::X, Outcome::Double, 1.0)]);
        for p in 0..PATTERNS {
            let w: f64 = classify(p).iter().map(|t| t.2).sum();
            assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn noise_is_identity_at_zero() {
        let c = cfg(0.5, 0.3, 0.4);
        for i in 0..3 {
            let m = propagate(i, &c).unwrap();
            assert_eq!(apply_noise(&m, &c), m);
        }
    }

    #[test]
    fn noise_sets_destructive_fraction() {
        let c = cfg(0.5, 0.3, 0.4).with_noise(0.02, 0.03);
        let m = apply_noise(&propagate(2, &c).unwrap(), &c);
        let i = m.intensities();
        assert!((i[5] / (i[4] + i[5]) - 0.03).abs() < 1e-15);
        let before = propagate(2, &c).unwrap().total_intensity();
        assert!((m.total_intensity() - before).abs() < 1e-15);
        // no interference for a key state: the monitoring ports stay balanced
        let k = apply_noise(&propagate(0, &c).unwrap(), &c).intensities();
        assert!((k[4] - k[5]).abs() < 1e-16);
        assert!((k[3] / (k[0] + k[3]) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn no_light_means_random_basis() {
        let s = expected_statistics(&cfg(1e-4, 1e-4, 1e-6)).unwrap();
        for st in &s.states {
            assert!((st.prob(Basis::Z, Outcome::NoClick) - 0.5).abs() < 1e-12);
            assert!((st.prob(Basis::X, Outcome::NoClick) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_normalised() {
        let c = ProtocolConfig::new(0.8, 0.4, 0.7, Variant::FourStateVacuum).with_noise(0.01, 0.02);
        let s = expected_statistics(&c).unwrap();
        for st in &s.states {
            assert!((st.total() - 1.0).abs() < 1e-10);
            assert!(st.classified.iter().flatten().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn loss_only_test_state_never_flips_in_x() {
        let s = expected_statistics(&cfg(0.6, 0.6, 0.5)).unwrap();
        assert_eq!(s.state(2).prob(Basis::X, Outcome::One), 0.0);
        assert!(s.state(2).prob(Basis::X, Outcome::Zero) > 0.0);
    }

    #[test]
    fn monitoring_line_conclusive_rate_is_half() {
        let s = expected_statistics(&cfg(0.01, 0.005, 0.5)).unwrap();
        for i in 0..2 {
            let st = s.state(i);
            let z = st.prob(Basis::Z, Outcome::Zero) + st.prob(Basis::Z, Outcome::One);
            let x = st.prob(Basis::X, Outcome::Zero) + st.prob(Basis::X, Outcome::One);
            assert!((x / z - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn visibility_is_one_without_x_noise() {
        let c = cfg(0.2, 0.1, 0.3).with_noise(0.02, 0.0);
        let (_, e_x) = expected_statistics(&c).unwrap().observed_qber(&c.probs);
        assert_eq!(1.0 - 2.0 * e_x, 1.0);
    }

    #[test]
    fn double_clicks_vanish_with_loss() {
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let eta = 10f64.powf(-1.0 - 0.1 * k as f64);
            let s = expected_statistics(&cfg(0.5, 0.25, eta)).unwrap();
            let st = s.state(0);
            let single: f64 = Basis::ALL
                .iter()
                .flat_map(|&b| {
                    [Outcome::Zero, Outcome::One, Outcome::Inconclusive]
                        .map(move |o| st.single_click(b, o))
                })
                .sum();
            let double = st.double_click(Basis::Z) + st.double_click(Basis::X);
            let ratio = double / single;
            assert!(ratio < last);
            last = ratio;
        }
    }
}
