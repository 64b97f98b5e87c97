//! Parameter scans over channel loss, with optional intensity optimisation.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::{ProtocolConfig, Variant};
use crate::security::{key_rate_with, ErrorRateMode, KeyRateResult};

pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;
pub const DEFAULT_SCAN_TOL: f64 = 1e-9;

/// Search interval for the key amplitude.
pub const ALPHA_MIN: f64 = 1e-2;
pub const ALPHA_MAX: f64 = 1.5;
/// Coarse log-spaced probes taken before the golden-section refinement.
pub const ALPHA_PROBES: usize = 17;
/// Width in `ln α` at which the golden-section search stops.
const GOLDEN_TOL: f64 = 1e-3;

pub const CSV_HEADER: [&str; 11] = [
    "loss_db", "eta", "alpha", "beta", "e_phase", "e_z", "p_det_z", "key_rate", "plob", "gap",
    "status",
];

/// A strictly increasing, non-empty list of values.
///
/// Deserialises from a JSON array or from an `a:b:step` / comma-separated
/// string.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("grid has non-finite values".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("grid must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad number '{t}' in grid '{s}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || !(b >= a) {
                    return Err(Error::InvalidConfig(format!(
                        "range '{s}' needs a ≤ b and step > 0"
                    )));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(Error::InvalidConfig(format!("range '{s}' is too long")));
                }
                // Multiply rather than accumulate so grid points are exact decimals where possible.
                Grid::new((0..count).map(|i| a + i as f64 * step).collect())
            }
            [_] => Grid::new(s.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(Error::InvalidConfig(format!("cannot parse grid '{s}'"))),
        }
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            Text(String),
        }
        let g = match Raw::deserialize(d)? {
            Raw::List(v) => Grid::new(v),
            Raw::Text(s) => s.parse(),
        };
        g.map_err(serde::de::Error::custom)
    }
}

/// How the key amplitude is chosen at each loss point.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum AlphaChoice {
    Fixed(f64),
    /// Best rate among the listed amplitudes.
    Grid(Vec<f64>),
    /// Golden-section search over `ln α ∈ [ln 0.01, ln 1.5]`.
    #[default]
    Auto,
}

impl FromStr for AlphaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let g: Grid = s.parse()?;
        Ok(match g.0.as_slice() {
            [v] => Self::Fixed(*v),
            _ => Self::Grid(g.0),
        })
    }
}

impl Serialize for AlphaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Fixed(v) => s.serialize_f64(*v),
            Self::Grid(v) => v.serialize(s),
            Self::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(v) => Ok(Self::Fixed(v)),
            Raw::Many(v) => Ok(Self::Grid(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    Equal,
    #[default]
    Half,
    /// Best of `β ∈ {α, α/2, α/4, α/8}`.
    Grid,
}

impl BetaMode {
    pub fn ratios(self) -> &'static [f64] {
        match self {
            BetaMode::Equal => &[1.0],
            BetaMode::Half => &[0.5],
            BetaMode::Grid => &[1.0, 0.5, 0.25, 0.125],
        }
    }
}

impl FromStr for BetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Self::Equal),
            "half" => Ok(Self::Half),
            "grid" => Ok(Self::Grid),
            other => Err(Error::InvalidConfig(format!("unknown beta mode '{other}'"))),
        }
    }
}

/// Loss axis of a scan; exactly one of the two grids must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<Grid>,
    #[serde(default = "default_attenuation")]
    pub attenuation_db_per_km: f64,
    #[serde(default)]
    pub alpha: AlphaChoice,
    #[serde(default)]
    pub beta_mode: BetaMode,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub e_z: f64,
    #[serde(default)]
    pub e_x: f64,
    /// Preparation probabilities; the variant's defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Recorded for reproducibility; the scan itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ez_mode: ErrorRateMode,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_DB_PER_KM
}

fn default_variant() -> Variant {
    Variant::ThreeState
}

fn default_tol() -> f64 {
    DEFAULT_SCAN_TOL
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            loss_db: None,
            distance_km: None,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            alpha: AlphaChoice::Auto,
            beta_mode: BetaMode::Half,
            variant: Variant::ThreeState,
            e_z: 0.0,
            e_x: 0.0,
            probs: None,
            tol: DEFAULT_SCAN_TOL,
            seed: 0,
            ez_mode: ErrorRateMode::WorstCase,
        }
    }
}

impl ScanSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match (&self.loss_db, &self.distance_km) {
            (Some(_), Some(_)) => return bad("give either loss_db or distance_km, not both"),
            (None, None) => return bad("no loss or distance grid"),
            (Some(g), None) | (None, Some(g)) => {
                Grid::new(g.0.clone())?;
                if g.0[0] < 0.0 {
                    return bad("loss and distance must be non-negative");
                }
            }
        }
        if !(self.attenuation_db_per_km > 0.0 && self.attenuation_db_per_km.is_finite()) {
            return bad("attenuation must be positive");
        }
        match &self.alpha {
            AlphaChoice::Fixed(a) => check_alpha(*a)?,
            AlphaChoice::Grid(g) => {
                Grid::new(g.clone())?;
                g.iter().try_for_each(|a| check_alpha(*a))?;
            }
            AlphaChoice::Auto => {}
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return bad("tolerance must lie in (0, 0.01)");
        }
        // Full protocol validation on a representative point catches bad
        // probabilities and error rates before any solver work.
        self.config(0.1, 0.05, 0.5).validate()
    }

    /// Loss in dB of each grid point.
    pub fn losses(&self) -> Vec<f64> {
        match (&self.loss_db, &self.distance_km) {
            (Some(g), _) => g.0.clone(),
            (None, Some(g)) => g.0.iter().map(|l| l * self.attenuation_db_per_km).collect(),
            (None, None) => Vec::new(),
        }
    }

    pub fn config(&self, alpha: f64, beta: f64, eta: f64) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(alpha, beta, eta, self.variant).with_noise(self.e_z, self.e_x);
        if let Some(p) = &self.probs {
            c = c.with_probs(p.clone());
        }
        c
    }
}

fn check_alpha(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must be positive, got {a}")))
    }
}

pub fn loss_to_eta(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Repeaterless pure-loss capacity `−log₂(1−η)`.
pub fn plob(eta: f64) -> f64 {
    -(-eta).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub loss_db: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub e_phase: f64,
    pub e_z: f64,
    pub p_det_z: f64,
    pub key_rate: f64,
    pub plob: f64,
    pub gap: f64,
    /// `ok`, or the failure reason of the SDP at the reported amplitudes.
    pub status: String,
}

impl ScanRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// The row as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| format_sig(x).parse::<f64>().unwrap_or(x);
        Self {
            loss_db: r(self.loss_db),
            eta: r(self.eta),
            alpha: r(self.alpha),
            beta: r(self.beta),
            e_phase: r(self.e_phase),
            e_z: r(self.e_z),
            p_det_z: r(self.p_det_z),
            key_rate: r(self.key_rate),
            plob: r(self.plob),
            gap: r(self.gap),
            status: self.status.clone(),
        }
    }

    /// Field-wise equality that treats NaN as equal to NaN.
    pub fn same_as(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        eq(self.loss_db, other.loss_db)
            && eq(self.eta, other.eta)
            && eq(self.alpha, other.alpha)
            && eq(self.beta, other.beta)
            && eq(self.e_phase, other.e_phase)
            && eq(self.e_z, other.e_z)
            && eq(self.p_det_z, other.p_det_z)
            && eq(self.key_rate, other.key_rate)
            && eq(self.plob, other.plob)
            && eq(self.gap, other.gap)
            && self.status == other.status
    }
}

fn status_of(e: &Error) -> String {
    match e {
        Error::Solver(s) => s.to_string(),
        Error::Infeasible => "infeasible".into(),
        Error::NoConclusivePhaseStatistics(_) => "no-phase-statistics".into(),
        _ => "error".into(),
    }
}

type Eval = std::result::Result<KeyRateResult, String>;

fn evaluate(spec: &ScanSpec, alpha: f64, ratio: f64, eta: f64) -> Eval {
    key_rate_with(&spec.config(alpha, alpha * ratio, eta), spec.tol, spec.ez_mode)
        .map_err(|e| status_of(&e))
}

fn score(e: &Eval) -> f64 {
    match e {
        Ok(r) => r.raw_rate,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximises the unclamped rate over `ln α`; probes that fail count as −∞.
fn optimise_alpha(spec: &ScanSpec, ratio: f64, eta: f64) -> (f64, Eval) {
    let (lo, hi) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());
    let t_at = |i: usize| lo + (hi - lo) * i as f64 / (ALPHA_PROBES - 1) as f64;
    let probes: Vec<(f64, Eval)> = (0..ALPHA_PROBES)
        .map(|i| {
            let a = t_at(i).exp();
            (a, evaluate(spec, a, ratio, eta))
        })
        .collect();
    let best = (0..ALPHA_PROBES)
        .max_by(|&i, &j| score(&probes[i].1).total_cmp(&score(&probes[j].1)))
        .unwrap_or(0);
    if score(&probes[best].1) == f64::NEG_INFINITY {
        return probes[best].clone();
    }
    let mut result = probes[best].clone();
    let (mut a, mut b) = (t_at(best.saturating_sub(1)), t_at((best + 1).min(ALPHA_PROBES - 1)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval_at = |t: f64| {
        let e = evaluate(spec, t.exp(), ratio, eta);
        let s = score(&e);
        if s > score(&result.1) {
            result = (t.exp(), e);
        }
        s
    };
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (eval_at(c), eval_at(d));
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval_at(d);
        }
    }
    result
}

fn best_over_alphas(spec: &ScanSpec, alphas: &[f64], ratio: f64, eta: f64) -> (f64, Eval) {
    let mut best: Option<(f64, Eval)> = None;
    for &a in alphas {
        let e = evaluate(spec, a, ratio, eta);
        if best.as_ref().is_none_or(|(_, b)| score(&e) > score(b)) {
            best = Some((a, e));
        }
    }
    best.expect("alpha grid is non-empty")
}

/// Evaluates a single loss point.
pub fn scan_point(spec: &ScanSpec, loss_db: f64) -> ScanRow {
    let eta = loss_to_eta(loss_db);
    let mut chosen: Option<(f64, f64, Eval)> = None;
    for &ratio in spec.beta_mode.ratios() {
        let (alpha, e) = match &spec.alpha {
            AlphaChoice::Fixed(a) => (*a, evaluate(spec, *a, ratio, eta)),
            AlphaChoice::Grid(g) => best_over_alphas(spec, g, ratio, eta),
            AlphaChoice::Auto => optimise_alpha(spec, ratio, eta),
        };
        if chosen.as_ref().is_none_or(|(_, _, b)| score(&e) > score(b)) {
            chosen = Some((alpha, ratio, e));
        }
    }
    let (alpha, ratio, e) = chosen.expect("at least one beta ratio");
    let base = ScanRow {
        loss_db,
        eta,
        alpha,
        beta: alpha * ratio,
        e_phase: f64::NAN,
        e_z: f64::NAN,
        p_det_z: f64::NAN,
        key_rate: 0.0,
        plob: plob(eta),
        gap: f64::NAN,
        status: String::new(),
    };
    match e {
        Ok(r) => ScanRow {
            e_phase: r.e_phase_certified,
            e_z: r.e_z_worst,
            p_det_z: r.p_det_z_lower,
            key_rate: r.key_rate,
            gap: r.duality_gap,
            status: "ok".into(),
            ..base
        },
        Err(status) => ScanRow { status, ..base },
    }
}

/// One row per loss point, in grid order; points are solved in parallel.
pub fn scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    let losses = spec.losses();
    Ok(losses.par_iter().map(|&l| scan_point(spec, l)).collect())
}

/// Least-squares slope of `ln K` against `ln η` over rows with
/// `η ∈ [eta_min, eta_max]`.
pub fn fit_scaling(rows: &[ScanRow], eta_min: f64, eta_max: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eta >= eta_min && r.eta <= eta_max)
        .map(|r| (r.eta, r.key_rate))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientPoints(format!(
            "{} rows in window, need at least 5",
            pts.len()
        )));
    }
    if let Some((eta, k)) = pts.iter().find(|(_, k)| !(*k > 0.0)) {
        return Err(Error::InsufficientPoints(format!(
            "key rate {k} at eta = {eta} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints("all rows share one eta".into()));
    }
    Ok(sxy / sxx)
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{x:.*}", (11 - exp) as usize))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

pub fn write_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let nums = [
            r.loss_db, r.eta, r.alpha, r.beta, r.e_phase, r.e_z, r.p_det_z, r.key_rate, r.plob, r.gap,
        ];
        let mut rec: Vec<String> = nums.iter().map(|&x| format_sig(x)).collect();
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ScanRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad number '{}' in column {}", &rec[i], CSV_HEADER[i])))
        };
        rows.push(ScanRow {
            loss_db: f(0)?,
            eta: f(1)?,
            alpha: f(2)?,
            beta: f(3)?,
            e_phase: f(4)?,
            e_z: f(5)?,
            p_det_z: f(6)?,
            key_rate: f(7)?,
            plob: f(8)?,
            gap: f(9)?,
            status: rec[10].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_includes_endpoint() {
        let g: Grid = "10:30:2.5".parse().unwrap();
        assert_eq!(g.0.len(), 9);
        assert_eq!(*g.0.last().unwrap(), 30.0);
        let g: Grid = "0:0.3:0.1".parse().unwrap();
        assert_eq!(g.0.len(), 4);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!("3,2".parse::<Grid>().is_err());
        assert!("1:0:1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("".parse::<Grid>().is_err());
        assert!("x".parse::<Grid>().is_err());
    }

    #[test]
    fn plob_at_half_transmittance_is_one() {
        assert!((plob(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(1.234e-7), "1.234e-7");
        assert_eq!(format_sig(-2.5e15), "-2.5e15");
        assert_eq!(format_sig(f64::NAN), "nan");
        assert_eq!(format_sig(123456.789), "123456.789");
    }

    #[test]
    fn spec_json_defaults() {
        let s = ScanSpec::from_json(r#"{"loss_db": "0:10:5", "alpha": "auto"}"#).unwrap();
        assert_eq!(s.losses(), vec![0.0, 5.0, 10.0]);
        assert_eq!(s.beta_mode, BetaMode::Half);
        assert_eq!(s.alpha, AlphaChoice::Auto);
        let s = ScanSpec::from_json(r#"{"distance_km": [10, 50], "alpha": 0.3, "variant": "four"}"#).unwrap();
        assert_eq!(s.losses(), vec![2.0, 10.0]);
        assert_eq!(s.alpha, AlphaChoice::Fixed(0.3));
        assert!(ScanSpec::from_json(r#"{"loss_db": [1], "distance_km": [1]}"#).is_err());
        assert!(ScanSpec::from_json(r#"{"loss_db": [2, 1]}"#).is_err());
        assert!(ScanSpec::from_json(r#"{"distance_km": [1], "attenuation_db_per_km": 0}"#).is_err());
        assert!(ScanSpec::from_json(r#"{"loss_db": [1], "bogus": 1}"#).is_err());
    }
}
