use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cowqkd::scan::{self, AlphaChoice, BetaMode, Grid, ScanSpec};
use cowqkd::security::ErrorRateMode;
use cowqkd::{Error, Variant};

const EXIT_CONFIG: u8 = 1;
const EXIT_POINT_FAILED: u8 = 2;

/// Certified asymptotic key rate of coherent-one-way QKD versus channel loss.
///
/// Flags override the matching fields of the JSON config. Rows go to
/// `--out` (or stdout) as CSV in grid order.
#[derive(Debug, Parser)]
#[command(name = "cowqkd", version)]
struct Cli {
    /// JSON scan specification.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loss grid in dB: `a:b:step` or a comma-separated list.
    #[arg(long, value_name = "GRID", conflicts_with = "distance_km")]
    loss_db: Option<Grid>,
    /// Distance grid in km: `a:b:step` or a comma-separated list.
    #[arg(long, value_name = "GRID")]
    distance_km: Option<Grid>,
    /// Fibre attenuation in dB/km.
    #[arg(long, value_name = "DB_PER_KM")]
    attenuation: Option<f64>,
    /// Key amplitude, a list of candidates, or `auto`.
    #[arg(long, value_name = "V|auto")]
    alpha: Option<AlphaChoice>,
    #[arg(long, value_name = "equal|half|grid")]
    beta_mode: Option<BetaMode>,
    #[arg(long, value_name = "three|four")]
    variant: Option<Variant>,
    /// Sets both e_z and e_x.
    #[arg(long, value_name = "E")]
    qber: Option<f64>,
    #[arg(long, value_name = "T")]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// How the Z error rate is formed from interval statistics.
    #[arg(long, value_name = "worst-case|expected")]
    ez_mode: Option<ErrorRateMode>,
}

impl Cli {
    fn spec(&self) -> Result<ScanSpec, Error> {
        let mut spec = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)?
            }
            None => ScanSpec::default(),
        };
        if let Some(g) = &self.loss_db {
            spec.loss_db = Some(g.clone());
            spec.distance_km = None;
        }
        if let Some(g) = &self.distance_km {
            spec.distance_km = Some(g.clone());
            spec.loss_db = None;
        }
        if let Some(a) = self.attenuation {
            spec.attenuation_db_per_km = a;
        }
        if let Some(a) = &self.alpha {
            spec.alpha = a.clone();
        }
        if let Some(b) = self.beta_mode {
            spec.beta_mode = b;
        }
        if let Some(v) = self.variant {
            spec.variant = v;
        }
        if let Some(q) = self.qber {
            spec.e_z = q;
            spec.e_x = q;
        }
        if let Some(t) = self.tol {
            spec.tol = t;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(m) = self.ez_mode {
            spec.ez_mode = m;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let spec = match cli.spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let sink: Box<dyn Write> = match &cli.out {
        Some(p) => match File::create(p) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", p.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => Box::new(io::stdout().lock()),
    };
    let rows = match scan::scan(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = scan::write_csv(&rows, sink) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let failed: Vec<_> = rows.iter().filter(|r| !r.is_ok()).collect();
    for r in &failed {
        eprintln!("point at {} dB failed: {}", r.loss_db, r.status);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_POINT_FAILED)
    }
}
