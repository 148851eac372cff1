//! Flag-driven command-line front end.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures such as a missing crossing or an empty bisection bracket.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::analysis::{
    bb84_analysis, eaves_curve, run_pipeline_with, table2_row, threshold_efficiency_with,
    KeyRateReport, McParams, Setup, Summary, Table2Row,
};
use crate::bell::{resolve, BellInequality, CATALOG_NAMES};
use crate::error::Error;
use crate::highdim::{key_rate_min, HighDimParams, HolevoSearch};
use crate::montecarlo::{BoundaryCurve, SampleCloud};
use crate::optimize::OptimizerConfig;
use crate::quantum::EfficiencySetup;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "DIQKD_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// I_E and I_AB curves at one efficiency.
    Curves,
    /// Key rate and crossing at one efficiency.
    Keyrate,
    /// Threshold efficiency by bisection.
    Threshold,
    /// Critical QBER at one efficiency.
    Qber,
    /// CHSH with Eve's measurement fixed to ẑ.
    Bb84,
    /// Critical QBERs and both thresholds for one inequality.
    Table2,
    /// Key-rate minimum over local dimensions up to `--d-max`.
    Highdim,
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Curves => "curves",
            Mode::Keyrate => "keyrate",
            Mode::Threshold => "threshold",
            Mode::Qber => "qber",
            Mode::Bb84 => "bb84",
            Mode::Table2 => "table2",
            Mode::Highdim => "highdim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetupArg {
    Symmetric,
    Asymmetric,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Which sampling stages are restricted to `Λ1 = Λ2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Constrain {
    None,
    Mutual,
    Both,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "diqkd", version, about = "Monte Carlo key rates for device-independent QKD")]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Catalog name or path to a coefficient file.
    #[arg(long, default_value = "CHSH")]
    pub inequality: String,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub setup: SetupArg,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eta_a: Option<f64>,
    #[arg(long)]
    pub eta_b: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Restrict EAVES states to Λ1 = Λ2 as well (MUTUAL states always are).
    #[arg(long)]
    pub constrain_sym: bool,
    /// Sampling stages restricted to Λ1 = Λ2; overrides --constrain-sym.
    #[arg(long, value_enum)]
    pub constrain: Option<Constrain>,
    /// Threshold predicate margin in bits.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 3)]
    pub d_max: usize,
    /// Violation at which the high-dimensional minimum is taken
    /// (default: the d = 2 crossing).
    #[arg(long)]
    pub q: Option<f64>,
    /// States per high-dimensional cloud.
    #[arg(long, default_value_t = 400)]
    pub hd_samples: usize,
    /// Eve's weights are enumerated in steps of 1/N.
    #[arg(long, default_value_t = 8)]
    pub weight_grid: usize,
    /// Record wall-clock time in the summary (makes outputs non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyCloud
            | Error::NoOverlap(_)
            | Error::BisectionRange(_)
            | Error::DegenerateConditioning { .. }
            | Error::EmptyStateSet { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

impl RunConfig {
    /// Checks flag combinations and returns `(η_A, η_B)`.
    pub fn efficiency(&self) -> Result<EfficiencySetup, CliError> {
        let (a, b) = match self.setup {
            SetupArg::Symmetric => {
                let vals: Vec<f64> = [self.eta, self.eta_a, self.eta_b].into_iter().flatten().collect();
                if vals.windows(2).any(|w| w[0] != w[1]) {
                    return config("symmetric setup forbids distinct efficiencies");
                }
                let eta = vals.first().copied().unwrap_or(1.0);
                (eta, eta)
            }
            SetupArg::Asymmetric => {
                if self.eta_a.is_some_and(|a| a != 1.0) {
                    return config("asymmetric setup fixes eta_a = 1");
                }
                if self.eta.is_some() && self.eta_b.is_some() && self.eta != self.eta_b {
                    return config("--eta and --eta-b disagree");
                }
                (1.0, self.eta.or(self.eta_b).unwrap_or(1.0))
            }
            SetupArg::Custom => match (self.eta_a, self.eta_b) {
                (Some(a), Some(b)) => {
                    if self.eta.is_some() {
                        return config("custom setup takes --eta-a and --eta-b, not --eta");
                    }
                    (a, b)
                }
                _ => return config("custom setup requires both --eta-a and --eta-b"),
            },
        };
        EfficiencySetup::new(a, b).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<McParams, CliError> {
        let (constrain_eaves, constrain_mutual) = match self.constrain {
            Some(Constrain::None) => (false, false),
            Some(Constrain::Mutual) => (false, true),
            Some(Constrain::Both) => (true, true),
            None => (self.constrain_sym, true),
        };
        let params = McParams {
            samples: self.samples,
            seed: self.seed,
            bins: self.bins,
            optimizer: OptimizerConfig {
                restarts: self.restarts,
                ..OptimizerConfig::default()
            },
            constrain_eaves,
            constrain_mutual,
            margin: self.margin,
        };
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(params)
    }

    /// Full validation without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        self.efficiency()?;
        self.params()?;
        if self.mode == Mode::Threshold && self.setup == SetupArg::Custom {
            return config("threshold mode needs --setup symmetric or asymmetric");
        }
        if self.mode == Mode::Highdim {
            if !(2..=4).contains(&self.d_max) {
                return config(format!("--d-max {} not in 2..=4", self.d_max));
            }
            if self.hd_samples == 0 {
                return config("--hd-samples must be positive");
            }
            if self.weight_grid < 2 || self.weight_grid % 2 != 0 {
                return config("--weight-grid must be even and at least 2");
            }
        }
        if self.mode == Mode::Bb84 && !self.inequality.eq_ignore_ascii_case("CHSH") {
            return config("bb84 mode is defined for CHSH only");
        }
        threads()?;
        Ok(())
    }

    fn inequality(&self) -> Result<BellInequality, CliError> {
        resolve(&self.inequality).map_err(|e| match e {
            Error::UnknownInequality { .. } => CliError::Config(format!(
                "{e}; catalog: {}",
                CATALOG_NAMES.join(", ")
            )),
            other => CliError::Config(other.to_string()),
        })
    }
}

/// Worker count from `DIQKD_THREADS`, if set.
pub fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => config(format!("{THREADS_ENV}={v:?} is not a positive integer")),
        },
        Err(_) => Ok(None),
    }
}

/// Headline numbers and the summary written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn file(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        w.flush().map_err(io)?;
        self.files.push(path);
        Ok(())
    }

    fn cloud(&mut self, name: &str, cloud: &SampleCloud) -> Result<(), CliError> {
        self.file(name, |w| cloud.write_csv(w))
    }

    fn curve(&mut self, name: &str, curve: &BoundaryCurve) -> Result<(), CliError> {
        self.file(name, |w| curve.write_csv(w))
    }

    fn report(&mut self, report: &KeyRateReport) -> Result<(), CliError> {
        self.file("keyrate.csv", |w| report.write_csv(w))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "none".into())
}

fn summary_csv(s: &Summary) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "inequality,mode,eta_a,eta_b,samples,seed,crossing_q,crossing_i,eps_cr,eta_min,runtime_s\n{},{},{},{},{},{},{},{},{},{},{}\n",
        s.inequality,
        s.mode,
        s.eta_a,
        s.eta_b,
        s.samples,
        s.seed,
        cell(s.crossing_q),
        cell(s.crossing_i),
        cell(s.eps_cr),
        cell(s.eta_min),
        cell(s.runtime_s)
    )
}

fn table2_csv(row: &Table2Row) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "inequality,eps_cr_ideal,eps_cr_at_sym_min,eps_cr_at_asym_min,eta_min_sym,eta_min_asym\n{},{},{},{},{},{}\n",
        row.inequality,
        cell(row.eps_cr_ideal),
        cell(row.eps_cr_at_sym_min),
        cell(row.eps_cr_at_asym_min),
        row.eta_min_sym,
        row.eta_min_asym
    )
}

/// Runs one configuration, writing its files under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads()? {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?
    };
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let ineq = cfg.inequality()?;
    let params = cfg.params()?;
    let eff = cfg.efficiency()?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut out = Writer {
        dir: &cfg.out,
        files: Vec::new(),
    };
    let mut summary = Summary {
        inequality: ineq.name().to_string(),
        mode: cfg.mode.name().to_string(),
        eta_a: eff.eta_a,
        eta_b: eff.eta_b,
        samples: cfg.samples,
        seed: cfg.seed,
        crossing_q: None,
        crossing_i: None,
        eps_cr: None,
        eta_min: None,
        runtime_s: None,
    };
    let mut lines = Vec::new();
    let mut failure: Option<CliError> = None;
    let set_report = |summary: &mut Summary, r: &KeyRateReport| {
        summary.crossing_q = r.crossing_q();
        summary.crossing_i = r.crossing_i();
        summary.eps_cr = r.eps_cr;
    };
    let no_crossing = || CliError::Numerical("I_AB never crosses I_E; no positive-rate region".into());

    match cfg.mode {
        Mode::Curves | Mode::Keyrate | Mode::Qber => {
            let (eaves, ie) = eaves_curve(&ineq, &params)?;
            let run = run_pipeline_with(&ineq, &eff, &params, eaves, ie)?;
            out.cloud("eaves.csv", &run.eaves)?;
            out.cloud("mutual.csv", &run.mutual)?;
            out.curve("ie.csv", &run.ie)?;
            out.curve("iab.csv", &run.iab)?;
            if cfg.mode != Mode::Curves {
                out.report(&run.report)?;
            }
            set_report(&mut summary, &run.report);
            lines.push(format!(
                "crossing (q, i) = ({}, {})",
                fmt_opt(run.report.crossing_q()),
                fmt_opt(run.report.crossing_i())
            ));
            lines.push(format!("eps_cr = {}", fmt_opt(run.report.eps_cr)));
            if cfg.mode != Mode::Curves && run.report.crossing.is_none() {
                failure = Some(no_crossing());
            }
        }
        Mode::Threshold => {
            let setup = match cfg.setup {
                SetupArg::Symmetric => Setup::Symmetric,
                _ => Setup::Asymmetric,
            };
            let (eaves, ie) = eaves_curve(&ineq, &params)?;
            out.cloud("eaves.csv", &eaves)?;
            out.curve("ie.csv", &ie)?;
            let t = threshold_efficiency_with(&ineq, setup, &params, &ie)?;
            out.file("threshold.csv", |w| {
                writeln!(w, "eta,positive")?;
                for (eta, pos) in &t.evaluations {
                    writeln!(w, "{eta},{pos}")?;
                }
                Ok(())
            })?;
            let at = setup.efficiency(t.eta_min)?;
            summary.eta_a = at.eta_a;
            summary.eta_b = at.eta_b;
            summary.eta_min = Some(t.eta_min);
            if let Some((mutual, iab)) = &t.mutual_at_min {
                out.cloud("mutual.csv", mutual)?;
                out.curve("iab.csv", iab)?;
                if let Ok(r) = crate::analysis::key_rate(&ie, iab, &at) {
                    set_report(&mut summary, &r);
                }
            }
            lines.push(format!("eta_min = {:.4}", t.eta_min));
            lines.push(format!("eps_cr at eta_min = {}", fmt_opt(summary.eps_cr)));
        }
        Mode::Bb84 => {
            let run = bb84_analysis(&params)?;
            out.cloud("eaves.csv", &run.eaves)?;
            out.cloud("mutual.csv", &run.mutual)?;
            out.curve("ie.csv", &run.ie)?;
            out.curve("iab.csv", &run.iab)?;
            out.report(&run.report)?;
            out.file("rate_cloud.csv", |w| {
                writeln!(w, "qber,rate")?;
                for (e, r) in &run.rate_cloud {
                    writeln!(w, "{e},{r}")?;
                }
                Ok(())
            })?;
            set_report(&mut summary, &run.report);
            lines.push(format!(
                "crossing (q, i) = ({}, {})",
                fmt_opt(run.report.crossing_q()),
                fmt_opt(run.report.crossing_i())
            ));
            lines.push(format!("eps_cr = {}", fmt_opt(run.report.eps_cr)));
            if run.report.crossing.is_none() {
                failure = Some(no_crossing());
            }
        }
        Mode::Table2 => {
            let row = table2_row(&ineq, &params)?;
            let csv = table2_csv(&row);
            out.file("table2.csv", |w| Ok(w.write_all(csv.as_bytes())?))?;
            summary.eta_a = 1.0;
            summary.eta_b = 1.0;
            summary.eps_cr = row.eps_cr_ideal;
            lines.push(format!(
                "{}: eps_cr = {} / {} / {}, eta_min = {:.4} (sym) {:.4} (asym)",
                row.inequality,
                fmt_opt(row.eps_cr_ideal),
                fmt_opt(row.eps_cr_at_sym_min),
                fmt_opt(row.eps_cr_at_asym_min),
                row.eta_min_sym,
                row.eta_min_asym
            ));
        }
        Mode::Highdim => {
            let q = match cfg.q {
                Some(q) => q,
                None => {
                    let (eaves, ie) = eaves_curve(&ineq, &params)?;
                    let run = run_pipeline_with(&ineq, &eff, &params, eaves, ie)?;
                    run.report.crossing_q().ok_or_else(no_crossing)?
                }
            };
            let hd = HighDimParams {
                samples: cfg.hd_samples,
                seed: cfg.seed,
                search: HolevoSearch {
                    weight_denominator: cfg.weight_grid,
                    ..HolevoSearch::default()
                },
                ..HighDimParams::default()
            };
            let res = key_rate_min(&ineq, cfg.d_max, q, &eff, &params, &hd)?;
            out.file("highdim.csv", |w| res.write_csv(w))?;
            summary.crossing_q = Some(q);
            lines.push(format!(
                "key rate min at q = {q:.5}: {:.6} (d = {}, xi = {})",
                res.rate, res.arg_min.0, res.arg_min.1
            ));
        }
    }

    if cfg.timing {
        summary.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    match cfg.format {
        Format::Json => {
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            out.file("summary.json", |w| Ok(writeln!(w, "{json}")?))?;
        }
        Format::Csv => {
            let csv = summary_csv(&summary);
            out.file("summary.csv", |w| Ok(w.write_all(csv.as_bytes())?))?;
        }
    }
    if let Some(f) = failure {
        return Err(f);
    }
    Ok(Outcome {
        summary,
        lines,
        files: out.files,
    })
}

/// Parses `args`, runs, prints, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("diqkd: {e}");
            e.exit_code()
        }
    }
}
