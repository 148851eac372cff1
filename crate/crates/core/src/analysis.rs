//! Key rates, critical QBERs and threshold efficiencies from the Monte Carlo
//! curves, plus the closed-form CHSH curves used as a reference.

use serde::Serialize;

use crate::bell::{catalog_get, BellInequality};
use crate::entropy::{binary_inverse, h, holevo_bb84, holevo_extrema};
use crate::error::{Error, Result};
use crate::montecarlo::{
    collect_eaves_cloud_with, collect_mutual_cloud, domain, draw_state, mutual_curve,
    stream_rng, upper_boundary, BoundaryCurve, CloudKind, CurveKind, SampleCloud,
    DEFAULT_BINS, DEFAULT_SAMPLES,
};
use crate::optimize::{max_violation, OptimizerConfig};
use crate::quantum::{qber, EfficiencySetup};

use rayon::prelude::*;

/// `(√2 − 1)/2`, the largest CHSH value in probability form.
pub const CHSH_QUANTUM_MAX: f64 = 0.207_106_781_186_547_5;

/// Lower end of the threshold bisection.
pub const ETA_FLOOR: f64 = 0.5;
/// Bracket width at which the threshold bisection stops.
pub const ETA_TOL: f64 = 1e-3;

/// Monte Carlo settings shared by the pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct McParams {
    pub samples: usize,
    pub seed: u64,
    pub bins: usize,
    pub optimizer: OptimizerConfig,
    /// Restrict EAVES states to `Λ1 = Λ2`.
    pub constrain_eaves: bool,
    /// Restrict MUTUAL states to `Λ1 = Λ2`.
    pub constrain_mutual: bool,
    /// Threshold predicate requires `I_AB > I_E + margin`.
    pub margin: f64,
}

impl Default for McParams {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            bins: DEFAULT_BINS,
            optimizer: OptimizerConfig::default(),
            constrain_eaves: false,
            constrain_mutual: true,
            margin: 0.0,
        }
    }
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::OutOfRange("samples must be positive".into()));
        }
        if self.bins < 2 {
            return Err(Error::OutOfRange("bins must be at least 2".into()));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::OutOfRange("margin must be non-negative".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport {
    /// Bin midpoints.
    pub q_grid: Vec<f64>,
    pub ie: Vec<Option<f64>>,
    pub iab: Vec<Option<f64>>,
    /// Bins whose `ie` / `iab` value was filled by interpolation.
    pub ie_interpolated: Vec<bool>,
    pub iab_interpolated: Vec<bool>,
    /// `iab − ie` wherever both are defined.
    pub rate: Vec<Option<f64>>,
    /// `(q*, i*)`.
    pub crossing: Option<(f64, f64)>,
    pub eps_cr: Option<f64>,
    pub eff: EfficiencySetup,
}

impl KeyRateReport {
    pub fn crossing_q(&self) -> Option<f64> {
        self.crossing.map(|c| c.0)
    }

    pub fn crossing_i(&self) -> Option<f64> {
        self.crossing.map(|c| c.1)
    }

    /// Largest rate over the grid.
    pub fn max_rate(&self) -> Option<f64> {
        self.rate.iter().flatten().copied().reduce(f64::max)
    }

    /// CSV with header `q,ie,iab,rate`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(w, "q,ie,iab,rate")?;
        for k in 0..self.q_grid.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.q_grid[k],
                cell(self.ie[k]),
                cell(self.iab[k]),
                cell(self.rate[k])
            )?;
        }
        Ok(())
    }
}

/// `R = I_AB − I_E` per bin, and the crossing nearest the high-violation end.
pub fn key_rate(ie: &BoundaryCurve, iab: &BoundaryCurve, eff: &EfficiencySetup) -> Result<KeyRateReport> {
    if ie.bin_edges != iab.bin_edges {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bins on the I_E grid", ie.bins()),
            got: format!("{} bins on a different grid", iab.bins()),
        });
    }
    let (ie_f, ie_i): (Vec<_>, Vec<_>) = ie.filled().into_iter().unzip();
    let (iab_f, iab_i): (Vec<_>, Vec<_>) = iab.filled().into_iter().unzip();
    let rate: Vec<Option<f64>> = ie_f
        .iter()
        .zip(&iab_f)
        .map(|(e, a)| Some(a.as_ref()? - e.as_ref()?))
        .collect();
    if rate.iter().all(Option::is_none) {
        return Err(Error::NoOverlap(
            "I_E and I_AB share no occupied bin".into(),
        ));
    }
    let q_grid = ie.midpoints();
    let defined: Vec<usize> = (0..rate.len()).filter(|&k| rate[k].is_some()).collect();
    let mut crossing = None;
    let top = *defined.last().unwrap();
    if rate[top] == Some(0.0) {
        crossing = Some((q_grid[top], ie_f[top].unwrap()));
    }
    for w in defined.windows(2).rev() {
        if crossing.is_some() {
            break;
        }
        let (lo, hi) = (w[0], w[1]);
        let (r_lo, r_hi) = (rate[lo].unwrap(), rate[hi].unwrap());
        if r_lo == 0.0 {
            crossing = Some((q_grid[lo], ie_f[lo].unwrap()));
        } else if (r_lo < 0.0) != (r_hi < 0.0) {
            let t = r_hi / (r_hi - r_lo);
            let q = q_grid[hi] + t * (q_grid[lo] - q_grid[hi]);
            let (e_lo, e_hi) = (ie_f[lo].unwrap(), ie_f[hi].unwrap());
            crossing = Some((q, e_hi + t * (e_lo - e_hi)));
        }
    }
    let eps_cr = crossing.map(|(_, i)| binary_inverse(1.0 - i));
    Ok(KeyRateReport {
        q_grid,
        ie: ie_f,
        iab: iab_f,
        ie_interpolated: ie_i,
        iab_interpolated: iab_i,
        rate,
        crossing,
        eps_cr,
        eff: *eff,
    })
}

fn check_chsh_domain(q: f64) -> Result<()> {
    if !(-1e-12..=CHSH_QUANTUM_MAX + 1e-12).contains(&q) {
        return Err(Error::OutOfRange(format!(
            "CHSH violation {q} outside [0, {CHSH_QUANTUM_MAX:.7}]"
        )));
    }
    Ok(())
}

/// Closed-form `I_E(Q)` for CHSH.
pub fn analytic_chsh_ie(q: f64) -> Result<f64> {
    check_chsh_domain(q)?;
    let s = ((2.0 * q + 1.0).powi(2) - 1.0).max(0.0).sqrt();
    Ok(h(0.5 * (1.0 + s.min(1.0))))
}

/// Closed-form `I_AB(Q)` for CHSH.
pub fn analytic_chsh_iab(q: f64) -> Result<f64> {
    check_chsh_domain(q)?;
    let eps = 0.5 * (1.0 - (2.0 * q + 1.0) / std::f64::consts::SQRT_2);
    Ok(1.0 - h(eps.max(0.0)))
}

/// `(m_A + m_B − 2)/(m_A m_B − 1)`.
pub fn mp_lower_bound(m_a: usize, m_b: usize) -> f64 {
    (m_a + m_b - 2) as f64 / (m_a * m_b - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Symmetric,
    Asymmetric,
}

impl Setup {
    pub fn efficiency(&self, eta: f64) -> Result<EfficiencySetup> {
        match self {
            Setup::Symmetric => EfficiencySetup::symmetric(eta),
            Setup::Asymmetric => EfficiencySetup::asymmetric(eta),
        }
    }
}

/// Both clouds, both curves and the key-rate verdict of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub eaves: SampleCloud,
    pub mutual: SampleCloud,
    pub ie: BoundaryCurve,
    pub iab: BoundaryCurve,
    pub report: KeyRateReport,
}

/// The EAVES cloud at ideal efficiency and its upper boundary.
pub fn eaves_curve(ineq: &BellInequality, params: &McParams) -> Result<(SampleCloud, BoundaryCurve)> {
    params.validate()?;
    let cloud = collect_eaves_cloud_with(
        ineq,
        params.samples,
        params.seed,
        &params.optimizer,
        params.constrain_eaves,
    )?;
    let curve = upper_boundary(&cloud, params.bins)?;
    Ok((cloud, curve))
}

/// The MUTUAL cloud at `eff` and its curve on the grid of `ie`.
pub fn mutual_curve_at(
    ineq: &BellInequality,
    params: &McParams,
    eff: &EfficiencySetup,
    ie: &BoundaryCurve,
) -> Result<(SampleCloud, BoundaryCurve)> {
    let cloud = collect_mutual_cloud(
        ineq,
        params.samples,
        params.seed,
        &params.optimizer,
        eff,
        params.constrain_mutual,
    )?;
    let curve = mutual_curve(&cloud, ie, params.bins)?;
    Ok((cloud, curve))
}

/// Full pipeline at one efficiency setting.
pub fn run_pipeline(ineq: &BellInequality, eff: &EfficiencySetup, params: &McParams) -> Result<PipelineRun> {
    let (eaves, ie) = eaves_curve(ineq, params)?;
    run_pipeline_with(ineq, eff, params, eaves, ie)
}

/// Pipeline reusing an already computed EAVES stage.
pub fn run_pipeline_with(
    ineq: &BellInequality,
    eff: &EfficiencySetup,
    params: &McParams,
    eaves: SampleCloud,
    ie: BoundaryCurve,
) -> Result<PipelineRun> {
    let (mutual, iab) = mutual_curve_at(ineq, params, eff, &ie)?;
    let report = key_rate(&ie, &iab, eff)?;
    Ok(PipelineRun {
        eaves,
        mutual,
        ie,
        iab,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub setup: Setup,
    pub eta_min: f64,
    /// Final bracket `(lo, hi)`; `eta_min` is `hi`.
    pub bracket: (f64, f64),
    /// Every predicate evaluation `(η, positive key)` in order.
    pub evaluations: Vec<(f64, bool)>,
    pub margin: f64,
    /// The decision is statistical: a finite cloud under-samples the I_E
    /// boundary, which biases the threshold low by up to the boundary noise.
    pub caveat: String,
    #[serde(skip)]
    pub mutual_at_min: Option<(SampleCloud, BoundaryCurve)>,
}

/// Whether some raw occupied `I_AB` bin exceeds `I_E + margin`.
pub fn key_positive(ie: &BoundaryCurve, iab: &BoundaryCurve, margin: f64) -> bool {
    let ie_f = ie.filled();
    iab.values.iter().zip(&ie_f).any(|(a, (e, _))| match (a, e) {
        (Some(a), Some(e)) => *a > *e + margin,
        _ => false,
    })
}

/// Smallest efficiency with positive key, by bisection on `[0.5, 1]`.
pub fn threshold_efficiency(ineq: &BellInequality, setup: Setup, params: &McParams) -> Result<ThresholdReport> {
    let (_, ie) = eaves_curve(ineq, params)?;
    threshold_efficiency_with(ineq, setup, params, &ie)
}

pub fn threshold_efficiency_with(
    ineq: &BellInequality,
    setup: Setup,
    params: &McParams,
    ie: &BoundaryCurve,
) -> Result<ThresholdReport> {
    params.validate()?;
    let mut evaluations = Vec::new();
    let mut probe = |eta: f64| -> Result<(bool, Option<(SampleCloud, BoundaryCurve)>)> {
        let eff = setup.efficiency(eta)?;
        let positive = match mutual_curve_at(ineq, params, &eff, ie) {
            Ok((cloud, iab)) => {
                let pos = key_positive(ie, &iab, params.margin);
                evaluations.push((eta, pos));
                return Ok((pos, Some((cloud, iab))));
            }
            Err(Error::NoOverlap(_)) | Err(Error::EmptyCloud) => false,
            Err(e) => return Err(e),
        };
        evaluations.push((eta, positive));
        Ok((positive, None))
    };
    let (top, mut at_hi) = probe(1.0)?;
    if !top {
        return Err(Error::BisectionRange(format!(
            "{} has no positive key rate even at η = 1",
            ineq.name()
        )));
    }
    if probe(ETA_FLOOR)?.0 {
        return Err(Error::BisectionRange(format!(
            "{} still has positive key rate at η = {ETA_FLOOR}",
            ineq.name()
        )));
    }
    let (mut lo, mut hi) = (ETA_FLOOR, 1.0);
    while hi - lo > ETA_TOL {
        let mid = 0.5 * (lo + hi);
        let (pos, run) = probe(mid)?;
        if pos {
            hi = mid;
            at_hi = run;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdReport {
        setup,
        eta_min: hi,
        bracket: (lo, hi),
        evaluations,
        margin: params.margin,
        caveat: format!(
            "predicate uses margin {} bits on {} samples; a sparse I_E boundary biases η_min low",
            params.margin, params.samples
        ),
        mutual_at_min: at_hi,
    })
}

/// The five columns of one row of critical QBERs and threshold efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub inequality: String,
    pub eps_cr_ideal: Option<f64>,
    pub eps_cr_at_sym_min: Option<f64>,
    pub eps_cr_at_asym_min: Option<f64>,
    pub eta_min_sym: f64,
    pub eta_min_asym: f64,
}

pub fn table2_row(ineq: &BellInequality, params: &McParams) -> Result<Table2Row> {
    let (eaves, ie) = eaves_curve(ineq, params)?;
    let ideal = run_pipeline_with(ineq, &EfficiencySetup::ideal(), params, eaves, ie.clone())?;
    let at_threshold = |setup: Setup| -> Result<(f64, Option<f64>)> {
        let t = threshold_efficiency_with(ineq, setup, params, &ie)?;
        let eff = setup.efficiency(t.eta_min)?;
        let iab = match t.mutual_at_min {
            Some((_, iab)) => iab,
            None => mutual_curve_at(ineq, params, &eff, &ie)?.1,
        };
        Ok((t.eta_min, key_rate(&ie, &iab, &eff)?.eps_cr))
    };
    let (eta_sym, eps_sym) = at_threshold(Setup::Symmetric)?;
    let (eta_asym, eps_asym) = at_threshold(Setup::Asymmetric)?;
    Ok(Table2Row {
        inequality: ineq.name().to_string(),
        eps_cr_ideal: ideal.report.eps_cr,
        eps_cr_at_sym_min: eps_sym,
        eps_cr_at_asym_min: eps_asym,
        eta_min_sym: eta_sym,
        eta_min_asym: eta_asym,
    })
}

/// CHSH with Eve restricted to a ẑ measurement.
#[derive(Debug, Clone)]
pub struct Bb84Run {
    /// `(Q, χ′)`.
    pub eaves: SampleCloud,
    /// `(Q, Γ)` from the same states.
    pub mutual: SampleCloud,
    pub ie: BoundaryCurve,
    pub iab: BoundaryCurve,
    pub report: KeyRateReport,
    /// `(ε, Γ − χ_max)` for every sampled state.
    pub rate_cloud: Vec<(f64, f64)>,
}

pub fn bb84_analysis(params: &McParams) -> Result<Bb84Run> {
    params.validate()?;
    let chsh = catalog_get("CHSH")?;
    let ideal = EfficiencySetup::ideal();
    type Sample = (Option<(f64, f64, f64)>, (f64, f64));
    let samples: Vec<Sample> = (0..params.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Sample> {
            let mut rng = stream_rng(params.seed, domain::BB84, i);
            let state = draw_state(&mut rng, params.constrain_mutual);
            let q = max_violation(&chsh, &state, &ideal, &params.optimizer, &mut rng)?.q;
            let eps = qber(&state, &ideal);
            let gamma = 1.0 - h(eps);
            let point = (q > 0.0).then(|| (q, holevo_bb84(&state), gamma));
            Ok((point, (eps, gamma - holevo_extrema(&state).chi_max)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64, f64)> = samples.iter().filter_map(|s| s.0).collect();
    let eaves = SampleCloud {
        kind: CloudKind::Eaves,
        points: kept.iter().map(|&(q, chi, _)| (q, chi)).collect(),
        eff: ideal,
        seed: params.seed,
    };
    let mutual = SampleCloud {
        kind: CloudKind::Mutual,
        points: kept.iter().map(|&(q, _, g)| (q, g)).collect(),
        eff: ideal,
        seed: params.seed,
    };
    let ie = upper_boundary(&eaves, params.bins)?;
    let iab = mutual_curve(&mutual, &ie, params.bins)?;
    let report = key_rate(&ie, &iab, &ideal)?;
    Ok(Bb84Run {
        eaves,
        mutual,
        ie,
        iab,
        report,
        rate_cloud: samples.into_iter().map(|s| s.1).collect(),
    })
}

/// Closed-form CHSH curves on the grid of `grid`.
pub fn analytic_chsh_curves(grid: &BoundaryCurve) -> (BoundaryCurve, BoundaryCurve) {
    let mut ie = grid.cleared(CurveKind::Ie);
    let mut iab = grid.cleared(CurveKind::Iab);
    for k in 0..grid.bins() {
        let q = grid.midpoint(k);
        ie.values[k] = analytic_chsh_ie(q).ok();
        iab.values[k] = analytic_chsh_iab(q).ok();
    }
    (ie, iab)
}

/// Run summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub inequality: String,
    pub mode: String,
    pub eta_a: f64,
    pub eta_b: f64,
    pub samples: usize,
    pub seed: u64,
    pub crossing_q: Option<f64>,
    pub crossing_i: Option<f64>,
    pub eps_cr: Option<f64>,
    pub eta_min: Option<f64>,
    pub runtime_s: Option<f64>,
}
