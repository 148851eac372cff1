//! Monte Carlo sampling of Bell-diagonal states and extraction of the
//! violation-indexed information curves `I_E(Q)` and `I_AB(Q)`.
//!
//! Every sample `i` draws from its own counter-derived ChaCha stream, so clouds
//! are bit-identical for a given seed regardless of how indices are split
//! across worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::bell::BellInequality;
use crate::entropy::{h, holevo_extrema};
use crate::error::{Error, Result};
use crate::optimize::{max_violation, OptimizerConfig};
use crate::quantum::{qber, BellDiagonalState, EfficiencySetup};

/// Concentration of the corner-weighted Dirichlet component.
pub const CORNER_CONCENTRATION: f64 = 0.3;
/// Default number of samples per cloud.
pub const DEFAULT_SAMPLES: usize = 200_000;
/// Default number of boundary bins.
pub const DEFAULT_BINS: usize = 200;

/// Stream domains, so that different clouds built from one seed are independent.
pub(crate) mod domain {
    pub const STATES: u64 = 0;
    pub const EAVES: u64 = 1;
    pub const MUTUAL: u64 = 2;
    pub const BB84: u64 = 3;
    pub const HIGHDIM: u64 = 4;
}

/// Generator for sample `index` of stream `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 56) ^ index);
    rng
}

/// One draw from the 1:1 mixture of a flat and a corner-concentrated Dirichlet.
pub fn draw_state<R: Rng + ?Sized>(rng: &mut R, constrain_sym: bool) -> BellDiagonalState {
    let alpha = if rng.random::<bool>() {
        1.0
    } else {
        CORNER_CONCENTRATION
    };
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    loop {
        let w: [f64; 4] = std::array::from_fn(|_| gamma.sample(rng));
        if let Ok(state) = BellDiagonalState::from_unnormalized(w) {
            return if constrain_sym {
                state.symmetrized()
            } else {
                state
            };
        }
    }
}

/// `n` independent states from the sampling mixture.
pub fn sample_states(n: usize, seed: u64, constrain_sym: bool) -> Vec<BellDiagonalState> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| draw_state(&mut stream_rng(seed, domain::STATES, i), constrain_sym))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudKind {
    /// Points `(Q, χ)`.
    Eaves,
    /// Points `(Q, Γ)`.
    Mutual,
}

impl CloudKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CloudKind::Eaves => "eaves",
            CloudKind::Mutual => "mutual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    pub kind: CloudKind,
    pub points: Vec<(f64, f64)>,
    pub eff: EfficiencySetup,
    pub seed: u64,
}

impl SampleCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// `(min, max)` of the violation coordinate.
    pub fn q_range(&self) -> Option<(f64, f64)> {
        let mut it = self.points.iter().map(|p| p.0);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), q| (lo.min(q), hi.max(q))))
    }

    /// CSV with header `q,value,kind`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q,value,kind")?;
        for (q, y) in &self.points {
            writeln!(w, "{q},{y},{}", self.kind.as_str())?;
        }
        Ok(())
    }
}

/// Per-sample evaluation shared by the cloud builders.
fn build_cloud<F>(
    kind: CloudKind,
    n: usize,
    seed: u64,
    stream: u64,
    eff: EfficiencySetup,
    point: F,
) -> Result<SampleCloud>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<Option<(f64, f64)>> + Sync,
{
    let points: Vec<Option<(f64, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| point(&mut stream_rng(seed, stream, i), i))
        .collect::<Result<_>>()?;
    Ok(SampleCloud {
        kind,
        points: points.into_iter().flatten().collect(),
        eff,
        seed,
    })
}

/// `(Q, χ_max)` for sampled states at ideal efficiency; keeps `Q > 0` only.
pub fn collect_eaves_cloud(
    ineq: &BellInequality,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SampleCloud> {
    collect_eaves_cloud_with(ineq, n, seed, cfg, false)
}

pub fn collect_eaves_cloud_with(
    ineq: &BellInequality,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
    constrain_sym: bool,
) -> Result<SampleCloud> {
    cfg.validate()?;
    let ideal = EfficiencySetup::ideal();
    build_cloud(CloudKind::Eaves, n, seed, domain::EAVES, ideal, |rng, _| {
        let state = draw_state(rng, constrain_sym);
        eaves_point(ineq, &state, cfg, rng)
    })
}

/// EAVES cloud for explicitly given states (optimizer restarts still seeded).
pub fn eaves_cloud_for_states(
    ineq: &BellInequality,
    states: &[BellDiagonalState],
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SampleCloud> {
    cfg.validate()?;
    let ideal = EfficiencySetup::ideal();
    build_cloud(CloudKind::Eaves, states.len(), seed, domain::EAVES, ideal, |rng, i| {
        eaves_point(ineq, &states[i as usize], cfg, rng)
    })
}

fn eaves_point(
    ineq: &BellInequality,
    state: &BellDiagonalState,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(f64, f64)>> {
    let q = max_violation(ineq, state, &EfficiencySetup::ideal(), cfg, rng)?.q;
    Ok((q > 0.0).then(|| (q, holevo_extrema(state).chi_max)))
}

/// `(Q, Γ)` with `Q` optimized on the degraded table and `Γ = 1 − h(ε)`.
pub fn collect_mutual_cloud(
    ineq: &BellInequality,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
    eff: &EfficiencySetup,
    constrain_sym: bool,
) -> Result<SampleCloud> {
    cfg.validate()?;
    build_cloud(CloudKind::Mutual, n, seed, domain::MUTUAL, *eff, |rng, _| {
        let state = draw_state(rng, constrain_sym);
        mutual_point(ineq, &state, cfg, eff, rng)
    })
}

pub fn mutual_cloud_for_states(
    ineq: &BellInequality,
    states: &[BellDiagonalState],
    seed: u64,
    cfg: &OptimizerConfig,
    eff: &EfficiencySetup,
) -> Result<SampleCloud> {
    cfg.validate()?;
    build_cloud(CloudKind::Mutual, states.len(), seed, domain::MUTUAL, *eff, |rng, i| {
        mutual_point(ineq, &states[i as usize], cfg, eff, rng)
    })
}

fn mutual_point(
    ineq: &BellInequality,
    state: &BellDiagonalState,
    cfg: &OptimizerConfig,
    eff: &EfficiencySetup,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(f64, f64)>> {
    let q = max_violation(ineq, state, eff, cfg, rng)?.q;
    Ok((q > 0.0).then(|| (q, 1.0 - h(qber(state, eff)))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CurveKind {
    #[serde(rename = "ie")]
    Ie,
    #[serde(rename = "iab")]
    Iab,
}

/// Binned upper boundary of a cloud. Empty bins hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub bin_edges: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub kind: CurveKind,
}

impl BoundaryCurve {
    /// Empty curve over `bins` equal-width bins spanning `[lo, hi]`.
    pub fn empty(lo: f64, hi: f64, bins: usize, kind: CurveKind) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = (lo.abs() * 1e-9).max(1e-12);
            (lo - pad, hi + pad)
        };
        let width = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        bin_edges[bins] = hi;
        Self {
            bin_edges,
            values: vec![None; bins],
            kind,
        }
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn lo(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.bin_edges[self.bins()]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.bin_edges[k] + self.bin_edges[k + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.midpoint(k)).collect()
    }

    pub fn occupied(&self, k: usize) -> bool {
        self.values[k].is_some()
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Bin containing `q`, if inside the grid.
    pub fn bin_of(&self, q: f64) -> Option<usize> {
        if !(q >= self.lo() && q <= self.hi()) {
            return None;
        }
        let width = (self.hi() - self.lo()) / self.bins() as f64;
        let k = ((q - self.lo()) / width).floor() as usize;
        Some(k.min(self.bins() - 1))
    }

    /// Raises the bin containing `q` to at least `y`; points off the grid are ignored.
    pub fn push(&mut self, q: f64, y: f64) {
        if let Some(k) = self.bin_of(q) {
            let v = self.values[k].get_or_insert(y);
            *v = v.max(y);
        }
    }

    /// Same-grid clone with all bins emptied.
    pub fn cleared(&self, kind: CurveKind) -> Self {
        Self {
            bin_edges: self.bin_edges.clone(),
            values: vec![None; self.bins()],
            kind,
        }
    }

    /// Per-bin maximum of two curves on the same grid.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::DimensionMismatch {
                expected: "identical bin grids".into(),
                got: "different grids".into(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (Some(x), Some(y)) => Some(x.max(*y)),
                (x, None) => *x,
                (None, y) => *y,
            })
            .collect();
        Ok(Self {
            bin_edges: self.bin_edges.clone(),
            values,
            kind: self.kind,
        })
    }

    /// Values with interior gaps filled by linear interpolation between
    /// occupied neighbours; the flag marks filled bins.
    pub fn filled(&self) -> Vec<(Option<f64>, bool)> {
        let occ: Vec<usize> = (0..self.bins()).filter(|&k| self.occupied(k)).collect();
        let mut out: Vec<(Option<f64>, bool)> = self.values.iter().map(|v| (*v, false)).collect();
        for w in occ.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ya, yb) = (self.values[a].unwrap(), self.values[b].unwrap());
            let (xa, xb) = (self.midpoint(a), self.midpoint(b));
            for k in a + 1..b {
                let t = (self.midpoint(k) - xa) / (xb - xa);
                out[k] = (Some(ya + t * (yb - ya)), true);
            }
        }
        out
    }

    /// Whether occupied values never rise by more than `tol` above the recent
    /// maximum to their left. The window absorbs isolated under-sampled bins.
    pub fn is_monotone_decreasing(&self, tol: f64) -> bool {
        let window = (self.bins() / 40).max(2);
        let occ: Vec<(usize, f64)> = self
            .values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|y| (k, y)))
            .collect();
        for (idx, &(k, y)) in occ.iter().enumerate() {
            let recent = occ[..idx]
                .iter()
                .rev()
                .take_while(|(j, _)| k - j <= window)
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max);
            if recent.is_finite() && y > recent + tol {
                return false;
            }
        }
        true
    }

    /// CSV with header `bin_lo,bin_hi,value,occupied`; empty bins leave `value` blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,value,occupied")?;
        for k in 0..self.bins() {
            let (lo, hi) = (self.bin_edges[k], self.bin_edges[k + 1]);
            match self.values[k] {
                Some(v) => writeln!(w, "{lo},{hi},{v},true")?,
                None => writeln!(w, "{lo},{hi},,false")?,
            }
        }
        Ok(())
    }
}

fn curve_kind(kind: CloudKind) -> CurveKind {
    match kind {
        CloudKind::Eaves => CurveKind::Ie,
        CloudKind::Mutual => CurveKind::Iab,
    }
}

/// Per-bin maximum over equal-width bins spanning the observed `Q` range.
pub fn upper_boundary(cloud: &SampleCloud, bins: usize) -> Result<BoundaryCurve> {
    if bins < 2 {
        return Err(Error::OutOfRange(format!("bins = {bins}, need at least 2")));
    }
    let (lo, hi) = cloud.q_range().ok_or(Error::EmptyCloud)?;
    let mut curve = BoundaryCurve::empty(lo, hi, bins, curve_kind(cloud.kind));
    for &(q, y) in &cloud.points {
        curve.push(q, y);
    }
    Ok(curve)
}

/// Upper boundary of a cloud on an existing grid; off-grid points are dropped.
pub fn upper_boundary_on(cloud: &SampleCloud, grid: &BoundaryCurve) -> BoundaryCurve {
    let mut curve = grid.cleared(curve_kind(cloud.kind));
    for &(q, y) in &cloud.points {
        curve.push(q, y);
    }
    curve
}

/// Tolerance (bits) for deciding that an `I_E` curve is monotone decreasing.
pub const MONOTONE_TOL: f64 = 0.01;

/// `Q`-indexed mutual information from a `(Q, Γ)` cloud, on the grid of `ie_curve`.
///
/// Each `Γ` level is assigned to the `Q` in its level set at which `I_E` is
/// largest. When `I_E` decreases monotonically this is the upper boundary of
/// the cloud, which is what gets returned in that case.
pub fn mutual_curve(
    iab_cloud: &SampleCloud,
    ie_curve: &BoundaryCurve,
    bins: usize,
) -> Result<BoundaryCurve> {
    if bins < 1 {
        return Err(Error::OutOfRange("need at least one Γ level".into()));
    }
    let on_grid: Vec<(f64, f64)> = iab_cloud
        .points
        .iter()
        .copied()
        .filter(|(q, _)| ie_curve.bin_of(*q).is_some())
        .collect();
    if on_grid.is_empty() {
        let range = iab_cloud
            .q_range()
            .map(|(a, b)| format!("[{a:.5}, {b:.5}]"))
            .unwrap_or_else(|| "empty".into());
        return Err(Error::NoOverlap(format!(
            "mutual cloud Q range {range} vs I_E support [{:.5}, {:.5}]",
            ie_curve.lo(),
            ie_curve.hi()
        )));
    }
    if ie_curve.is_monotone_decreasing(MONOTONE_TOL) {
        return Ok(upper_boundary_on(iab_cloud, ie_curve));
    }
    Ok(level_set_assignment(&on_grid, ie_curve, bins))
}

/// The general level-set construction, without the monotone shortcut.
pub fn level_set_assignment(
    points: &[(f64, f64)],
    ie_curve: &BoundaryCurve,
    bins: usize,
) -> BoundaryCurve {
    let mut out = ie_curve.cleared(CurveKind::Iab);
    if points.is_empty() {
        return out;
    }
    let (ylo, yhi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let levels = if yhi > ylo { bins } else { 1 };
    let width = (yhi - ylo) / levels as f64;
    let level_of = |y: f64| -> usize {
        if levels == 1 {
            0
        } else {
            (((y - ylo) / width).floor() as usize).min(levels - 1)
        }
    };
    // per level: (best I_E, its Q bin, level Γ)
    let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; levels];
    for &(q, y) in points {
        let Some(k) = ie_curve.bin_of(q) else { continue };
        let Some(ie) = ie_curve.values[k] else { continue };
        let slot = &mut best[level_of(y)];
        match slot {
            Some((b_ie, b_k, g)) => {
                *g = g.max(y);
                if ie > *b_ie || (ie == *b_ie && k < *b_k) {
                    *b_ie = ie;
                    *b_k = k;
                }
            }
            None => *slot = Some((ie, k, y)),
        }
    }
    for (_, k, gamma) in best.into_iter().flatten() {
        let v = out.values[k].get_or_insert(gamma);
        *v = v.max(gamma);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::catalog_get;

    fn cloud(kind: CloudKind, points: Vec<(f64, f64)>) -> SampleCloud {
        SampleCloud {
            kind,
            points,
            eff: EfficiencySetup::ideal(),
            seed: 0,
        }
    }

    #[test]
    fn per_bin_maximum() {
        let c = cloud(CloudKind::Eaves, vec![(0.1, 0.3), (0.1, 0.5), (0.2, 0.4)]);
        let curve = upper_boundary(&c, 2).unwrap();
        assert_eq!(curve.values, vec![Some(0.5), Some(0.4)]);
        assert_eq!(curve.kind, CurveKind::Ie);
    }

    #[test]
    fn single_point_single_bin() {
        let c = cloud(CloudKind::Mutual, vec![(0.12, 0.7)]);
        let curve = upper_boundary(&c, 5).unwrap();
        assert_eq!(curve.occupied_count(), 1);
        assert_eq!(curve.values.iter().flatten().copied().next(), Some(0.7));
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let c = cloud(CloudKind::Eaves, vec![]);
        assert_eq!(upper_boundary(&c, 10), Err(Error::EmptyCloud));
    }

    #[test]
    fn constrained_samples_have_equal_middle_weights() {
        for s in sample_states(500, 11, true) {
            let l = s.lambda();
            assert_eq!(l[1], l[2]);
        }
        let one = sample_states(1, 99, false);
        assert_eq!(one.len(), 1);
        let sum: f64 = one[0].lambda().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_states_give_expected_points() {
        let chsh = catalog_get("CHSH").unwrap();
        let cfg = OptimizerConfig::default();
        let states = [
            BellDiagonalState::phi0(),
            BellDiagonalState::new([0.5, 0.5, 0.0, 0.0]).unwrap(),
        ];
        let c = eaves_cloud_for_states(&chsh, &states, 3, &cfg).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c.points[0].0 - 0.20710678).abs() < 1e-6);
        assert_eq!(c.points[0].1, 0.0);

        let m = mutual_cloud_for_states(&chsh, &states[..1], 3, &cfg, &EfficiencySetup::ideal())
            .unwrap();
        assert_eq!(m.points[0].1, 1.0);
        let asym = EfficiencySetup::asymmetric(0.8).unwrap();
        let m = mutual_cloud_for_states(&chsh, &states[..1], 3, &cfg, &asym).unwrap();
        assert!((m.points[0].1 - (1.0 - h(0.1))).abs() < 1e-12);
        assert!((m.points[0].1 - 0.531).abs() < 1e-3);

        let half = BellDiagonalState::new([0.5, 0.0, 0.25, 0.25]).unwrap();
        let ideal_eps = qber(&half, &EfficiencySetup::ideal());
        assert_eq!(1.0 - h(ideal_eps), 0.0);
    }

    #[test]
    fn zero_samples_give_empty_cloud() {
        let chsh = catalog_get("CHSH").unwrap();
        let c = collect_eaves_cloud(&chsh, 0, 1, &OptimizerConfig::default()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn monotone_ie_reduces_to_upper_boundary() {
        let ie = upper_boundary(
            &cloud(CloudKind::Eaves, (0..=20).map(|k| (k as f64 / 100.0, 1.0 - k as f64 / 20.0)).collect()),
            10,
        )
        .unwrap();
        assert!(ie.is_monotone_decreasing(MONOTONE_TOL));
        let m = cloud(
            CloudKind::Mutual,
            vec![(0.01, 0.2), (0.05, 0.5), (0.05, 0.3), (0.12, 0.6), (0.19, 0.9)],
        );
        let out = mutual_curve(&m, &ie, 50).unwrap();
        assert_eq!(out, upper_boundary_on(&m, &ie));
    }

    #[test]
    fn level_set_picks_peak_of_ie() {
        // I_E rises to a peak at q = 0.1 then falls
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let q = k as f64 / 100.0;
                (q, 1.0 - (q - 0.1).abs() * 5.0)
            })
            .collect();
        let ie = upper_boundary(&cloud(CloudKind::Eaves, pts), 20).unwrap();
        assert!(!ie.is_monotone_decreasing(MONOTONE_TOL));
        let gamma0 = 0.42;
        let m = cloud(
            CloudKind::Mutual,
            (4..=16).map(|k| (k as f64 / 100.0, gamma0)).collect(),
        );
        let out = mutual_curve(&m, &ie, 10).unwrap();
        assert_eq!(out.occupied_count(), 1);
        let k = ie.bin_of(0.1).unwrap();
        assert_eq!(out.values[k], Some(gamma0));
    }

    #[test]
    fn disjoint_ranges_are_rejected() {
        let ie = upper_boundary(&cloud(CloudKind::Eaves, vec![(0.1, 0.5), (0.2, 0.1)]), 4).unwrap();
        let m = cloud(CloudKind::Mutual, vec![(0.3, 0.9)]);
        assert!(matches!(mutual_curve(&m, &ie, 10), Err(Error::NoOverlap(_))));
    }

    #[test]
    fn interior_gaps_interpolate() {
        let mut c = BoundaryCurve::empty(0.0, 1.0, 5, CurveKind::Ie);
        c.push(0.05, 1.0);
        c.push(0.85, 0.2);
        let f = c.filled();
        assert_eq!(f[0], (Some(1.0), false));
        assert!(f[2].1);
        assert!((f[2].0.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(f[4], (Some(0.2), false));
    }

    #[test]
    fn csv_headers() {
        let c = cloud(CloudKind::Eaves, vec![(0.1, 0.3)]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("q,value,kind\n0.1,0.3,eaves"));
        let curve = upper_boundary(&c, 2).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("bin_lo,bin_hi,value,occupied\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
