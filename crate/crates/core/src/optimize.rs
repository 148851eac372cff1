//! See-saw maximization of a Bell expression over qubit projective measurements.
//!
//! With Bob's measurements fixed, the (efficiency-degraded) Bell value is affine
//! in each of Alice's projectors separately: `P = tr(p̂_i W_i) + const` with a
//! 2×2 Hermitian effective operator `W_i = w_0 + w·σ`. The best rank-1 projector
//! is the top eigenvector of `W_i`, whose Bloch vector is `w/|w|`. Updates of the
//! two parties alternate until the value stops increasing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bell::BellInequality;
use crate::error::{Error, Result};
use crate::quantum::{
    apply_efficiency, joint_table_pauli, BellDiagonalState, EfficiencySetup,
    MeasurementScenario, PauliState, QubitProjector,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once an iteration raises the value by no more than this.
    pub tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iters: 200,
            tol: 1e-10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::OutOfRange("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::OutOfRange("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationResult {
    /// Best Bell value found; a lower bound on the true maximum.
    pub q: f64,
    pub scenario: MeasurementScenario,
    pub converged: bool,
}

/// Which party a see-saw step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Result of one see-saw run from a fixed starting scenario.
#[derive(Debug, Clone)]
pub struct SeesawRun {
    pub scenario: MeasurementScenario,
    pub value: f64,
    /// Bell value after each full (Alice, Bob) iteration, starting with the
    /// initial value.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Working state of the see-saw on Bloch vectors.
struct Seesaw<'a> {
    ineq: &'a BellInequality,
    r: [[f64; 4]; 4],
    eff: EfficiencySetup,
    alice: Vec<[f64; 3]>,
    bob: Vec<[f64; 3]>,
    scratch: Vec<[f64; 4]>,
}

const MIN_DIRECTION: f64 = 1e-14;
/// Longest extrapolation, in units of the last move.
const MAX_STEP: f64 = 100.0;
/// Gain ratio between iterations above which extrapolation kicks in.
const SLOW_RATIO: f64 = 0.5;

#[inline]
fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
fn mat_vec(r: &[[f64; 4]; 4], y: &[f64; 4]) -> [f64; 4] {
    [dot4(&r[0], y), dot4(&r[1], y), dot4(&r[2], y), dot4(&r[3], y)]
}

#[inline]
fn mat_t_vec(r: &[[f64; 4]; 4], x: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|l| r[0][l] * x[0] + r[1][l] * x[1] + r[2][l] * x[2] + r[3][l] * x[3])
}

#[inline]
fn normalize(g: [f64; 3]) -> Option<[f64; 3]> {
    let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    (n > MIN_DIRECTION).then(|| [g[0] / n, g[1] / n, g[2] / n])
}

impl<'a> Seesaw<'a> {
    fn new(
        ineq: &'a BellInequality,
        state: &PauliState,
        eff: EfficiencySetup,
        scenario: &MeasurementScenario,
    ) -> Self {
        Self {
            ineq,
            r: *state.r(),
            eff,
            alice: scenario.alice.iter().map(QubitProjector::bloch).collect(),
            bob: scenario.bob.iter().map(QubitProjector::bloch).collect(),
            scratch: Vec::with_capacity(ineq.m_a().max(ineq.m_b())),
        }
    }

    fn value(&self) -> f64 {
        let mut total = 0.0;
        for (i, a) in self.alice.iter().enumerate() {
            let x = EfficiencySetup::degrade(self.eff.eta_a, a);
            let rx = mat_t_vec(&self.r, &x);
            total += 0.5 * self.ineq.alice_marg()[i] * rx[0];
            for (j, b) in self.bob.iter().enumerate() {
                let c = self.ineq.joint(i, j);
                if c != 0.0 {
                    let y = EfficiencySetup::degrade(self.eff.eta_b, b);
                    total += 0.25 * c * dot4(&rx, &y);
                }
            }
        }
        for (j, b) in self.bob.iter().enumerate() {
            let y = EfficiencySetup::degrade(self.eff.eta_b, b);
            total += 0.5 * self.ineq.bob_marg()[j] * dot4(&self.r[0], &y);
        }
        total
    }

    fn update_alice(&mut self) {
        if self.eff.eta_a == 0.0 {
            return;
        }
        self.scratch.clear();
        for b in &self.bob {
            let y = EfficiencySetup::degrade(self.eff.eta_b, b);
            self.scratch.push(mat_vec(&self.r, &y));
        }
        for i in 0..self.alice.len() {
            let alpha2 = 2.0 * self.ineq.alice_marg()[i];
            let mut g = [
                alpha2 * self.r[1][0],
                alpha2 * self.r[2][0],
                alpha2 * self.r[3][0],
            ];
            for (j, ry) in self.scratch.iter().enumerate() {
                let c = self.ineq.joint(i, j);
                if c != 0.0 {
                    g[0] += c * ry[1];
                    g[1] += c * ry[2];
                    g[2] += c * ry[3];
                }
            }
            if let Some(dir) = normalize(g) {
                self.alice[i] = dir;
            }
        }
    }

    /// Updates Bob and returns the Bell value at the new scenario.
    fn update_bob(&mut self) -> f64 {
        let eta = self.eff.eta_b;
        self.scratch.clear();
        let mut total = 0.0;
        for (i, a) in self.alice.iter().enumerate() {
            let x = EfficiencySetup::degrade(self.eff.eta_a, a);
            let rx = mat_t_vec(&self.r, &x);
            total += 0.5 * self.ineq.alice_marg()[i] * rx[0];
            self.scratch.push(rx);
        }
        for j in 0..self.bob.len() {
            let beta = self.ineq.bob_marg()[j];
            let mut u0 = 0.5 * beta * self.r[0][0];
            let mut g = [
                2.0 * beta * self.r[0][1],
                2.0 * beta * self.r[0][2],
                2.0 * beta * self.r[0][3],
            ];
            for (i, rx) in self.scratch.iter().enumerate() {
                let c = self.ineq.joint(i, j);
                if c != 0.0 {
                    u0 += 0.25 * c * rx[0];
                    g[0] += c * rx[1];
                    g[1] += c * rx[2];
                    g[2] += c * rx[3];
                }
            }
            if eta != 0.0 {
                if let Some(dir) = normalize(g) {
                    self.bob[j] = dir;
                }
            }
            let b = &self.bob[j];
            total += (2.0 - eta) * u0 + 0.25 * eta * (g[0] * b[0] + g[1] * b[1] + g[2] * b[2]);
        }
        total
    }

    /// Fresh uniformly random directions, drawn as in [`random_scenario`].
    fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in self.alice.iter_mut().chain(self.bob.iter_mut()) {
            *v = random_projector(rng).bloch();
        }
    }

    /// Alternates updates until the gain drops to `cfg.tol`. Once the gains
    /// shrink slowly, a point further along the last move is tried and kept
    /// only if it scores higher.
    fn ascend(&mut self, cfg: &OptimizerConfig, mut history: Option<&mut Vec<f64>>) -> (f64, bool) {
        let mut value = self.value();
        if let Some(h) = history.as_deref_mut() {
            h.push(value);
        }
        let mut prev = Directions::of(self);
        let mut base = prev.clone();
        let mut last_gain = f64::INFINITY;
        for _ in 0..cfg.max_iters {
            prev.copy_from(self);
            self.update_alice();
            let mut next = self.update_bob();
            let plain_gain = next - value;
            if plain_gain > cfg.tol && plain_gain > SLOW_RATIO * last_gain && plain_gain < last_gain {
                // geometric tail of the remaining moves
                let rho = (plain_gain / last_gain).sqrt();
                let step = (rho / (1.0 - rho)).min(MAX_STEP);
                base.copy_from(self);
                self.move_along(&base, &prev, step);
                self.update_alice();
                let v = self.update_bob();
                if v > next {
                    next = v;
                } else {
                    base.copy_to(self);
                }
            }
            if let Some(h) = history.as_deref_mut() {
                h.push(next);
            }
            let gain = next - value;
            value = value.max(next);
            if gain <= cfg.tol {
                return (value, true);
            }
            last_gain = plain_gain;
        }
        (value, false)
    }

    /// Sets every direction to `base + step·(base − prev)`, renormalized.
    fn move_along(&mut self, base: &Directions, prev: &Directions, step: f64) {
        let shift = |out: &mut [[f64; 3]], cur: &[[f64; 3]], old: &[[f64; 3]]| {
            for ((o, c), p) in out.iter_mut().zip(cur).zip(old) {
                let v = std::array::from_fn(|k| c[k] + step * (c[k] - p[k]));
                *o = normalize(v).unwrap_or(*c);
            }
        };
        shift(&mut self.alice, &base.alice, &prev.alice);
        shift(&mut self.bob, &base.bob, &prev.bob);
    }

    fn scenario(&self) -> MeasurementScenario {
        MeasurementScenario::new(
            self.alice.iter().copied().map(QubitProjector::from_bloch).collect(),
            self.bob.iter().copied().map(QubitProjector::from_bloch).collect(),
        )
    }
}

#[derive(Clone)]
struct Directions {
    alice: Vec<[f64; 3]>,
    bob: Vec<[f64; 3]>,
}

impl Directions {
    fn of(s: &Seesaw) -> Self {
        Self {
            alice: s.alice.clone(),
            bob: s.bob.clone(),
        }
    }

    fn copy_from(&mut self, s: &Seesaw) {
        self.alice.copy_from_slice(&s.alice);
        self.bob.copy_from_slice(&s.bob);
    }

    fn copy_to(&self, s: &mut Seesaw) {
        s.alice.copy_from_slice(&self.alice);
        s.bob.copy_from_slice(&self.bob);
    }
}

fn check_shape(ineq: &BellInequality, scenario: &MeasurementScenario) -> Result<()> {
    if scenario.m_a() != ineq.m_a() || scenario.m_b() != ineq.m_b() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} settings", ineq.m_a(), ineq.m_b()),
            got: format!("{}x{}", scenario.m_a(), scenario.m_b()),
        });
    }
    Ok(())
}

/// Uniformly random direction: `cos θ ~ U[−1, 1]`, `φ ~ U[0, 2π)`.
pub fn random_projector<R: Rng + ?Sized>(rng: &mut R) -> QubitProjector {
    let cos_t: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    QubitProjector::new(cos_t.acos(), phi).expect("angles drawn in range")
}

pub fn random_scenario<R: Rng + ?Sized>(m_a: usize, m_b: usize, rng: &mut R) -> MeasurementScenario {
    let alice = (0..m_a).map(|_| random_projector(rng)).collect();
    let bob = (0..m_b).map(|_| random_projector(rng)).collect();
    MeasurementScenario::new(alice, bob)
}

/// Bell value of a scenario through the table pipeline.
pub fn bell_value(
    ineq: &BellInequality,
    state: &PauliState,
    eff: &EfficiencySetup,
    scenario: &MeasurementScenario,
) -> Result<f64> {
    ineq.evaluate(&apply_efficiency(&joint_table_pauli(state, scenario), eff))
}

/// Replaces one party's projectors by their eigen-optimal choices.
pub fn seesaw_step(
    ineq: &BellInequality,
    state: &BellDiagonalState,
    eff: &EfficiencySetup,
    scenario: &MeasurementScenario,
    party: Party,
) -> Result<MeasurementScenario> {
    check_shape(ineq, scenario)?;
    let pauli = state.pauli();
    let mut s = Seesaw::new(ineq, &pauli, *eff, scenario);
    match party {
        Party::Alice => s.update_alice(),
        Party::Bob => {
            s.update_bob();
        }
    }
    let mut out = scenario.clone();
    match party {
        Party::Alice => out.alice = s.scenario().alice,
        Party::Bob => out.bob = s.scenario().bob,
    }
    Ok(out)
}

/// Runs the see-saw from `init` until convergence or `cfg.max_iters`.
pub fn run_seesaw(
    ineq: &BellInequality,
    state: &PauliState,
    eff: &EfficiencySetup,
    init: &MeasurementScenario,
    cfg: &OptimizerConfig,
) -> Result<SeesawRun> {
    check_shape(ineq, init)?;
    let mut s = Seesaw::new(ineq, state, *eff, init);
    let mut history = Vec::new();
    let (value, converged) = s.ascend(cfg, Some(&mut history));
    Ok(SeesawRun {
        scenario: s.scenario(),
        value,
        history,
        converged,
    })
}

/// Best Bell value over `cfg.restarts` random starting scenarios.
pub fn max_violation<R: Rng + ?Sized>(
    ineq: &BellInequality,
    state: &BellDiagonalState,
    eff: &EfficiencySetup,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<ViolationResult> {
    max_violation_pauli(ineq, &state.pauli(), eff, cfg, rng)
}

/// [`max_violation`] with a seed instead of a generator.
pub fn max_violation_seeded(
    ineq: &BellInequality,
    state: &BellDiagonalState,
    eff: &EfficiencySetup,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<ViolationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    max_violation(ineq, state, eff, cfg, &mut rng)
}

pub fn max_violation_pauli<R: Rng + ?Sized>(
    ineq: &BellInequality,
    state: &PauliState,
    eff: &EfficiencySetup,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<ViolationResult> {
    cfg.validate()?;
    let blank = MeasurementScenario::new(
        vec![QubitProjector::z(); ineq.m_a()],
        vec![QubitProjector::z(); ineq.m_b()],
    );
    let mut s = Seesaw::new(ineq, state, *eff, &blank);
    let mut best: Option<(f64, bool, Vec<[f64; 3]>, Vec<[f64; 3]>)> = None;
    for _ in 0..cfg.restarts {
        s.randomize(rng);
        let (value, converged) = s.ascend(cfg, None);
        if best.as_ref().map_or(true, |b| value > b.0) {
            best = Some((value, converged, s.alice.clone(), s.bob.clone()));
        }
    }
    let (_, converged, alice, bob) = best.expect("at least one restart");
    s.alice = alice;
    s.bob = bob;
    let scenario = s.scenario();
    let q = bell_value(ineq, state, eff, &scenario)?;
    Ok(ViolationResult {
        q,
        scenario,
        converged,
    })
}
