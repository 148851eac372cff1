//! Dichotomized measurements on d×d systems (d ≤ 4).
//!
//! Outcomes `0..ξ` of a projective measurement count as bit 0 and `ξ..d` as
//! bit 1. Eve's information is computed from a purification of `ρ_AB`.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{run_pipeline, McParams};
use crate::bell::BellInequality;
use crate::entropy::h;
use crate::error::{Error, Result};
use crate::montecarlo::{
    domain, draw_state, mutual_curve, stream_rng, upper_boundary, upper_boundary_on,
    BoundaryCurve, CloudKind, SampleCloud,
};
use crate::optimize::OptimizerConfig;
use crate::quantum::{qber_from_ideal, BellDiagonalState, EfficiencySetup};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 4;
const STATE_TOL: f64 = 1e-10;
const ZERO_PROB: f64 = 1e-12;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn check_dim(d: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(Error::OutOfRange(format!("dimension {d} not in {MIN_DIM}..={MAX_DIM}")));
    }
    Ok(())
}

fn check_xi(xi: usize, d: usize) -> Result<()> {
    if xi < 1 || xi >= d {
        return Err(Error::OutOfRange(format!("ξ = {xi} not in 1..={}", d - 1)));
    }
    Ok(())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and matching eigenvectors of a Hermitian matrix.
fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let herm = (m + m.adjoint()) * c(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Von Neumann entropy in bits of a (possibly unnormalized) Hermitian matrix
/// after normalization to unit trace.
pub fn von_neumann(m: &CMat) -> f64 {
    let (vals, _) = eigh(m);
    let tr: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    if tr <= 0.0 {
        return 0.0;
    }
    -vals
        .iter()
        .map(|v| v.max(0.0) / tr)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Bell-diagonal qubit pairs.
    BellDiagonal,
    /// Mixtures of the three example pure states.
    Examples,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighDimState {
    d: usize,
    density: CMat,
    family: Family,
}

impl HighDimState {
    /// Validates Hermiticity, unit trace and positivity (tolerance 1e-10).
    pub fn new(d: usize, density: CMat, family: Family) -> Result<Self> {
        check_dim(d)?;
        let n = d * d;
        if density.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} density matrix"),
                got: format!("{}x{}", density.nrows(), density.ncols()),
            });
        }
        if max_abs(&(&density - density.adjoint())) > STATE_TOL {
            return Err(Error::InvalidState("density matrix not Hermitian".into()));
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let (vals, _) = eigh(&density);
        if vals[0] < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", vals[0])));
        }
        Ok(Self { d, density, family })
    }

    /// `|ψ⟩⟨ψ|` for amplitudes over the basis `|i⟩|m⟩ ↦ i·d + m`.
    pub fn pure(d: usize, amplitudes: &[C64], family: Family) -> Result<Self> {
        check_dim(d)?;
        if amplitudes.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: format!("{} amplitudes", d * d),
                got: amplitudes.len().to_string(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(d, &v * v.adjoint(), family)
    }

    /// The qubit state `Σ Λ_k |Φ_k⟩⟨Φ_k|` written out as a 4×4 matrix.
    pub fn from_bell_diagonal(state: &BellDiagonalState) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vectors: [[f64; 4]; 4] = [
            [s, 0.0, 0.0, s],
            [s, 0.0, 0.0, -s],
            [0.0, s, s, 0.0],
            [0.0, s, -s, 0.0],
        ];
        let lambda = state.lambda();
        let density = CMat::from_fn(4, 4, |r, k| {
            c((0..4).map(|t| lambda[t] * vectors[t][r] * vectors[t][k]).sum())
        });
        Self {
            d: 2,
            density,
            family: Family::BellDiagonal,
        }
    }

    /// `Σ_i |ii⟩/√d`.
    pub fn maximally_entangled(d: usize) -> Result<Self> {
        Self::pure(d, &example_vectors(d)?[0], Family::Examples)
    }

    /// `Σ w_k |ψ_k⟩⟨ψ_k|` over the three example vectors.
    pub fn example_mixture(d: usize, weights: [f64; 3]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(sum));
        }
        let vs = example_vectors(d)?;
        let n = d * d;
        let mut density = CMat::zeros(n, n);
        for (w, v) in weights.iter().zip(&vs) {
            let v = nalgebra::DVector::from_column_slice(v);
            density += &v * v.adjoint() * c(*w);
        }
        Self::new(d, density, Family::Examples)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn density(&self) -> &CMat {
        &self.density
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn reduced_a(&self) -> CMat {
        partial_trace_b(&self.density, &CMat::identity(self.d, self.d), self.d)
    }

    pub fn reduced_b(&self) -> CMat {
        partial_trace_a(&self.density, &CMat::identity(self.d, self.d), self.d)
    }
}

/// `Σ|ii⟩/√d`, `(|00⟩ + |d−1,d−1⟩)/√2` and `(|00⟩ + |1,d−1⟩)/√2`.
pub fn example_vectors(d: usize) -> Result<[Vec<C64>; 3]> {
    check_dim(d)?;
    let idx = |i: usize, m: usize| i * d + m;
    let mut max_ent = vec![c(0.0); d * d];
    for i in 0..d {
        max_ent[idx(i, i)] = c(1.0 / (d as f64).sqrt());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut corner = vec![c(0.0); d * d];
    corner[idx(0, 0)] = c(s);
    corner[idx(d - 1, d - 1)] = c(s);
    let mut skew = vec![c(0.0); d * d];
    skew[idx(0, 0)] = c(s);
    skew[idx(1, d - 1)] = c(s);
    Ok([max_ent, corner, skew])
}

/// `tr_B[ρ (1 ⊗ B)]`.
pub fn partial_trace_b(rho: &CMat, b: &CMat, d: usize) -> CMat {
    CMat::from_fn(d, d, |i, j| {
        let mut s = c(0.0);
        for m in 0..d {
            for n in 0..d {
                s += rho[(i * d + m, j * d + n)] * b[(n, m)];
            }
        }
        s
    })
}

/// `tr_A[ρ (A ⊗ 1)]`.
pub fn partial_trace_a(rho: &CMat, a: &CMat, d: usize) -> CMat {
    CMat::from_fn(d, d, |m, n| {
        let mut s = c(0.0);
        for i in 0..d {
            for j in 0..d {
                s += rho[(i * d + m, j * d + n)] * a[(j, i)];
            }
        }
        s
    })
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * c(std::f64::consts::FRAC_1_SQRT_2)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..d {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 { diag / c(diag.norm()) } else { c(1.0) };
        for row in 0..d {
            u[(row, k)] *= phase;
        }
    }
    u
}

/// `U` with the columns of `0..ξ` grouped into outcome 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedProjector {
    pub xi: usize,
    pub unitary: CMat,
}

impl PartitionedProjector {
    pub fn d(&self) -> usize {
        self.unitary.nrows()
    }

    fn block(&self, cols: std::ops::Range<usize>) -> CMat {
        let d = self.d();
        let mut p = CMat::zeros(d, d);
        for t in cols {
            let col = self.unitary.column(t);
            p += &col * col.adjoint();
        }
        p
    }

    /// `Σ_{t<ξ} U|t⟩⟨t|U†`.
    pub fn p0(&self) -> CMat {
        self.block(0..self.xi)
    }

    /// `Σ_{t≥ξ} U|t⟩⟨t|U†`.
    pub fn p1(&self) -> CMat {
        self.block(self.xi..self.d())
    }

    /// Rank-1 projector `U|a⟩⟨a|U†`.
    pub fn outcome(&self, a: usize) -> CMat {
        self.block(a..a + 1)
    }
}

pub fn partition_projectors(xi: usize, unitary: &CMat, d: usize) -> Result<PartitionedProjector> {
    check_dim(d)?;
    check_xi(xi, d)?;
    if unitary.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d} unitary"),
            got: format!("{}x{}", unitary.nrows(), unitary.ncols()),
        });
    }
    if max_abs(&(unitary.adjoint() * unitary - CMat::identity(d, d))) > 1e-8 {
        return Err(Error::InvalidState("matrix is not unitary".into()));
    }
    Ok(PartitionedProjector {
        xi,
        unitary: unitary.clone(),
    })
}

fn degraded(p0: &CMat, eta: f64) -> CMat {
    let d = p0.nrows();
    p0 * c(eta) + CMat::identity(d, d) * c(1.0 - eta)
}

/// Bell value with outcome-0 projectors `alice[i]`, `bob[j]` after efficiency loss.
pub fn bell_value_highdim(
    ineq: &BellInequality,
    state: &HighDimState,
    eff: &EfficiencySetup,
    alice: &[CMat],
    bob: &[CMat],
) -> f64 {
    let d = state.d;
    let rho = &state.density;
    let bt: Vec<CMat> = bob.iter().map(|b| degraded(b, eff.eta_b)).collect();
    let at: Vec<CMat> = alice.iter().map(|a| degraded(a, eff.eta_a)).collect();
    let (rho_a, rho_b) = (state.reduced_a(), state.reduced_b());
    let mut total = 0.0;
    for (j, b) in bt.iter().enumerate() {
        let m = partial_trace_b(rho, b, d);
        for (i, a) in at.iter().enumerate() {
            let coef = ineq.joint(i, j);
            if coef != 0.0 {
                total += coef * (a * &m).trace().re;
            }
        }
        total += ineq.bob_marg()[j] * (&rho_b * b).trace().re;
    }
    for (i, a) in at.iter().enumerate() {
        total += ineq.alice_marg()[i] * (&rho_a * a).trace().re;
    }
    total
}

#[derive(Debug, Clone)]
pub struct HighDimViolation {
    pub q: f64,
    pub alice: Vec<PartitionedProjector>,
    pub bob: Vec<PartitionedProjector>,
    pub converged: bool,
}

/// Best ξ-split of an effective operator: its top-ξ eigenvectors come first.
fn top_split(w: &CMat, xi: usize) -> PartitionedProjector {
    let (_, vecs) = eigh(w);
    let d = w.nrows();
    let unitary = CMat::from_fn(d, d, |r, k| vecs[(r, d - 1 - k)]);
    PartitionedProjector { xi, unitary }
}

/// The ξ-split nearest to `P + step·(P − P_old)` for the outcome-0 projectors.
fn extrapolated(new: &PartitionedProjector, old: &PartitionedProjector, step: f64) -> PartitionedProjector {
    let p = new.p0();
    let target = &p + (&p - old.p0()) * c(step);
    top_split(&((&target + target.adjoint()) * c(0.5)), new.xi)
}

/// Maximal Bell value over ξ-partitioned projective measurements, by see-saw.
pub fn violation_highdim<R: Rng + ?Sized>(
    ineq: &BellInequality,
    state: &HighDimState,
    xi: usize,
    eff: &EfficiencySetup,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<HighDimViolation> {
    cfg.validate()?;
    let d = state.d;
    check_xi(xi, d)?;
    let rho = &state.density;
    let (rho_a, rho_b) = (state.reduced_a(), state.reduced_b());
    let mut best: Option<HighDimViolation> = None;
    for _ in 0..cfg.restarts {
        let mut alice: Vec<PartitionedProjector> = (0..ineq.m_a())
            .map(|_| PartitionedProjector { xi, unitary: haar_unitary(d, rng) })
            .collect();
        let mut bob: Vec<PartitionedProjector> = (0..ineq.m_b())
            .map(|_| PartitionedProjector { xi, unitary: haar_unitary(d, rng) })
            .collect();
        let value_of = |a: &[PartitionedProjector], b: &[PartitionedProjector]| {
            let a: Vec<CMat> = a.iter().map(PartitionedProjector::p0).collect();
            let b: Vec<CMat> = b.iter().map(PartitionedProjector::p0).collect();
            bell_value_highdim(ineq, state, eff, &a, &b)
        };
        let sweep = |alice: &mut [PartitionedProjector], bob: &mut [PartitionedProjector]| {
            if eff.eta_a != 0.0 {
                let ms: Vec<CMat> = bob
                    .iter()
                    .map(|b| partial_trace_b(rho, &degraded(&b.p0(), eff.eta_b), d))
                    .collect();
                for (i, a) in alice.iter_mut().enumerate() {
                    let mut w = &rho_a * c(ineq.alice_marg()[i]);
                    for (j, m) in ms.iter().enumerate() {
                        w += m * c(ineq.joint(i, j));
                    }
                    *a = top_split(&w, xi);
                }
            }
            if eff.eta_b != 0.0 {
                let ns: Vec<CMat> = alice
                    .iter()
                    .map(|a| partial_trace_a(rho, &degraded(&a.p0(), eff.eta_a), d))
                    .collect();
                for (j, b) in bob.iter_mut().enumerate() {
                    let mut w = &rho_b * c(ineq.bob_marg()[j]);
                    for (i, n) in ns.iter().enumerate() {
                        w += n * c(ineq.joint(i, j));
                    }
                    *b = top_split(&w, xi);
                }
            }
        };
        let mut value = value_of(&alice, &bob);
        let mut converged = false;
        let mut last_gain = f64::INFINITY;
        for _ in 0..cfg.max_iters {
            let prev = (alice.clone(), bob.clone());
            sweep(&mut alice, &mut bob);
            let mut next = value_of(&alice, &bob);
            let plain_gain = next - value;
            if plain_gain > cfg.tol && plain_gain > 0.5 * last_gain && plain_gain < last_gain {
                // same geometric extrapolation as the qubit see-saw
                let rho_step = (plain_gain / last_gain).sqrt();
                let step = (rho_step / (1.0 - rho_step)).min(100.0);
                let mut ta: Vec<_> = alice.iter().zip(&prev.0).map(|(n, o)| extrapolated(n, o, step)).collect();
                let mut tb: Vec<_> = bob.iter().zip(&prev.1).map(|(n, o)| extrapolated(n, o, step)).collect();
                sweep(&mut ta, &mut tb);
                let v = value_of(&ta, &tb);
                if v > next {
                    (alice, bob, next) = (ta, tb, v);
                }
            }
            let gain = next - value;
            value = value.max(next);
            if gain <= cfg.tol {
                converged = true;
                break;
            }
            last_gain = plain_gain;
        }
        if best.as_ref().map_or(true, |b| value > b.q) {
            best = Some(HighDimViolation {
                q: value,
                alice,
                bob,
                converged,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Key-basis error rate for the computational ξ-split, through the usual
/// two-efficiency map.
pub fn qber_highdim(state: &HighDimState, xi: usize, eff: &EfficiencySetup) -> Result<f64> {
    let d = state.d;
    check_xi(xi, d)?;
    let split = PartitionedProjector {
        xi,
        unitary: CMat::identity(d, d),
    };
    let (p0, p1) = (split.p0(), split.p1());
    let err = p0.kronecker(&p1) + p1.kronecker(&p0);
    let eps = (&err * &state.density).trace().re;
    Ok(qber_from_ideal(eps.clamp(0.0, 1.0), eff))
}

pub fn gamma_highdim(state: &HighDimState, xi: usize, eff: &EfficiencySetup) -> Result<f64> {
    Ok(1.0 - h(qber_highdim(state, xi, eff)?))
}

/// `|ψ⟩_ABE = Σ_k √λ_k |φ_k⟩|k⟩` stored as the d²×r matrix `Ψ[x, k]`.
#[derive(Debug, Clone)]
pub struct Purification {
    d: usize,
    psi: CMat,
}

pub fn purify(state: &HighDimState) -> Purification {
    let (vals, vecs) = eigh(&state.density);
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > 1e-14).collect();
    let n = state.d * state.d;
    let psi = CMat::from_fn(n, keep.len(), |x, k| vecs[(x, keep[k])] * c(vals[keep[k]].sqrt()));
    Purification { d: state.d, psi }
}

impl Purification {
    /// Dimension of Eve's system.
    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    /// `ρ_AB = ΨΨ†`.
    pub fn rho_ab(&self) -> CMat {
        &self.psi * self.psi.adjoint()
    }

    /// `ρ_E = tr_AB |ψ⟩⟨ψ|`.
    pub fn rho_e(&self) -> CMat {
        (self.psi.adjoint() * &self.psi).transpose()
    }

    /// Unnormalized `tr_AB[(A ⊗ 1_BE)|ψ⟩⟨ψ|]`.
    pub fn conditional(&self, alice_op: &CMat) -> CMat {
        let op = alice_op.kronecker(&CMat::identity(self.d, self.d));
        (self.psi.adjoint() * op * &self.psi).transpose()
    }

    /// `(⟨u| ⊗ 1_B) Ψ`; its Gram matrix shares the spectrum of the
    /// conditional state for the rank-1 outcome `|u⟩⟨u|`.
    fn branch(&self, u: nalgebra::DVectorView<C64>) -> CMat {
        let d = self.d;
        CMat::from_fn(d, self.rank(), |m, k| {
            (0..d).map(|i| u[i].conj() * self.psi[(i * d + m, k)]).sum()
        })
    }
}

/// Weights `q_a` with each half of the ξ-split summing to 1/2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EveWeights {
    q: Vec<f64>,
}

impl EveWeights {
    pub fn new(q: Vec<f64>, xi: usize) -> Result<Self> {
        check_dim(q.len())?;
        check_xi(xi, q.len())?;
        let (lo, hi) = q.split_at(xi);
        let (s0, s1): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
        if q.iter().any(|&x| x < 0.0) || (s0 - 0.5).abs() > 1e-9 || (s1 - 0.5).abs() > 1e-9 {
            return Err(Error::NotNormalized(s0 + s1));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Every weight vector on the grid of step `1/denominator`.
    pub fn grid(d: usize, xi: usize, denominator: usize) -> Result<Vec<Self>> {
        check_dim(d)?;
        check_xi(xi, d)?;
        if denominator < 2 || denominator % 2 != 0 {
            return Err(Error::OutOfRange(format!(
                "weight grid denominator {denominator} must be even and at least 2"
            )));
        }
        let half = denominator / 2;
        let left = compositions(half, xi);
        let right = compositions(half, d - xi);
        let step = 1.0 / denominator as f64;
        let mut out = Vec::with_capacity(left.len() * right.len());
        for l in &left {
            for r in &right {
                let q = l.iter().chain(r).map(|&k| k as f64 * step).collect();
                out.push(Self { q });
            }
        }
        Ok(out)
    }
}

/// All ways to write `total` as an ordered sum of `parts` non-negative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Purification and `S(ρ_E)` cached for repeated Holevo evaluations.
struct HolevoContext {
    pur: Purification,
    s_e: f64,
}

impl HolevoContext {
    fn new(state: &HighDimState) -> Self {
        let pur = purify(state);
        let s_e = von_neumann(&pur.rho_e());
        Self { pur, s_e }
    }

    /// `S(ρ_{E|a})` per rank-1 outcome; `None` where the outcome has zero probability.
    fn conditional_entropies(&self, unitary: &CMat) -> Vec<Option<f64>> {
        (0..self.pur.d)
            .map(|a| {
                let k = self.pur.branch(unitary.column(a));
                let gram = &k * k.adjoint();
                let p = gram.trace().re;
                (p > ZERO_PROB).then(|| von_neumann(&gram))
            })
            .collect()
    }

    fn chi(entropies: &[Option<f64>], s_e: f64, weights: &EveWeights) -> Result<f64> {
        let mut total = 0.0;
        for (a, (&q, s)) in weights.q.iter().zip(entropies).enumerate() {
            if q > 0.0 {
                total += q * s.ok_or(Error::DegenerateConditioning { outcome: a })?;
            }
        }
        Ok(s_e - total)
    }

    /// Best value over a weight grid; `None` if every grid point conditions on
    /// a zero-probability outcome.
    fn best_over(&self, unitary: &CMat, grid: &[EveWeights]) -> Option<(f64, usize)> {
        let ents = self.conditional_entropies(unitary);
        grid.iter()
            .enumerate()
            .filter_map(|(k, w)| Self::chi(&ents, self.s_e, w).ok().map(|v| (v, k)))
            .fold(None, |best, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            })
    }
}

/// `χ = S(ρ_E) − Σ_a q_a S(ρ_{E|a})` for Alice's rank-1 outcomes `U|a⟩`.
pub fn holevo_highdim(
    state: &HighDimState,
    xi: usize,
    alice_unitary: &CMat,
    weights: &EveWeights,
) -> Result<f64> {
    let d = state.d;
    partition_projectors(xi, alice_unitary, d)?;
    EveWeights::new(weights.q.clone(), xi)?;
    let ctx = HolevoContext::new(state);
    HolevoContext::chi(&ctx.conditional_entropies(alice_unitary), ctx.s_e, weights)
}

/// Search budget for maximizing `χ` over Alice's basis and Eve's weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolevoSearch {
    /// Haar-random starting bases, in addition to the computational basis.
    pub unitary_restarts: usize,
    /// Eve's weights are enumerated in steps of `1/weight_denominator`.
    pub weight_denominator: usize,
    /// Objective evaluations per local search.
    pub max_evals: usize,
}

impl Default for HolevoSearch {
    fn default() -> Self {
        Self {
            unitary_restarts: 4,
            weight_denominator: 8,
            max_evals: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HolevoMax {
    pub chi: f64,
    pub unitary: CMat,
    pub weights: EveWeights,
}

/// Local random search over bases from several starts; a lower bound on the
/// supremum.
pub fn max_holevo_highdim<R: Rng + ?Sized>(
    state: &HighDimState,
    xi: usize,
    search: &HolevoSearch,
    rng: &mut R,
) -> Result<HolevoMax> {
    let d = state.d;
    let grid = EveWeights::grid(d, xi, search.weight_denominator)?;
    let ctx = HolevoContext::new(state);
    let eval = |u: &CMat| ctx.best_over(u, &grid).map_or((f64::NEG_INFINITY, 0), |b| b);
    let mut best: Option<(f64, CMat, usize)> = None;
    for start in 0..=search.unitary_restarts {
        let mut u = if start == 0 {
            CMat::identity(d, d)
        } else {
            haar_unitary(d, rng)
        };
        let (mut val, mut wk) = eval(&u);
        let mut sigma = 0.5;
        let mut fails = 0;
        let patience = 2 * d * d;
        for _ in 0..search.max_evals {
            if sigma < 1e-6 {
                break;
            }
            let g = CMat::from_fn(d, d, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im) * c(sigma)
            });
            let cand = (&u + g).qr().q();
            let (v, k) = eval(&cand);
            if v > val {
                u = cand;
                val = v;
                wk = k;
                fails = 0;
            } else {
                fails += 1;
                if fails >= patience {
                    sigma *= 0.5;
                    fails = 0;
                }
            }
        }
        if best.as_ref().map_or(true, |b| val > b.0) {
            best = Some((val, u, wk));
        }
    }
    let (chi, unitary, wk) = best.expect("at least one start");
    if !chi.is_finite() {
        return Err(Error::DegenerateConditioning { outcome: 0 });
    }
    Ok(HolevoMax {
        chi,
        unitary,
        weights: grid[wk].clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    BellDiagonal,
    Examples,
}

/// Settings for the high-dimensional clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct HighDimParams {
    pub samples: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub search: HolevoSearch,
    /// Width of the violation bin used by [`ie_highdim`].
    pub bin_width: f64,
}

impl Default for HighDimParams {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            optimizer: OptimizerConfig {
                restarts: 8,
                ..OptimizerConfig::default()
            },
            search: HolevoSearch::default(),
            bin_width: 0.005,
        }
    }
}

/// One state of `family` in dimension `d`.
pub fn draw_highdim_state<R: Rng + ?Sized>(family: StateFamily, d: usize, rng: &mut R) -> Result<HighDimState> {
    match family {
        StateFamily::BellDiagonal => {
            if d != 2 {
                return Err(Error::OutOfRange("Bell-diagonal family needs d = 2".into()));
            }
            Ok(HighDimState::from_bell_diagonal(&draw_state(rng, false)))
        }
        StateFamily::Examples => {
            let w: [f64; 3] = std::array::from_fn(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln());
            let sum: f64 = w.iter().sum();
            HighDimState::example_mixture(d, w.map(|x| x / sum))
        }
    }
}

fn highdim_rng(params: &HighDimParams, d: usize, xi: usize, kind: u64, i: u64) -> rand_chacha::ChaCha8Rng {
    let index = ((d as u64) << 48) | ((xi as u64) << 40) | (kind << 36) | i;
    stream_rng(params.seed, domain::HIGHDIM, index)
}

/// `(Q^(ξ), max χ^(ξ))` at ideal efficiency.
pub fn highdim_eaves_cloud(
    ineq: &BellInequality,
    d: usize,
    xi: usize,
    family: StateFamily,
    params: &HighDimParams,
) -> Result<SampleCloud> {
    let ideal = EfficiencySetup::ideal();
    let points: Vec<Option<(f64, f64)>> = (0..params.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = highdim_rng(params, d, xi, 0, i);
            let state = draw_highdim_state(family, d, &mut rng)?;
            let q = violation_highdim(ineq, &state, xi, &ideal, &params.optimizer, &mut rng)?.q;
            if q <= 0.0 {
                return Ok(None);
            }
            let chi = max_holevo_highdim(&state, xi, &params.search, &mut rng)?.chi;
            Ok(Some((q, chi)))
        })
        .collect::<Result<_>>()?;
    Ok(SampleCloud {
        kind: CloudKind::Eaves,
        points: points.into_iter().flatten().collect(),
        eff: ideal,
        seed: params.seed,
    })
}

/// `(Q^(ξ), Γ^(ξ))` at efficiency `eff`.
pub fn highdim_mutual_cloud(
    ineq: &BellInequality,
    d: usize,
    xi: usize,
    family: StateFamily,
    eff: &EfficiencySetup,
    params: &HighDimParams,
) -> Result<SampleCloud> {
    let points: Vec<Option<(f64, f64)>> = (0..params.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = highdim_rng(params, d, xi, 1, i);
            let state = draw_highdim_state(family, d, &mut rng)?;
            let q = violation_highdim(ineq, &state, xi, eff, &params.optimizer, &mut rng)?.q;
            if q <= 0.0 {
                return Ok(None);
            }
            Ok(Some((q, gamma_highdim(&state, xi, eff)?)))
        })
        .collect::<Result<_>>()?;
    Ok(SampleCloud {
        kind: CloudKind::Mutual,
        points: points.into_iter().flatten().collect(),
        eff: *eff,
        seed: params.seed,
    })
}

/// Largest `χ^(ξ)` over family states whose `Q^(ξ)` lies within
/// `bin_width/2` of `q_value`. A lower bound on Eve's information.
pub fn ie_highdim(
    ineq: &BellInequality,
    d: usize,
    xi: usize,
    q_value: f64,
    family: StateFamily,
    params: &HighDimParams,
) -> Result<f64> {
    check_dim(d)?;
    check_xi(xi, d)?;
    let (lo, hi) = (q_value - 0.5 * params.bin_width, q_value + 0.5 * params.bin_width);
    let ideal = EfficiencySetup::ideal();
    let found: Vec<Option<f64>> = (0..params.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = highdim_rng(params, d, xi, 2, i);
            let state = draw_highdim_state(family, d, &mut rng)?;
            let q = violation_highdim(ineq, &state, xi, &ideal, &params.optimizer, &mut rng)?.q;
            if q < lo || q > hi {
                return Ok(None);
            }
            Ok(Some(max_holevo_highdim(&state, xi, &params.search, &mut rng)?.chi))
        })
        .collect::<Result<_>>()?;
    found
        .into_iter()
        .flatten()
        .reduce(f64::max)
        .ok_or(Error::EmptyStateSet { lo, hi })
}

/// One `(d, ξ)` contribution to the key-rate minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTerm {
    pub d: usize,
    pub xi: usize,
    pub ie: Option<f64>,
    pub iab: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateMin {
    pub q: f64,
    pub rate: f64,
    /// `(d, ξ)` attaining the minimum.
    pub arg_min: (usize, usize),
    pub terms: Vec<RateTerm>,
}

impl KeyRateMin {
    /// CSV with header `d,xi,q,ie,iab,rate`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(w, "d,xi,q,ie,iab,rate")?;
        for t in &self.terms {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t.d,
                t.xi,
                self.q,
                cell(t.ie),
                cell(t.iab),
                cell(t.rate)
            )?;
        }
        Ok(())
    }
}

fn term_at(d: usize, xi: usize, ie: &BoundaryCurve, iab: &BoundaryCurve, k: usize) -> RateTerm {
    let e = ie.filled()[k].0;
    let a = iab.filled()[k].0;
    let rate = match (e, a) {
        (Some(e), Some(a)) => Some(a - e),
        _ => None,
    };
    RateTerm { d, xi, ie: e, iab: a, rate }
}

/// `min over d ≤ d_max, ξ < d` of `I_AB^(ξ) − I_E^(ξ)` at violation `q`.
///
/// The d = 2 term comes from the Bell-diagonal pipeline; higher dimensions use
/// the example family and are skipped where their curves leave `q` empty.
pub fn key_rate_min(
    ineq: &BellInequality,
    d_max: usize,
    q: f64,
    eff: &EfficiencySetup,
    base: &McParams,
    params: &HighDimParams,
) -> Result<KeyRateMin> {
    check_dim(d_max)?;
    let run = run_pipeline(ineq, eff, base)?;
    let k = run.ie.bin_of(q).ok_or(Error::EmptyStateSet {
        lo: run.ie.lo(),
        hi: run.ie.hi(),
    })?;
    let base_term = term_at(2, 1, &run.ie, &run.iab, k);
    if base_term.rate.is_none() {
        return Err(Error::EmptyStateSet {
            lo: run.ie.bin_edges[k],
            hi: run.ie.bin_edges[k + 1],
        });
    }
    let mut terms = vec![base_term];
    for d in 3..=d_max {
        for xi in 1..d {
            let eaves = highdim_eaves_cloud(ineq, d, xi, StateFamily::Examples, params)?;
            let ie = upper_boundary_on(&eaves, &run.ie);
            if ie.occupied_count() == 0 {
                terms.push(RateTerm { d, xi, ie: None, iab: None, rate: None });
                continue;
            }
            let mutual = highdim_mutual_cloud(ineq, d, xi, StateFamily::Examples, eff, params)?;
            let term = match mutual_curve(&mutual, &ie, base.bins) {
                Ok(iab) => term_at(d, xi, &ie, &iab, k),
                Err(Error::NoOverlap(_)) => RateTerm { d, xi, ie: ie.filled()[k].0, iab: None, rate: None },
                Err(e) => return Err(e),
            };
            terms.push(term);
        }
    }
    let (rate, arg_min) = terms
        .iter()
        .filter_map(|t| t.rate.map(|r| (r, (t.d, t.xi))))
        .fold(None, |best: Option<(f64, (usize, usize))>, cur| match best {
            Some(b) if b.0 <= cur.0 => Some(b),
            _ => Some(cur),
        })
        .expect("base term present");
    Ok(KeyRateMin { q, rate, arg_min, terms })
}

/// Standalone `I_E^(ξ)` curve from a high-dimensional EAVES cloud.
pub fn ie_curve_highdim(cloud: &SampleCloud, bins: usize) -> Result<BoundaryCurve> {
    upper_boundary(cloud, bins)
}

/// Random full-rank mixed state `GG†/tr(GG†)` with complex Gaussian `G`.
pub fn random_mixed_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<HighDimState> {
    check_dim(d)?;
    let n = d * d;
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut rho = m * c(1.0 / tr);
    rho = (&rho + rho.adjoint()) * c(0.5);
    HighDimState::new(d, rho, Family::Custom)
}
