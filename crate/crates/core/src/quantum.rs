//! Qubit-pair model: Bell-diagonal states, rank-1 projective measurements and
//! the detection-efficiency map.
//!
//! Two-qubit operators are handled in the Pauli basis. A state is stored as its
//! real correlation matrix `R[k][l] = tr(ρ σ_k ⊗ σ_l)` with `σ_0 = 1`, which turns
//! every trace in the model into a small quadratic form.

use std::f64::consts::PI;

use crate::bell::ProbabilityTable;
use crate::error::{Error, Result};

/// Tolerance on the simplex constraint of Bell-diagonal weights.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// `ρ = Σ Λ_k |Φ_k⟩⟨Φ_k|` with `Φ_0,1 = (|00⟩ ± |11⟩)/√2`, `Φ_2,3 = (|01⟩ ± |10⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonalState {
    lambda: [f64; 4],
}

impl BellDiagonalState {
    pub fn new(lambda: [f64; 4]) -> Result<Self> {
        if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidState(format!(
                "Bell-diagonal weights must be nonnegative, got {lambda:?}"
            )));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!(
                "Bell-diagonal weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { lambda })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_unnormalized(w: [f64; 4]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) || w.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize {w:?}")));
        }
        let mut lambda = w.map(|x| x / sum);
        // absorb rounding into the largest weight
        let resid = 1.0 - lambda.iter().sum::<f64>();
        let k = (0..4)
            .max_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
            .unwrap_or(0);
        lambda[k] += resid;
        Self::new(lambda)
    }

    pub fn phi0() -> Self {
        Self {
            lambda: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn maximally_mixed() -> Self {
        Self { lambda: [0.25; 4] }
    }

    pub fn lambda(&self) -> [f64; 4] {
        self.lambda
    }

    /// Diagonal of the correlation matrix, `(⟨XX⟩, ⟨YY⟩, ⟨ZZ⟩)`.
    pub fn correlations(&self) -> [f64; 3] {
        let [l0, l1, l2, l3] = self.lambda;
        [l0 - l1 + l2 - l3, -l0 + l1 + l2 - l3, l0 + l1 - l2 - l3]
    }

    /// Ideal QBER of the ẑ-ẑ key measurement, `Λ2 + Λ3`.
    pub fn ideal_qber(&self) -> f64 {
        self.lambda[2] + self.lambda[3]
    }

    /// Same state with `Λ1 = Λ2` enforced by averaging the two weights.
    pub fn symmetrized(&self) -> Self {
        let [l0, l1, l2, l3] = self.lambda;
        let m = 0.5 * (l1 + l2);
        Self {
            lambda: [l0, m, m, l3],
        }
    }

    pub fn pauli(&self) -> PauliState {
        let [tx, ty, tz] = self.correlations();
        let mut r = [[0.0; 4]; 4];
        r[0][0] = 1.0;
        r[1][1] = tx;
        r[2][2] = ty;
        r[3][3] = tz;
        PauliState { r }
    }
}

/// Two-qubit state in Pauli-correlation form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliState {
    r: [[f64; 4]; 4],
}

impl PauliState {
    /// Builds from a correlation matrix; `r[0][0]` must be 1.
    pub fn from_correlations(r: [[f64; 4]; 4]) -> Result<Self> {
        if (r[0][0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState("tr ρ must be 1".into()));
        }
        Ok(Self { r })
    }

    #[inline]
    pub fn r(&self) -> &[[f64; 4]; 4] {
        &self.r
    }

    /// `tr(ρ X ⊗ Y)` for single-qubit operators given by their Pauli traces
    /// `x_k = tr(σ_k X)`, `y_l = tr(σ_l Y)`.
    #[inline]
    pub fn expect(&self, x: &[f64; 4], y: &[f64; 4]) -> f64 {
        let mut s = 0.0;
        for k in 0..4 {
            let mut row = 0.0;
            for l in 0..4 {
                row += self.r[k][l] * y[l];
            }
            s += x[k] * row;
        }
        0.25 * s
    }
}

/// Rank-1 qubit projector onto `|+n̂⟩ = cos(θ/2)|0⟩ + sin(θ/2)e^{iφ}|1⟩`
/// (outcome 0); outcome 1 is the orthogonal `|−n̂⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitProjector {
    theta: f64,
    phi: f64,
}

impl QubitProjector {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::OutOfRange(format!("θ = {theta} not in [0, π]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::OutOfRange(format!("φ = {phi} not in [0, 2π)")));
        }
        Ok(Self { theta, phi })
    }

    /// The ẑ-axis key-generation measurement.
    pub fn z() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    /// Projector whose outcome-0 Bloch vector points along `v` (normalized).
    pub fn from_bloch(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 {
            return Self::z();
        }
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        let theta = z.acos();
        let mut phi = v[1].atan2(v[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Bloch vector of the outcome-0 projector.
    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Pauli traces `tr(σ_k p̂^(a))` of the projector for outcome `a`.
    pub fn pauli(&self, a: usize) -> [f64; 4] {
        let n = self.bloch();
        let s = if a == 0 { 1.0 } else { -1.0 };
        [1.0, s * n[0], s * n[1], s * n[2]]
    }
}

/// Per-party, per-setting measurement directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScenario {
    pub alice: Vec<QubitProjector>,
    pub bob: Vec<QubitProjector>,
}

impl MeasurementScenario {
    pub fn new(alice: Vec<QubitProjector>, bob: Vec<QubitProjector>) -> Self {
        Self { alice, bob }
    }

    pub fn m_a(&self) -> usize {
        self.alice.len()
    }

    pub fn m_b(&self) -> usize {
        self.bob.len()
    }
}

/// Detection efficiencies of Alice's and Bob's devices.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EfficiencySetup {
    pub eta_a: f64,
    pub eta_b: f64,
}

impl EfficiencySetup {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        for (who, eta) in [("eta_a", eta_a), ("eta_b", eta_b)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::OutOfRange(format!("{who} = {eta} not in [0, 1]")));
            }
        }
        Ok(Self { eta_a, eta_b })
    }

    pub fn ideal() -> Self {
        Self {
            eta_a: 1.0,
            eta_b: 1.0,
        }
    }

    /// `η_A = η_B = η`.
    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    /// `η_A = 1`, `η_B = η`.
    pub fn asymmetric(eta: f64) -> Result<Self> {
        Self::new(1.0, eta)
    }

    pub fn is_ideal(&self) -> bool {
        self.eta_a == 1.0 && self.eta_b == 1.0
    }

    /// Pauli traces of the degraded outcome-0 operator `η p̂ + (1 − η)`.
    #[inline]
    pub(crate) fn degrade(eta: f64, bloch: &[f64; 3]) -> [f64; 4] {
        [
            2.0 - eta,
            eta * bloch[0],
            eta * bloch[1],
            eta * bloch[2],
        ]
    }
}

/// `P(a,b|i,j) = tr[(p̂_a ⊗ p̂_b) ρ]` for a Bell-diagonal state.
pub fn joint_table(state: &BellDiagonalState, scenario: &MeasurementScenario) -> ProbabilityTable {
    joint_table_pauli(&state.pauli(), scenario)
}

/// Joint table for a general two-qubit state.
pub fn joint_table_pauli(state: &PauliState, scenario: &MeasurementScenario) -> ProbabilityTable {
    let alice: Vec<[[f64; 4]; 2]> = scenario
        .alice
        .iter()
        .map(|p| [p.pauli(0), p.pauli(1)])
        .collect();
    let bob: Vec<[[f64; 4]; 2]> = scenario
        .bob
        .iter()
        .map(|p| [p.pauli(0), p.pauli(1)])
        .collect();
    ProbabilityTable::from_fn_unchecked(scenario.m_a(), scenario.m_b(), |a, b, i, j| {
        state.expect(&alice[i][a], &bob[j][b]).clamp(0.0, 1.0)
    })
}

/// Detection-inefficiency map: undetected events are reported as outcome 0.
///
/// `P → η_Aη_B P + δ_a0 (1−η_A)η_B P_B(b|j) + δ_b0 η_A(1−η_B) P_A(a|i)
///      + δ_a0 δ_b0 (1−η_A)(1−η_B)`.
pub fn apply_efficiency(table: &ProbabilityTable, eff: &EfficiencySetup) -> ProbabilityTable {
    let (ea, eb) = (eff.eta_a, eff.eta_b);
    let delta = |x: usize| if x == 0 { 1.0 } else { 0.0 };
    ProbabilityTable::from_fn_unchecked(table.m_a(), table.m_b(), |a, b, i, j| {
        ea * eb * table.p(a, b, i, j)
            + delta(a) * (1.0 - ea) * eb * table.bob_marginal(b, j)
            + delta(b) * ea * (1.0 - eb) * table.alice_marginal(a, i)
            + delta(a) * delta(b) * (1.0 - ea) * (1.0 - eb)
    })
}

/// Observed QBER of the ẑ-ẑ key measurement including undetected events.
pub fn qber(state: &BellDiagonalState, eff: &EfficiencySetup) -> f64 {
    qber_from_ideal(state.ideal_qber(), eff)
}

/// `η_Aη_B ε + [η_A(1−η_B) + η_B(1−η_A)]/2`.
pub fn qber_from_ideal(eps: f64, eff: &EfficiencySetup) -> f64 {
    let (ea, eb) = (eff.eta_a, eff.eta_b);
    ea * eb * eps + 0.5 * (ea * (1.0 - eb) + eb * (1.0 - ea))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{catalog_get, ProbabilityTable};
    use nalgebra::{Complex, Matrix2, Matrix4, Vector2, Vector4};

    type C = Complex<f64>;

    // Independent oracle: explicit 4x4 density matrices and Kronecker products.
    fn bell_vectors() -> [Vector4<C>; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |x: f64| C::new(x, 0.0);
        [
            Vector4::new(c(h), c(0.0), c(0.0), c(h)),
            Vector4::new(c(h), c(0.0), c(0.0), c(-h)),
            Vector4::new(c(0.0), c(h), c(h), c(0.0)),
            Vector4::new(c(0.0), c(h), c(-h), c(0.0)),
        ]
    }

    fn density(lambda: [f64; 4]) -> Matrix4<C> {
        let mut rho = Matrix4::zeros();
        for (l, v) in lambda.iter().zip(bell_vectors()) {
            rho += v * v.adjoint() * C::new(*l, 0.0);
        }
        rho
    }

    fn projector(p: &QubitProjector, a: usize) -> Matrix2<C> {
        let (t, f) = (p.theta(), p.phi());
        let e = C::from_polar(1.0, f);
        let plus = Vector2::new(C::new((t / 2.0).cos(), 0.0), e * (t / 2.0).sin());
        let minus = Vector2::new(C::new((t / 2.0).sin(), 0.0), -e * (t / 2.0).cos());
        let v = if a == 0 { plus } else { minus };
        v * v.adjoint()
    }

    fn kron(x: &Matrix2<C>, y: &Matrix2<C>) -> Matrix4<C> {
        let mut out = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = x[(i, j)] * y[(k, l)];
                    }
                }
            }
        }
        out
    }

    fn oracle_table(lambda: [f64; 4], s: &MeasurementScenario) -> ProbabilityTable {
        let rho = density(lambda);
        ProbabilityTable::from_fn(s.m_a(), s.m_b(), |a, b, i, j| {
            (kron(&projector(&s.alice[i], a), &projector(&s.bob[j], b)) * rho)
                .trace()
                .re
        })
        .unwrap()
    }

    fn proj(theta: f64, phi: f64) -> QubitProjector {
        QubitProjector::new(theta, phi).unwrap()
    }

    #[test]
    fn phi0_zz_perfect_correlation() {
        let s = MeasurementScenario::new(vec![QubitProjector::z(); 2], vec![QubitProjector::z(); 2]);
        let t = joint_table(&BellDiagonalState::phi0(), &s);
        assert!((t.p(0, 0, 0, 0) - 0.5).abs() < 1e-15);
        assert!((t.p(1, 1, 1, 1) - 0.5).abs() < 1e-15);
        assert!(t.p(0, 1, 0, 1).abs() < 1e-15);
        assert!(t.p(1, 0, 1, 0).abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_is_uniform() {
        let s = MeasurementScenario::new(
            vec![proj(0.3, 1.0), proj(2.0, 4.0)],
            vec![proj(1.1, 0.2), proj(0.0, 0.0)],
        );
        let t = joint_table(&BellDiagonalState::maximally_mixed(), &s);
        assert!(t.max_abs_diff(&ProbabilityTable::uniform(2, 2)) < 1e-15);
    }

    #[test]
    fn z_against_x_is_uniform() {
        let s = MeasurementScenario::new(vec![proj(0.0, 0.0)], vec![proj(PI / 2.0, 0.0)]);
        let t = joint_table(&BellDiagonalState::phi0(), &s);
        for a in 0..2 {
            for b in 0..2 {
                assert!((t.p(a, b, 0, 0) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pauli_route_matches_explicit_trace() {
        let lambdas = [
            [0.7, 0.1, 0.15, 0.05],
            [0.25, 0.25, 0.25, 0.25],
            [0.0, 0.3, 0.0, 0.7],
            [0.1, 0.2, 0.3, 0.4],
        ];
        let s = MeasurementScenario::new(
            vec![proj(0.3, 1.0), proj(2.0, 4.0), proj(PI, 6.0)],
            vec![proj(1.1, 0.2), proj(0.0, 0.0), proj(0.7, 3.3)],
        );
        for l in lambdas {
            let st = BellDiagonalState::new(l).unwrap();
            let fast = joint_table(&st, &s);
            let slow = oracle_table(l, &s);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn ideal_efficiency_is_identity() {
        let s = MeasurementScenario::new(
            vec![proj(0.3, 1.0), proj(2.0, 4.0)],
            vec![proj(1.1, 0.2), proj(0.4, 0.0)],
        );
        let t = joint_table(&BellDiagonalState::new([0.6, 0.2, 0.1, 0.1]).unwrap(), &s);
        let out = apply_efficiency(&t, &EfficiencySetup::ideal());
        assert!(out.max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn alice_blind_reports_zero() {
        let s = MeasurementScenario::new(
            vec![proj(0.3, 1.0), proj(2.0, 4.0)],
            vec![proj(1.1, 0.2), proj(0.4, 0.0)],
        );
        let t = joint_table(&BellDiagonalState::new([0.6, 0.2, 0.1, 0.1]).unwrap(), &s);
        let out = apply_efficiency(&t, &EfficiencySetup::new(0.0, 1.0).unwrap());
        for i in 0..2 {
            for j in 0..2 {
                for b in 0..2 {
                    assert!((out.p(0, b, i, j) - t.bob_marginal(b, j)).abs() < 1e-15);
                    assert_eq!(out.p(1, b, i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn half_efficiency_on_phi0_zz() {
        let s = MeasurementScenario::new(vec![QubitProjector::z(); 2], vec![QubitProjector::z(); 2]);
        let t = joint_table(&BellDiagonalState::phi0(), &s);
        let out = apply_efficiency(&t, &EfficiencySetup::symmetric(0.5).unwrap());
        assert!((out.p(0, 0, 0, 0) - 0.625).abs() < 1e-15);
        assert!((out.p(1, 1, 0, 0) - 0.125).abs() < 1e-15);
        assert!((out.p(0, 1, 0, 0) - 0.125).abs() < 1e-15);
        assert!((out.p(1, 0, 0, 0) - 0.125).abs() < 1e-15);
        out.validate().unwrap();
    }

    #[test]
    fn qber_examples() {
        let ideal = EfficiencySetup::ideal();
        assert_eq!(qber(&BellDiagonalState::phi0(), &ideal), 0.0);
        let asym = EfficiencySetup::asymmetric(0.8).unwrap();
        assert!((qber(&BellDiagonalState::phi0(), &asym) - 0.1).abs() < 1e-15);
        let st = BellDiagonalState::new([0.8, 0.1, 0.05, 0.05]).unwrap();
        assert!((qber(&st, &ideal) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn qber_matches_trace_of_zz_mismatch() {
        let l = [0.55, 0.2, 0.15, 0.1];
        let s = MeasurementScenario::new(vec![QubitProjector::z()], vec![QubitProjector::z()]);
        let t = oracle_table(l, &s);
        let st = BellDiagonalState::new(l).unwrap();
        assert!((t.p(0, 1, 0, 0) + t.p(1, 0, 0, 0) - st.ideal_qber()).abs() < 1e-14);
    }

    #[test]
    fn efficiency_degrades_chsh_at_tsirelson_angles() {
        let chsh = catalog_get("CHSH").unwrap();
        let s = MeasurementScenario::new(
            vec![proj(PI / 2.0, 0.0), proj(0.0, 0.0)],
            vec![proj(PI / 4.0, 0.0), proj(3.0 * PI / 4.0, 0.0)],
        );
        let t = joint_table(&BellDiagonalState::phi0(), &s);
        let full = chsh.evaluate(&t).unwrap();
        assert!((full - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        let mut last = full;
        for k in 1..=10 {
            let eta = 1.0 - 0.05 * k as f64;
            let v = chsh
                .evaluate(&apply_efficiency(&t, &EfficiencySetup::symmetric(eta).unwrap()))
                .unwrap();
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BellDiagonalState::new([0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(BellDiagonalState::new([1.1, -0.1, 0.0, 0.0]).is_err());
        assert!(QubitProjector::new(-0.1, 0.0).is_err());
        assert!(QubitProjector::new(0.1, 2.0 * PI).is_err());
        assert!(EfficiencySetup::new(1.5, 1.0).is_err());
    }

    #[test]
    fn bloch_roundtrip() {
        for v in [[0.3, -0.4, 0.5], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [-0.2, -0.1, 0.0]] {
            let p = QubitProjector::from_bloch(v);
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let b = p.bloch();
            for k in 0..3 {
                assert!((b[k] - v[k] / n).abs() < 1e-12);
            }
        }
    }
}
