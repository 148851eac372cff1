use diqkd::bell::{catalog, catalog_get, BellInequality, ProbabilityTable};
use diqkd::entropy::{holevo_bb84, holevo_extrema};
use diqkd::highdim::{
    haar_unitary, key_rate_min, max_abs, partition_projectors, purify, random_mixed_state,
    von_neumann, CMat, HighDimParams, HolevoSearch,
};
use diqkd::analysis::McParams;
use diqkd::montecarlo::{
    collect_eaves_cloud, collect_mutual_cloud, upper_boundary, upper_boundary_on, BoundaryCurve,
    CurveKind,
};
use diqkd::optimize::{bell_value, max_violation_seeded, random_scenario, run_seesaw, OptimizerConfig};
use diqkd::quantum::{apply_efficiency, joint_table, BellDiagonalState, EfficiencySetup, MeasurementScenario};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state_strategy() -> impl Strategy<Value = BellDiagonalState> {
    prop::array::uniform4(0.0f64..1.0)
        .prop_filter("non-zero weight", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| BellDiagonalState::from_unnormalized(w).unwrap())
}

fn name_strategy() -> impl Strategy<Value = BellInequality> {
    prop::sample::select(vec!["CHSH", "I3322", "AS2", "A6"]).prop_map(|n| catalog_get(n).unwrap())
}

fn scenario(ineq: &BellInequality, seed: u64) -> MeasurementScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_scenario(ineq.m_a(), ineq.m_b(), &mut rng)
}

fn table_for(ineq: &BellInequality, state: &BellDiagonalState, seed: u64) -> ProbabilityTable {
    joint_table(state, &scenario(ineq, seed))
}

fn assert_normalized_no_signaling(t: &ProbabilityTable) {
    for i in 0..t.m_a() {
        for j in 0..t.m_b() {
            let s: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| t.p(a, b, i, j)).sum();
            assert!((s - 1.0).abs() < 1e-9, "block ({i},{j}) sums to {s}");
            for a in 0..2 {
                let here = t.p(a, 0, i, j) + t.p(a, 1, i, j);
                let there = t.p(a, 0, i, 0) + t.p(a, 1, i, 0);
                assert!((here - there).abs() < 1e-9, "alice marginal depends on bob's setting");
            }
            for b in 0..2 {
                let here = t.p(0, b, i, j) + t.p(1, b, i, j);
                let there = t.p(0, b, 0, j) + t.p(1, b, 0, j);
                assert!((here - there).abs() < 1e-9, "bob marginal depends on alice's setting");
            }
        }
    }
}

#[test]
fn deterministic_local_tables_respect_the_classical_bound() {
    for ineq in catalog() {
        let (ma, mb) = (ineq.m_a(), ineq.m_b());
        for amask in 0u32..(1 << ma) {
            for bmask in 0u32..(1 << mb) {
                let out_a = |i: usize| (amask >> i & 1) as usize;
                let out_b = |j: usize| (bmask >> j & 1) as usize;
                let t = ProbabilityTable::from_fn(ma, mb, |a, b, i, j| {
                    if a == out_a(i) && b == out_b(j) { 1.0 } else { 0.0 }
                })
                .unwrap();
                let v = ineq.evaluate(&t).unwrap();
                assert!(v <= 1e-12, "{} reaches {v} with a local strategy", ineq.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evaluate_is_linear(ineq in name_strategy(), s1 in state_strategy(), s2 in state_strategy(),
                          seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let t1 = table_for(&ineq, &s1, seed);
        let t2 = table_for(&ineq, &s2, seed.wrapping_add(1));
        let mixed = t1.mix(&t2, lambda).unwrap();
        let lhs = ineq.evaluate(&mixed).unwrap();
        let rhs = lambda * ineq.evaluate(&t1).unwrap() + (1.0 - lambda) * ineq.evaluate(&t2).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn joint_tables_are_normalized_and_no_signaling(ineq in name_strategy(), s in state_strategy(), seed in any::<u64>()) {
        let t = table_for(&ineq, &s, seed);
        assert_normalized_no_signaling(&t);
        prop_assert!(t.validate().is_ok());
    }

    #[test]
    fn efficiency_map_is_affine_and_valid(ineq in name_strategy(), s1 in state_strategy(), s2 in state_strategy(),
                                          seed in any::<u64>(), ea in 0.0f64..=1.0, eb in 0.0f64..=1.0,
                                          lambda in 0.0f64..=1.0) {
        let eff = EfficiencySetup::new(ea, eb).unwrap();
        let t1 = table_for(&ineq, &s1, seed);
        let t2 = table_for(&ineq, &s2, seed ^ 0x55);
        let d1 = apply_efficiency(&t1, &eff);
        assert_normalized_no_signaling(&d1);
        prop_assert!(apply_efficiency(&t1, &EfficiencySetup::ideal()).max_abs_diff(&t1) < 1e-15);
        let lhs = apply_efficiency(&t1.mix(&t2, lambda).unwrap(), &eff);
        let rhs = d1.mix(&apply_efficiency(&t2, &eff), lambda).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn chi_max_is_permutation_invariant(s in state_strategy(), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let l = s.lambda();
        let tail = [l[1], l[2], l[3]];
        let permuted = BellDiagonalState::new([l[0], tail[perm[0]], tail[perm[1]], tail[perm[2]]]).unwrap();
        let a = holevo_extrema(&s).chi_max;
        let b = holevo_extrema(&permuted).chi_max;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn bb84_holevo_never_exceeds_the_maximum(s in state_strategy()) {
        prop_assert!(holevo_bb84(&s) <= holevo_extrema(&s).chi_max + 1e-15);
    }

    #[test]
    fn merge_is_a_per_bin_maximum(a in prop::collection::vec(prop::option::of(0.0f64..1.0), 12),
                                  b in prop::collection::vec(prop::option::of(0.0f64..1.0), 12),
                                  c in prop::collection::vec(prop::option::of(0.0f64..1.0), 12)) {
        let curve = |v: &Vec<Option<f64>>| {
            let mut k = BoundaryCurve::empty(0.0, 0.2, 12, CurveKind::Ie);
            k.values = v.clone();
            k
        };
        let (x, y, z) = (curve(&a), curve(&b), curve(&c));
        prop_assert_eq!(x.merge(&y).unwrap(), y.merge(&x).unwrap());
        prop_assert_eq!(x.merge(&y).unwrap().merge(&z).unwrap(), x.merge(&y.merge(&z).unwrap()).unwrap());
        prop_assert_eq!(x.merge(&x).unwrap(), x.clone());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn seesaw_never_descends(ineq in name_strategy(), s in state_strategy(), seed in any::<u64>(),
                             ea in 0.5f64..=1.0, eb in 0.5f64..=1.0) {
        let eff = EfficiencySetup::new(ea, eb).unwrap();
        let run = run_seesaw(&ineq, &s.pauli(), &eff, &scenario(&ineq, seed), &OptimizerConfig::default()).unwrap();
        for w in run.history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn reported_violation_matches_reevaluation(ineq in name_strategy(), s in state_strategy(), seed in any::<u64>(),
                                               eta in 0.5f64..=1.0) {
        let eff = EfficiencySetup::symmetric(eta).unwrap();
        let cfg = OptimizerConfig { restarts: 4, ..OptimizerConfig::default() };
        let res = max_violation_seeded(&ineq, &s, &eff, &cfg, seed).unwrap();
        let again = bell_value(&ineq, &s.pauli(), &eff, &res.scenario).unwrap();
        prop_assert!((res.q - again).abs() < 1e-9);
    }

    #[test]
    fn projectors_are_complementary_idempotent_hermitian(d in 2usize..=4, seed in any::<u64>(), xi_pick in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = haar_unitary(d, &mut rng);
        let xi = 1 + xi_pick % (d - 1);
        let split = partition_projectors(xi, &u, d).unwrap();
        let (p0, p1) = (split.p0(), split.p1());
        prop_assert!(max_abs(&(&p0 + &p1 - CMat::identity(d, d))) < 1e-10);
        for p in [&p0, &p1] {
            prop_assert!(max_abs(&(p * p - p)) < 1e-10);
            prop_assert!(max_abs(&(p - p.adjoint())) < 1e-10);
        }
        prop_assert!(max_abs(&(&p0 * &p1)) < 1e-10);
    }

    #[test]
    fn purification_preserves_entropy(d in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_mixed_state(d, &mut rng).unwrap();
        let pur = purify(&state);
        prop_assert!(max_abs(&(pur.rho_ab() - state.density())) < 1e-10);
        prop_assert!((von_neumann(&pur.rho_e()) - von_neumann(state.density())).abs() < 1e-8);
    }
}

#[test]
fn violation_does_not_grow_as_efficiency_drops() {
    let cfg = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states: Vec<BellDiagonalState> = (0..1000)
        .map(|_| diqkd::montecarlo::draw_state(&mut rng, false))
        .collect();
    let ineq = catalog_get("CHSH").unwrap();
    let etas = [1.0, 0.95, 0.9, 0.8];
    let mut worst = f64::NEG_INFINITY;
    for (k, s) in states.iter().enumerate() {
        let values: Vec<f64> = etas
            .iter()
            .map(|&e| {
                let eff = EfficiencySetup::symmetric(e).unwrap();
                max_violation_seeded(&ineq, s, &eff, &cfg, k as u64).unwrap().q
            })
            .collect();
        // rank-1 projectors can gain from loss only below the local bound
        for w in values.windows(2).filter(|w| w[1] > 0.0) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    assert!(worst <= 1e-9, "value rose by {worst} at lower efficiency");

    // asymmetric sweep on a harder inequality
    let ineq = catalog_get("I3322").unwrap();
    let mut worst = f64::NEG_INFINITY;
    for (k, s) in states.iter().take(200).enumerate() {
        let values: Vec<f64> = etas
            .iter()
            .map(|&e| {
                let eff = EfficiencySetup::asymmetric(e).unwrap();
                max_violation_seeded(&ineq, s, &eff, &cfg, k as u64).unwrap().q
            })
            .collect();
        // rank-1 projectors can gain from loss only below the local bound
        for w in values.windows(2).filter(|w| w[1] > 0.0) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    assert!(worst <= 1e-6, "I3322 value rose by {worst} at lower efficiency");
}

#[test]
fn clouds_are_deterministic_and_dominated_by_their_boundary() {
    let ineq = catalog_get("CHSH").unwrap();
    let cfg = OptimizerConfig::default();
    let eff = EfficiencySetup::symmetric(0.95).unwrap();
    let a = collect_mutual_cloud(&ineq, 1500, 4, &cfg, &eff, true).unwrap();
    let b = collect_mutual_cloud(&ineq, 1500, 4, &cfg, &eff, true).unwrap();
    assert_eq!(a, b);
    let curve = upper_boundary(&a, 30).unwrap();
    for &(q, y) in &a.points {
        let k = curve.bin_of(q).unwrap();
        assert!(y <= curve.values[k].unwrap());
    }
}

#[test]
fn boundary_grows_with_nested_samples() {
    let ineq = catalog_get("CHSH").unwrap();
    let cfg = OptimizerConfig::default();
    let big = collect_eaves_cloud(&ineq, 2000, 9, &cfg).unwrap();
    let grid = upper_boundary(&big, 25).unwrap();
    let mut prev: Option<BoundaryCurve> = None;
    for n in [250, 500, 1000, 2000] {
        let small = collect_eaves_cloud(&ineq, n, 9, &cfg).unwrap();
        let curve = upper_boundary_on(&small, &grid);
        if let Some(p) = &prev {
            for (lo, hi) in p.values.iter().zip(&curve.values) {
                if let Some(lo) = lo {
                    assert!(hi.unwrap() >= *lo);
                }
            }
        }
        prev = Some(curve);
    }
    assert_eq!(prev.unwrap(), grid);
    assert!(big.eff.is_ideal());
}

#[test]
fn key_rate_minimum_shrinks_with_dimension() {
    let ineq = catalog_get("CHSH").unwrap();
    let base = McParams { samples: 3000, seed: 2, bins: 30, ..McParams::default() };
    let params = HighDimParams {
        samples: 40,
        seed: 2,
        optimizer: OptimizerConfig { restarts: 3, ..OptimizerConfig::default() },
        search: HolevoSearch { unitary_restarts: 1, weight_denominator: 4, max_evals: 60 },
        ..HighDimParams::default()
    };
    let eff = EfficiencySetup::ideal();
    let r2 = key_rate_min(&ineq, 2, 0.15, &eff, &base, &params).unwrap();
    let r3 = key_rate_min(&ineq, 3, 0.15, &eff, &base, &params).unwrap();
    assert!(r3.rate <= r2.rate + 1e-12, "{} > {}", r3.rate, r2.rate);
    assert_eq!(r2.arg_min, (2, 1));
}
