// Dichotomized measurements on qutrit pairs.

use diqkd::bell::catalog_get;
use diqkd::highdim::{
    gamma_highdim, max_holevo_highdim, purify, violation_highdim, von_neumann, HighDimState,
    HolevoSearch,
};
use diqkd::optimize::OptimizerConfig;
use diqkd::quantum::EfficiencySetup;
use rand::SeedableRng;

pub fn run_example() -> diqkd::Result<()> {
    let chsh = catalog_get("CHSH")?;
    let cfg = OptimizerConfig {
        restarts: 5,
        ..OptimizerConfig::default()
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let ideal = EfficiencySetup::ideal();
    for w in [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.4, 0.3, 0.3]] {
        let state = HighDimState::example_mixture(3, w)?;
        let pur = purify(&state);
        for xi in 1..3 {
            let q = violation_highdim(&chsh, &state, xi, &ideal, &cfg, &mut rng)?.q;
            let chi = max_holevo_highdim(&state, xi, &HolevoSearch::default(), &mut rng)?.chi;
            println!(
                "w = {w:?} xi = {xi}: Q = {q:+.4}, chi >= {chi:.4}, Gamma = {:.4}, S(E) = {:.4}",
                gamma_highdim(&state, xi, &ideal)?,
                von_neumann(&pur.rho_e())
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
