// See-saw maximization of CHSH and I3322 on a few Bell-diagonal states.

use diqkd::bell::catalog_get;
use diqkd::optimize::{max_violation_seeded, OptimizerConfig};
use diqkd::quantum::{BellDiagonalState, EfficiencySetup};

pub fn run_example() -> diqkd::Result<()> {
    let cfg = OptimizerConfig::default();
    let ideal = EfficiencySetup::ideal();
    let states = [
        ("phi0", BellDiagonalState::phi0()),
        ("werner 0.9", BellDiagonalState::new([0.925, 0.025, 0.025, 0.025])?),
        ("skewed", BellDiagonalState::new([0.6, 0.3, 0.1, 0.0])?),
        ("mixed", BellDiagonalState::maximally_mixed()),
    ];
    for name in ["CHSH", "I3322"] {
        let ineq = catalog_get(name)?;
        for (label, state) in &states {
            let res = max_violation_seeded(&ineq, state, &ideal, &cfg, 1)?;
            println!("{name:<6} {label:<11} Q = {:+.6}", res.q);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
