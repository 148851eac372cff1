// How undetected events (counted as outcome 0) erode the CHSH value and the QBER.

use diqkd::bell::catalog_get;
use diqkd::optimize::{max_violation_seeded, OptimizerConfig};
use diqkd::quantum::{qber, BellDiagonalState, EfficiencySetup};

pub fn run_example() -> diqkd::Result<()> {
    let chsh = catalog_get("CHSH")?;
    let cfg = OptimizerConfig::default();
    let state = BellDiagonalState::phi0();
    println!("  eta   Q(sym)    Q(asym)   qber(sym) qber(asym)");
    for eta in [1.0, 0.95, 0.924, 0.9, 0.858, 0.8] {
        let sym = EfficiencySetup::symmetric(eta)?;
        let asym = EfficiencySetup::asymmetric(eta)?;
        let q_sym = max_violation_seeded(&chsh, &state, &sym, &cfg, 2)?.q;
        let q_asym = max_violation_seeded(&chsh, &state, &asym, &cfg, 2)?.q;
        println!(
            "{eta:>6.3} {q_sym:+.5} {q_asym:+.5}  {:.5}   {:.5}",
            qber(&state, &sym),
            qber(&state, &asym)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
