// Monte Carlo I_E and I_AB curves for CHSH next to their closed forms.

use diqkd::analysis::{analytic_chsh_iab, analytic_chsh_ie, run_pipeline, McParams};
use diqkd::bell::catalog_get;
use diqkd::quantum::EfficiencySetup;

pub fn run_example() -> diqkd::Result<()> {
    run(4000)
}

pub fn run(samples: usize) -> diqkd::Result<()> {
    let params = McParams {
        samples,
        seed: 1,
        bins: 40,
        ..McParams::default()
    };
    let run = run_pipeline(&catalog_get("CHSH")?, &EfficiencySetup::ideal(), &params)?;
    println!("     q   I_E(mc)  I_E(exact) I_AB(mc) I_AB(exact)");
    for k in (0..run.ie.bins()).step_by(4) {
        let q = run.ie.midpoint(k);
        let (Some(ie), Some(iab)) = (run.ie.values[k], run.iab.values[k]) else {
            continue;
        };
        println!(
            "{q:.4}  {ie:.4}   {:.4}     {iab:.4}   {:.4}",
            analytic_chsh_ie(q)?,
            analytic_chsh_iab(q)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    run(samples).unwrap();
}
