// Threshold detection efficiency by bisection.

use diqkd::analysis::{eaves_curve, threshold_efficiency_with, McParams, Setup};
use diqkd::bell::resolve;

pub fn run_example() -> diqkd::Result<()> {
    run("CHSH", 1500)
}

pub fn run(name: &str, samples: usize) -> diqkd::Result<()> {
    let ineq = resolve(name)?;
    let params = McParams {
        samples,
        seed: 7,
        bins: 60,
        ..McParams::default()
    };
    let (_, ie) = eaves_curve(&ineq, &params)?;
    for setup in [Setup::Symmetric, Setup::Asymmetric] {
        let t = threshold_efficiency_with(&ineq, setup, &params, &ie)?;
        println!("{name} {setup:?}: eta_min = {:.4} after {} evaluations", t.eta_min, t.evaluations.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "CHSH".into());
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(1500);
    run(&name, samples).unwrap();
}
