// Critical QBER of a protocol from the I_E / I_AB crossing.

use diqkd::analysis::{run_pipeline, McParams};
use diqkd::bell::resolve;
use diqkd::quantum::EfficiencySetup;

pub fn run_example() -> diqkd::Result<()> {
    run("CHSH", 4000)
}

pub fn run(name: &str, samples: usize) -> diqkd::Result<()> {
    let params = McParams {
        samples,
        seed: 7,
        bins: 60,
        ..McParams::default()
    };
    let run = run_pipeline(&resolve(name)?, &EfficiencySetup::ideal(), &params)?;
    match (run.report.crossing, run.report.eps_cr) {
        (Some((q, i)), Some(eps)) => println!("{name}: crossing ({q:.4}, {i:.4}), eps_cr = {eps:.4}"),
        _ => println!("{name}: no crossing"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "CHSH".into());
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);
    run(&name, samples).unwrap();
}
