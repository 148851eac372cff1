// CHSH statistics with Eve restricted to the key basis: the BB84 limit.

use diqkd::analysis::{bb84_analysis, McParams};

pub fn run_example() -> diqkd::Result<()> {
    run(3000)
}

pub fn run(samples: usize) -> diqkd::Result<()> {
    let params = McParams {
        samples,
        seed: 3,
        bins: 60,
        ..McParams::default()
    };
    let run = bb84_analysis(&params)?;
    if let (Some((q, i)), Some(eps)) = (run.report.crossing, run.report.eps_cr) {
        println!("crossing ({q:.4}, {i:.4}), eps_cr = {eps:.4}");
    }
    let worst = run
        .rate_cloud
        .iter()
        .filter(|p| (p.0 - 0.11).abs() < 0.005)
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    println!("lowest Γ − χ near ε = 0.11: {worst:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    run(samples).unwrap();
}
