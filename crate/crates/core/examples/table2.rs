// Critical QBERs and threshold efficiencies for one inequality.

use diqkd::analysis::{table2_row, McParams};
use diqkd::bell::resolve;

pub fn run_example() -> diqkd::Result<()> {
    run("CHSH", 1000)
}

pub fn run(name: &str, samples: usize) -> diqkd::Result<()> {
    let params = McParams {
        samples,
        seed: 7,
        bins: 50,
        ..McParams::default()
    };
    let row = table2_row(&resolve(name)?, &params)?;
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{:<8} {} {} {}  {:.3} {:.3}",
        row.inequality,
        f(row.eps_cr_ideal),
        f(row.eps_cr_at_sym_min),
        f(row.eps_cr_at_asym_min),
        row.eta_min_sym,
        row.eta_min_asym
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "CHSH".into());
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    run(&name, samples).unwrap();
}
