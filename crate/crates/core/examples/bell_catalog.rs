// Lists the built-in Bell expressions and parses a custom one.

use diqkd::bell::{catalog, BellInequality, ProbabilityTable};

pub fn run_example() -> diqkd::Result<()> {
    for ineq in catalog() {
        println!(
            "{:<9} {}x{}  local max {:+.1}  {}",
            ineq.name(),
            ineq.m_a(),
            ineq.m_b(),
            ineq.deterministic_max(),
            ineq
        );
    }

    let text = "\
name my-chsh
joint 1 1 1
joint 1 2 1
joint 2 1 1
joint 2 2 -1
amarg 1 -1
bmarg 1 -1
";
    let custom = BellInequality::parse_coefficients("custom", text)?;
    let uniform = ProbabilityTable::uniform(2, 2);
    println!("{} on uniform noise: {}", custom.name(), custom.evaluate(&uniform)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
