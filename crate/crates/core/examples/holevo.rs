// Eve's Holevo information for Bell-diagonal states.

use diqkd::entropy::{holevo_at_angles, holevo_bb84, holevo_extrema};
use diqkd::quantum::BellDiagonalState;

pub fn run_example() -> diqkd::Result<()> {
    for l in [[1.0, 0.0, 0.0, 0.0], [0.9, 0.1, 0.0, 0.0], [0.7, 0.1, 0.1, 0.1], [0.25; 4]] {
        let s = BellDiagonalState::new(l)?;
        let e = holevo_extrema(&s);
        println!(
            "{l:?}: chi = {:.4?}, max {:.4}, bb84 {:.4}, tilted {:.4}",
            e.chi,
            e.chi_max,
            holevo_bb84(&s),
            holevo_at_angles(&s, 0.4, 1.1)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
