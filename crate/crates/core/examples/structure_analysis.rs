//! Structural checks: constant rank, index one and involutivity of ker E.
//!
//! Run with `cargo run --example structure_analysis`.

use dae_jump::analysis::{analyze, check_cr, index1_test, Region, Tolerances};
use dae_jump::model::{scenario_circuit, scenario_contact, scenario_cubic};
use dae_jump::numkit::Vector;

fn main() -> dae_jump::Result<()> {
    let tol = Tolerances::default();
    for s in [scenario_circuit(), scenario_cubic(), scenario_contact()] {
        let report = analyze(&s, &Region::for_scenario(&s), &tol)?;
        println!("{}", report.summary());
    }

    let circuit = scenario_circuit();
    let a = index1_test(&circuit, &Vector::zeros(3), &tol)?;
    println!("circuit at the origin: det A = {}, cond A = {:.3}", a.determinant, a.condition);

    // the fold x2 = 1/√3 of the cubic breaks the rank condition
    let cubic = scenario_cubic();
    let region = Region::new(&[-0.5, 0.3], &[0.5, 1.6])?.with_probe(&[0.0, 3f64.sqrt() / 3.0]);
    let cr = check_cr(&cubic, &region, &tol)?;
    if let Some(c) = &cr.counterexample {
        println!("cubic: {} = {} at {:?}, expected {}", c.quantity, c.value, c.point, c.expected);
    }
    Ok(())
}
