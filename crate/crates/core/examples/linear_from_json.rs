//! A linear DAE loaded from a JSON document, checked against its closed
//! form `P⁻¹·diag(A₁, −I/ε)·P`.

use std::path::Path;

use dae_jump::analysis::{analyze, Region, Tolerances};
use dae_jump::jumps::project_consistent_chart;
use dae_jump::model::ScenarioDocument;
use dae_jump::numkit::{Matrix, Vector};
use dae_jump::perturbation::PerturbedField;

fn main() -> dae_jump::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/coupled_linear.json");
    let s = ScenarioDocument::load(&path)?;
    let report = analyze(&s, &Region::for_scenario(&s), &Tolerances::default())?;
    println!("{}", report.summary());

    let x_minus = s.point("x_minus").cloned().unwrap_or_else(|| Vector::from_column_slice(&[0.3, 0.7]));
    let jump = project_consistent_chart(&s, &x_minus)?;
    println!("x- = {:?} -> x+ = {:?}", x_minus.as_slice(), jump.x_plus);

    let eps = 0.05;
    let p = Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
    let closed = p.clone().try_inverse().expect("P is invertible") * Matrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -1.0 / eps]) * &p;
    let field = PerturbedField::new(&s, eps)?.eval(&x_minus)?;
    println!("field {:?}, closed form {:?}", field.as_slice(), (&closed * &x_minus).as_slice());
    Ok(())
}
