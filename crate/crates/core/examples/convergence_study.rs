//! Convergence of the perturbed solutions to the reduced one as ε → 0,
//! with the CSV of pointwise errors written to the temp directory.

use std::fs::File;
use std::io::BufWriter;

use dae_jump::model::scenario_circuit;
use dae_jump::numkit::Vector;
use dae_jump::perturbation::{convergence_study, StudyOptions};

fn main() -> dae_jump::Result<()> {
    let s = scenario_circuit();
    let x_minus = Vector::from_column_slice(&[0.0, 0.0, 0.1]);
    let report = convergence_study(&s, &x_minus, &[1e-1, 1e-2, 1e-3], 0.05, 1.0, &StudyOptions::default())?;
    for run in &report.runs {
        println!(
            "eps = {:e}: sup error on [0.05, 1] = {:.3e}, layer error = {:.3e}",
            run.epsilon, run.sup_error, run.layer_error
        );
    }
    println!("decreasing: {}, bound {:.3e}, pass: {}", report.decreasing, report.bound, report.pass);

    let path = std::env::temp_dir().join("circuit_convergence.csv");
    report.write_csv(BufWriter::new(File::create(&path)?))?;
    println!("wrote {}", path.display());
    Ok(())
}
