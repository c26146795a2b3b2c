//! Consistent initial values through the chart projector and through the
//! fast flow of the perturbed system.

use dae_jump::jumps::{project_consistent_chart, project_consistent_fastflow, DEFAULT_LAYER_TOL};
use dae_jump::model::{scenario_circuit, scenario_cubic};
use dae_jump::numkit::{IntegratorConfig, Vector};

fn main() -> dae_jump::Result<()> {
    for (s, x) in [(scenario_cubic(), [1.0, 0.7].as_slice()), (scenario_circuit(), [0.0, 0.0, 0.1].as_slice())] {
        let x_minus = Vector::from_column_slice(x);
        let chart = s.chart()?;
        let jump = project_consistent_chart(&s, &x_minus)?;
        println!("{}: x- = {:?}", s.name, x);
        println!("  chart projector    x+ = {:?}", jump.x_plus);
        println!(
            "  xi1 before/after   {:?} / {:?}",
            chart.xi1(&x_minus)?.as_slice(),
            chart.xi1(&jump.x_plus())?.as_slice()
        );

        let ff = project_consistent_fastflow(&s, &x_minus, &[1e-3, 1e-4], DEFAULT_LAYER_TOL, &IntegratorConfig::default())?;
        println!(
            "  fast flow          x+ = {:?} (error estimate {:.1e})",
            ff.x_plus,
            ff.error_estimate.unwrap_or(f64::NAN)
        );
        let again = project_consistent_chart(&s, &jump.x_plus())?;
        println!("  projecting again moves the point by {:.1e}", (again.x_plus() - jump.x_plus()).amax());
    }
    Ok(())
}
