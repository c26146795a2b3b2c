//! Integrates the regularized circuit for a few values of ε and shows the
//! boundary layer: ξ₂ decays like e^{−t/ε} while ξ₁ follows the slow flow.

use dae_jump::jumps::project_consistent_chart;
use dae_jump::model::scenario_circuit;
use dae_jump::numkit::{IntegratorConfig, TimeGrid, Vector};
use dae_jump::perturbation::{integrate_perturbed, integrate_reduced, PerturbedField};

fn main() -> dae_jump::Result<()> {
    let s = scenario_circuit();
    let chart = s.chart()?;
    let x0 = Vector::from_column_slice(&[0.0, 0.0, 0.1]);
    let config = IntegratorConfig::default();
    let grid = TimeGrid::new(vec![0.0, 0.001, 0.01, 0.1, 0.5, 1.0])?;

    let x_plus = project_consistent_chart(&s, &x0)?.x_plus();
    let reduced = integrate_reduced(&s, &x_plus, &grid, &config)?;

    for eps in [1e-1, 1e-2, 1e-3] {
        let pf = PerturbedField::new(&s, eps)?;
        let traj = integrate_perturbed(&pf, &x0, &grid, &config)?;
        println!("eps = {eps:e} ({:?}, {} steps)", traj.stepper, traj.stats.accepted_steps);
        for (k, (t, x)) in traj.iter().enumerate() {
            let xi = chart.psi(&x)?;
            println!(
                "  t = {t:<5}  xi1 = {:+.6}  xi2 = [{:+.3e}, {:+.3e}]  |x - x_red| = {:.2e}",
                xi[0],
                xi[1],
                xi[2],
                (&x - reduced.state(k)).norm()
            );
        }
    }
    Ok(())
}
