//! The numerical building blocks on small hand-checkable inputs.

use dae_jump::numkit::{
    fd_jacobian, integrate_ode, kernel_basis, newton_solve, numeric_rank, row_compress, IntegratorConfig, IntegratorMode,
    Matrix, NewtonOptions, TimeGrid, Vector,
};

fn main() -> dae_jump::Result<()> {
    // E of the cubic DAE at x2 = 1
    let e = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
    let rank = numeric_rank(&e, 1e-9)?;
    println!("rank E = {} (singular values {:?})", rank.rank, rank.singular_values);
    for v in kernel_basis(&e, 1e-9)? {
        println!("ker E contains {:?}", v.as_slice());
    }

    let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    let rc = row_compress(&m, 1e-9)?;
    println!("Q·M = {} (cond Q = {:.3})", &rc.q * &m, rc.condition);

    // branch s > 1/√3 of s³ − s = 0.643
    let f = |x: &Vector| Ok(Vector::from_element(1, x[0].powi(3) - x[0] - 0.643));
    let out = newton_solve(f, |x: &Vector| fd_jacobian(f, x, 1e-6), &Vector::from_element(1, 1.2), NewtonOptions::default())?;
    println!("newton: s = {:.12} after {} iterations", out.x[0], out.iterations);

    let eps = 1e-3;
    let config = IntegratorConfig {
        mode: IntegratorMode::ImplicitStiff,
        ..IntegratorConfig::default()
    };
    let grid = TimeGrid::new(vec![0.0, 0.005, 0.01])?;
    let traj = integrate_ode(|_, x: &Vector| Ok(-x / eps), &Vector::from_element(1, 1.0), &grid, &config)?;
    for (t, x) in traj.iter() {
        println!("x' = -x/eps: t = {t:<6} x = {:.6e}  exact {:.6e}", x[0], (-t / eps).exp());
    }
    println!("{:?}: {} steps, {} rejected", traj.stepper, traj.stats.accepted_steps, traj.stats.rejected_steps);
    Ok(())
}
