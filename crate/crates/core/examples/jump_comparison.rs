//! All four jump rules on the cubic DAE, with the test of whether each one
//! commutes with the change of coordinates to the normal form.

use dae_jump::jumps::{compare_methods, JumpSettings};
use dae_jump::model::scenario_cubic;
use dae_jump::numkit::Vector;

fn main() -> dae_jump::Result<()> {
    let s = scenario_cubic();
    let cmp = compare_methods(&s, &Vector::from_column_slice(&[1.0, 0.7]), &JumpSettings::default())?;
    print!("{}", cmp.table());
    Ok(())
}
