//! Driving the split-operator propagator directly: a Gaussian packet in the
//! bare Paul trap (no laser), sampled once per drive period.

use std::f64::consts::PI;
use std::sync::Arc;

use dynloc::grid::{init_gaussian, Basis, Grid, Observables};
use dynloc::params::TrapParams;
use dynloc::qevolve::{Propagator, StepController};
use num_complex::Complex64;

fn main() -> dynloc::Result<()> {
    let kbar = 0.29;
    let trap = TrapParams::new(0.0, 0.4, 0.0, 0.0, kbar, 0.0)?;
    let grid = Arc::new(Grid::new(1024, 20.0, kbar)?);
    let mut psi = init_gaussian(
        &grid,
        (kbar / 2.0).sqrt(),
        2.0,
        0.0,
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        1e-6,
    )?;
    let mut prop = Propagator::new(grid.clone(), &trap, Basis::GroundExcited)?.with_leak_check(1e-6);
    let mut ctrl = StepController::adaptive(1e-9, 1e-9, 0.1);
    let mut obs = Observables::new(grid);
    prop.propagate(&mut psi, 10.0 * PI, &mut ctrl, Some(PI), |s| {
        let m = obs.moments(s)?;
        println!(
            "t = {:>4.0} pi  <x> = {:+.4}  <p> = {:+.4}  dx = {:.4}  norm^2 - 1 = {:+.1e}",
            s.t / PI,
            m.mean_x,
            m.mean_p,
            m.width_x,
            m.norm_sqr - 1.0
        );
        Ok(())
    })?;
    println!("{} accepted, {} rejected steps", ctrl.accepted, ctrl.rejected);
    Ok(())
}
