//! A single Monte-Carlo wave-function trajectory with spontaneous emission:
//! prints each jump with its recoil, then the averaged widths of a small
//! ensemble.

use std::f64::consts::PI;
use std::sync::Arc;

use dynloc::grid::{Grid, Observables};
use dynloc::mcwf::{effective_propagate, initial_field, run_ensemble, run_rng};
use dynloc::params::load_preset;
use dynloc::qevolve::{Propagator, StepController};

fn main() -> dynloc::Result<()> {
    let mut config = load_preset("fig3-desk")?;
    config.numerics.n_grid = 2048;
    config.numerics.x_max = 40.0;
    config.numerics.t_end = 10.0 * PI;
    config.numerics.window = (8.0 * PI, 10.0 * PI);
    config.numerics.runs = 8;
    let n = &config.numerics;

    let grid = Arc::new(Grid::new(n.n_grid, n.x_max, config.trap.kbar)?);
    let mut prop = Propagator::new(grid.clone(), &config.trap, config.experiment.basis)?;
    let mut psi = initial_field(&config, &grid)?;
    let mut ctrl = StepController::adaptive(n.tol, n.dt_min, n.dt_max);
    let mut rng = run_rng(n.seed, 0);
    let mut obs = Observables::new(grid);
    let mut last = None;
    let jumps = effective_propagate(&mut prop, &mut psi, n.t_end, &mut ctrl, Some(PI), &mut rng, |s| {
        last = Some(obs.moments(s)?);
        Ok(())
    })?;
    for j in &jumps {
        println!(
            "jump at t = {:>7.3}  recoil = {:+.4}  P_e before = {:.3}",
            j.t, j.recoil, j.excited_population
        );
    }
    if let Some(m) = last {
        println!("final: dx = {:.4}, dp = {:.4}, norm^2 = {:.4}", m.width_x, m.width_p, m.norm_sqr);
    }

    let e = run_ensemble(&config, 0)?;
    let m = e.moments.last().expect("at least one sample");
    let total: usize = e.records.iter().map(|r| r.jumps.len()).sum();
    println!(
        "{} runs, {} jumps: <dx> = {:.4}, <dp> = {:.4} at t = {:.1} pi",
        e.records.len(),
        total,
        m.width_x,
        m.width_p,
        m.t / PI
    );
    Ok(())
}
