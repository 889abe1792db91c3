//! Classical trajectories with Bloch-vector dynamics: ensemble widths, Bloch
//! norm conservation and the diffusion estimate of the localization length.

use std::f64::consts::PI;

use dynloc::classical::run_classical;
use dynloc::harness::diffusion_diagnostic;
use dynloc::params::load_preset;

fn main() -> dynloc::Result<()> {
    let mut config = load_preset("fig1-desk")?;
    config.numerics.trajectories = 2048;
    config.numerics.t_end = 60.0 * PI;
    config.numerics.window = (20.0 * PI, 60.0 * PI);

    let r = run_classical(&config, 0)?;
    for m in r.moments.iter().step_by(24) {
        println!(
            "t = {:>6.1} pi   dx = {:>8.4}   dp = {:>8.4}   P_e = {:.4}",
            m.t / PI,
            m.width_x,
            m.width_p,
            m.excited_fraction()
        );
    }
    println!("largest Bloch norm drift: {:.2e}", r.max_bloch_drift);

    let series: Vec<(f64, f64)> = r.moments.iter().map(|m| (m.t, m.width_x)).collect();
    let d = diffusion_diagnostic(&series, config.numerics.window, config.trap.kbar)?;
    println!(
        "D = {:.4e} (fit over {} points, rms {:.2e}); l ~ D/kbar^2 = {:.3}",
        d.diffusion, d.points, d.residual, d.localization_estimate
    );
    Ok(())
}
