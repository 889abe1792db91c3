//! Quantum versus classical spreading in the standing-wave Paul trap at
//! zero detuning. The quantum width saturates; the classical ensemble keeps
//! diffusing.
//!
//! This is a shortened version of the `fig1-desk` preset; pass a horizon in
//! units of π to change it:
//!
//! ```text
//! cargo run --release --example localization -- 60
//! ```

use std::f64::consts::PI;

use dynloc::classical;
use dynloc::harness::{run_quantum, width_growth_rate};
use dynloc::params::load_preset;

fn main() -> dynloc::Result<()> {
    let periods: f64 = std::env::args().nth(1).map(|s| s.parse().expect("horizon in units of pi")).unwrap_or(30.0);
    let mut config = load_preset("fig1-desk")?;
    config.numerics.n_grid = 2048;
    config.numerics.x_max = 40.0;
    config.numerics.trajectories = 1024;
    config.numerics.t_end = periods * PI;
    config.numerics.window = (0.8 * periods * PI, periods * PI);

    let (q, c) = rayon::join(|| run_quantum(&config), || classical::run(&config));
    let (q, c) = (q?, c?);

    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "t/pi", "dx_q", "dx_cl", "dp_q", "dp_cl");
    for (a, b) in q.moments.iter().zip(&c.moments).step_by(8) {
        println!(
            "{:>8.1} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            a.t / PI,
            a.width_x,
            b.width_x,
            a.width_p,
            b.width_p
        );
    }
    let w = config.numerics.window;
    println!(
        "late growth rate of dx: quantum {:.2e}, classical {:.2e}",
        width_growth_rate(&q.moments, w)?,
        width_growth_rate(&c.moments, w)?
    );
    println!("{} accepted / {} rejected steps", q.accepted_steps, q.rejected_steps);
    Ok(())
}
