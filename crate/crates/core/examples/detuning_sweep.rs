//! Window-averaged widths as a function of the detuning, quantum and
//! classical side by side.
//!
//! ```text
//! cargo run --release --example detuning_sweep -- 0:0.6:0.1
//! ```

use std::f64::consts::PI;

use dynloc::harness::{sweep_detuning, write_sweep_csv};
use dynloc::params::{load_preset, parse_range};

fn main() -> dynloc::Result<()> {
    let range = std::env::args().nth(1).unwrap_or_else(|| "0:0.6:0.15".into());
    let deltas = parse_range(&range).expect("range as start:stop:step");
    let mut config = load_preset("fig2-desk")?;
    config.numerics.n_grid = 2048;
    config.numerics.x_max = 40.0;
    config.numerics.trajectories = 512;
    config.numerics.t_end = 20.0 * PI;
    config.numerics.window = (10.0 * PI, 20.0 * PI);

    let rows = sweep_detuning(&config, &deltas, 0)?;
    write_sweep_csv(std::io::stdout().lock(), &rows, "detuning sweep")?;
    Ok(())
}
