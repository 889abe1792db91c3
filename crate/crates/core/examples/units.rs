//! Laboratory parameters to the dimensionless model and back.
//!
//! The numbers are of the order of a Mg+ ion in a radio-frequency trap
//! driven by a 280 nm standing wave.

use dynloc::params::{scale_to_dimensionless, to_physical, PhysicalParams};

fn main() -> dynloc::Result<()> {
    let amu = 1.660_539_066_6e-27;
    let drive = 2.0 * std::f64::consts::PI * 20e6;
    let wave_number = 2.0 * std::f64::consts::PI / 280e-9;
    let transition = 2.0 * std::f64::consts::PI * 1.07e15;
    let phys = PhysicalParams {
        mass: 24.0 * amu,
        trap_frequency: drive,
        wave_number,
        rabi_frequency: 1.12 * drive,
        laser_frequency: transition + 0.29 * drive,
        transition_frequency: transition,
        decay_rate: 0.0,
        a_raw: 0.0,
        q_raw: 0.4,
    };
    let trap = scale_to_dimensionless(&phys)?;
    println!("{trap:#?}");

    let back = to_physical(&trap, phys.mass, drive, wave_number, transition);
    println!("rabi frequency round trip: {:.6e} -> {:.6e} rad/s", phys.rabi_frequency, back.rabi_frequency);
    println!("detuning: {:.4} (units of the drive frequency)", trap.delta);
    Ok(())
}
