//! Phonon-changing matrix elements of the standing-wave coupling in the
//! Floquet number basis, and the detunings where they become resonant.

use dynloc::harness::floquet_table;

fn main() -> dynloc::Result<()> {
    let (a, q, omega0, kbar) = (0.0, 0.4, 2.24, 0.29);
    let t = floquet_table(a, q, omega0, kbar, 30)?;
    println!(
        "omega_s = {:.6}  omega_r = {:.6}  eta = {:.6}",
        t.solution.omega_s, t.solution.omega_r, t.table.eta
    );

    println!("\n{:>3} {:>12} {:>12}", "n", "|w(n,n+2)|", "|w(n,n+4)|");
    let two = t.table.magnitudes(1, 0);
    let four = t.table.magnitudes(2, 0);
    for ((n, x), (_, y)) in two.iter().zip(&four) {
        let bar = "#".repeat((x * 40.0).round() as usize);
        println!("{n:>3} {x:>12.5} {y:>12.5}  {bar}");
    }

    println!("\nresonant detunings (l - k omega_s + delta = 0):");
    for r in t.resonances.iter().filter(|r| r.delta >= 0.0) {
        println!("  k={:>2} l={:>2}  delta = {:.4}  ({} phonons)", r.k, r.l, r.delta, r.phonons);
    }
    Ok(())
}
