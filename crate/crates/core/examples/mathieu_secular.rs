//! Secular frequency and reference-oscillator frequency along a line of
//! constant `a` in the Mathieu stability diagram.
//!
//! ```text
//! cargo run --example mathieu_secular -- 0.0
//! ```

use dynloc::floquet::{solve_mathieu, DEFAULT_RTOL};

fn main() -> dynloc::Result<()> {
    let a: f64 = std::env::args().nth(1).map(|s| s.parse().expect("a must be a number")).unwrap_or(0.0);
    println!("{:>6} {:>10} {:>10} {:>12}", "q", "omega_s", "omega_r", "wronskian");
    for i in 1..=18 {
        let q = 0.05 * i as f64;
        match solve_mathieu(a, q, DEFAULT_RTOL) {
            Ok(s) => println!(
                "{q:>6.2} {:>10.6} {:>10.6} {:>12.2e}",
                s.omega_s,
                s.omega_r,
                s.wronskian_deviation()
            ),
            // outside the first stability region
            Err(e) => println!("{q:>6.2} {e}"),
        }
    }
    Ok(())
}
