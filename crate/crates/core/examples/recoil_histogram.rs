//! Draws photon-recoil momenta from the dipole emission pattern and compares
//! the histogram with the analytic density.

use dynloc::mcwf::{recoil_density, run_rng, sample_recoil};

fn main() {
    let kbar = 0.29;
    let draws = 200_000;
    let bins = 20;
    let mut rng = run_rng(7, 0);
    let mut counts = vec![0usize; bins];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let p = sample_recoil(&mut rng, kbar);
        s1 += p;
        s2 += p * p;
        let i = (((p / kbar + 1.0) / 2.0) * bins as f64).floor() as usize;
        counts[i.min(bins - 1)] += 1;
    }
    let n = draws as f64;
    println!("<p>   = {:+.5}   (0)", s1 / n);
    println!("<p^2> = {:.5}   ({:.5})", s2 / n, 0.4 * kbar * kbar);

    let w = 2.0 * kbar / bins as f64;
    for (i, c) in counts.iter().enumerate() {
        let p = -kbar + (i as f64 + 0.5) * w;
        let expected = recoil_density(p, kbar) * w * n;
        let bar = "*".repeat((*c as f64 / expected * 30.0).round() as usize);
        println!("{p:+.3} {c:>7} {expected:>9.1} {bar}");
    }
}
