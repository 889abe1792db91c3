//! Generalized Laguerre polynomials and log-factorials.

/// `ln(n!)` by direct summation. The matrix elements only need n up to a
/// few hundred, where this is exact to rounding.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `L_n^alpha(z)` for real `alpha > -1` via the three-term recurrence
/// `(m+1) L_{m+1} = (2m + 1 + alpha - z) L_m - (m + alpha) L_{m-1}`.
pub fn laguerre(n: usize, alpha: f64, z: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - z;
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + alpha - z) * cur - (mf + alpha) * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_n^m(z)` for any integer upper index with `n + m >= 0`.
///
/// Negative indices use `L_n^{-m}(z) = (-z)^m (n-m)!/n! L_{n-m}^m(z)` for
/// `m <= n`.
pub fn laguerre_int(n: usize, m: i64, z: f64) -> f64 {
    if m >= 0 {
        return laguerre(n, m as f64, z);
    }
    let mm = (-m) as usize;
    assert!(mm <= n, "L_n^m requires n + m >= 0 (n={n}, m={m})");
    let ratio = (ln_factorial(n - mm) - ln_factorial(n)).exp();
    (-z).powi(mm as i32) * ratio * laguerre(n - mm, mm as f64, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    // explicit sum L_n^a(z) = sum_j (-1)^j C(n+a, n-j) z^j / j!
    fn laguerre_sum(n: usize, a: i64, z: f64) -> f64 {
        let binom = |top: i64, k: i64| -> f64 {
            if k < 0 {
                return 0.0;
            }
            // generalized binomial for integer top (may be negative)
            let mut v = 1.0;
            for i in 0..k {
                v *= (top - i) as f64 / (i + 1) as f64;
            }
            v
        };
        (0..=n as i64)
            .map(|j| {
                let fact: f64 = (1..=j).map(|i| i as f64).product();
                (-1f64).powi(j as i32) * binom(n as i64 + a, n as i64 - j) * z.powi(j as i32)
                    / fact
            })
            .sum()
    }

    #[test]
    fn recurrence_matches_explicit_sum() {
        for n in 0..12 {
            for a in 0..5 {
                for &z in &[0.0, 0.3, 1.7, 4.2] {
                    let r = laguerre(n, a as f64, z);
                    let s = laguerre_sum(n, a, z);
                    assert!((r - s).abs() < 1e-9 * (1.0 + s.abs()), "n={n} a={a} z={z}");
                }
            }
        }
    }

    #[test]
    fn negative_index_identity_matches_explicit_sum() {
        for n in 2..10 {
            for m in 1..=n as i64 / 2 {
                for &z in &[0.2, 1.1, 3.0] {
                    let r = laguerre_int(n, -m, z);
                    let s = laguerre_sum(n, -m, z);
                    assert!((r - s).abs() < 1e-9 * (1.0 + s.abs()), "n={n} m={m} z={z}");
                }
            }
        }
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
    }
}
