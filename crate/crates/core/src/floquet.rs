//! Mathieu reference oscillator and the interaction-picture couplings.
//!
//! `solve_mathieu` integrates `ε'' + (a + 2q cos 2t) ε = 0` over one period,
//! diagonalizes the monodromy matrix and returns the Floquet solution
//! `ε(t) = exp(i ω_s t) φ(t)` normalized to `ε(0) = 1`, `ε'(0) = i ω_r`.
//! The matrix elements `ω_l^(n,n+2k)` are periodic integrals over `φ` and are
//! evaluated by trapezoidal quadrature on the stored samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{Dopri5, Tolerance};
use crate::special::{laguerre_int, ln_factorial};

pub const DEFAULT_SAMPLES: usize = 1024;
pub const DEFAULT_RTOL: f64 = 1e-12;

/// Quadrature change allowed when doubling the node count.
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub a: f64,
    pub q: f64,
    /// Secular frequency, principal branch in (0, 1).
    pub omega_s: f64,
    /// Reference oscillator frequency, `Im ε'(0)`.
    pub omega_r: f64,
    /// Eigenvalue `exp(i ω_s π)` of the monodromy matrix (unnormalized).
    pub multiplier: Complex64,
    /// `φ(t_m)` at `t_m = m π / M`, `m = 0..M`.
    pub phi: Vec<Complex64>,
    /// `ε'(t_m)` taken from the integrator, used for the Wronskian check.
    eps_dot: Vec<Complex64>,
    /// Fourier coefficients of `φ` in FFT order: `φ(t) = Σ c_j exp(2 i k_j t)`.
    coeffs: Vec<Complex64>,
}

fn fourier_index(j: usize, m: usize) -> f64 {
    if j < m / 2 {
        j as f64
    } else {
        j as f64 - m as f64
    }
}

/// Solves the Mathieu problem with the default tolerance and sample count.
pub fn solve_mathieu(a: f64, q: f64, rtol: f64) -> Result<FloquetSolution> {
    solve_mathieu_sampled(a, q, rtol, DEFAULT_SAMPLES)
}

pub fn solve_mathieu_sampled(a: f64, q: f64, rtol: f64, samples: usize) -> Result<FloquetSolution> {
    if !(a.is_finite() && q.is_finite()) {
        return Err(Error::invalid("a/q", "must be finite"));
    }
    if samples < 8 || !samples.is_power_of_two() {
        return Err(Error::invalid("samples", "must be a power of two >= 8"));
    }
    let rhs = |t: f64, y: &[f64; 4]| {
        let w = a + 2.0 * q * (2.0 * t).cos();
        [y[1], -w * y[0], y[3], -w * y[2]]
    };
    let mut ode = Dopri5::<4>::new(Tolerance::new(rtol, rtol * 1e-2));
    // (y1, y1', y2, y2') with y1(0) = 1, y2'(0) = 1
    let mut y = [1.0, 0.0, 0.0, 1.0];
    let h = PI / samples as f64;
    let mut states = Vec::with_capacity(samples + 1);
    states.push(y);
    for m in 0..samples {
        ode.integrate(rhs, m as f64 * h, (m + 1) as f64 * h, &mut y)?;
        states.push(y);
    }

    let [m11, m21, m12, m22] = y;
    let det = m11 * m22 - m12 * m21;
    let half_trace = 0.5 * (m11 + m22);
    if half_trace.abs() >= 1.0 {
        let disc = (half_trace * half_trace - det).max(0.0).sqrt();
        let modulus = (half_trace.abs() + disc).max((half_trace.abs() - disc).abs());
        return Err(Error::UnstableTrap { a, q, modulus });
    }
    let modulus = det.abs().sqrt();
    if (modulus - 1.0).abs() > 1e-8 {
        return Err(Error::FloquetCheck(format!(
            "|Floquet multiplier| = {modulus} deviates from 1"
        )));
    }
    let omega_s = half_trace.acos() / PI;
    if !(1e-6..=1.0 - 1e-6).contains(&omega_s) {
        return Err(Error::BranchAmbiguous { omega_s });
    }
    let multiplier = Complex64::new(half_trace, (det - half_trace * half_trace).sqrt());

    // eigenvector (1, c): m11 + m12 c = λ
    let c = (multiplier - m11) / m12;
    if c.re.abs() > 1e-8 {
        return Err(Error::FloquetCheck(format!(
            "Re ε'(0) = {:e} is not zero",
            c.re
        )));
    }
    let omega_r = c.im;
    if omega_r <= 0.0 {
        return Err(Error::FloquetCheck(format!(
            "reference frequency {omega_r} is not positive"
        )));
    }

    let mut phi = Vec::with_capacity(samples);
    let mut eps_dot = Vec::with_capacity(samples);
    for (m, s) in states.iter().take(samples).enumerate() {
        let t = m as f64 * h;
        let eps = s[0] + c * s[2];
        let rot = Complex64::from_polar(1.0, -omega_s * t);
        phi.push(rot * eps);
        eps_dot.push(s[1] + c * s[3]);
    }

    let mut coeffs = phi.clone();
    FftPlanner::new()
        .plan_fft_forward(samples)
        .process(&mut coeffs);
    let norm = 1.0 / samples as f64;
    coeffs.iter_mut().for_each(|v| *v *= norm);

    Ok(FloquetSolution {
        a,
        q,
        omega_s,
        omega_r,
        multiplier,
        phi,
        eps_dot,
        coeffs,
    })
}

impl FloquetSolution {
    pub fn samples(&self) -> usize {
        self.phi.len()
    }

    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        let h = PI / self.samples() as f64;
        (0..self.samples()).map(move |m| m as f64 * h)
    }

    /// Fourier interpolant of `φ` at an arbitrary time.
    pub fn phi_at(&self, t: f64) -> Complex64 {
        let m = self.samples();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * Complex64::from_polar(1.0, 2.0 * fourier_index(j, m) * t))
            .sum()
    }

    fn phi_dot_at(&self, t: f64) -> Complex64 {
        let m = self.samples();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let w = 2.0 * fourier_index(j, m);
                c * Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * t)
            })
            .sum()
    }

    /// `ε(t) = exp(i ω_s t) φ(t)`.
    pub fn epsilon(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.omega_s * t) * self.phi_at(t)
    }

    pub fn epsilon_dot(&self, t: f64) -> Complex64 {
        let i_ws = Complex64::new(0.0, self.omega_s);
        Complex64::from_polar(1.0, self.omega_s * t) * (i_ws * self.phi_at(t) + self.phi_dot_at(t))
    }

    /// `φ` sampled on `count` uniform nodes of `[shift, shift + π)`.
    pub fn phi_resampled(&self, count: usize, shift: f64) -> Vec<Complex64> {
        let m = self.samples();
        assert!(count.is_power_of_two() && count >= m);
        let mut spec = vec![Complex64::new(0.0, 0.0); count];
        for (j, c) in self.coeffs.iter().enumerate() {
            let k = fourier_index(j, m);
            let dst = if k >= 0.0 { k as usize } else { (count as f64 + k) as usize };
            spec[dst] = c * Complex64::from_polar(1.0, 2.0 * k * shift);
        }
        FftPlanner::new().plan_fft_inverse(count).process(&mut spec);
        spec
    }

    /// Largest deviation of `Im(ε* ε')` from `ω_r` over the stored period.
    pub fn wronskian_deviation(&self) -> f64 {
        self.sample_times()
            .zip(self.phi.iter().zip(&self.eps_dot))
            .map(|(t, (phi, ed))| {
                let eps = Complex64::from_polar(1.0, self.omega_s * t) * phi;
                ((eps.conj() * ed).im - self.omega_r).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest residual of the Mathieu equation on the sample nodes, with
    /// `ε''` taken from the spectral representation of `φ`.
    pub fn residual_max(&self) -> f64 {
        let m = self.samples();
        let cmax = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        // modes at rounding level only amplify noise under differentiation
        let modes: Vec<(f64, Complex64)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-14 * cmax)
            .map(|(j, c)| (self.omega_s + 2.0 * fourier_index(j, m), *c))
            .collect();
        self.sample_times()
            .map(|t| {
                let (mut eps, mut eps_dd) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for &(w, c) in &modes {
                    let e = c * Complex64::from_polar(1.0, w * t);
                    eps += e;
                    eps_dd -= e * w * w;
                }
                (eps_dd + (self.a + 2.0 * self.q * (2.0 * t).cos()) * eps).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn record(&self, kbar: Option<f64>) -> FloquetRecord {
        FloquetRecord {
            a: self.a,
            q: self.q,
            omega_s: self.omega_s,
            omega_r: self.omega_r,
            eta: kbar.and_then(|k| lamb_dicke(k, self.omega_r).ok()),
            phi_re: self.phi.iter().map(|c| c.re).collect(),
            phi_im: self.phi.iter().map(|c| c.im).collect(),
        }
    }
}

/// JSON form of a Floquet solution.
#[derive(Debug, Clone, Serialize)]
pub struct FloquetRecord {
    pub a: f64,
    pub q: f64,
    pub omega_s: f64,
    pub omega_r: f64,
    pub eta: Option<f64>,
    pub phi_re: Vec<f64>,
    pub phi_im: Vec<f64>,
}

/// Lamb-Dicke parameter `η = sqrt(k̄ / (2 ω_r))`.
pub fn lamb_dicke(kbar: f64, omega_r: f64) -> Result<f64> {
    if !(omega_r > 0.0) {
        return Err(Error::invalid("omega_r", "must be positive"));
    }
    if !(kbar > 0.0) {
        return Err(Error::invalid("kbar", "must be positive"));
    }
    Ok((kbar / (2.0 * omega_r)).sqrt())
}

fn check_indices(n: usize, k: i64) -> Result<()> {
    if k < -((n / 2) as i64) {
        return Err(Error::invalid(
            "k",
            format!("k={k} is below -floor(n/2) for n={n}"),
        ));
    }
    Ok(())
}

/// Trapezoidal estimate of `(1/π) ∫ [φ*]^{2k} e^{-z/2} L_n^{2k}(z) e^{-2ilt} dt`
/// with `z = η²|φ|²` over the nodes `shift + m π / M`.
fn periodic_integral(phi: &[Complex64], shift: f64, n: usize, k: i64, l: i64, eta: f64) -> Complex64 {
    let count = phi.len();
    let h = PI / count as f64;
    let eta2 = eta * eta;
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, p) in phi.iter().enumerate() {
        let t = shift + m as f64 * h;
        let z = eta2 * p.norm_sqr();
        let pow = p.conj().powi(2 * k as i32);
        let lag = laguerre_int(n, 2 * k, z);
        acc += pow * ((-0.5 * z).exp() * lag) * Complex64::from_polar(1.0, -2.0 * l as f64 * t);
    }
    acc / count as f64
}

fn prefactor(n: usize, k: i64, omega0: f64, eta: f64) -> Complex64 {
    let top = (n as i64 + 2 * k) as usize;
    let ratio = (0.5 * (ln_factorial(n) - ln_factorial(top))).exp();
    // (i η)^{2k} = (-1)^k η^{2k}
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Complex64::new(omega0 * ratio * sign * eta.powi(2 * k as i32), 0.0)
}

/// `ω_l^(n,n+2k)` integrated over the stored period, with a convergence check
/// against twice as many nodes.
pub fn matrix_element(
    n: usize,
    k: i64,
    l: i64,
    omega0: f64,
    eta: f64,
    sol: &FloquetSolution,
) -> Result<Complex64> {
    check_indices(n, k)?;
    let coarse = periodic_integral(&sol.phi, 0.0, n, k, l, eta);
    let fine_phi = sol.phi_resampled(2 * sol.samples(), 0.0);
    let fine = periodic_integral(&fine_phi, 0.0, n, k, l, eta);
    let pre = prefactor(n, k, omega0, eta);
    let change = (pre * (fine - coarse)).norm();
    if change > QUADRATURE_TOL {
        return Err(Error::QuadratureNotConverged { n, k, l, change });
    }
    Ok(pre * fine)
}

/// Same integral on the nodes `shift + m π / M`, e.g. `shift = -π/2` for the
/// symmetric window. No convergence check.
pub fn matrix_element_shifted(
    n: usize,
    k: i64,
    l: i64,
    omega0: f64,
    eta: f64,
    sol: &FloquetSolution,
    shift: f64,
) -> Result<Complex64> {
    check_indices(n, k)?;
    let phi = sol.phi_resampled(sol.samples(), shift);
    Ok(prefactor(n, k, omega0, eta) * periodic_integral(&phi, shift, n, k, l, eta))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatrixElementEntry {
    pub n: usize,
    pub k: i64,
    pub l: i64,
    pub value: Complex64,
}

#[derive(Debug, Clone)]
pub struct MatrixElementTable {
    pub omega0: f64,
    pub eta: f64,
    pub entries: Vec<MatrixElementEntry>,
}

impl MatrixElementTable {
    /// All `(n, k, l)` combinations with `n <= n_max`; pairs with
    /// `k < -floor(n/2)` are skipped.
    pub fn build(
        sol: &FloquetSolution,
        omega0: f64,
        kbar: f64,
        n_max: usize,
        ks: &[i64],
        ls: &[i64],
    ) -> Result<Self> {
        let eta = lamb_dicke(kbar, sol.omega_r)?;
        let mut entries = Vec::new();
        for &k in ks {
            for &l in ls {
                for n in 0..=n_max {
                    if k < -((n / 2) as i64) {
                        continue;
                    }
                    let value = matrix_element(n, k, l, omega0, eta, sol)?;
                    entries.push(MatrixElementEntry { n, k, l, value });
                }
            }
        }
        Ok(Self {
            omega0,
            eta,
            entries,
        })
    }

    /// `|ω_l^(n,n+2k)|` for `n = 0..` in table order.
    pub fn magnitudes(&self, k: i64, l: i64) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter(|e| e.k == k && e.l == l)
            .map(|e| (e.n, e.value.norm()))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: &str) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(w, "# {header}")?;
        }
        writeln!(w, "n,k,l,re,im,abs")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e}",
                e.n,
                e.k,
                e.l,
                e.value.re,
                e.value.im,
                e.value.norm()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub k: i64,
    pub l: i64,
    /// Detuning satisfying `l - k ω_s + Δ = 0`.
    pub delta: f64,
    /// Number of phonons exchanged, `2k`.
    pub phonons: i64,
}

pub fn resonance_detunings(
    omega_s: f64,
    ks: impl IntoIterator<Item = i64>,
    ls: impl IntoIterator<Item = i64> + Clone,
) -> Vec<Resonance> {
    let mut out = Vec::new();
    for k in ks {
        for l in ls.clone() {
            out.push(Resonance {
                k,
                l,
                delta: k as f64 * omega_s - l as f64,
                phonons: 2 * k,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_limit_is_exact() {
        let sol = solve_mathieu(0.25, 0.0, DEFAULT_RTOL).unwrap();
        assert!((sol.omega_s - 0.5).abs() < 1e-9);
        assert!((sol.omega_r - 0.5).abs() < 1e-9);
        for p in &sol.phi {
            assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn paul_trap_secular_frequency() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        assert!((sol.omega_s - 0.29).abs() < 0.005, "omega_s = {}", sol.omega_s);
        assert!((sol.phi[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(sol.wronskian_deviation() < 1e-8);
        assert!(sol.residual_max() < 1e-7, "residual {}", sol.residual_max());
    }

    #[test]
    fn small_q_expansion_agrees() {
        // β² ≈ a + q²/2 (a → 0) gives β ≈ q/√2 with relative correction O(q²)
        let q = 0.4;
        let sol = solve_mathieu(0.0, q, DEFAULT_RTOL).unwrap();
        let lowest = q / 2f64.sqrt();
        // a = β² + q²/(2(β²-1)) + (5β²+7) q⁴ / (32 (β²-1)³ (β²-4)) + O(q⁶)
        // solved at a = 0 to fourth order: β² = q²/2 + 25 q⁴ / 128
        let next = (q * q / 2.0 + 25.0 * q.powi(4) / 128.0).sqrt();
        assert!((sol.omega_s - lowest).abs() <= (next - lowest).abs() * 1.5);
        assert!((sol.omega_s - next).abs() < 2e-3);
    }

    #[test]
    fn unstable_parameters_are_rejected() {
        match solve_mathieu(0.0, 2.0, DEFAULT_RTOL) {
            Err(Error::UnstableTrap { modulus, .. }) => assert!(modulus > 1.0),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn periodicity_of_phi() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        // φ(π) from the interpolant must match φ(0); also compare against ε(π)/λ
        let eps_pi = sol.epsilon(PI);
        let expected = sol.multiplier * sol.phi[0];
        assert!((eps_pi - expected).norm() < 1e-7);
        for (m, t) in sol.sample_times().enumerate().step_by(97) {
            assert!((sol.phi_at(t + PI) - sol.phi[m]).norm() < 1e-7);
        }
    }

    #[test]
    fn lamb_dicke_definition() {
        assert!((lamb_dicke(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let e1 = lamb_dicke(0.1, 0.3).unwrap();
        let e2 = lamb_dicke(0.2, 0.3).unwrap();
        assert!((e2 * e2 / (e1 * e1) - 2.0).abs() < 1e-12);
        assert!(lamb_dicke(0.1, 0.0).is_err());
    }

    #[test]
    fn vanishing_eta_leaves_carrier_only() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        let eta = 1e-9;
        for n in [0usize, 3, 8] {
            let w0 = matrix_element(n, 0, 0, 2.24, eta, &sol).unwrap();
            assert!((w0 - Complex64::new(2.24, 0.0)).norm() < 1e-8);
            let w1 = matrix_element(n, 0, 1, 2.24, eta, &sol).unwrap();
            assert!(w1.norm() < 1e-8);
            let w2 = matrix_element(n, 1, 0, 2.24, eta, &sol).unwrap();
            assert!(w2.norm() < 1e-8);
        }
    }

    #[test]
    fn shift_invariance_of_the_window() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        let eta = lamb_dicke(0.29, sol.omega_r).unwrap();
        for &(n, k, l) in &[(4usize, 1i64, 0i64), (10, 1, 1), (7, -1, 0), (12, 2, -1)] {
            let base = matrix_element_shifted(n, k, l, 2.24, eta, &sol, 0.0).unwrap();
            let sym = matrix_element_shifted(n, k, l, 2.24, eta, &sol, -PI / 2.0).unwrap();
            let odd = matrix_element_shifted(n, k, l, 2.24, eta, &sol, 0.1234).unwrap();
            assert!((base - sym).norm() < 1e-10);
            assert!((base - odd).norm() < 1e-10);
        }
    }

    #[test]
    fn couplings_are_bounded_by_rabi_frequency() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        let table =
            MatrixElementTable::build(&sol, 2.24, 0.29, 20, &[-2, -1, 0, 1, 2], &[-1, 0, 1]).unwrap();
        for e in &table.entries {
            assert!(e.value.norm().is_finite());
            assert!(e.value.norm() <= 2.24 * (1.0 + 1e-12), "{e:?}");
        }
    }

    #[test]
    fn invalid_k_is_rejected() {
        let sol = solve_mathieu(0.0, 0.4, DEFAULT_RTOL).unwrap();
        assert!(matrix_element(3, -2, 0, 1.0, 0.5, &sol).is_err());
    }

    #[test]
    fn resonance_conditions() {
        let r = resonance_detunings(0.29, [0, 1, 2], [0, 1]);
        let find = |k, l| r.iter().find(|x| x.k == k && x.l == l).unwrap().delta;
        assert!((find(1, 0) - 0.29).abs() < 1e-15);
        assert!((find(2, 0) - 0.58).abs() < 1e-15);
        assert_eq!(find(0, 1), -1.0);
        assert_eq!(r.iter().find(|x| x.k == 1).unwrap().phonons, 2);
    }
}
