//! Spatial grid, two-component wave functions and the observables computed
//! from them (distributions, moments, time-window averages).

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Internal-state basis of a [`SpinorField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Components `(ψ_g, ψ_e)`.
    #[serde(rename = "ge")]
    GroundExcited,
    /// Components `(ψ₊, ψ₋)` with `ψ± = (ψ_g ± ψ_e)/√2`.
    #[serde(rename = "pm")]
    PlusMinus,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::GroundExcited => "g/e",
            Basis::PlusMinus => "+/-",
        }
    }
}

/// Uniform periodic grid `x_j = -x_max + j dx` with its conjugate momenta.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    x_max: f64,
    dx: f64,
    kbar: f64,
    x: Vec<f64>,
    /// Dimensionless momenta `k̄ κ_j` in FFT order.
    p: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, x_max: f64, kbar: f64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::invalid("n_grid", "must be a power of two"));
        }
        if !(x_max > 0.0) {
            return Err(Error::invalid("x_max", "must be positive"));
        }
        if !(kbar > 0.0) {
            return Err(Error::invalid("kbar", "must be positive"));
        }
        let dx = 2.0 * x_max / n as f64;
        let x = (0..n).map(|j| -x_max + j as f64 * dx).collect();
        let dkappa = std::f64::consts::PI / x_max;
        let p = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                kbar * m * dkappa
            })
            .collect();
        Ok(Self {
            n,
            x_max,
            dx,
            kbar,
            x,
            p,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn kbar(&self) -> f64 {
        self.kbar
    }

    pub fn dp(&self) -> f64 {
        self.kbar * std::f64::consts::PI / self.x_max
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    /// Momenta in FFT order.
    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    /// Momenta in ascending order (the order used for distributions).
    pub fn momenta_sorted(&self) -> Vec<f64> {
        let half = self.n / 2;
        (0..self.n).map(|i| self.p[(i + half) % self.n]).collect()
    }

    /// Number of nodes on each side counted as "boundary" (1% of the grid,
    /// at least one node).
    pub fn edge_nodes(&self) -> usize {
        (self.n / 100).max(1)
    }
}

/// Two-component wave function on a grid.
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: Arc<Grid>,
    /// `ψ_g` (or `ψ₊`).
    pub c0: Vec<Complex64>,
    /// `ψ_e` (or `ψ₋`).
    pub c1: Vec<Complex64>,
    pub t: f64,
    pub basis: Basis,
}

impl SpinorField {
    pub fn zeros(grid: Arc<Grid>, basis: Basis) -> Self {
        let n = grid.len();
        Self {
            grid,
            c0: vec![Complex64::new(0.0, 0.0); n],
            c1: vec![Complex64::new(0.0, 0.0); n],
            t: 0.0,
            basis,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `(Σ|c0|² dx, Σ|c1|² dx)`.
    pub fn component_norms(&self) -> (f64, f64) {
        let dx = self.grid.dx();
        let a: f64 = self.c0.iter().map(|c| c.norm_sqr()).sum();
        let b: f64 = self.c1.iter().map(|c| c.norm_sqr()).sum();
        (a * dx, b * dx)
    }

    pub fn norm_sqr(&self) -> f64 {
        let (a, b) = self.component_norms();
        a + b
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        self.c0.iter_mut().chain(self.c1.iter_mut()).for_each(|c| *c *= s);
        Ok(())
    }

    /// `⟨self|other⟩` with the grid measure.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        let s: Complex64 = self
            .c0
            .iter()
            .zip(&other.c0)
            .chain(self.c1.iter().zip(&other.c1))
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.dx()
    }

    /// `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
    pub fn overlap(&self, other: &SpinorField) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    /// L² norm of the difference.
    pub fn distance(&self, other: &SpinorField) -> f64 {
        let s: f64 = self
            .c0
            .iter()
            .zip(&other.c0)
            .chain(self.c1.iter().zip(&other.c1))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * self.grid.dx()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &SpinorField) -> f64 {
        self.c0
            .iter()
            .zip(&other.c0)
            .chain(self.c1.iter().zip(&other.c1))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Fraction of the norm in the outer 1% of nodes on either side.
    pub fn boundary_occupancy(&self) -> f64 {
        let e = self.grid.edge_nodes();
        let n = self.grid.len();
        let edge: f64 = (0..e)
            .chain(n - e..n)
            .map(|j| self.c0[j].norm_sqr() + self.c1[j].norm_sqr())
            .sum::<f64>()
            * self.grid.dx();
        edge / self.norm_sqr()
    }

    pub(crate) fn copy_from(&mut self, other: &SpinorField) {
        self.c0.copy_from_slice(&other.c0);
        self.c1.copy_from_slice(&other.c1);
        self.t = other.t;
        self.basis = other.basis;
    }

    /// Hadamard-type change of internal basis, `(a, b) → ((a+b)/√2, (a-b)/√2)`.
    /// It is its own inverse; only the tag differs.
    pub(crate) fn hadamard(&mut self, to: Basis) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in self.c0.iter_mut().zip(self.c1.iter_mut()) {
            let (u, v) = (*a, *b);
            *a = (u + v) * s;
            *b = (u - v) * s;
        }
        self.basis = to;
    }
}

/// Minimum-uncertainty packet `|ψ(x)|² ∝ exp(-(x-x0)²/(2 width²))` with mean
/// momentum `p0`, internal amplitudes `weights` (normalized here), total norm 1.
pub fn init_gaussian(
    grid: &Arc<Grid>,
    width: f64,
    x0: f64,
    p0: f64,
    weights: [Complex64; 2],
    leak_tol: f64,
) -> Result<SpinorField> {
    if !(width > 0.0) {
        return Err(Error::invalid("width", "must be positive"));
    }
    if width < 2.0 * grid.dx() {
        return Err(Error::invalid(
            "width",
            format!("{width} is below two grid spacings ({})", 2.0 * grid.dx()),
        ));
    }
    let wn = (weights[0].norm_sqr() + weights[1].norm_sqr()).sqrt();
    if !(wn > 0.0) {
        return Err(Error::invalid("weights", "internal weights are both zero"));
    }
    let kbar = grid.kbar();
    let mut field = SpinorField::zeros(grid.clone(), Basis::GroundExcited);
    for (j, &x) in grid.positions().iter().enumerate() {
        let d = x - x0;
        let amp = (-d * d / (4.0 * width * width)).exp();
        let f = Complex64::from_polar(amp, p0 * x / kbar);
        field.c0[j] = f * weights[0] / wn;
        field.c1[j] = f * weights[1] / wn;
    }
    field.normalize()?;
    let leak = field.boundary_occupancy();
    if leak > leak_tol {
        return Err(Error::BoundaryLeak {
            space: "position",
            t: 0.0,
            occupancy: leak,
            tolerance: leak_tol,
        });
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Momentum,
}

/// Densities `P_g`, `P_e` and `P = P_g + P_e` on a set of abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub space: Space,
    pub t: f64,
    pub abscissa: Vec<f64>,
    pub spacing: f64,
    pub pg: Vec<f64>,
    pub pe: Vec<f64>,
    pub p: Vec<f64>,
    pub normalized: bool,
}

impl Distribution {
    pub(crate) fn from_components(
        space: Space,
        t: f64,
        abscissa: Vec<f64>,
        spacing: f64,
        pg: Vec<f64>,
        pe: Vec<f64>,
        normalized: bool,
    ) -> Self {
        let p = pg.iter().zip(&pe).map(|(a, b)| a + b).collect();
        Self {
            space,
            t,
            abscissa,
            spacing,
            pg,
            pe,
            p,
            normalized,
        }
    }

    pub fn integral(&self) -> f64 {
        self.p.iter().sum::<f64>() * self.spacing
    }

    /// Mean and standard deviation of `P`.
    pub fn mean_and_width(&self) -> (f64, f64) {
        let total: f64 = self.p.iter().sum();
        let m1: f64 = self.abscissa.iter().zip(&self.p).map(|(x, w)| x * w).sum::<f64>() / total;
        let m2: f64 =
            self.abscissa.iter().zip(&self.p).map(|(x, w)| x * x * w).sum::<f64>() / total;
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &str, tag: Option<&str>) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(w, "# {header}")?;
        }
        let name = match self.space {
            Space::Position => "x",
            Space::Momentum => "p",
        };
        match tag {
            Some(_) => writeln!(w, "{name},P_g,P_e,P,tag")?,
            None => writeln!(w, "{name},P_g,P_e,P")?,
        }
        for i in 0..self.abscissa.len() {
            write!(
                w,
                "{:e},{:e},{:e},{:e}",
                self.abscissa[i], self.pg[i], self.pe[i], self.p[i]
            )?;
            match tag {
                Some(t) => writeln!(w, ",{t}")?,
                None => writeln!(w)?,
            }
        }
        Ok(())
    }
}

/// First and second moments plus internal populations at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MomentSummary {
    pub t: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
    pub width_x: f64,
    pub mean_p: f64,
    pub mean_p2: f64,
    pub width_p: f64,
    /// Unnormalized populations; they sum to `norm_sqr`.
    pub pop_ground: f64,
    pub pop_excited: f64,
    pub norm_sqr: f64,
}

impl MomentSummary {
    /// Builds widths from first and second moments.
    pub fn from_raw(t: f64, mx: f64, mx2: f64, mp: f64, mp2: f64, pg: f64, pe: f64) -> Self {
        Self {
            t,
            mean_x: mx,
            mean_x2: mx2,
            width_x: (mx2 - mx * mx).max(0.0).sqrt(),
            mean_p: mp,
            mean_p2: mp2,
            width_p: (mp2 - mp * mp).max(0.0).sqrt(),
            pop_ground: pg,
            pop_excited: pe,
            norm_sqr: pg + pe,
        }
    }

    /// Builds the summary from means and variances (no cancellation in the widths).
    pub fn from_central(t: f64, mx: f64, var_x: f64, mp: f64, var_p: f64, pg: f64, pe: f64) -> Self {
        Self {
            t,
            mean_x: mx,
            mean_x2: var_x + mx * mx,
            width_x: var_x.max(0.0).sqrt(),
            mean_p: mp,
            mean_p2: var_p + mp * mp,
            width_p: var_p.max(0.0).sqrt(),
            pop_ground: pg,
            pop_excited: pe,
            norm_sqr: pg + pe,
        }
    }

    /// Excited-state fraction of the norm.
    pub fn excited_fraction(&self) -> f64 {
        if self.norm_sqr > 0.0 {
            self.pop_excited / self.norm_sqr
        } else {
            0.0
        }
    }

    /// Same moments with populations rescaled to unit norm.
    pub fn normalized(&self) -> Self {
        let mut s = *self;
        if self.norm_sqr > 0.0 {
            s.pop_ground /= self.norm_sqr;
            s.pop_excited /= self.norm_sqr;
            s.norm_sqr = 1.0;
        }
        s
    }
}

pub const MOMENTS_CSV_COLUMNS: &str = "t,dx,dp,mean_x,mean_p,pop_e,norm2";

pub fn write_moments_csv<W: Write>(
    mut w: W,
    series: &[MomentSummary],
    header: &str,
    tag: Option<&str>,
) -> std::io::Result<()> {
    if !header.is_empty() {
        writeln!(w, "# {header}")?;
    }
    match tag {
        Some(_) => writeln!(w, "{MOMENTS_CSV_COLUMNS},tag")?,
        None => writeln!(w, "{MOMENTS_CSV_COLUMNS}")?,
    }
    for m in series {
        write!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            m.t,
            m.width_x,
            m.width_p,
            m.mean_x,
            m.mean_p,
            m.excited_fraction(),
            m.norm_sqr
        )?;
        match tag {
            Some(t) => writeln!(w, ",{t}")?,
            None => writeln!(w)?,
        }
    }
    Ok(())
}

/// Observable evaluation with cached FFT plans.
pub struct Observables {
    grid: Arc<Grid>,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    k0: Vec<Complex64>,
    k1: Vec<Complex64>,
}

impl Observables {
    pub fn new(grid: Arc<Grid>) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(grid.len());
        let n = grid.len();
        Self {
            scratch: vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            k0: vec![Complex64::new(0.0, 0.0); n],
            k1: vec![Complex64::new(0.0, 0.0); n],
            grid,
            fft,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Fills the momentum-space amplitudes (FFT order), scaled so that
    /// `Σ |φ|² dp = Σ |ψ|² dx`.
    fn transform(&mut self, psi: &SpinorField) {
        self.k0.copy_from_slice(&psi.c0);
        self.k1.copy_from_slice(&psi.c1);
        self.fft.process_with_scratch(&mut self.k0, &mut self.scratch);
        self.fft.process_with_scratch(&mut self.k1, &mut self.scratch);
    }

    fn momentum_weight(&self) -> f64 {
        // |FFT|² dx² / (2π k̄)
        let dx = self.grid.dx();
        dx * dx / (2.0 * std::f64::consts::PI * self.grid.kbar())
    }

    pub fn position_distributions(&self, psi: &SpinorField) -> Distribution {
        position_distributions(psi)
    }

    pub fn momentum_distributions(&mut self, psi: &SpinorField) -> Distribution {
        self.transform(psi);
        let n = self.grid.len();
        let half = n / 2;
        let w = self.momentum_weight();
        let pg = (0..n).map(|i| self.k0[(i + half) % n].norm_sqr() * w).collect();
        let pe = (0..n).map(|i| self.k1[(i + half) % n].norm_sqr() * w).collect();
        Distribution::from_components(
            Space::Momentum,
            psi.t,
            self.grid.momenta_sorted(),
            self.grid.dp(),
            pg,
            pe,
            false,
        )
    }

    /// Moments of the normalized densities. Populations are left raw.
    pub fn moments(&mut self, psi: &SpinorField) -> Result<MomentSummary> {
        let (ng, ne) = psi.component_norms();
        let norm = ng + ne;
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let dx = self.grid.dx();
        let (mut sx, mut sx2) = (0.0, 0.0);
        for (j, &x) in self.grid.positions().iter().enumerate() {
            let d = psi.c0[j].norm_sqr() + psi.c1[j].norm_sqr();
            sx += x * d;
            sx2 += x * x * d;
        }
        self.transform(psi);
        let w = self.momentum_weight() * self.grid.dp();
        let (mut sp, mut sp2) = (0.0, 0.0);
        for (j, &p) in self.grid.momenta().iter().enumerate() {
            let d = self.k0[j].norm_sqr() + self.k1[j].norm_sqr();
            sp += p * d;
            sp2 += p * p * d;
        }
        Ok(MomentSummary::from_raw(
            psi.t,
            sx * dx / norm,
            sx2 * dx / norm,
            sp * w / norm,
            sp2 * w / norm,
            ng,
            ne,
        ))
    }

    /// Fraction of the norm in the outer 1% of momentum nodes.
    pub fn momentum_boundary_occupancy(&mut self, psi: &SpinorField) -> f64 {
        self.transform(psi);
        let n = self.grid.len();
        let e = self.grid.edge_nodes();
        let half = n / 2;
        // sorted index i maps to FFT index (i + half) % n
        let edge: f64 = (0..e)
            .chain(n - e..n)
            .map(|i| {
                let j = (i + half) % n;
                self.k0[j].norm_sqr() + self.k1[j].norm_sqr()
            })
            .sum();
        let total: f64 = self
            .k0
            .iter()
            .chain(&self.k1)
            .map(|c| c.norm_sqr())
            .sum();
        edge / total
    }
}

pub fn position_distributions(psi: &SpinorField) -> Distribution {
    let grid = psi.grid();
    Distribution::from_components(
        Space::Position,
        psi.t,
        grid.positions().to_vec(),
        grid.dx(),
        psi.c0.iter().map(|c| c.norm_sqr()).collect(),
        psi.c1.iter().map(|c| c.norm_sqr()).collect(),
        false,
    )
}

pub fn momentum_distributions(psi: &SpinorField) -> Distribution {
    Observables::new(psi.grid().clone()).momentum_distributions(psi)
}

pub fn moments(psi: &SpinorField) -> Result<MomentSummary> {
    Observables::new(psi.grid().clone()).moments(psi)
}

fn in_window(t: f64, (ta, tb): (f64, f64)) -> bool {
    let eps = 1e-9 * (1.0 + tb.abs());
    t >= ta - eps && t <= tb + eps
}

/// Pointwise mean of all distributions stamped inside `[t_a, t_b]`.
pub fn window_average(series: &[Distribution], window: (f64, f64)) -> Result<Distribution> {
    let mut acc = WindowAccumulator::new(window);
    for d in series {
        acc.add(d);
    }
    acc.finish()
}

/// Streaming form of [`window_average`].
#[derive(Debug, Clone)]
pub struct WindowAccumulator {
    window: (f64, f64),
    sum: Option<Distribution>,
    count: usize,
}

impl WindowAccumulator {
    pub fn new(window: (f64, f64)) -> Self {
        Self {
            window,
            sum: None,
            count: 0,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        in_window(t, self.window)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds `d` if its time stamp lies in the window.
    pub fn add(&mut self, d: &Distribution) -> bool {
        if !self.contains(d.t) {
            return false;
        }
        match &mut self.sum {
            None => self.sum = Some(d.clone()),
            Some(s) => {
                for (a, b) in s.pg.iter_mut().zip(&d.pg) {
                    *a += b;
                }
                for (a, b) in s.pe.iter_mut().zip(&d.pe) {
                    *a += b;
                }
                s.normalized &= d.normalized;
            }
        }
        self.count += 1;
        true
    }

    pub fn finish(self) -> Result<Distribution> {
        let (ta, tb) = self.window;
        let mut s = self.sum.ok_or(Error::EmptyWindow { t_a: ta, t_b: tb })?;
        let c = self.count as f64;
        s.pg.iter_mut().chain(s.pe.iter_mut()).for_each(|v| *v /= c);
        s.p = s.pg.iter().zip(&s.pe).map(|(a, b)| a + b).collect();
        s.t = 0.5 * (ta + tb);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1_grid() -> Arc<Grid> {
        Arc::new(Grid::new(4096, 40.0, 0.29).unwrap())
    }

    fn superposition() -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [Complex64::new(s, 0.0), Complex64::new(s, 0.0)]
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(8, 2.0, 1.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.positions()[0], -2.0);
        assert_eq!(g.positions()[4], 0.0);
        assert!((g.dx() * g.len() as f64 - 4.0).abs() < 1e-15);
        let p = g.momenta_sorted();
        assert!((p[0] + p[7] + g.dp()).abs() < 1e-12, "{p:?}");
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(Grid::new(12, 1.0, 1.0).is_err());
    }

    #[test]
    fn fig1_initial_state() {
        let g = fig1_grid();
        let kbar: f64 = 0.29;
        let psi = init_gaussian(&g, kbar.sqrt(), 0.0, 0.0, superposition(), 1e-6).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let m = moments(&psi).unwrap();
        assert!(m.mean_x.abs() < 1e-10);
        assert!((m.width_x - kbar.sqrt()).abs() / kbar.sqrt() < 1e-3);
        assert!((m.width_p - kbar / (2.0 * kbar.sqrt())).abs() / m.width_p < 1e-3);
        let d = position_distributions(&psi);
        assert_eq!(d.pg, d.pe);
    }

    #[test]
    fn momentum_density_is_gaussian_and_shifted() {
        let g = fig1_grid();
        let width = 0.8;
        let p0 = 1.3;
        let psi = init_gaussian(&g, width, 0.0, p0, superposition(), 1e-6).unwrap();
        let d = momentum_distributions(&psi);
        let sigma_p = g.kbar() / (2.0 * width);
        let mut max_err: f64 = 0.0;
        for (p, v) in d.abscissa.iter().zip(&d.p) {
            let exact = (-(p - p0).powi(2) / (2.0 * sigma_p * sigma_p)).exp()
                / (2.0 * std::f64::consts::PI * sigma_p * sigma_p).sqrt();
            max_err = max_err.max((v - exact).abs());
        }
        assert!(max_err < 1e-9, "max error {max_err}");
        let (mean, _) = d.mean_and_width();
        assert!((mean - p0).abs() < 1e-9);
        assert!((d.integral() - position_distributions(&psi).integral()).abs() < 1e-10);
    }

    #[test]
    fn narrow_or_leaking_packets_are_refused() {
        let g = fig1_grid();
        assert!(init_gaussian(&g, g.dx(), 0.0, 0.0, superposition(), 1e-6).is_err());
        assert!(matches!(
            init_gaussian(&g, 2.0, 39.0, 0.0, superposition(), 1e-6),
            Err(Error::BoundaryLeak { .. })
        ));
        let zero = [Complex64::new(0.0, 0.0); 2];
        assert!(init_gaussian(&g, 1.0, 0.0, 0.0, zero, 1e-6).is_err());
    }

    #[test]
    fn ground_only_field_has_p_equal_pg() {
        let g = fig1_grid();
        let w = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let psi = init_gaussian(&g, 1.0, 0.0, 0.0, w, 1e-6).unwrap();
        let d = position_distributions(&psi);
        assert_eq!(d.p, d.pg);
    }

    #[test]
    fn window_average_cases() {
        let mk = |t: f64, v: f64| {
            Distribution::from_components(
                Space::Position,
                t,
                vec![0.0, 1.0],
                1.0,
                vec![v, 2.0 * v],
                vec![0.5 * v, 0.0],
                false,
            )
        };
        let single = window_average(&[mk(1.0, 3.0)], (0.0, 2.0)).unwrap();
        assert_eq!(single.p, mk(1.0, 3.0).p);
        let two = window_average(&[mk(0.5, 1.0), mk(1.5, 3.0), mk(9.0, 100.0)], (0.0, 2.0)).unwrap();
        assert_eq!(two.pg, vec![2.0, 4.0]);
        assert_eq!(two.pe, vec![1.0, 0.0]);
        assert_eq!(two.p, vec![3.0, 4.0]);
        assert!(matches!(
            window_average(&[mk(5.0, 1.0)], (0.0, 2.0)),
            Err(Error::EmptyWindow { .. })
        ));
    }

    fn random_field(seed: u64, n: usize) -> SpinorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(Grid::new(n, 10.0, 0.5).unwrap());
        let mut f = SpinorField::zeros(g, Basis::GroundExcited);
        for c in f.c0.iter_mut().chain(f.c1.iter_mut()) {
            *c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        f
    }

    proptest! {
        #[test]
        fn densities_integrate_to_norm(seed in 0u64..1000) {
            let f = random_field(seed, 256);
            let norm = f.norm_sqr();
            let dx = position_distributions(&f);
            let dp = momentum_distributions(&f);
            prop_assert!((dx.integral() - norm).abs() < 1e-12 * norm.max(1.0));
            prop_assert!((dp.integral() - norm).abs() < 1e-10 * norm.max(1.0));
            for i in 0..dx.p.len() {
                prop_assert!(dx.pg[i] >= 0.0 && dx.pe[i] >= 0.0);
                prop_assert_eq!(dx.p[i], dx.pg[i] + dx.pe[i]);
            }
        }

        #[test]
        fn translation_keeps_width(shift in 1usize..40) {
            let g = Arc::new(Grid::new(1024, 20.0, 0.29).unwrap());
            let psi = init_gaussian(&g, 0.9, -3.0, 0.4, superposition(), 1e-6).unwrap();
            let mut moved = psi.clone();
            moved.c0.rotate_right(shift);
            moved.c1.rotate_right(shift);
            let a = moments(&psi).unwrap();
            let b = moments(&moved).unwrap();
            prop_assert!((a.width_x - b.width_x).abs() < 1e-10);
            prop_assert!((b.mean_x - a.mean_x - shift as f64 * g.dx()).abs() < 1e-10);
        }
    }
}
