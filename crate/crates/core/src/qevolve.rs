//! Strang split-operator propagation of the two-component Schrödinger
//! equation `i k̄ ∂ψ/∂t = H ψ` with adaptive step-doubling control.
//!
//! Components are stored as `(c0, c1)`; in the g/e basis that is
//! `(ψ_g, ψ_e)`. Potentials are written as `s·I + w·τ` with `τ` the Pauli
//! matrices of the storage ordering (`τ3 = diag(1, -1)`).

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Basis, Grid, Observables, SpinorField};
use crate::params::TrapParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const CACHE_LIMIT: usize = 48;
const PHASE_BLOCK: usize = 16;

/// Node-wise potential of the model in a given internal basis.
#[derive(Debug, Clone, Copy)]
pub struct PauliPotential {
    pub basis: Basis,
    pub trap: TrapParams,
}

impl PauliPotential {
    pub fn new(trap: &TrapParams, basis: Basis) -> Self {
        Self { basis, trap: *trap }
    }

    /// `½ [a + 2q cos 2t] x²`
    pub fn scalar(&self, x: f64, t: f64) -> f64 {
        0.5 * (self.trap.a + 2.0 * self.trap.q * (2.0 * t).cos()) * x * x
    }

    /// Pauli vector in storage ordering. The g/e basis carries
    /// `-k̄Δσz + k̄Ω₀ cos x σx` with `σz = |e⟩⟨e| - |g⟩⟨g|`.
    pub fn vector(&self, x: f64) -> [f64; 3] {
        let c = self.trap.kbar * self.trap.omega0 * x.cos();
        let d = self.trap.kbar * self.trap.delta;
        match self.basis {
            Basis::GroundExcited => [c, 0.0, d],
            Basis::PlusMinus => [d, 0.0, c],
        }
    }

    /// Dense 2×2 matrix `s I + w·τ`, row-major.
    pub fn matrix(&self, x: f64, t: f64) -> [Complex64; 4] {
        let s = self.scalar(x, t);
        let [w1, w2, w3] = self.vector(x);
        [
            Complex64::new(s + w3, 0.0),
            Complex64::new(w1, -w2),
            Complex64::new(w1, w2),
            Complex64::new(s - w3, 0.0),
        ]
    }

    /// The diabatic potentials `V^(±) = s ± k̄Ω₀ cos x` (meaningful at Δ = 0).
    pub fn diabatic(&self, x: f64, t: f64) -> (f64, f64) {
        let s = self.scalar(x, t);
        let c = self.trap.kbar * self.trap.omega0 * x.cos();
        (s + c, s - c)
    }
}

/// `exp(-i h (u·τ))` for a complex vector `u`, row-major.
///
/// With `λ² = h² u·u` this is `cos λ I - i (sin λ / λ) h u·τ`; both functions
/// are even in `λ`, so the square-root branch does not matter.
pub fn spin_exponential(u: [Complex64; 3], h: f64) -> [Complex64; 4] {
    let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let z = uu * (h * h);
    let (c, sinc) = if z.norm() < 1e-4 {
        (
            1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0,
            1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0,
        )
    } else {
        let l = z.sqrt();
        (l.cos(), l.sin() / l)
    };
    let f = -Complex64::i() * sinc * h;
    let i = Complex64::i();
    [
        c + f * u[2],
        f * (u[0] - i * u[1]),
        f * (u[0] + i * u[1]),
        c - f * u[2],
    ]
}

/// Step-size state of the adaptive controller.
#[derive(Debug, Clone)]
pub struct StepController {
    pub dt: f64,
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub last_error: f64,
    /// Fixed-step mode: `dt` is used as given and no error estimate is made.
    pub fixed: bool,
    pub accepted: usize,
    pub rejected: usize,
}

impl StepController {
    pub fn adaptive(tol: f64, dt_min: f64, dt_max: f64) -> Self {
        Self {
            dt: dt_max / 16.0,
            tol,
            dt_min,
            dt_max,
            last_error: 0.0,
            fixed: false,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn fixed(dt: f64) -> Self {
        Self {
            dt,
            tol: f64::INFINITY,
            dt_min: dt,
            dt_max: dt,
            last_error: 0.0,
            fixed: true,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Rounds down to the ladder `dt_max · 2^(-m/8)` so that step tables
    /// can be reused.
    fn snap(&self, dt: f64) -> f64 {
        let m = (8.0 * (self.dt_max / dt).log2()).ceil().max(0.0);
        self.dt_max * (-m / 8.0).exp2()
    }

    fn propose(&self, dt: f64, err: f64) -> f64 {
        let fac = if err == 0.0 {
            2.0
        } else {
            (0.9 * (self.tol / err).cbrt()).clamp(0.2, 2.0)
        };
        self.snap((dt * fac).clamp(self.dt_min, self.dt_max))
    }
}

struct StepTables {
    /// `exp(-i p² dt / 2k̄) / N` in FFT order.
    kinetic: Vec<Complex64>,
    /// Spin part of the half-step potential exponential, per node.
    spin: Vec<[Complex64; 4]>,
}

/// Split-operator propagator for one parameter set, grid and basis.
pub struct Propagator {
    grid: Arc<Grid>,
    potential: PauliPotential,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    half_x2: Vec<f64>,
    phase: Vec<Complex64>,
    tables: HashMap<u64, Arc<StepTables>>,
    coarse: Option<SpinorField>,
    fine: Option<SpinorField>,
    leak_tol: Option<f64>,
    observables: Observables,
}

impl Propagator {
    pub fn new(grid: Arc<Grid>, trap: &TrapParams, basis: Basis) -> Result<Self> {
        if trap.gamma > 0.0 && basis != Basis::GroundExcited {
            return Err(Error::WrongBasis {
                expected: Basis::GroundExcited.name(),
                found: basis.name(),
            });
        }
        if (grid.kbar() - trap.kbar).abs() > 1e-15 * trap.kbar {
            return Err(Error::invalid("kbar", "grid and trap use different k̄"));
        }
        let mut planner = FftPlanner::new();
        let n = grid.len();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(Self {
            half_x2: grid.positions().iter().map(|x| 0.5 * x * x).collect(),
            phase: vec![ZERO; n],
            scratch: vec![ZERO; scratch_len],
            observables: Observables::new(grid.clone()),
            grid,
            potential: PauliPotential::new(trap, basis),
            fwd,
            inv,
            tables: HashMap::new(),
            coarse: None,
            fine: None,
            leak_tol: None,
        })
    }

    /// Enables the boundary-leak monitor, checked at every observer call.
    pub fn with_leak_check(mut self, tol: f64) -> Self {
        self.leak_tol = Some(tol);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn potential(&self) -> &PauliPotential {
        &self.potential
    }

    pub fn basis(&self) -> Basis {
        self.potential.basis
    }

    fn check_basis(&self, psi: &SpinorField) -> Result<()> {
        if psi.basis != self.potential.basis {
            return Err(Error::WrongBasis {
                expected: self.potential.basis.name(),
                found: psi.basis.name(),
            });
        }
        Ok(())
    }

    fn build_tables(&self, dt: f64) -> StepTables {
        let kbar = self.grid.kbar();
        let n = self.grid.len() as f64;
        let kinetic = self
            .grid
            .momenta()
            .iter()
            .map(|p| Complex64::from_polar(1.0 / n, -p * p * dt / (2.0 * kbar)))
            .collect();
        let spin = self.spin_tables(0.5 * dt);
        StepTables { kinetic, spin }
    }

    fn spin_tables(&self, dt: f64) -> Vec<[Complex64; 4]> {
        let kbar = self.grid.kbar();
        let h = dt / kbar;
        // -i k̄(γ/2)|e⟩⟨e| = -iκ I + iκ τ3 with κ = k̄γ/4
        let kappa = 0.25 * kbar * self.potential.trap.gamma;
        let decay = (-kappa * h).exp();
        self.grid
            .positions()
            .iter()
            .map(|&x| {
                let [w1, w2, w3] = self.potential.vector(x);
                let u = [
                    Complex64::new(w1, 0.0),
                    Complex64::new(w2, 0.0),
                    Complex64::new(w3, kappa),
                ];
                spin_exponential(u, h).map(|m| m * decay)
            })
            .collect()
    }

    fn tables(&mut self, dt: f64) -> Arc<StepTables> {
        let key = dt.to_bits();
        if let Some(t) = self.tables.get(&key) {
            return t.clone();
        }
        if self.tables.len() >= CACHE_LIMIT {
            self.tables.clear();
        }
        let t = Arc::new(self.build_tables(dt));
        self.tables.insert(key, t.clone());
        t
    }

    fn fill_scalar_phase(&mut self, t_mid: f64, dt: f64) {
        let a = self.potential.trap.a + 2.0 * self.potential.trap.q * (2.0 * t_mid).cos();
        let c = -a * dt / self.grid.kbar();
        let x = self.grid.positions();
        let dx = self.grid.dx();
        // exp(i c x²/2) on a uniform grid by the recurrence
        // f_{j+1} = f_j r_j, r_{j+1} = r_j exp(i c dx²), restarted every block
        let step = Complex64::cis(c * dx * dx);
        for (b, block) in self.phase.chunks_mut(PHASE_BLOCK).enumerate() {
            let j0 = b * PHASE_BLOCK;
            let mut f = Complex64::cis(c * self.half_x2[j0]);
            let mut r = Complex64::cis(c * (x[j0] * dx + 0.5 * dx * dx));
            for ph in block {
                *ph = f;
                f *= r;
                r *= step;
            }
        }
    }

    fn apply_potential(psi: &mut SpinorField, spin: &[[Complex64; 4]], phase: &[Complex64]) {
        for (((a, b), m), ph) in psi.c0.iter_mut().zip(psi.c1.iter_mut()).zip(spin).zip(phase) {
            let (u, v) = (*a, *b);
            *a = ph * (m[0] * u + m[1] * v);
            *b = ph * (m[2] * u + m[3] * v);
        }
    }

    /// Applies `exp(-i V dt / k̄)` at every node with `cos 2t` taken at `t_mid`.
    pub fn potential_phase(&mut self, psi: &mut SpinorField, t_mid: f64, dt: f64) -> Result<()> {
        self.check_basis(psi)?;
        let spin = self.spin_tables(dt);
        self.fill_scalar_phase(t_mid, dt);
        Self::apply_potential(psi, &spin, &self.phase);
        Ok(())
    }

    fn kinetic_with(&mut self, psi: &mut SpinorField, kinetic: &[Complex64]) {
        for comp in [&mut psi.c0, &mut psi.c1] {
            self.fwd.process_with_scratch(comp, &mut self.scratch);
            for (c, k) in comp.iter_mut().zip(kinetic) {
                *c *= k;
            }
            self.inv.process_with_scratch(comp, &mut self.scratch);
        }
    }

    /// Multiplies each component by `exp(-i p² dt / 2k̄)` in momentum space.
    pub fn kinetic_phase(&mut self, psi: &mut SpinorField, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let tables = self.tables(dt);
        self.kinetic_with(psi, &tables.kinetic);
    }

    fn strang_with(&mut self, psi: &mut SpinorField, dt: f64, tables: &StepTables) {
        let t_mid = psi.t + 0.5 * dt;
        self.fill_scalar_phase(t_mid, 0.5 * dt);
        Self::apply_potential(psi, &tables.spin, &self.phase);
        self.kinetic_with(psi, &tables.kinetic);
        Self::apply_potential(psi, &tables.spin, &self.phase);
        psi.t += dt;
    }

    /// One potential–kinetic–potential step. Negative `dt` runs backwards.
    pub fn strang_step(&mut self, psi: &mut SpinorField, dt: f64) -> Result<()> {
        self.check_basis(psi)?;
        if dt == 0.0 {
            return Ok(());
        }
        let tables = self.tables(dt);
        self.strang_with(psi, dt, &tables);
        Ok(())
    }

    /// Single step without touching the table cache (used for one-off step
    /// sizes such as jump-time refinement).
    pub(crate) fn strang_step_uncached(&mut self, psi: &mut SpinorField, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let tables = self.build_tables(dt);
        self.strang_with(psi, dt, &tables);
    }

    /// Takes one accepted step of at most `t_limit - psi.t` and returns its size.
    pub fn adaptive_step(
        &mut self,
        psi: &mut SpinorField,
        ctrl: &mut StepController,
        t_limit: f64,
    ) -> Result<f64> {
        let remaining = t_limit - psi.t;
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        if ctrl.fixed {
            let dt = ctrl.dt.min(remaining);
            if dt < ctrl.dt {
                self.strang_step_uncached(psi, dt);
            } else {
                self.strang_step(psi, dt)?;
            }
            ctrl.accepted += 1;
            return Ok(dt);
        }
        let mut coarse = self.coarse.take().unwrap_or_else(|| psi.clone());
        let mut fine = self.fine.take().unwrap_or_else(|| psi.clone());
        let result = loop {
            let clamped = ctrl.dt >= remaining;
            let dt = if clamped { remaining } else { ctrl.dt };
            coarse.copy_from(psi);
            fine.copy_from(psi);
            if clamped {
                let full = self.build_tables(dt);
                let half = self.build_tables(0.5 * dt);
                self.strang_with(&mut coarse, dt, &full);
                self.strang_with(&mut fine, 0.5 * dt, &half);
                self.strang_with(&mut fine, 0.5 * dt, &half);
            } else {
                let full = self.tables(dt);
                let half = self.tables(0.5 * dt);
                self.strang_with(&mut coarse, dt, &full);
                self.strang_with(&mut fine, 0.5 * dt, &half);
                self.strang_with(&mut fine, 0.5 * dt, &half);
            }
            let err = coarse.distance(&fine);
            ctrl.last_error = err;
            if err <= ctrl.tol {
                ctrl.accepted += 1;
                psi.copy_from(&fine);
                if clamped {
                    psi.t = t_limit;
                }
                // a clamped step says nothing about the natural step size
                let next = ctrl.propose(dt, err);
                if !clamped || next < ctrl.dt {
                    ctrl.dt = next;
                }
                break Ok(dt);
            }
            ctrl.rejected += 1;
            if dt <= ctrl.dt_min {
                break Err(Error::StepUnderflow {
                    t: psi.t,
                    dt,
                    dt_min: ctrl.dt_min,
                    error: err,
                });
            }
            ctrl.dt = ctrl.propose(dt, err);
        };
        self.coarse = Some(coarse);
        self.fine = Some(fine);
        result
    }

    /// Checks the position and momentum boundary occupancies.
    pub fn check_leak(&mut self, psi: &SpinorField) -> Result<()> {
        let Some(tol) = self.leak_tol else {
            return Ok(());
        };
        let occ = psi.boundary_occupancy();
        if occ > tol {
            return Err(Error::BoundaryLeak {
                space: "position",
                t: psi.t,
                occupancy: occ,
                tolerance: tol,
            });
        }
        let occ = self.observables.momentum_boundary_occupancy(psi);
        if occ > tol {
            return Err(Error::BoundaryLeak {
                space: "momentum",
                t: psi.t,
                occupancy: occ,
                tolerance: tol,
            });
        }
        Ok(())
    }

    /// Advances `psi` to `t1`. With `stride = Some(s)` the observer is called
    /// at `psi.t` on entry and at every `t0 + m s` up to `t1`; steps are
    /// clamped to land on those times.
    pub fn propagate<F>(
        &mut self,
        psi: &mut SpinorField,
        t1: f64,
        ctrl: &mut StepController,
        stride: Option<f64>,
        mut observer: F,
    ) -> Result<()>
    where
        F: FnMut(&SpinorField) -> Result<()>,
    {
        self.check_basis(psi)?;
        let t0 = psi.t;
        if t1 < t0 {
            return Err(Error::invalid("t1", "propagation runs forward in time"));
        }
        let mut sampler = Sampler::new(t0, t1, stride);
        if stride.is_some() {
            self.check_leak(psi)?;
            observer(psi)?;
        }
        while psi.t < t1 {
            let target = sampler.next_target();
            while psi.t < target {
                self.adaptive_step(psi, ctrl, target)?;
            }
            if sampler.reached(psi.t) {
                self.check_leak(psi)?;
                observer(psi)?;
            }
        }
        Ok(())
    }
}

/// Sampling schedule `t0 + m·stride` clipped to `t1`.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    t0: f64,
    t1: f64,
    stride: Option<f64>,
    m: u64,
}

impl Sampler {
    pub(crate) fn new(t0: f64, t1: f64, stride: Option<f64>) -> Self {
        Self { t0, t1, stride, m: 1 }
    }

    /// Next time the propagation must land on.
    pub(crate) fn next_target(&self) -> f64 {
        match self.stride {
            Some(s) => {
                let t = self.t0 + self.m as f64 * s;
                if t >= self.t1 - 1e-9 * s {
                    self.t1
                } else {
                    t
                }
            }
            None => self.t1,
        }
    }

    /// Called after landing on the target; true if it was a sample time.
    pub(crate) fn reached(&mut self, t: f64) -> bool {
        if self.stride.is_some() && t >= self.next_target() {
            self.m += 1;
            true
        } else {
            false
        }
    }
}

/// `ψ± = (ψ_g ± ψ_e)/√2`.
pub fn to_pm_basis(psi: &SpinorField) -> Result<SpinorField> {
    if psi.basis != Basis::GroundExcited {
        return Err(Error::WrongBasis {
            expected: Basis::GroundExcited.name(),
            found: psi.basis.name(),
        });
    }
    let mut out = psi.clone();
    out.hadamard(Basis::PlusMinus);
    Ok(out)
}

/// `ψ_g = (ψ₊ + ψ₋)/√2`, `ψ_e = (ψ₊ - ψ₋)/√2`.
pub fn from_pm_basis(psi: &SpinorField) -> Result<SpinorField> {
    if psi.basis != Basis::PlusMinus {
        return Err(Error::WrongBasis {
            expected: Basis::PlusMinus.name(),
            found: psi.basis.name(),
        });
    }
    let mut out = psi.clone();
    out.hadamard(Basis::GroundExcited);
    Ok(out)
}
