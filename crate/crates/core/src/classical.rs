//! Classical counterpart: Newton's equation for the center of mass coupled
//! to the Bloch equations of the internal state,
//!
//! ```text
//! ẋ = p,   ṗ = -(a + 2q cos 2t) x + k̄Ω₀ sin(x) r1
//! ṙ1 = -2Δ r2,   ṙ2 = 2Δ r1 + 2Ω₀ cos(x) r3,   ṙ3 = -2Ω₀ cos(x) r2
//! ```
//!
//! `r3` is the inversion, so the excited population is `(1 + r3)/2`.

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Distribution, MomentSummary, Space, WindowAccumulator};
use crate::mcwf::run_rng;
use crate::ode::{Dopri5, Tolerance};
use crate::params::{Config, TrapParams};

/// Trajectories per work item; sums inside a block run in index order.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalState {
    pub x: f64,
    pub p: f64,
    pub r: [f64; 3],
    pub t: f64,
}

impl ClassicalState {
    pub fn bloch_norm(&self) -> f64 {
        (self.r[0] * self.r[0] + self.r[1] * self.r[1] + self.r[2] * self.r[2]).sqrt()
    }

    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.r[2])
    }

    fn vector(&self) -> [f64; 5] {
        [self.x, self.p, self.r[0], self.r[1], self.r[2]]
    }

    fn set_vector(&mut self, y: &[f64; 5]) {
        self.x = y[0];
        self.p = y[1];
        self.r = [y[2], y[3], y[4]];
    }
}

/// Right-hand side for `y = (x, p, r1, r2, r3)`.
pub fn rhs(y: &[f64; 5], t: f64, trap: &TrapParams) -> [f64; 5] {
    let [x, p, r1, r2, r3] = *y;
    let (s, c) = x.sin_cos();
    let w = 2.0 * trap.omega0 * c;
    [
        p,
        -(trap.a + 2.0 * trap.q * (2.0 * t).cos()) * x + trap.kbar * trap.omega0 * s * r1,
        -2.0 * trap.delta * r2,
        2.0 * trap.delta * r1 + w * r3,
        -w * r2,
    ]
}

/// Adaptive Dormand–Prince integration of single trajectories.
#[derive(Debug, Clone)]
pub struct ClassicalIntegrator {
    trap: TrapParams,
    ode: Dopri5<5>,
    /// Test hook: hold `x` and `p` fixed and evolve only the Bloch vector.
    pub freeze_motion: bool,
}

impl ClassicalIntegrator {
    pub fn new(trap: &TrapParams, rtol: f64) -> Self {
        Self {
            trap: *trap,
            ode: Dopri5::new(Tolerance::new(rtol, rtol * 1e-3)),
            freeze_motion: false,
        }
    }

    /// Advances `s` to `t1`. After every accepted step the Bloch vector is
    /// rescaled to its norm at entry, which the exact flow conserves.
    pub fn integrate(&mut self, s: &mut ClassicalState, t1: f64) -> Result<()> {
        let mut y = s.vector();
        let trap = self.trap;
        let norm = s.bloch_norm();
        let project = |y: &mut [f64; 5]| {
            let now = (y[2] * y[2] + y[3] * y[3] + y[4] * y[4]).sqrt();
            if now == 0.0 || now == norm {
                return false;
            }
            let scale = norm / now;
            for r in &mut y[2..] {
                *r *= scale;
            }
            true
        };
        if self.freeze_motion {
            self.ode.integrate_projected(
                |t, y| {
                    let mut d = rhs(y, t, &trap);
                    d[0] = 0.0;
                    d[1] = 0.0;
                    d
                },
                project,
                s.t,
                t1,
                &mut y,
            )?;
        } else {
            self.ode.integrate_projected(|t, y| rhs(y, t, &trap), project, s.t, t1, &mut y)?;
        }
        s.set_vector(&y);
        s.t = t1;
        Ok(())
    }
}

/// Ensemble of trajectories sharing a time stamp.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub states: Vec<ClassicalState>,
    pub seed: u64,
}

/// Draws trajectory `index` of the ensemble with master seed `seed`:
/// `x ~ N(0, √k̄)`, `p ~ N(0, width_p)`, Bloch vector `bloch`.
pub fn sample_member(seed: u64, index: usize, kbar: f64, width_p: f64, bloch: [f64; 3]) -> ClassicalState {
    let mut rng = run_rng(seed, index as u64);
    sample_with(&mut rng, kbar, width_p, bloch)
}

fn sample_with<R: Rng + ?Sized>(rng: &mut R, kbar: f64, width_p: f64, bloch: [f64; 3]) -> ClassicalState {
    let nx = Normal::new(0.0, kbar.sqrt()).expect("positive width");
    let x = nx.sample(rng);
    let p = if width_p > 0.0 {
        Normal::new(0.0, width_p).expect("positive width").sample(rng)
    } else {
        0.0
    };
    ClassicalState { x, p, r: bloch, t: 0.0 }
}

/// `n` members with the default widths `(√k̄, √k̄/2)` and `r = (1, 0, 0)`.
pub fn sample_ensemble(seed: u64, n: usize, kbar: f64) -> Ensemble {
    let states = (0..n)
        .map(|i| sample_member(seed, i, kbar, 0.5 * kbar.sqrt(), [1.0, 0.0, 0.0]))
        .collect();
    Ensemble { states, seed }
}

/// Uniform histogram layout on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub bins: usize,
    pub half_width: f64,
}

impl Binning {
    pub fn width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn index(&self, v: f64) -> Option<usize> {
        let k = ((v + self.half_width) / self.width()).floor();
        if k >= 0.0 && (k as usize) < self.bins {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins).map(|k| -self.half_width + (k as f64 + 0.5) * w).collect()
    }
}

/// Running means and centered second moments (Welford, merged with Chan's
/// formula) over a set of trajectories at one time.
#[derive(Debug, Clone, PartialEq)]
struct Sums {
    count: f64,
    mx: f64,
    sx: f64,
    mp: f64,
    sp: f64,
    pe: f64,
}

impl Sums {
    fn zero() -> Self {
        Self {
            count: 0.0,
            mx: 0.0,
            sx: 0.0,
            mp: 0.0,
            sp: 0.0,
            pe: 0.0,
        }
    }

    fn add_state(&mut self, s: &ClassicalState) {
        self.count += 1.0;
        let dx = s.x - self.mx;
        self.mx += dx / self.count;
        self.sx += dx * (s.x - self.mx);
        let dp = s.p - self.mp;
        self.mp += dp / self.count;
        self.sp += dp * (s.p - self.mp);
        self.pe += s.excited_population();
    }

    fn merge(&mut self, o: &Sums) {
        if o.count == 0.0 {
            return;
        }
        let n = self.count + o.count;
        let f = self.count * o.count / n;
        let dx = o.mx - self.mx;
        let dp = o.mp - self.mp;
        self.sx += o.sx + dx * dx * f;
        self.sp += o.sp + dp * dp * f;
        self.mx += dx * o.count / n;
        self.mp += dp * o.count / n;
        self.count = n;
        self.pe += o.pe;
    }

    fn summary(&self, t: f64) -> MomentSummary {
        let n = self.count;
        let pe = self.pe / n;
        MomentSummary::from_central(t, self.mx, self.sx / n, self.mp, self.sp / n, 1.0 - pe, pe)
    }
}

/// Histogram counts weighted by ground/excited populations.
#[derive(Debug, Clone, PartialEq)]
struct Histogram {
    pg: Vec<f64>,
    pe: Vec<f64>,
}

impl Histogram {
    fn new(bins: usize) -> Self {
        Self {
            pg: vec![0.0; bins],
            pe: vec![0.0; bins],
        }
    }

    fn add(&mut self, binning: &Binning, v: f64, excited: f64) {
        if let Some(k) = binning.index(v) {
            self.pg[k] += 1.0 - excited;
            self.pe[k] += excited;
        }
    }

    fn merge(&mut self, o: &Histogram) {
        for (a, b) in self.pg.iter_mut().zip(&o.pg) {
            *a += b;
        }
        for (a, b) in self.pe.iter_mut().zip(&o.pe) {
            *a += b;
        }
    }

    fn into_distribution(self, space: Space, t: f64, binning: &Binning, count: f64) -> Distribution {
        let scale = 1.0 / (count * binning.width());
        Distribution::from_components(
            space,
            t,
            binning.centers(),
            binning.width(),
            self.pg.into_iter().map(|v| v * scale).collect(),
            self.pe.into_iter().map(|v| v * scale).collect(),
            true,
        )
    }
}

/// Histograms (position and momentum) and moments of an ensemble snapshot.
/// Widths come from the unbinned samples; members outside the range are
/// counted in the moments but not in the histograms.
pub fn ensemble_observables(
    states: &[ClassicalState],
    x_bins: &Binning,
    p_bins: &Binning,
) -> (Distribution, Distribution, MomentSummary) {
    let t = states.first().map_or(0.0, |s| s.t);
    let mut sums = Sums::zero();
    let mut hx = Histogram::new(x_bins.bins);
    let mut hp = Histogram::new(p_bins.bins);
    for s in states {
        sums.add_state(s);
        hx.add(x_bins, s.x, s.excited_population());
        hp.add(p_bins, s.p, s.excited_population());
    }
    let n = sums.count;
    (
        hx.into_distribution(Space::Position, t, x_bins, n),
        hp.into_distribution(Space::Momentum, t, p_bins, n),
        sums.summary(t),
    )
}

/// Time series and window-averaged distributions of a classical ensemble run.
#[derive(Debug, Clone)]
pub struct ClassicalResult {
    pub moments: Vec<MomentSummary>,
    pub position: Distribution,
    pub momentum: Distribution,
    /// Largest `| |r(t)| - |r(0)| |` seen over all members and samples.
    pub max_bloch_drift: f64,
}

struct BlockOutput {
    sums: Vec<Sums>,
    hx: Histogram,
    hp: Histogram,
    window_samples: usize,
    drift: f64,
}

/// Sample times `t0 + m·stride` up to and including `t_end`.
pub fn sample_times(t_end: f64, stride: f64) -> Vec<f64> {
    let mut ts = vec![0.0];
    let mut m = 1u64;
    loop {
        let t = m as f64 * stride;
        if t >= t_end - 1e-9 * stride {
            ts.push(t_end);
            break;
        }
        ts.push(t);
        m += 1;
    }
    ts
}

/// Binnings used for classical histograms: the quantum grid's position box
/// and momentum range.
pub fn default_binnings(config: &Config) -> (Binning, Binning) {
    let n = &config.numerics;
    let dx = 2.0 * n.x_max / n.n_grid as f64;
    let p_max = config.trap.kbar * std::f64::consts::PI / dx;
    (
        Binning {
            bins: n.bins,
            half_width: n.x_max,
        },
        Binning {
            bins: n.bins,
            half_width: p_max,
        },
    )
}

fn run_block(config: &Config, range: std::ops::Range<usize>, times: &[f64]) -> Result<BlockOutput> {
    let n = &config.numerics;
    let kbar = config.trap.kbar;
    let width_p = config.experiment.classical_width_p.unwrap_or(0.5 * kbar.sqrt());
    let bloch = config.experiment.initial_state.bloch_vector();
    let (bx, bp) = default_binnings(config);
    let mut sums = vec![Sums::zero(); times.len()];
    let mut hx = Histogram::new(bx.bins);
    let mut hp = Histogram::new(bp.bins);
    let mut window_samples = 0;
    let mut drift: f64 = 0.0;
    let window = WindowAccumulator::new(n.window);
    for i in range {
        let mut s = sample_member(n.seed, i, kbar, width_p, bloch);
        let r0 = s.bloch_norm();
        let mut integ = ClassicalIntegrator::new(&config.trap, n.classical_tol);
        for (k, &t) in times.iter().enumerate() {
            integ.integrate(&mut s, t)?;
            sums[k].add_state(&s);
            drift = drift.max((s.bloch_norm() - r0).abs());
            if window.contains(t) {
                hx.add(&bx, s.x, s.excited_population());
                hp.add(&bp, s.p, s.excited_population());
                window_samples += 1;
            }
        }
    }
    Ok(BlockOutput {
        sums,
        hx,
        hp,
        window_samples,
        drift,
    })
}

/// Integrates `config.numerics.trajectories` members, recording moments at
/// every stride and histograms inside the averaging window. Each member
/// depends only on `(seed, index)`; block sums are reduced in index order.
pub fn run_classical(config: &Config, workers: usize) -> Result<ClassicalResult> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?
        .install(|| run(config))
}

/// [`run_classical`] on the current rayon pool.
pub fn run(config: &Config) -> Result<ClassicalResult> {
    let n = &config.numerics;
    let times = sample_times(n.t_end, n.stride);
    let blocks: Vec<std::ops::Range<usize>> = (0..n.trajectories)
        .step_by(BLOCK)
        .map(|s| s..(s + BLOCK).min(n.trajectories))
        .collect();
    let outputs: Vec<Result<BlockOutput>> = blocks
        .par_iter()
        .map(|r| run_block(config, r.clone(), &times))
        .collect();
    let (bx, bp) = default_binnings(config);
    let mut sums = vec![Sums::zero(); times.len()];
    let mut hx = Histogram::new(bx.bins);
    let mut hp = Histogram::new(bp.bins);
    let mut window_samples = 0;
    let mut drift: f64 = 0.0;
    for out in outputs {
        let out = out?;
        for (a, b) in sums.iter_mut().zip(&out.sums) {
            a.merge(b);
        }
        hx.merge(&out.hx);
        hp.merge(&out.hp);
        window_samples += out.window_samples;
        drift = drift.max(out.drift);
    }
    if window_samples == 0 {
        return Err(Error::EmptyWindow {
            t_a: n.window.0,
            t_b: n.window.1,
        });
    }
    let t_mid = 0.5 * (n.window.0 + n.window.1);
    let count = window_samples as f64;
    Ok(ClassicalResult {
        moments: sums.iter().zip(&times).map(|(s, &t)| s.summary(t)).collect(),
        position: hx.into_distribution(Space::Position, t_mid, &bx, count),
        momentum: hp.into_distribution(Space::Momentum, t_mid, &bp, count),
        max_bloch_drift: drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::solve_mathieu;
    use proptest::prelude::*;

    fn trap(omega0: f64, delta: f64) -> TrapParams {
        TrapParams {
            a: 0.0,
            q: 0.4,
            omega0,
            delta,
            kbar: 0.29,
            gamma: 0.0,
        }
    }

    #[test]
    fn resonant_r1_is_stationary_when_r2_vanishes() {
        let d = rhs(&[0.7, 0.1, 0.4, 0.0, -0.3], 1.3, &trap(2.24, 0.0));
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn no_coupling_gives_mathieu_and_precession() {
        let t = trap(0.0, 0.8);
        let y = [1.2, -0.4, 0.6, 0.8, 0.0];
        let d = rhs(&y, 0.9, &t);
        assert_eq!(d[0], -0.4);
        assert_eq!(d[1], -(2.0 * 0.4 * 1.8f64.cos()) * 1.2);
        assert_eq!([d[2], d[3], d[4]], [-1.6 * 0.8, 1.6 * 0.6, 0.0]);
    }

    proptest! {
        #[test]
        fn bloch_norm_is_a_constant_of_motion(
            x in -20.0..20.0f64, p in -5.0..5.0f64, t in 0.0..100.0f64,
            r1 in -1.0..1.0f64, r2 in -1.0..1.0f64, r3 in -1.0..1.0f64, delta in -3.0..3.0f64,
        ) {
            let d = rhs(&[x, p, r1, r2, r3], t, &trap(2.24, delta));
            prop_assert!((r1 * d[2] + r2 * d[3] + r3 * d[4]).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_motion_follows_floquet_solution() {
        let t = trap(0.0, 0.0);
        let sol = solve_mathieu(0.0, 0.4, 1e-12).unwrap();
        let mut integ = ClassicalIntegrator::new(&t, 1e-11);
        let mut s = ClassicalState {
            x: 1.0,
            p: 0.0,
            r: [1.0, 0.0, 0.0],
            t: 0.0,
        };
        for k in 1..=40 {
            let tk = k as f64 * std::f64::consts::PI / 4.0;
            integ.integrate(&mut s, tk).unwrap();
            assert!((s.x - sol.epsilon(tk).re).abs() < 1e-6, "t={tk}");
        }
    }

    #[test]
    fn frozen_motion_gives_rabi_rotation() {
        // x = 0 so cos x = 1; from the ground state, r3 = -cos(2Ω₀t), r2 = -sin(2Ω₀t)
        let omega0 = 2.24;
        let mut integ = ClassicalIntegrator::new(&trap(omega0, 0.0), 1e-11);
        integ.freeze_motion = true;
        let mut s = ClassicalState {
            x: 0.0,
            p: 0.3,
            r: [0.0, 0.0, -1.0],
            t: 0.0,
        };
        for k in 1..=20 {
            let tk = 0.1 * k as f64;
            integ.integrate(&mut s, tk).unwrap();
            let th = 2.0 * omega0 * tk;
            assert!((s.r[2] + th.cos()).abs() < 1e-8);
            assert!((s.r[1] + th.sin()).abs() < 1e-8);
            assert_eq!(s.r[0], 0.0);
            assert_eq!((s.x, s.p), (0.0, 0.3));
        }
        let mut s = ClassicalState {
            x: 0.0,
            p: 0.0,
            r: [1.0, 0.0, 0.0],
            t: 0.0,
        };
        integ.integrate(&mut s, 5.0).unwrap();
        assert_eq!(s.r, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_backward_recovers_phase_space_point() {
        let mut integ = ClassicalIntegrator::new(&trap(2.24, 0.3), 1e-11);
        let start = ClassicalState {
            x: 0.4,
            p: -0.2,
            r: [1.0, 0.0, 0.0],
            t: 0.0,
        };
        let mut s = start;
        integ.integrate(&mut s, 20.0).unwrap();
        integ.integrate(&mut s, 0.0).unwrap();
        assert!((s.x - start.x).abs() < 1e-6 && (s.p - start.p).abs() < 1e-6);
        let before = s;
        integ.integrate(&mut s, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn sampled_widths_and_bloch_norms() {
        let kbar: f64 = 0.29;
        let e = sample_ensemble(11, 20000, kbar);
        assert!(e.states.iter().all(|s| s.bloch_norm() == 1.0));
        let n = e.states.len() as f64;
        let sd = |f: &dyn Fn(&ClassicalState) -> f64| {
            let m = e.states.iter().map(|s| f(s)).sum::<f64>() / n;
            (e.states.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / n).sqrt()
        };
        let wx = sd(&|s| s.x);
        let wp = sd(&|s| s.p);
        // relative standard error of a sample sd is 1/sqrt(2n)
        let tol = 4.0 / (2.0 * n).sqrt();
        assert!((wx / kbar.sqrt() - 1.0).abs() < tol, "{wx}");
        assert!((wp / (0.5 * kbar.sqrt()) - 1.0).abs() < tol, "{wp}");
    }

    #[test]
    fn identical_members_fill_one_bin() {
        let s = ClassicalState {
            x: 0.3,
            p: -0.1,
            r: [1.0, 0.0, 0.0],
            t: 2.0,
        };
        let states = vec![s; 100];
        let b = Binning {
            bins: 64,
            half_width: 8.0,
        };
        let (dx, dp, m) = ensemble_observables(&states, &b, &b);
        assert_eq!(m.width_x, 0.0);
        assert_eq!(m.width_p, 0.0);
        assert_eq!(dx.p.iter().filter(|v| **v > 0.0).count(), 1);
        assert_eq!(dp.p.iter().filter(|v| **v > 0.0).count(), 1);
        assert!((dx.integral() - 1.0).abs() < 1e-12);
        assert_eq!(dx.pg, dx.pe);
    }

    #[test]
    fn sample_time_grid() {
        let ts = sample_times(1.0, 0.3);
        assert_eq!(ts.len(), 5);
        assert_eq!(ts[4], 1.0);
        let ts = sample_times(0.9, 0.3);
        assert_eq!(ts.len(), 4);
    }
}
