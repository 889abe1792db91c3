//! Monte-Carlo wave-function unraveling of spontaneous emission.
//!
//! Between jumps the state evolves under `H - i k̄ (γ/2) σ₊σ₋` and loses
//! norm. A jump fires when the squared norm falls below a uniform threshold
//! drawn in advance; the excited amplitude is then moved to the ground state
//! with a random recoil kick and the state is renormalized.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    init_gaussian, Basis, Distribution, Grid, MomentSummary, Observables, SpinorField,
    WindowAccumulator,
};
use crate::params::Config;
use crate::qevolve::{Propagator, Sampler, StepController};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub t: f64,
    pub recoil: f64,
    /// Excited population of the normalized state just before the jump.
    pub excited_population: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub jumps: Vec<JumpEvent>,
    #[serde(skip)]
    pub moments: Vec<MomentSummary>,
}

/// `N(p) = 3/(8k̄) (1 + (p/k̄)²)` on `[-k̄, k̄]`.
pub fn recoil_density(p: f64, kbar: f64) -> f64 {
    let y = p / kbar;
    if y.abs() > 1.0 {
        0.0
    } else {
        3.0 / (8.0 * kbar) * (1.0 + y * y)
    }
}

/// Cumulative distribution of `N` in terms of `y = p/k̄`.
pub fn recoil_cdf(y: f64) -> f64 {
    let y = y.clamp(-1.0, 1.0);
    0.375 * (y + y * y * y / 3.0) + 0.5
}

/// Solves `recoil_cdf(y) = u` for `y ∈ [-1, 1]` by Newton iteration with a
/// bisection fallback.
pub fn invert_recoil_cdf(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut y = 2.0 * u - 1.0;
    for _ in 0..100 {
        let f = recoil_cdf(y) - u;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let df = 0.375 * (1.0 + y * y);
        let mut next = y - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() < 1e-13 {
            y = next;
            break;
        }
        y = next;
    }
    y
}

pub fn sample_recoil<R: Rng + ?Sized>(rng: &mut R, kbar: f64) -> f64 {
    kbar * invert_recoil_cdf(rng.random::<f64>())
}

/// Seed of run `index`, derived from the master seed by a splitmix64 mix.
pub fn run_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(run_seed(master, index))
}

/// Projects onto the ground state with recoil `p_r`:
/// `ψ_g ← ψ_e e^{i p_r x/k̄}`, `ψ_e ← 0`, then renormalizes.
pub fn apply_jump_with_recoil(psi: &mut SpinorField, recoil: f64) -> Result<JumpEvent> {
    if psi.basis != Basis::GroundExcited {
        return Err(Error::WrongBasis {
            expected: Basis::GroundExcited.name(),
            found: psi.basis.name(),
        });
    }
    let (ng, ne) = psi.component_norms();
    if !(ne > 0.0) {
        return Err(Error::EmptyExcitedState);
    }
    let kbar = psi.grid().kbar();
    let grid = psi.grid().clone();
    for ((g, e), &x) in psi.c0.iter_mut().zip(psi.c1.iter_mut()).zip(grid.positions()) {
        *g = *e * Complex64::from_polar(1.0, recoil * x / kbar);
        *e = Complex64::new(0.0, 0.0);
    }
    psi.normalize()?;
    Ok(JumpEvent {
        t: psi.t,
        recoil,
        excited_population: ne / (ng + ne),
    })
}

pub fn apply_jump<R: Rng + ?Sized>(psi: &mut SpinorField, rng: &mut R) -> Result<JumpEvent> {
    let recoil = sample_recoil(rng, psi.grid().kbar());
    apply_jump_with_recoil(psi, recoil)
}

fn draw_threshold<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let r = rng.random::<f64>();
        if r > 0.0 {
            return r;
        }
    }
}

/// Evolves under the effective Hamiltonian with jumps up to `t1`.
///
/// The observer sees the unnormalized running state at `t0` and every
/// `t0 + m·stride`. The decay rate is taken from the propagator's parameters.
pub fn effective_propagate<R, F>(
    prop: &mut Propagator,
    psi: &mut SpinorField,
    t1: f64,
    ctrl: &mut StepController,
    stride: Option<f64>,
    rng: &mut R,
    mut observer: F,
) -> Result<Vec<JumpEvent>>
where
    R: Rng + ?Sized,
    F: FnMut(&SpinorField) -> Result<()>,
{
    let gamma = prop.potential().trap.gamma;
    if gamma < 0.0 {
        return Err(Error::invalid("gamma", "must be non-negative"));
    }
    if psi.basis != Basis::GroundExcited {
        return Err(Error::WrongBasis {
            expected: Basis::GroundExcited.name(),
            found: psi.basis.name(),
        });
    }
    if t1 < psi.t {
        return Err(Error::invalid("t1", "propagation runs forward in time"));
    }
    let mut jumps = Vec::new();
    let mut threshold = draw_threshold(rng);
    let mut sampler = Sampler::new(psi.t, t1, stride);
    let mut prev = psi.clone();
    if stride.is_some() {
        prop.check_leak(psi)?;
        observer(psi)?;
    }
    while psi.t < t1 {
        let target = sampler.next_target();
        while psi.t < target {
            if gamma == 0.0 {
                prop.adaptive_step(psi, ctrl, target)?;
                continue;
            }
            prev.copy_from(psi);
            let h = prop.adaptive_step(psi, ctrl, target)?;
            if psi.norm_sqr() >= threshold {
                continue;
            }
            // refine the crossing time inside (prev.t, prev.t + h]
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > 1e-3 * h {
                let mid = 0.5 * (lo + hi);
                psi.copy_from(&prev);
                prop.strang_step_uncached(psi, mid);
                if psi.norm_sqr() < threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            psi.copy_from(&prev);
            prop.strang_step_uncached(psi, hi);
            let event = apply_jump(psi, rng)?;
            jumps.push(event);
            threshold = draw_threshold(rng);
        }
        if sampler.reached(psi.t) {
            prop.check_leak(psi)?;
            observer(psi)?;
        }
    }
    Ok(jumps)
}

/// Ensemble-averaged observables.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Per sample time: run-averaged moments of the normalized states.
    pub moments: Vec<MomentSummary>,
    pub position: Distribution,
    pub momentum: Distribution,
    pub records: Vec<RunRecord>,
}

struct RunOutput {
    record: RunRecord,
    position: Distribution,
    momentum: Distribution,
}

/// Wave packet `ψ(x) ∝ exp(-x²/4k̄)` with the configured internal state.
pub fn initial_field(config: &Config, grid: &Arc<Grid>) -> Result<SpinorField> {
    let [cg, ce] = config.experiment.initial_state.amplitudes();
    init_gaussian(
        grid,
        config.trap.kbar.sqrt(),
        0.0,
        0.0,
        [Complex64::new(cg, 0.0), Complex64::new(ce, 0.0)],
        config.numerics.leak_tol,
    )
}

fn normalized(d: Distribution, norm: f64) -> Distribution {
    let scale = |v: Vec<f64>| v.into_iter().map(|x| x / norm).collect();
    Distribution::from_components(d.space, d.t, d.abscissa, d.spacing, scale(d.pg), scale(d.pe), true)
}

fn single_run(config: &Config, grid: &Arc<Grid>, prop: &mut Propagator, index: usize) -> Result<RunOutput> {
    let n = &config.numerics;
    let seed = run_seed(n.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = initial_field(config, grid)?;
    let mut ctrl = StepController::adaptive(n.tol, n.dt_min, n.dt_max);
    let mut obs = Observables::new(grid.clone());
    let mut moments = Vec::new();
    let mut pos = WindowAccumulator::new(n.window);
    let mut mom = WindowAccumulator::new(n.window);
    let jumps = effective_propagate(prop, &mut psi, n.t_end, &mut ctrl, Some(n.stride), &mut rng, |s| {
        let m = obs.moments(s)?;
        moments.push(m.normalized());
        if pos.contains(s.t) {
            let norm = s.norm_sqr();
            pos.add(&normalized(obs.position_distributions(s), norm));
            mom.add(&normalized(obs.momentum_distributions(s), norm));
        }
        Ok(())
    })?;
    Ok(RunOutput {
        record: RunRecord {
            index,
            seed,
            jumps,
            moments,
        },
        position: pos.finish()?,
        momentum: mom.finish()?,
    })
}

/// Averages run moment series sample by sample, in run order.
pub fn average_moments(series: &[&[MomentSummary]]) -> Vec<MomentSummary> {
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let runs = series.len() as f64;
    (0..len)
        .map(|i| {
            let mut acc = [0.0; 6];
            for s in series {
                let m = &s[i];
                acc[0] += m.mean_x;
                acc[1] += m.mean_x2;
                acc[2] += m.mean_p;
                acc[3] += m.mean_p2;
                acc[4] += m.pop_ground;
                acc[5] += m.pop_excited;
            }
            let a = acc.map(|v| v / runs);
            MomentSummary::from_raw(series[0][i].t, a[0], a[1], a[2], a[3], a[4], a[5])
        })
        .collect()
}

fn average_distributions(ds: &[&Distribution]) -> Distribution {
    let mut acc = WindowAccumulator::new((f64::NEG_INFINITY, f64::INFINITY));
    for d in ds {
        acc.add(d);
    }
    let mut out = acc.finish().expect("at least one run");
    out.t = ds[0].t;
    out
}

/// Runs `config.numerics.runs` independent realizations on `workers` threads
/// (0 = rayon default). Results do not depend on the worker count.
pub fn run_ensemble(config: &Config, workers: usize) -> Result<EnsembleResult> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?
        .install(|| run(config))
}

/// [`run_ensemble`] on the current rayon pool.
pub fn run(config: &Config) -> Result<EnsembleResult> {
    let n = &config.numerics;
    let grid = Arc::new(Grid::new(n.n_grid, n.x_max, config.trap.kbar)?);
    let make_prop = || {
        Propagator::new(grid.clone(), &config.trap, Basis::GroundExcited)
            .map(|p| p.with_leak_check(n.leak_tol))
    };
    make_prop()?;
    let outputs: Vec<Result<RunOutput>> = (0..n.runs)
        .into_par_iter()
        .map_init(
            || make_prop().expect("checked above"),
            |prop, i| single_run(config, &grid, prop, i),
        )
        .collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let series: Vec<&[MomentSummary]> = outputs.iter().map(|o| o.record.moments.as_slice()).collect();
    let moments = average_moments(&series);
    let position = average_distributions(&outputs.iter().map(|o| &o.position).collect::<Vec<_>>());
    let momentum = average_distributions(&outputs.iter().map(|o| &o.momentum).collect::<Vec<_>>());
    Ok(EnsembleResult {
        moments,
        position,
        momentum,
        records: outputs.into_iter().map(|o| o.record).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::moments;
    use crate::params::TrapParams;
    use proptest::prelude::*;

    fn trap(omega0: f64, delta: f64, gamma: f64) -> TrapParams {
        TrapParams {
            a: 0.0,
            q: 0.4,
            omega0,
            delta,
            kbar: 0.29,
            gamma,
        }
    }

    fn packet(grid: &Arc<Grid>, w: [f64; 2]) -> SpinorField {
        init_gaussian(
            grid,
            grid.kbar().sqrt(),
            0.0,
            0.0,
            [Complex64::new(w[0], 0.0), Complex64::new(w[1], 0.0)],
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn cdf_endpoints() {
        assert_eq!(recoil_cdf(-1.0), 0.0);
        assert_eq!(recoil_cdf(1.0), 1.0);
        assert_eq!(recoil_cdf(0.0), 0.5);
    }

    // Cardano root of y³ + 3y - c = 0 with c = 8(u - 1/2)
    fn cardano(u: f64) -> f64 {
        let c = 8.0 * (u - 0.5);
        let d = (c * c / 4.0 + 1.0).sqrt();
        (c / 2.0 + d).cbrt() + (c / 2.0 - d).cbrt()
    }

    proptest! {
        #[test]
        fn inverse_cdf_matches_cardano(u in 0.0..1.0f64) {
            let y = invert_recoil_cdf(u);
            prop_assert!((-1.0..=1.0).contains(&y));
            prop_assert!((y - cardano(u)).abs() < 1e-12);
            prop_assert!((recoil_cdf(y) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| run_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(run_seed(7, 3), seeds[3]);
        assert_ne!(run_seed(8, 3), seeds[3]);
    }

    #[test]
    fn jump_empties_excited_state_and_shifts_momentum() {
        let g = Arc::new(Grid::new(1024, 30.0, 0.29).unwrap());
        let mut psi = init_gaussian(
            &g,
            1.0,
            0.0,
            0.7,
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            1e-6,
        )
        .unwrap();
        let ev = apply_jump_with_recoil(&mut psi, -0.2).unwrap();
        assert_eq!(ev.excited_population, 1.0);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(psi.component_norms().1, 0.0);
        let m = moments(&psi).unwrap();
        assert!((m.mean_p - 0.5).abs() < 1e-9, "{}", m.mean_p);
        assert!(matches!(
            apply_jump_with_recoil(&mut psi, 0.1),
            Err(Error::EmptyExcitedState)
        ));
    }

    #[test]
    fn no_decay_matches_closed_propagation() {
        let g = Arc::new(Grid::new(512, 20.0, 0.29).unwrap());
        let p = trap(2.24, 0.0, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = packet(&g, [s, s]);
        let mut b = a.clone();
        let mut pa = Propagator::new(g.clone(), &p, Basis::GroundExcited).unwrap();
        let mut pb = Propagator::new(g.clone(), &p, Basis::GroundExcited).unwrap();
        let mut ca = StepController::adaptive(1e-8, 1e-9, 0.1);
        let mut cb = ca.clone();
        pa.propagate(&mut a, 3.0, &mut ca, Some(0.5), |_| Ok(())).unwrap();
        let mut rng = run_rng(1, 0);
        let jumps = effective_propagate(&mut pb, &mut b, 3.0, &mut cb, Some(0.5), &mut rng, |_| Ok(())).unwrap();
        assert!(jumps.is_empty());
        assert_eq!(a.max_abs_diff(&b), 0.0);
    }

    #[test]
    fn dark_state_never_jumps() {
        let g = Arc::new(Grid::new(512, 20.0, 0.29).unwrap());
        let p = trap(0.0, 0.0, 2.0);
        let mut psi = packet(&g, [1.0, 0.0]);
        let mut prop = Propagator::new(g.clone(), &p, Basis::GroundExcited).unwrap();
        let mut ctrl = StepController::adaptive(1e-8, 1e-9, 0.1);
        let mut rng = run_rng(3, 0);
        let jumps = effective_propagate(&mut prop, &mut psi, 5.0, &mut ctrl, Some(0.5), &mut rng, |s| {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            Ok(())
        })
        .unwrap();
        assert!(jumps.is_empty());
    }

    #[test]
    fn norm_decays_monotonically_between_jumps() {
        let g = Arc::new(Grid::new(512, 20.0, 0.29).unwrap());
        let p = trap(2.24, 0.0, 2.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = packet(&g, [s, s]);
        let mut prop = Propagator::new(g.clone(), &p, Basis::GroundExcited).unwrap();
        let mut ctrl = StepController::adaptive(1e-8, 1e-9, 0.1);
        let mut rng = run_rng(5, 0);
        let mut series = Vec::new();
        let jumps = effective_propagate(&mut prop, &mut psi, 10.0, &mut ctrl, Some(0.05), &mut rng, |s| {
            series.push((s.t, s.norm_sqr()));
            Ok(())
        })
        .unwrap();
        assert!(!jumps.is_empty());
        assert!(jumps.windows(2).all(|w| w[1].t > w[0].t));
        assert!(jumps.iter().all(|j| j.recoil.abs() <= 0.29));
        for w in series.windows(2) {
            let ((t1, n1), (t2, n2)) = (w[0], w[1]);
            if !jumps.iter().any(|j| j.t > t1 && j.t <= t2) {
                assert!(n2 <= n1 + 1e-14, "norm grew between {t1} and {t2}");
            }
        }
    }
}
