//! Experiment orchestration: closed quantum runs, quantum-jump ensembles,
//! classical ensembles, detuning sweeps and Floquet tables, with CSV/JSON
//! export.
//!
//! Every output file starts with the code version and the fully resolved
//! configuration. Outputs depend only on the configuration (including the
//! seed), never on the number of worker threads.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::classical::{self, ClassicalResult};
use crate::error::{Error, Result};
use crate::floquet::{self, MatrixElementTable};
use crate::grid::{write_moments_csv, Basis, Distribution, Grid, MomentSummary, Observables, WindowAccumulator};
use crate::mcwf::{self, EnsembleResult};
use crate::params::{Config, ExperimentKind};
use crate::qevolve::{from_pm_basis, to_pm_basis, Propagator, StepController};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for output files; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    pub workers: usize,
}

/// First line of every CSV file (without the leading `# `).
pub fn header(config: &Config) -> String {
    format!("dynloc {VERSION} config={}", config.to_json())
}

/// Closed-system quantum run.
#[derive(Debug, Clone)]
pub struct QuantumResult {
    pub moments: Vec<MomentSummary>,
    pub position: Distribution,
    pub momentum: Distribution,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Propagates the initial packet with `γ = 0` in the configured basis.
pub fn run_quantum(config: &Config) -> Result<QuantumResult> {
    if config.trap.gamma != 0.0 {
        return Err(Error::invalid(
            "trap.gamma",
            "closed quantum runs need gamma = 0; use an mcwf experiment for decay",
        ));
    }
    let n = &config.numerics;
    let grid = Arc::new(Grid::new(n.n_grid, n.x_max, config.trap.kbar)?);
    let basis = config.experiment.basis;
    let mut prop = Propagator::new(grid.clone(), &config.trap, basis)?.with_leak_check(n.leak_tol);
    let mut psi = mcwf::initial_field(config, &grid)?;
    if basis == Basis::PlusMinus {
        psi = to_pm_basis(&psi)?;
    }
    let mut ctrl = StepController::adaptive(n.tol, n.dt_min, n.dt_max);
    let mut obs = Observables::new(grid.clone());
    let mut moments = Vec::new();
    let mut pos = WindowAccumulator::new(n.window);
    let mut mom = WindowAccumulator::new(n.window);
    prop.propagate(&mut psi, n.t_end, &mut ctrl, Some(n.stride), |s| {
        let ge;
        let s = if s.basis == Basis::PlusMinus {
            ge = from_pm_basis(s)?;
            &ge
        } else {
            s
        };
        moments.push(obs.moments(s)?);
        if pos.contains(s.t) {
            pos.add(&obs.position_distributions(s));
            mom.add(&obs.momentum_distributions(s));
        }
        Ok(())
    })?;
    Ok(QuantumResult {
        moments,
        position: pos.finish()?,
        momentum: mom.finish()?,
        accepted_steps: ctrl.accepted,
        rejected_steps: ctrl.rejected,
    })
}

/// Mean and standard deviation of `f` over the samples inside `window`.
pub fn window_stats(series: &[MomentSummary], window: (f64, f64), f: impl Fn(&MomentSummary) -> f64) -> Result<(f64, f64)> {
    let acc = WindowAccumulator::new(window);
    let vals: Vec<f64> = series.iter().filter(|m| acc.contains(m.t)).map(f).collect();
    if vals.is_empty() {
        return Err(Error::EmptyWindow {
            t_a: window.0,
            t_b: window.1,
        });
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Least-squares line `y = c + s x`; returns `(c, s, rms residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!("{} points", xs.len())));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c - slope * x).powi(2)).sum();
    Ok((c, slope, (rss / n).sqrt()))
}

/// Linear growth rate of `Δx` over a window.
pub fn width_growth_rate(series: &[MomentSummary], window: (f64, f64)) -> Result<f64> {
    let acc = WindowAccumulator::new(window);
    let (ts, ws): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|m| acc.contains(m.t))
        .map(|m| (m.t, m.width_x))
        .unzip();
    Ok(linear_fit(&ts, &ws)?.1)
}

/// Order-of-magnitude diffusion estimate from a fit of `Δx² = c + 2 D t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionEstimate {
    pub diffusion: f64,
    /// `D / k̄²`
    pub localization_estimate: f64,
    pub residual: f64,
    pub points: usize,
    pub fit_window: (f64, f64),
    pub note: &'static str,
}

pub fn diffusion_diagnostic(series: &[(f64, f64)], window: (f64, f64), kbar: f64) -> Result<DiffusionEstimate> {
    let acc = WindowAccumulator::new(window);
    let (ts, w2): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|(t, _)| acc.contains(*t))
        .map(|&(t, w)| (t, w * w))
        .unzip();
    if ts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} samples in [{}, {}]",
            ts.len(),
            window.0,
            window.1
        )));
    }
    let (_, slope, residual) = linear_fit(&ts, &w2)?;
    let d = 0.5 * slope;
    Ok(DiffusionEstimate {
        diffusion: d,
        localization_estimate: d / (kbar * kbar),
        residual,
        points: ts.len(),
        fit_window: window,
        note: "order-of-magnitude estimate l ~ D/kbar^2",
    })
}

/// One detuning of a sweep: window-averaged widths and their spread over
/// the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub quantum_dx: f64,
    pub quantum_dx_sd: f64,
    pub quantum_dp: f64,
    pub classical_dx: f64,
    pub classical_dx_sd: f64,
    pub classical_dp: f64,
}

fn sweep_point(config: &Config, delta: f64) -> Result<SweepRow> {
    let mut c = config.clone();
    c.trap.delta = delta;
    c.trap.validate()?;
    let w = c.numerics.window;
    let q = run_quantum(&c)?;
    let cl = classical::run(&c)?;
    let (qdx, qsd) = window_stats(&q.moments, w, |m| m.width_x)?;
    let (qdp, _) = window_stats(&q.moments, w, |m| m.width_p)?;
    let (cdx, csd) = window_stats(&cl.moments, w, |m| m.width_x)?;
    let (cdp, _) = window_stats(&cl.moments, w, |m| m.width_p)?;
    Ok(SweepRow {
        delta,
        quantum_dx: qdx,
        quantum_dx_sd: qsd,
        quantum_dp: qdp,
        classical_dx: cdx,
        classical_dx_sd: csd,
        classical_dp: cdp,
    })
}

/// Quantum and classical runs at each detuning, averaged over the window.
pub fn sweep_detuning(config: &Config, deltas: &[f64], workers: usize) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() {
        return Err(Error::invalid("experiment.sweep", "sweep needs at least one detuning"));
    }
    pool(workers)?.install(|| deltas.par_iter().map(|&d| sweep_point(config, d)).collect())
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow], header: &str) -> std::io::Result<()> {
    writeln!(w, "# {header}")?;
    writeln!(w, "delta,quantum_dx,quantum_dx_sd,quantum_dp,classical_dx,classical_dx_sd,classical_dp")?;
    for r in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.delta, r.quantum_dx, r.quantum_dx_sd, r.quantum_dp, r.classical_dx, r.classical_dx_sd, r.classical_dp
        )?;
    }
    Ok(())
}

/// Floquet solution, matrix-element table and resonance list for `(a, q)`.
pub struct FloquetTable {
    pub solution: floquet::FloquetSolution,
    pub table: MatrixElementTable,
    pub resonances: Vec<floquet::Resonance>,
    pub kbar: f64,
}

pub fn floquet_table(a: f64, q: f64, omega0: f64, kbar: f64, n_max: usize) -> Result<FloquetTable> {
    let solution = floquet::solve_mathieu(a, q, floquet::DEFAULT_RTOL)?;
    let table = MatrixElementTable::build(&solution, omega0, kbar, n_max, &[0, 1, 2], &[-1, 0, 1])?;
    let resonances = floquet::resonance_detunings(solution.omega_s, 0..=2, -1..=1);
    Ok(FloquetTable {
        solution,
        table,
        resonances,
        kbar,
    })
}

impl FloquetTable {
    /// `n, |ω_0^(n,n+2)|, |ω_0^(n,n+4)|`
    pub fn write_inset_csv<W: Write>(&self, mut w: W, header: &str) -> std::io::Result<()> {
        writeln!(w, "# {header}")?;
        writeln!(w, "n,abs_two_phonon,abs_four_phonon")?;
        let two = self.table.magnitudes(1, 0);
        let four = self.table.magnitudes(2, 0);
        for ((n, a), (_, b)) in two.iter().zip(&four) {
            writeln!(w, "{n},{a:e},{b:e}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "solution": self.solution.record(Some(self.kbar)),
            "omega0": self.table.omega0,
            "eta": self.table.eta,
            "resonances": self.resonances,
        })
    }
}

/// What a run produced: file names (relative to the output directory) and
/// scalar metrics.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub kind: ExperimentKind,
    pub files: Vec<String>,
    pub metrics: Map<String, Value>,
}

struct Output<'a> {
    dir: Option<&'a Path>,
    header: String,
    files: Vec<String>,
}

impl Output<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write, &str) -> std::io::Result<()>) -> Result<()> {
        if let Some(dir) = self.dir {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            f(&mut w, &self.header)?;
            w.flush()?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        if let Some(dir) = self.dir {
            let text = serde_json::to_string_pretty(v)?;
            fs::write(dir.join(name), text + "\n")?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn moments(&mut self, name: &str, series: &[MomentSummary], tag: Option<&str>) -> Result<()> {
        self.write(name, |w, h| write_moments_csv(w, series, h, tag))
    }

    fn distribution(&mut self, name: &str, d: &Distribution, tag: Option<&str>) -> Result<()> {
        self.write(name, |w, h| d.write_csv(w, h, tag))
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))
}

fn quantum_outputs(out: &mut Output, prefix: &str, q: &QuantumResult, metrics: &mut Map<String, Value>, window: (f64, f64)) -> Result<()> {
    out.moments(&format!("{prefix}_moments.csv"), &q.moments, None)?;
    out.distribution(&format!("{prefix}_position.csv"), &q.position, None)?;
    out.distribution(&format!("{prefix}_momentum.csv"), &q.momentum, None)?;
    metrics.insert(format!("{prefix}_window_dx"), json!(window_stats(&q.moments, window, |m| m.width_x)?.0));
    metrics.insert(format!("{prefix}_window_dp"), json!(window_stats(&q.moments, window, |m| m.width_p)?.0));
    metrics.insert(format!("{prefix}_accepted_steps"), json!(q.accepted_steps));
    Ok(())
}

fn classical_outputs(out: &mut Output, config: &Config, c: &ClassicalResult, metrics: &mut Map<String, Value>) -> Result<()> {
    let w = config.numerics.window;
    out.moments("classical_moments.csv", &c.moments, Some("classical"))?;
    out.distribution("classical_position.csv", &c.position, Some("classical"))?;
    out.distribution("classical_momentum.csv", &c.momentum, Some("classical"))?;
    metrics.insert("classical_window_dx".into(), json!(window_stats(&c.moments, w, |m| m.width_x)?.0));
    metrics.insert("classical_window_dp".into(), json!(window_stats(&c.moments, w, |m| m.width_p)?.0));
    metrics.insert("classical_max_bloch_drift".into(), json!(c.max_bloch_drift));
    let fit = config.experiment.fit_window.unwrap_or(w);
    let series: Vec<(f64, f64)> = c.moments.iter().map(|m| (m.t, m.width_x)).collect();
    match diffusion_diagnostic(&series, fit, config.trap.kbar) {
        Ok(d) => {
            out.json("diffusion.json", &json!({ "version": VERSION, "config": config.to_json(), "classical": d }))?;
            metrics.insert("classical_diffusion".into(), json!(d.diffusion));
        }
        Err(Error::DegenerateFit(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(())
}

fn mcwf_outputs(out: &mut Output, e: &EnsembleResult, metrics: &mut Map<String, Value>, window: (f64, f64)) -> Result<()> {
    out.moments("mcwf_moments.csv", &e.moments, None)?;
    out.distribution("mcwf_position.csv", &e.position, None)?;
    out.distribution("mcwf_momentum.csv", &e.momentum, None)?;
    let jumps: usize = e.records.iter().map(|r| r.jumps.len()).sum();
    metrics.insert("mcwf_window_dx".into(), json!(window_stats(&e.moments, window, |m| m.width_x)?.0));
    metrics.insert("mcwf_window_dp".into(), json!(window_stats(&e.moments, window, |m| m.width_p)?.0));
    metrics.insert("mcwf_total_jumps".into(), json!(jumps));
    Ok(())
}

/// Runs the configured experiment and writes its outputs plus a
/// `manifest.json`.
pub fn run_experiment(config: &Config, opts: &RunOptions) -> Result<Summary> {
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut out = Output {
        dir: opts.out_dir.as_deref(),
        header: header(config),
        files: Vec::new(),
    };
    let mut metrics = Map::new();
    let window = config.numerics.window;
    let kind = config.experiment.kind;
    let pool = pool(opts.workers)?;
    pool.install(|| -> Result<()> {
        match kind {
            ExperimentKind::Quantum => {
                let (q, c) = if config.experiment.compare {
                    let (q, c) = rayon::join(|| run_quantum(config), || classical::run(config));
                    (q?, Some(c?))
                } else {
                    (run_quantum(config)?, None)
                };
                quantum_outputs(&mut out, "quantum", &q, &mut metrics, window)?;
                if let Some(c) = c {
                    classical_outputs(&mut out, config, &c, &mut metrics)?;
                }
            }
            ExperimentKind::Classical => {
                let c = classical::run(config)?;
                classical_outputs(&mut out, config, &c, &mut metrics)?;
            }
            ExperimentKind::Mcwf => {
                let e = mcwf::run(config)?;
                mcwf_outputs(&mut out, &e, &mut metrics, window)?;
                let runs = json!({
                    "version": VERSION,
                    "config": config.to_json(),
                    "runs": e.records,
                });
                out.json("mcwf_runs.json", &runs)?;
                if config.experiment.compare {
                    let mut closed = config.clone();
                    closed.trap.gamma = 0.0;
                    let (q, c) = rayon::join(|| run_quantum(&closed), || classical::run(config));
                    quantum_outputs(&mut out, "quantum", &q?, &mut metrics, window)?;
                    classical_outputs(&mut out, config, &c?, &mut metrics)?;
                }
            }
            ExperimentKind::Sweep => {
                let deltas = &config.experiment.sweep;
                if deltas.is_empty() {
                    return Err(Error::invalid("experiment.sweep", "sweep needs at least one detuning"));
                }
                let rows: Vec<SweepRow> = deltas
                    .par_iter()
                    .map(|&d| sweep_point(config, d))
                    .collect::<Result<_>>()?;
                out.write("sweep.csv", |w, h| write_sweep_csv(w, &rows, h))?;
                metrics.insert("rows".into(), json!(rows));
            }
            ExperimentKind::Floquet => {
                let t = floquet_table(
                    config.trap.a,
                    config.trap.q,
                    config.trap.omega0,
                    config.trap.kbar,
                    config.experiment.n_max,
                )?;
                out.json("floquet.json", &json!({ "version": VERSION, "config": config.to_json(), "floquet": t.to_json() }))?;
                out.write("matrix_elements.csv", |w, h| t.table.write_csv(w, h))?;
                out.write("inset.csv", |w, h| t.write_inset_csv(w, h))?;
                metrics.insert("omega_s".into(), json!(t.solution.omega_s));
                metrics.insert("omega_r".into(), json!(t.solution.omega_r));
                metrics.insert("eta".into(), json!(t.table.eta));
            }
        }
        Ok(())
    })?;
    let mut summary = Summary {
        version: VERSION,
        kind,
        files: out.files.clone(),
        metrics,
    };
    if let Some(dir) = &opts.out_dir {
        summary.files.push("manifest.json".into());
        let manifest = json!({
            "version": VERSION,
            "config": config.to_json(),
            "kind": kind,
            "files": summary.files,
            "metrics": summary.metrics,
        });
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::load_preset;

    #[test]
    fn exact_linear_series_gives_exact_diffusion() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = i as f64 * 0.5;
            (t, (2.0 * 0.5 * t).sqrt())
        }).collect();
        let d = diffusion_diagnostic(&series, (0.0, 30.0), 0.29).unwrap();
        assert!((d.diffusion - 0.5).abs() < 1e-9);
        assert!(d.residual < 1e-9);
        let d2 = diffusion_diagnostic(&series, (0.0, 30.0), 0.58).unwrap();
        assert!((d2.localization_estimate * 4.0 - d.localization_estimate).abs() < 1e-9);
        assert!(matches!(
            diffusion_diagnostic(&series, (100.0, 200.0), 0.29),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn presets_match_caption_values() {
        let f1 = load_preset("fig1").unwrap();
        assert_eq!((f1.trap.a, f1.trap.q, f1.trap.omega0, f1.trap.kbar, f1.trap.gamma), (0.0, 0.4, 2.24, 0.29, 0.0));
        let pi = std::f64::consts::PI;
        assert_eq!(f1.numerics.window, (450.0 * pi, 500.0 * pi));
        assert_eq!(f1.numerics.n_grid, 8192);
        let f2 = load_preset("fig2").unwrap();
        assert_eq!(f2.numerics.window, (200.0 * pi, 500.0 * pi));
        assert_eq!(f2.experiment.sweep.len(), 61);
        let f3 = load_preset("fig3").unwrap();
        assert_eq!((f3.trap.delta, f3.trap.gamma, f3.numerics.runs), (0.0, 2.0, 79));
        assert_eq!(f3.numerics.window, (200.0 * pi, 250.0 * pi));
        let f4 = load_preset("fig4").unwrap();
        assert_eq!(
            (f4.trap.omega0, f4.trap.kbar, f4.trap.delta, f4.trap.gamma, f4.numerics.runs),
            (94.69, 0.0725, 1000.0, 2.0, 49)
        );
        assert_eq!(f4.numerics.window, (200.0 * pi, 250.0 * pi));
        assert_eq!(f4.experiment.initial_state, crate::params::InternalState::Ground);
        assert_eq!(f3.experiment.initial_state, crate::params::InternalState::Superposition);
        let d1 = load_preset("fig1-desk").unwrap();
        assert_eq!((d1.numerics.n_grid, d1.numerics.t_end), (4096, 100.0 * pi));
        assert_eq!(d1.numerics.window, (80.0 * pi, 100.0 * pi));
        for name in crate::params::preset_names() {
            load_preset(&name).unwrap();
        }
    }

    #[test]
    fn closed_runs_refuse_decay() {
        let c = load_preset("fig3-desk").unwrap();
        assert!(run_quantum(&c).is_err());
    }
}
