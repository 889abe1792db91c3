//! Dynamical localization of a two-level ion in a Paul trap driven by a
//! standing laser wave.
//!
//! The model, in dimensionless units, is
//!
//! ```text
//! H = p²/2 + ½[a + 2q cos 2t] x² - k̄Δσz + k̄Ω₀ σx cos x,    i k̄ ∂ψ/∂t = H ψ
//! ```
//!
//! with optional spontaneous emission at rate γ. The crate provides
//!
//! * [`qevolve`]: split-operator propagation of the two-component wave function,
//! * [`mcwf`]: quantum-jump (Monte-Carlo wave function) ensembles,
//! * [`classical`]: Hamilton + Bloch trajectory ensembles,
//! * [`floquet`]: Mathieu/Floquet analysis and resonance matrix elements,
//! * [`harness`]: figure presets, detuning sweeps and CSV/JSON export.

pub mod classical;
pub mod error;
pub mod floquet;
pub mod grid;
pub mod harness;
pub mod mcwf;
pub mod ode;
pub mod params;
pub mod qevolve;
pub mod special;

pub use error::{Error, Result};
