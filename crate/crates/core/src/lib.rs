//! Polarization-qubit dephasing in a dispersive ring cavity and its
//! suppression by Pauli-group ("bang-bang") decoupling.
//!
//! The library models an optical pulse circling a triangular ring cavity
//! whose mirrors imprint a frequency-dependent phase between the H and V
//! polarization components. Tracing the pulse spectrum turns that phase
//! spread into dephasing; inserting X and Z control waveplates cancels it
//! every two round trips. On top of the evolution engine sit closed-form
//! decay laws, a synthetic photon-counting front end, maximum-likelihood
//! state tomography, and least-squares recovery of the spectral phase
//! spread from purity decay curves.
//!
//! ```
//! use bbcav::cavity::{evolve, CavityConfig, QuadratureScheme, SpectrumModel};
//! use bbcav::analytics::purity_closed_form;
//! use bbcav::qubit::PolarizationState;
//!
//! // ten round trips of pure dephasing acting on 45-degree light
//! let spectrum = SpectrumModel::new(0.2182, 0.0839)?;
//! let rho = evolve(
//!     &PolarizationState::d(),
//!     10,
//!     &spectrum,
//!     &CavityConfig::free(),
//!     &QuadratureScheme::default_gauss_hermite(),
//! )?;
//! assert!((rho.purity() - purity_closed_form(10, 0.0839)).abs() < 1e-9);
//! # Ok::<(), bbcav::Error>(())
//! ```
//!
//! Modules:
//! - [`qubit`]: exact 2x2 operator/state algebra (Pauli matrices, rotations,
//!   density matrices, Bloch vectors, purity, fidelity).
//! - [`cavity`]: round-trip unitaries for the four cavity configurations and
//!   the Gaussian frequency average, by Gauss-Hermite quadrature or Monte
//!   Carlo.
//! - [`analytics`]: rotation angles and axes in closed form, purity/fidelity
//!   decay laws, small-n expansion, pointer-basis asymptotics, Bloch-sphere
//!   averages.
//! - [`detect`]: per-round-trip detection probabilities, Poissonian counts,
//!   and the timing-histogram round trip.
//! - [`tomo`]: maximum-likelihood density-matrix reconstruction from
//!   projector counts.
//! - [`fit`]: spectral-width and phase estimation from decay series.
//! - [`pipeline`]: deterministic counts -> tomography -> fit orchestration
//!   with CSV/JSON output.

pub mod analytics;
pub mod cavity;
pub mod detect;
pub mod error;
pub mod fit;
pub mod optim;
pub mod pipeline;
pub mod quadrature;
pub mod qubit;
pub mod seeding;
pub mod tomo;

pub use error::{Error, Result};
