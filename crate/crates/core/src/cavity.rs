//! Round-trip polarization unitaries for the four cavity configurations and
//! the frequency-averaged output state.
//!
//! One round trip of the triangular ring cavity consists of two 45-degree
//! plane mirrors (each `M_Z(phi) = Z exp(-i phi Z / 2)`, with `phi` the
//! H/V reflection phase difference) plus the compensated spherical mirror,
//! which drops out. A variable retarder with axis at 45 degrees
//! (`B_X(theta) = exp(-i theta X / 2)`) in front of each plane mirror tilts
//! the decoherence axis away from +z; adding the control waveplates Z and X
//! turns each pair of round trips into a full Pauli-group decoupling cycle.
//!
//! The output after `n` round trips is the average of
//! `U(phi)^n rho U(phi)^n-dagger` over the Gaussian phase distribution
//! induced by the pulse spectrum, evaluated either by Gauss-Hermite
//! quadrature or by Monte Carlo.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermiteRule, KahanSum};
use crate::qubit::{DensityMatrix, Mat2, PolarizationState, Unitary2, PAULI_X, PAULI_Z};
use crate::seeding::stream_rng;

/// Gaussian phase measure induced by the pulse spectrum through the linear
/// dispersion phi(omega) ~ phi0 + tau (omega - omega0).
///
/// The measure has density `(pi sigma_phi^2)^(-1/2) exp[-(phi-phi0)^2 /
/// sigma_phi^2]`, i.e. **variance sigma_phi^2 / 2**, not sigma_phi^2. This
/// normalization is what makes the off-diagonal decay come out as
/// `exp(-n^2 sigma_phi^2)` and the equatorial purity as
/// `[1 + exp(-2 n^2 sigma_phi^2)] / 2`; see
/// [`crate::analytics::purity_closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumModel {
    phi0: f64,
    sigma_phi: f64,
    source: Option<SpectrumSource>,
}

/// Optional record of the physical quantities behind a [`SpectrumModel`];
/// documentation only, never used in computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSource {
    pub lambda0_nm: f64,
    pub delta_lambda_nm: f64,
    pub tau_s: f64,
}

impl SpectrumModel {
    pub fn new(phi0: f64, sigma_phi: f64) -> Result<Self> {
        if !phi0.is_finite() || !sigma_phi.is_finite() || sigma_phi < 0.0 {
            return Err(Error::invalid(format!(
                "spectrum requires finite phi0 and sigma_phi >= 0, got ({phi0}, {sigma_phi})"
            )));
        }
        Ok(SpectrumModel {
            phi0,
            sigma_phi,
            source: None,
        })
    }

    pub fn with_source(mut self, source: SpectrumSource) -> Self {
        self.source = Some(source);
        self
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn sigma_phi(&self) -> f64 {
        self.sigma_phi
    }

    pub fn source(&self) -> Option<&SpectrumSource> {
        self.source.as_ref()
    }

    /// Standard deviation of the phase measure itself (sigma_phi / sqrt(2)).
    pub fn phase_std(&self) -> f64 {
        self.sigma_phi / std::f64::consts::SQRT_2
    }
}

/// The four experimental configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CavityMode {
    /// Plane mirrors only: pure dephasing about +z.
    Free,
    /// Plane mirrors with a retarder in front of each: tilted decoherence axis.
    FreeSb,
    /// Plane mirrors plus the Z and X control waveplates.
    Bb,
    /// Retarders and control waveplates together.
    BbSb,
}

impl CavityMode {
    pub fn uses_retarder(self) -> bool {
        matches!(self, CavityMode::FreeSb | CavityMode::BbSb)
    }

    pub fn decoupled(self) -> bool {
        matches!(self, CavityMode::Bb | CavityMode::BbSb)
    }
}

/// A [`CavityMode`] together with the retarder delay angle theta.
/// Constructed through the validating constructors only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityConfig {
    mode: CavityMode,
    theta: f64,
}

impl CavityConfig {
    pub fn new(mode: CavityMode, theta: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::TAU).contains(&theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [0, 2 pi), got {theta}"
            )));
        }
        if !mode.uses_retarder() && theta != 0.0 {
            return Err(Error::invalid(
                "theta must be 0 for configurations without the retarder",
            ));
        }
        Ok(CavityConfig { mode, theta })
    }

    pub fn free() -> Self {
        CavityConfig {
            mode: CavityMode::Free,
            theta: 0.0,
        }
    }

    pub fn bb() -> Self {
        CavityConfig {
            mode: CavityMode::Bb,
            theta: 0.0,
        }
    }

    pub fn free_sb(theta: f64) -> Result<Self> {
        CavityConfig::new(CavityMode::FreeSb, theta)
    }

    pub fn bb_sb(theta: f64) -> Result<Self> {
        CavityConfig::new(CavityMode::BbSb, theta)
    }

    pub fn mode(&self) -> CavityMode {
        self.mode
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Mirror operator M_Z(phi) = Z exp(-i phi Z / 2) =
/// diag(exp(-i phi/2), -exp(i phi/2)).
pub fn mirror_operator(phi: f64) -> Unitary2 {
    let m = Mat2::diag(
        C64::from_polar(1.0, -phi / 2.0),
        -C64::from_polar(1.0, phi / 2.0),
    );
    Unitary2::from_matrix_unchecked(m)
}

/// Retarder B_X(theta) = exp(-i theta X / 2).
pub fn retarder_operator(theta: f64) -> Unitary2 {
    Unitary2::rotation(theta / 2.0, [1.0, 0.0, 0.0]).expect("x is a unit axis")
}

/// One-round-trip polarization unitary for the given configuration.
///
/// - `Free`:   M_Z M_Z = exp(-i phi Z)
/// - `FreeSb`: N N with N = M_Z B_X(theta)
/// - `Bb`:     Z M_Z X M_Z, which is -iY for every phi
/// - `BbSb`:   Z N X N
pub fn round_trip_unitary(phi: f64, config: &CavityConfig) -> Unitary2 {
    let z = Unitary2::from_matrix_unchecked(PAULI_Z);
    let x = Unitary2::from_matrix_unchecked(PAULI_X);
    match config.mode {
        CavityMode::Free => Unitary2::rotation(phi, [0.0, 0.0, 1.0]).expect("z is a unit axis"),
        CavityMode::FreeSb => {
            let n = mirror_operator(phi) * retarder_operator(config.theta);
            n * n
        }
        CavityMode::Bb => {
            let m = mirror_operator(phi);
            z * m * x * m
        }
        CavityMode::BbSb => {
            let n = mirror_operator(phi) * retarder_operator(config.theta);
            z * n * x * n
        }
    }
}

/// Minimum sample count accepted for Monte Carlo averaging.
pub const MIN_MC_SAMPLES: usize = 1000;

/// How the Gaussian phase average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureScheme {
    GaussHermite { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl QuadratureScheme {
    /// Default evaluation scheme: 64-node Gauss-Hermite.
    pub fn default_gauss_hermite() -> Self {
        QuadratureScheme::GaussHermite { nodes: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureScheme::GaussHermite { nodes } => {
                if nodes < crate::quadrature::MIN_NODES {
                    return Err(Error::invalid(format!(
                        "Gauss-Hermite needs at least {} nodes, got {nodes}",
                        crate::quadrature::MIN_NODES
                    )));
                }
            }
            QuadratureScheme::MonteCarlo { samples, .. } => {
                if samples < MIN_MC_SAMPLES {
                    return Err(Error::invalid(format!(
                        "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// I.i.d. draws from the Gaussian phase measure: mean phi0, variance
/// sigma_phi^2 / 2. Deterministic for a fixed seed.
pub fn mc_phi_samples(spectrum: &SpectrumModel, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    use rand_distr::Distribution;
    let normal = rand_distr::Normal::new(spectrum.phi0(), spectrum.phase_std())
        .map_err(|e| Error::invalid(format!("bad phase distribution: {e}")))?;
    let mut rng = stream_rng(seed, "mc-phi", &[]);
    Ok((0..count).map(|_| normal.sample(&mut rng)).collect())
}

/// Frequency-averaged output state after `n` round trips.
///
/// For `sigma_phi == 0` this is the exact unitary conjugation by
/// `round_trip_unitary(phi0)^n`. Node evaluations are accumulated in a fixed
/// order with compensated summation, so the result does not depend on any
/// parallel scheduling of callers.
pub fn evolve(
    input: &PolarizationState,
    n: u32,
    spectrum: &SpectrumModel,
    config: &CavityConfig,
    quad: &QuadratureScheme,
) -> Result<DensityMatrix> {
    quad.validate()?;
    let rho_in = input.projector();
    if spectrum.sigma_phi() == 0.0 {
        let u_n = round_trip_unitary(spectrum.phi0(), config).pow(n);
        return Ok(u_n.conjugate(&rho_in));
    }
    match *quad {
        QuadratureScheme::GaussHermite { nodes } => {
            let rule = GaussHermiteRule::new(nodes)?;
            let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
            let phis = rule
                .nodes()
                .iter()
                .map(|x| spectrum.phi0() + spectrum.sigma_phi() * x);
            let weights = rule.weights().iter().map(|w| w * inv_sqrt_pi);
            Ok(average_conjugations(&rho_in, n, config, phis, weights))
        }
        QuadratureScheme::MonteCarlo { samples, seed } => {
            let phis = mc_phi_samples(spectrum, samples, seed)?;
            let w = 1.0 / samples as f64;
            Ok(average_conjugations(
                &rho_in,
                n,
                config,
                phis.into_iter(),
                std::iter::repeat_n(w, samples),
            ))
        }
    }
}

fn average_conjugations(
    rho_in: &DensityMatrix,
    n: u32,
    config: &CavityConfig,
    phis: impl Iterator<Item = f64>,
    weights: impl Iterator<Item = f64>,
) -> DensityMatrix {
    let mut acc = [[(KahanSum::default(), KahanSum::default()); 2]; 2];
    for (phi, w) in phis.zip(weights) {
        let u_n = round_trip_unitary(phi, config).pow(n);
        let term = u_n.conjugate(rho_in);
        for (r, acc_row) in acc.iter_mut().enumerate() {
            for (c, slot) in acc_row.iter_mut().enumerate() {
                let e = term.entry(r, c);
                slot.0.add(w * e.re);
                slot.1.add(w * e.im);
            }
        }
    }
    let mut m = Mat2::ZERO;
    for (row, acc_row) in m.e.iter_mut().zip(&acc) {
        for (entry, slot) in row.iter_mut().zip(acc_row) {
            *entry = C64::new(slot.0.value(), slot.1.value());
        }
    }
    DensityMatrix::from_matrix_unchecked(m.hermitized())
}
