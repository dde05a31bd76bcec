//! Closed-form results for the cavity evolution: rotation angles and axes of
//! the composed round trips, purity/fidelity decay laws, the small-n
//! expansion, pointer-basis asymptotics, and Bloch-sphere averages.
//!
//! Every round-trip unitary is an SU(2) rotation
//! `exp(-i alpha(phi, theta) s(phi, theta).sigma)`. Without decoupling the
//! half-angle satisfies
//!
//! ```text
//! sin(alpha_fe / 2) = sin(phi / 2) cos(theta / 2)
//! ```
//!
//! and with the X/Z controls inserted
//!
//! ```text
//! cos(alpha_bb) = -sin(phi) sin(theta) / 2 .
//! ```
//!
//! For a narrow phase distribution the axis is frozen at its value at the
//! pulse center and the angle expands to first order,
//! `alpha(phi) ~ alpha0 + alpha_dot0 (phi - phi0)`; the transverse Bloch
//! component then contracts by `exp(-n^2 alpha_dot0^2 sigma_phi^2)` per the
//! usual Gaussian average while the component along the axis survives — the
//! pointer pair of the channel.

use crate::cavity::{evolve, CavityConfig, CavityMode, QuadratureScheme, SpectrumModel};
use crate::error::Result;
use crate::qubit::{
    cross3, dot3, fidelity, scale3, BlochVector, DensityMatrix, PolarizationState, Unitary2,
    DEGENERATE_SIN_TOL,
};

/// Which of the two rotation families a configuration belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evolution {
    /// No control waveplates (`Free`, `FreeSb`).
    Free,
    /// Pauli-group decoupled (`Bb`, `BbSb`).
    Decoupled,
}

pub fn evolution_of(mode: CavityMode) -> Evolution {
    if mode.decoupled() {
        Evolution::Decoupled
    } else {
        Evolution::Free
    }
}

/// Half-angle of the free round-trip rotation, principal branch:
/// `2 asin(sin(phi/2) cos(theta/2))`.
pub fn alpha_fe(phi: f64, theta: f64) -> f64 {
    2.0 * ((phi / 2.0).sin() * (theta / 2.0).cos()).asin()
}

/// Half-angle of the decoupled round-trip rotation:
/// `acos(-sin(phi) sin(theta) / 2)`, always in [pi/3, 2 pi/3] (a quarter
/// turn at the decoupling point, so two round trips close a full cycle).
pub fn alpha_bb(phi: f64, theta: f64) -> f64 {
    (-(phi.sin()) * theta.sin() / 2.0).acos()
}

pub fn alpha_of(ev: Evolution, phi: f64, theta: f64) -> f64 {
    match ev {
        Evolution::Free => alpha_fe(phi, theta),
        Evolution::Decoupled => alpha_bb(phi, theta),
    }
}

/// Rotation axis together with a degeneracy marker.
///
/// When `sin(alpha)` vanishes the direction is undefined; the conventional
/// +z axis is returned with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisResult {
    pub axis: [f64; 3],
    pub degenerate: bool,
}

impl AxisResult {
    fn degenerate() -> Self {
        AxisResult {
            axis: [0.0, 0.0, 1.0],
            degenerate: true,
        }
    }
}

/// Rotation axis of the free round trip,
/// `{sin(theta)(cos(phi)-1), sin(theta) sin(phi), (1+cos(theta)) sin(phi)}
/// / (2 sin(alpha_fe))`.
pub fn axis_fe(phi: f64, theta: f64) -> AxisResult {
    let sin_alpha = alpha_fe(phi, theta).sin();
    if sin_alpha.abs() < DEGENERATE_SIN_TOL {
        return AxisResult::degenerate();
    }
    // cos(phi) - 1 written as -2 sin^2(phi/2) to avoid cancellation
    let numer = [
        -2.0 * theta.sin() * (phi / 2.0).sin().powi(2),
        theta.sin() * phi.sin(),
        (1.0 + theta.cos()) * phi.sin(),
    ];
    AxisResult {
        axis: scale3(numer, 1.0 / (2.0 * sin_alpha)),
        degenerate: false,
    }
}

/// Rotation axis of the decoupled round trip,
/// `{-sin(phi) sin^2(theta/2), 1 - 2 sin^2(theta/2) sin^2(phi/2),
/// -sin(theta) sin^2(phi/2)} / sin(alpha_bb)`.
pub fn axis_bb(phi: f64, theta: f64) -> AxisResult {
    let sin_alpha = alpha_bb(phi, theta).sin();
    if sin_alpha.abs() < DEGENERATE_SIN_TOL {
        // unreachable for real phi, theta: |cos(alpha_bb)| <= 1/2
        return AxisResult::degenerate();
    }
    let sht = (theta / 2.0).sin().powi(2);
    let shp = (phi / 2.0).sin().powi(2);
    let numer = [-phi.sin() * sht, 1.0 - 2.0 * sht * shp, -theta.sin() * shp];
    AxisResult {
        axis: scale3(numer, 1.0 / sin_alpha),
        degenerate: false,
    }
}

pub fn axis_of(ev: Evolution, phi: f64, theta: f64) -> AxisResult {
    match ev {
        Evolution::Free => axis_fe(phi, theta),
        Evolution::Decoupled => axis_bb(phi, theta),
    }
}

const ALPHA_DOT_STEP: f64 = 1e-6;

/// d alpha / d phi at the pulse center, by central finite difference.
pub fn alpha_dot0(ev: Evolution, theta: f64, spectrum: &SpectrumModel) -> f64 {
    let phi0 = spectrum.phi0();
    (alpha_of(ev, phi0 + ALPHA_DOT_STEP, theta) - alpha_of(ev, phi0 - ALPHA_DOT_STEP, theta))
        / (2.0 * ALPHA_DOT_STEP)
}

/// Small-phi0 approximations of the angle slopes: `cos(theta/2)` for the
/// free family, `sin(theta/2) cos(theta/2)` for the decoupled one.
pub fn alpha_dot0_small_phi0(ev: Evolution, theta: f64) -> f64 {
    match ev {
        Evolution::Free => (theta / 2.0).cos(),
        Evolution::Decoupled => (theta / 2.0).sin() * (theta / 2.0).cos(),
    }
}

/// Equatorial-input purity after `n` free round trips at theta = 0:
/// `[1 + exp(-2 n^2 sigma_phi^2)] / 2`.
pub fn purity_closed_form(n: u32, sigma_phi: f64) -> f64 {
    let nf = n as f64;
    (1.0 + (-2.0 * nf * nf * sigma_phi * sigma_phi).exp()) / 2.0
}

/// Quadratic-in-n infidelity estimate.
#[derive(Debug, Clone, Copy)]
pub struct SmallNInfidelity {
    pub value: f64,
    /// The axis at phi0 was degenerate and the conventional +z was used in
    /// the geometric bracket.
    pub degenerate_axis: bool,
}

/// Leading-order infidelity
/// `n^2 (alpha_dot0 sigma_phi)^2 (1 - (P_in . s(phi0))^2) / 2`,
/// valid while `n sigma_phi << 1`.
pub fn small_n_infidelity(
    n: u32,
    ev: Evolution,
    theta: f64,
    spectrum: &SpectrumModel,
    bloch_in: &BlochVector,
) -> SmallNInfidelity {
    let slope = alpha_dot0(ev, theta, spectrum);
    let axis = axis_of(ev, spectrum.phi0(), theta);
    let projection = dot3(bloch_in.components(), axis.axis);
    let bracket = (1.0 - projection * projection).max(0.0);
    let nf = n as f64;
    SmallNInfidelity {
        value: (nf * slope * spectrum.sigma_phi()).powi(2) * bracket / 2.0,
        degenerate_axis: axis.degenerate,
    }
}

/// Long-time limit of both purity and fidelity,
/// `{1 + (P_in . s(phi0))^2} / 2`: 1 for the pointer pair, 1/2 on the
/// equator of the decoherence axis, 2/3 averaged over the sphere.
pub fn asymptotic_value(bloch_in: &BlochVector, axis_at_phi0: [f64; 3]) -> f64 {
    let c = dot3(bloch_in.components(), axis_at_phi0);
    (1.0 + c * c) / 2.0
}

/// Deterministic part of the evolution at the pulse center,
/// `exp(-i n alpha0 s(phi0).sigma)`.
pub fn mean_rotation(n: u32, spectrum: &SpectrumModel, config: &CavityConfig) -> Unitary2 {
    let ev = evolution_of(config.mode());
    let alpha0 = alpha_of(ev, spectrum.phi0(), config.theta());
    let axis = axis_of(ev, spectrum.phi0(), config.theta());
    Unitary2::rotation(n as f64 * alpha0, axis.axis).expect("analytic axes are unit length")
}

/// Fidelity after undoing the deterministic mean rotation:
/// `<in| R_n^dagger rho_out R_n |in>` with `R_n` from [`mean_rotation`].
pub fn fidelity_compensated(
    input: &PolarizationState,
    rho_out: &DensityMatrix,
    n: u32,
    spectrum: &SpectrumModel,
    config: &CavityConfig,
) -> f64 {
    let r = mean_rotation(n, spectrum, config);
    fidelity(input, &r.adjoint().conjugate(rho_out))
}

/// Rodrigues rotation of `v` about the unit `axis` by `angle`.
fn rotate3(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (sin, cos) = angle.sin_cos();
    let k_cross_v = cross3(axis, v);
    let k_dot_v = dot3(axis, v);
    [
        v[0] * cos + k_cross_v[0] * sin + axis[0] * k_dot_v * (1.0 - cos),
        v[1] * cos + k_cross_v[1] * sin + axis[1] * k_dot_v * (1.0 - cos),
        v[2] * cos + k_cross_v[2] * sin + axis[2] * k_dot_v * (1.0 - cos),
    ]
}

/// Output of the frozen-axis, linear-angle model of the evolution.
#[derive(Debug, Clone, Copy)]
pub struct LinearizedEvolution {
    pub bloch_out: BlochVector,
    pub purity: f64,
    pub fidelity_raw: f64,
    pub fidelity_compensated: f64,
    pub degenerate_axis: bool,
}

/// Evolve a pure input through the frozen-axis, linear-angle model:
/// the Bloch component along `s(phi0)` is kept, the transverse part is
/// rotated by `2 n alpha0` and contracted by
/// `exp(-n^2 alpha_dot0^2 sigma_phi^2)`.
///
/// Exact for `Free` at theta = 0 (where the angle really is linear in phi
/// and the axis really is fixed), and the correct narrow-bandwidth limit
/// everywhere else; unlike finite quadrature it stays accurate at
/// arbitrarily large `n`.
pub fn evolve_linearized(
    bloch_in: &BlochVector,
    n: u32,
    spectrum: &SpectrumModel,
    config: &CavityConfig,
) -> LinearizedEvolution {
    let ev = evolution_of(config.mode());
    let theta = config.theta();
    let alpha0 = alpha_of(ev, spectrum.phi0(), theta);
    let axis = axis_of(ev, spectrum.phi0(), theta);
    let slope = alpha_dot0(ev, theta, spectrum);
    let nf = n as f64;
    let damping = (-(nf * slope * spectrum.sigma_phi()).powi(2)).exp();

    let p = bloch_in.components();
    let along = dot3(p, axis.axis);
    let parallel = scale3(axis.axis, along);
    let perp = [p[0] - parallel[0], p[1] - parallel[1], p[2] - parallel[2]];
    let rotated = rotate3(perp, axis.axis, 2.0 * nf * alpha0);

    let bloch_out = BlochVector::new(
        parallel[0] + damping * rotated[0],
        parallel[1] + damping * rotated[1],
        parallel[2] + damping * rotated[2],
    );
    let perp_sq = dot3(perp, perp);
    let purity = (1.0 + along * along + damping * damping * perp_sq) / 2.0;
    let fidelity_raw = (1.0 + dot3(p, bloch_out.components())) / 2.0;
    let fidelity_compensated = (1.0 + along * along + damping * perp_sq) / 2.0;
    LinearizedEvolution {
        bloch_out,
        purity,
        fidelity_raw,
        fidelity_compensated,
        degenerate_axis: axis.degenerate,
    }
}

// ---------------------------------------------------------------------------
// Bloch-sphere averaging
// ---------------------------------------------------------------------------

/// Deterministic sphere sampling: a Fibonacci lattice of `points` states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereSampling {
    pub points: usize,
}

impl Default for SphereSampling {
    fn default() -> Self {
        SphereSampling { points: 256 }
    }
}

/// Unit Bloch vectors of the Fibonacci lattice.
pub fn fibonacci_sphere(points: usize) -> Vec<BlochVector> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..points)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / points as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let az = golden_angle * i as f64;
            BlochVector::new(r * az.cos(), r * az.sin(), z)
        })
        .collect()
}

fn state_from_unit_bloch(p: &BlochVector) -> PolarizationState {
    let polar = p.z.clamp(-1.0, 1.0).acos();
    let azimuth = p.y.atan2(p.x);
    PolarizationState::from_bloch_angles(polar, azimuth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragedQuantity {
    Purity,
    CompensatedFidelity,
}

/// How [`bloch_average`] evaluates the evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolutionPath {
    /// Full Gaussian average of the exact round-trip rotations; accurate
    /// while the quadrature resolves the accumulated phase (moderate n).
    Quadrature(QuadratureScheme),
    /// Frozen-axis closed form; cheap and valid at any n.
    Linearized,
}

/// Average of purity or compensated fidelity over the sampled Bloch sphere.
/// Deterministic for a fixed `sampling`.
pub fn bloch_average(
    quantity: AveragedQuantity,
    n: u32,
    spectrum: &SpectrumModel,
    config: &CavityConfig,
    sampling: &SphereSampling,
    path: &EvolutionPath,
) -> Result<f64> {
    let points = fibonacci_sphere(sampling.points);
    let mut sum = crate::quadrature::KahanSum::default();
    for p in &points {
        let value = match path {
            EvolutionPath::Quadrature(quad) => {
                let state = state_from_unit_bloch(p);
                let rho = evolve(&state, n, spectrum, config, quad)?;
                match quantity {
                    AveragedQuantity::Purity => rho.purity(),
                    AveragedQuantity::CompensatedFidelity => {
                        fidelity_compensated(&state, &rho, n, spectrum, config)
                    }
                }
            }
            EvolutionPath::Linearized => {
                let out = evolve_linearized(p, n, spectrum, config);
                match quantity {
                    AveragedQuantity::Purity => out.purity,
                    AveragedQuantity::CompensatedFidelity => out.fidelity_compensated,
                }
            }
        };
        sum.add(value);
    }
    Ok(sum.value() / sampling.points as f64)
}
