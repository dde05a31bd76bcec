//! Exact 2x2 complex operator and state algebra for a single polarization
//! qubit: Pauli matrices, axis-angle rotations, density matrices, Bloch
//! vectors, purity and fidelity.
//!
//! Everything is written in the (|H>, |V>) basis with Z = |H><H| - |V><V|,
//! so |H> sits at the north pole of the Bloch sphere. Unitaries carry their
//! full matrix including global phase; comparisons that should ignore the
//! phase go through [`Unitary2::phase_distance`] or
//! [`Unitary2::approx_eq_up_to_phase`].
//!
//! All operations here are pure functions on immutable values and can be
//! used concurrently without restriction.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C_ZERO: C64 = C64::new(0.0, 0.0);
const C_ONE: C64 = C64::new(1.0, 0.0);

/// Default tolerance for Hermiticity and unit-trace checks.
pub const MATRIX_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix may undershoot zero by this much.
pub const EIGENVALUE_TOL: f64 = 1e-10;
/// State vectors must be normalized to within this tolerance.
pub const NORM_TOL: f64 = 1e-12;
/// Rotation axes must be unit length to within this tolerance.
pub const AXIS_TOL: f64 = 1e-9;
/// Below this value of sin(alpha) an axis-angle decomposition is degenerate.
pub const DEGENERATE_SIN_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// small real 3-vector helpers
// ---------------------------------------------------------------------------

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

// ---------------------------------------------------------------------------
// Mat2
// ---------------------------------------------------------------------------

/// Dense 2x2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub e: [[C64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        e: [[C_ZERO, C_ZERO], [C_ZERO, C_ZERO]],
    };
    pub const ID: Mat2 = Mat2 {
        e: [[C_ONE, C_ZERO], [C_ZERO, C_ONE]],
    };

    pub fn new(e00: C64, e01: C64, e10: C64, e11: C64) -> Self {
        Mat2 {
            e: [[e00, e01], [e10, e11]],
        }
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Mat2::new(a, C_ZERO, C_ZERO, b)
    }

    pub fn trace(&self) -> C64 {
        self.e[0][0] + self.e[1][1]
    }

    pub fn det(&self) -> C64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    pub fn adjoint(&self) -> Mat2 {
        Mat2::new(
            self.e[0][0].conj(),
            self.e[1][0].conj(),
            self.e[0][1].conj(),
            self.e[1][1].conj(),
        )
    }

    pub fn scaled(&self, c: C64) -> Mat2 {
        Mat2::new(
            self.e[0][0] * c,
            self.e[0][1] * c,
            self.e[1][0] * c,
            self.e[1][1] * c,
        )
    }

    /// (M + M^dagger) / 2.
    pub fn hermitized(&self) -> Mat2 {
        let adj = self.adjoint();
        Mat2::new(
            (self.e[0][0] + adj.e[0][0]) * 0.5,
            (self.e[0][1] + adj.e[0][1]) * 0.5,
            (self.e[1][0] + adj.e[1][0]) * 0.5,
            (self.e[1][1] + adj.e[1][1]) * 0.5,
        )
    }

    /// Largest entrywise absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.e[r][c] - other.e[r][c]).norm());
            }
        }
        worst
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = Mat2::ZERO;
        for r in 0..2 {
            for c in 0..2 {
                out.e[r][c] = self.e[r][0] * rhs.e[0][c] + self.e[r][1] * rhs.e[1][c];
            }
        }
        out
    }
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.e[0][0] + rhs.e[0][0],
            self.e[0][1] + rhs.e[0][1],
            self.e[1][0] + rhs.e[1][0],
            self.e[1][1] + rhs.e[1][1],
        )
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.e[0][0] - rhs.e[0][0],
            self.e[0][1] - rhs.e[0][1],
            self.e[1][0] - rhs.e[1][0],
            self.e[1][1] - rhs.e[1][1],
        )
    }
}

pub const PAULI_X: Mat2 = Mat2 {
    e: [[C_ZERO, C_ONE], [C_ONE, C_ZERO]],
};
pub const PAULI_Y: Mat2 = Mat2 {
    e: [[C_ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), C_ZERO]],
};
pub const PAULI_Z: Mat2 = Mat2 {
    e: [[C_ONE, C_ZERO], [C_ZERO, C64::new(-1.0, 0.0)]],
};

/// axis . sigma for a real 3-vector.
pub fn pauli_dot(axis: [f64; 3]) -> Mat2 {
    Mat2::new(
        C64::new(axis[2], 0.0),
        C64::new(axis[0], -axis[1]),
        C64::new(axis[0], axis[1]),
        C64::new(-axis[2], 0.0),
    )
}

// ---------------------------------------------------------------------------
// states
// ---------------------------------------------------------------------------

/// Pure polarization qubit (alpha_h, alpha_v) on the {|H>, |V>} basis.
///
/// Constructors normalize or reject inputs so that
/// |alpha_h|^2 + |alpha_v|^2 = 1 always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    alpha_h: C64,
    alpha_v: C64,
}

impl PolarizationState {
    /// Build from amplitudes that must already be normalized to within
    /// [`NORM_TOL`].
    pub fn new(alpha_h: C64, alpha_v: C64) -> Result<Self> {
        let norm_sq = alpha_h.norm_sqr() + alpha_v.norm_sqr();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!(
                "state not normalized: |a_h|^2 + |a_v|^2 = {norm_sq}"
            )));
        }
        Ok(PolarizationState { alpha_h, alpha_v })
    }

    /// Build from arbitrary non-zero amplitudes, normalizing them.
    pub fn normalized(alpha_h: C64, alpha_v: C64) -> Result<Self> {
        let norm = (alpha_h.norm_sqr() + alpha_v.norm_sqr()).sqrt();
        if norm < 1e-300 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        Ok(PolarizationState {
            alpha_h: alpha_h / norm,
            alpha_v: alpha_v / norm,
        })
    }

    pub fn h() -> Self {
        PolarizationState {
            alpha_h: C_ONE,
            alpha_v: C_ZERO,
        }
    }

    pub fn v() -> Self {
        PolarizationState {
            alpha_h: C_ZERO,
            alpha_v: C_ONE,
        }
    }

    /// 45 degree linear polarization, Bloch vector +x.
    pub fn d() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PolarizationState {
            alpha_h: s,
            alpha_v: s,
        }
    }

    /// -45 degree linear polarization, Bloch vector -x.
    pub fn a() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PolarizationState {
            alpha_h: C64::new(s, 0.0),
            alpha_v: C64::new(-s, 0.0),
        }
    }

    /// Right circular polarization, Bloch vector -y.
    pub fn r() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PolarizationState {
            alpha_h: C64::new(s, 0.0),
            alpha_v: C64::new(0.0, -s),
        }
    }

    /// Left circular polarization, Bloch vector +y.
    pub fn l() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PolarizationState {
            alpha_h: C64::new(s, 0.0),
            alpha_v: C64::new(0.0, s),
        }
    }

    /// Pure state at polar angle `polar` from +z and azimuth `azimuth` on the
    /// Bloch sphere.
    pub fn from_bloch_angles(polar: f64, azimuth: f64) -> Self {
        PolarizationState {
            alpha_h: C64::new((polar / 2.0).cos(), 0.0),
            alpha_v: C64::from_polar((polar / 2.0).sin(), azimuth),
        }
    }

    pub fn alpha_h(&self) -> C64 {
        self.alpha_h
    }

    pub fn alpha_v(&self) -> C64 {
        self.alpha_v
    }

    pub fn projector(&self) -> DensityMatrix {
        let m = Mat2::new(
            C64::new(self.alpha_h.norm_sqr(), 0.0),
            self.alpha_h * self.alpha_v.conj(),
            self.alpha_v * self.alpha_h.conj(),
            C64::new(self.alpha_v.norm_sqr(), 0.0),
        );
        DensityMatrix { m }
    }

    pub fn bloch(&self) -> BlochVector {
        let r12 = self.alpha_h * self.alpha_v.conj();
        BlochVector {
            x: 2.0 * r12.re,
            y: -2.0 * r12.im,
            z: self.alpha_h.norm_sqr() - self.alpha_v.norm_sqr(),
        }
    }
}

/// The six analyzer settings of the overcomplete tomography set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::H,
        StateLabel::V,
        StateLabel::D,
        StateLabel::A,
        StateLabel::R,
        StateLabel::L,
    ];

    pub fn state(self) -> PolarizationState {
        match self {
            StateLabel::H => PolarizationState::h(),
            StateLabel::V => PolarizationState::v(),
            StateLabel::D => PolarizationState::d(),
            StateLabel::A => PolarizationState::a(),
            StateLabel::R => PolarizationState::r(),
            StateLabel::L => PolarizationState::l(),
        }
    }

    pub fn projector(self) -> DensityMatrix {
        self.state().projector()
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).unwrap()
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StateLabel::H => "H",
            StateLabel::V => "V",
            StateLabel::D => "D",
            StateLabel::A => "A",
            StateLabel::R => "R",
            StateLabel::L => "L",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for StateLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(StateLabel::H),
            "V" | "v" => Ok(StateLabel::V),
            "D" | "d" => Ok(StateLabel::D),
            "A" | "a" => Ok(StateLabel::A),
            "R" | "r" => Ok(StateLabel::R),
            "L" | "l" => Ok(StateLabel::L),
            other => Err(Error::invalid(format!("unknown state label `{other}`"))),
        }
    }
}

/// Real Bloch vector; |P| <= 1 (up to [`EIGENVALUE_TOL`]) for physical states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        norm3(self.components())
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        dot3(self.components(), other.components())
    }
}

// ---------------------------------------------------------------------------
// density matrices
// ---------------------------------------------------------------------------

/// 2x2 Hermitian, unit-trace, positive-semidefinite state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    /// Validate and wrap a raw matrix.
    ///
    /// Checks Hermiticity and unit trace to [`MATRIX_TOL`] and eigenvalues
    /// >= -[`EIGENVALUE_TOL`].
    pub fn from_matrix(m: Mat2) -> Result<Self> {
        if m.max_abs_diff(&m.adjoint()) > MATRIX_TOL {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > MATRIX_TOL || tr.im.abs() > MATRIX_TOL {
            return Err(Error::invalid(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let rho = DensityMatrix { m: m.hermitized() };
        let [lo, _] = rho.eigenvalues();
        if lo < -EIGENVALUE_TOL {
            return Err(Error::invalid(format!(
                "density matrix has negative eigenvalue {lo}"
            )));
        }
        Ok(rho)
    }

    /// Internal constructor for operations that preserve the invariants
    /// (unitary conjugation, convex mixing of valid states).
    pub(crate) fn from_matrix_unchecked(m: Mat2) -> Self {
        DensityMatrix { m }
    }

    pub fn from_bloch(p: BlochVector) -> Result<Self> {
        if p.norm() > 1.0 + EIGENVALUE_TOL {
            return Err(Error::invalid(format!(
                "Bloch vector has length {} > 1",
                p.norm()
            )));
        }
        Ok(DensityMatrix {
            m: Mat2::new(
                C64::new((1.0 + p.z) / 2.0, 0.0),
                C64::new(p.x / 2.0, -p.y / 2.0),
                C64::new(p.x / 2.0, p.y / 2.0),
                C64::new((1.0 - p.z) / 2.0, 0.0),
            ),
        })
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            m: Mat2::ID.scaled(C64::new(0.5, 0.0)),
        }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m.e[row][col]
    }

    pub fn bloch(&self) -> BlochVector {
        BlochVector {
            x: 2.0 * self.m.e[0][1].re,
            y: -2.0 * self.m.e[0][1].im,
            z: (self.m.e[0][0] - self.m.e[1][1]).re,
        }
    }

    /// Eigenvalues in ascending order (closed form for Hermitian 2x2).
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = self.m.trace().re / 2.0;
        let det = self.m.det().re;
        let disc = (half_tr * half_tr - det).max(0.0).sqrt();
        [half_tr - disc, half_tr + disc]
    }

    /// Tr(rho^2); 1 for pure states, 1/2 for the maximally mixed qubit.
    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }
}

/// Overlap <pi|rho|pi> between a pure input and a state.
pub fn fidelity(pure_in: &PolarizationState, rho_out: &DensityMatrix) -> f64 {
    let a = pure_in.alpha_h;
    let b = pure_in.alpha_v;
    let m = &rho_out.m;
    let value = (a.conj() * (m.e[0][0] * a + m.e[0][1] * b)
        + b.conj() * (m.e[1][0] * a + m.e[1][1] * b))
        .re;
    value.clamp(0.0, 1.0)
}

/// Uhlmann fidelity between two qubit states,
/// F = Tr(rho sigma) + 2 sqrt(det rho * det sigma).
pub fn state_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let tr = (a.m * b.m).trace().re;
    // determinants of pure states are 0 up to rounding; snap the noise so
    // the cross term does not pick up sqrt(epsilon) artifacts
    let snap = |d: f64| if d < 1e-14 { 0.0 } else { d };
    let det_a = snap(a.m.det().re);
    let det_b = snap(b.m.det().re);
    (tr + 2.0 * (det_a * det_b).sqrt()).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// unitaries
// ---------------------------------------------------------------------------

/// Axis-angle data of a unitary: U = exp(i phase) * exp(-i alpha axis.sigma).
#[derive(Debug, Clone, Copy)]
pub struct AngleAxis {
    /// Rotation half-angle in [0, pi] (the Bloch sphere turns by 2 alpha).
    pub alpha: f64,
    pub axis: [f64; 3],
    pub global_phase: f64,
    /// Set when sin(alpha) < [`DEGENERATE_SIN_TOL`]; the axis is then the
    /// conventional +z.
    pub degenerate_axis: bool,
}

/// 2x2 unitary polarization transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    m: Mat2,
}

impl Unitary2 {
    /// Validate U^dagger U = I and |det U| = 1 to [`MATRIX_TOL`].
    pub fn from_matrix(m: Mat2) -> Result<Self> {
        let gram = m.adjoint() * m;
        if gram.max_abs_diff(&Mat2::ID) > MATRIX_TOL {
            return Err(Error::invalid("matrix is not unitary"));
        }
        if (m.det().norm() - 1.0).abs() > MATRIX_TOL {
            return Err(Error::invalid(
                "matrix determinant does not lie on the unit circle",
            ));
        }
        Ok(Unitary2 { m })
    }

    pub(crate) fn from_matrix_unchecked(m: Mat2) -> Self {
        debug_assert!((m.adjoint() * m).max_abs_diff(&Mat2::ID) < 1e-10);
        Unitary2 { m }
    }

    /// exp(-i alpha axis.sigma) = cos(alpha) I - i sin(alpha) axis.sigma.
    ///
    /// `axis` must be unit length to within [`AXIS_TOL`].
    pub fn rotation(alpha: f64, axis: [f64; 3]) -> Result<Self> {
        if (norm3(axis) - 1.0).abs() > AXIS_TOL {
            return Err(Error::invalid(format!(
                "rotation axis must be unit length, |axis| = {}",
                norm3(axis)
            )));
        }
        let (sin, cos) = alpha.sin_cos();
        let m = Mat2::new(
            C64::new(cos, -sin * axis[2]),
            C64::new(-sin * axis[1], -sin * axis[0]),
            C64::new(sin * axis[1], -sin * axis[0]),
            C64::new(cos, sin * axis[2]),
        );
        Ok(Unitary2 { m })
    }

    pub fn identity() -> Self {
        Unitary2 { m: Mat2::ID }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Unitary2 {
            m: self.m.adjoint(),
        }
    }

    pub fn apply(&self, s: &PolarizationState) -> PolarizationState {
        PolarizationState {
            alpha_h: self.m.e[0][0] * s.alpha_h + self.m.e[0][1] * s.alpha_v,
            alpha_v: self.m.e[1][0] * s.alpha_h + self.m.e[1][1] * s.alpha_v,
        }
    }

    /// U rho U^dagger. Preserves all density-matrix invariants.
    pub fn conjugate(&self, rho: &DensityMatrix) -> DensityMatrix {
        let raw = self.m * rho.m * self.m.adjoint();
        DensityMatrix {
            m: raw.hermitized(),
        }
    }

    /// Split into global phase and axis-angle rotation:
    /// U = exp(i phase) (cos(alpha) I - i sin(alpha) axis.sigma), with
    /// alpha in [0, pi] and phase in (-pi/2, pi/2].
    ///
    /// When sin(alpha) < [`DEGENERATE_SIN_TOL`] (U proportional to the
    /// identity) the axis is reported as +z and flagged.
    pub fn angle_axis(&self) -> AngleAxis {
        let half_arg = self.m.det().arg() / 2.0;
        let v = self.m.scaled(C64::from_polar(1.0, -half_arg));
        // v = w I - i (x X + y Y + z Z)
        let w = (v.e[0][0] + v.e[1][1]).re / 2.0;
        let x = -(v.e[0][1] + v.e[1][0]).im / 2.0;
        let y = (v.e[1][0] - v.e[0][1]).re / 2.0;
        let z = -(v.e[0][0] - v.e[1][1]).im / 2.0;
        let vec_norm = norm3([x, y, z]);
        let alpha = vec_norm.atan2(w);
        let sin_alpha = vec_norm / vec_norm.hypot(w);
        if sin_alpha < DEGENERATE_SIN_TOL {
            AngleAxis {
                alpha,
                axis: [0.0, 0.0, 1.0],
                global_phase: half_arg,
                degenerate_axis: true,
            }
        } else {
            AngleAxis {
                alpha,
                axis: scale3([x, y, z], 1.0 / vec_norm),
                global_phase: half_arg,
                degenerate_axis: false,
            }
        }
    }

    /// U^n through the axis-angle decomposition (exact for unitaries).
    pub fn pow(&self, n: u32) -> Self {
        match n {
            0 => Unitary2::identity(),
            1 => *self,
            _ => {
                let aa = self.angle_axis();
                let rot = Unitary2::rotation(n as f64 * aa.alpha, aa.axis)
                    .expect("axis from angle_axis is unit length");
                let phase = C64::from_polar(1.0, n as f64 * aa.global_phase);
                Unitary2 {
                    m: rot.m.scaled(phase),
                }
            }
        }
    }

    /// 1 - |Tr(U^dagger V)| / 2: zero iff U and V agree up to global phase.
    pub fn phase_distance(&self, other: &Unitary2) -> f64 {
        1.0 - (self.m.adjoint() * other.m).trace().norm() / 2.0
    }

    /// Entrywise comparison after rotating `other` onto the phase of `self`.
    pub fn approx_eq_up_to_phase(&self, other: &Unitary2, tol: f64) -> bool {
        let overlap = (self.m.adjoint() * other.m).trace();
        if overlap.norm() < 1e-6 {
            return false;
        }
        let aligned = other.m.scaled((overlap / overlap.norm()).conj());
        self.m.max_abs_diff(&aligned) <= tol
    }
}

impl std::ops::Mul for Unitary2 {
    type Output = Unitary2;
    fn mul(self, rhs: Unitary2) -> Unitary2 {
        Unitary2 { m: self.m * rhs.m }
    }
}
