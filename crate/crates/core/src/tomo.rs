//! Maximum-likelihood reconstruction of the qubit density matrix from
//! projector counts.
//!
//! The state is parametrized as `rho = T^dagger T / Tr(T^dagger T)` with `T`
//! lower triangular (four real parameters), so positivity and unit trace
//! hold for every candidate the optimizer visits. The default objective is
//! the Gaussian-approximated negative log-likelihood
//!
//! ```text
//! sum_i (n_i - N p_i(rho))^2 / (2 N p_i(rho)),
//! ```
//!
//! minimized by a simplex search restarted from a linear-inversion estimate
//! plus seeded random points. An exact Poisson likelihood and a fitted
//! overall normalization are available behind options.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::qubit::{fidelity, DensityMatrix, Mat2, StateLabel};
use crate::seeding::stream_rng;

/// Counts for one round trip together with the per-setting scale
/// `N = pulses * detection_mu(n)` (expected counts per unit projector
/// probability).
#[derive(Debug, Clone)]
pub struct TomographyInput {
    pub counts: Vec<(StateLabel, u64)>,
    pub scale: f64,
}

impl TomographyInput {
    pub fn validate(&self) -> Result<()> {
        if self.counts.iter().all(|(_, c)| *c == 0) {
            return Err(Error::NoSignal);
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid("detection scale must be positive"));
        }
        let mut labels: Vec<StateLabel> = self.counts.iter().map(|(l, _)| *l).collect();
        labels.sort_by_key(|l| l.index());
        labels.dedup();
        if labels.len() < 4 {
            return Err(Error::invalid(format!(
                "need at least 4 distinct projectors, got {}",
                labels.len()
            )));
        }
        if measurement_rank(&labels) < 4 {
            return Err(Error::invalid(
                "projector set does not span the state space",
            ));
        }
        Ok(())
    }
}

/// Rank of the {1, P_x, P_y, P_z} coefficient rows of the projector set.
fn measurement_rank(labels: &[StateLabel]) -> usize {
    let mut rows: Vec<[f64; 4]> = labels
        .iter()
        .map(|l| {
            let p = l.state().bloch();
            [0.5, 0.5 * p.x, 0.5 * p.y, 0.5 * p.z]
        })
        .collect();
    let mut rank = 0;
    for col in 0..4 {
        let pivot =
            (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(pivot) = pivot else { break };
        if rows[pivot][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, pivot);
        let pivot_row = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank {
                let factor = row[col] / pivot_row[col];
                for (value, pivot_value) in row.iter_mut().zip(&pivot_row) {
                    *value -= factor * pivot_value;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

#[derive(Debug, Clone, Copy)]
pub struct TomoOptions {
    /// Simplex restarts: one linear-inversion start plus seeded random ones.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Relative objective tolerance for convergence.
    pub rel_tol: f64,
    /// Use the exact Poisson likelihood instead of the Gaussian form.
    pub poisson_likelihood: bool,
    /// Fit an overall normalization factor instead of trusting `scale`.
    pub fit_normalization: bool,
    pub seed: u64,
}

impl Default for TomoOptions {
    fn default() -> Self {
        TomoOptions {
            restarts: 10,
            max_iters: 10_000,
            rel_tol: 1e-10,
            poisson_likelihood: false,
            fit_normalization: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TomoDiagnostics {
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct TomoResult {
    pub rho: DensityMatrix,
    pub diagnostics: TomoDiagnostics,
}

/// `rho = T^dagger T / Tr(T^dagger T)` for `T = [[t0, 0], [t2 + i t3, t1]]`.
/// Valid (Hermitian, unit-trace, positive) for every real parameter vector.
pub fn rho_from_params(t: &[f64]) -> DensityMatrix {
    let (t0, t1, t2, t3) = (t[0], t[1], t[2], t[3]);
    let trace = t0 * t0 + t1 * t1 + t2 * t2 + t3 * t3;
    if trace < 1e-300 {
        return DensityMatrix::maximally_mixed();
    }
    let m = Mat2::new(
        C64::new((t0 * t0 + t2 * t2 + t3 * t3) / trace, 0.0),
        C64::new(t2 / trace * t1, -t3 / trace * t1),
        C64::new(t2 / trace * t1, t3 / trace * t1),
        C64::new(t1 * t1 / trace, 0.0),
    );
    DensityMatrix::from_matrix_unchecked(m)
}

/// Inverse of [`rho_from_params`] up to parameter-sign conventions.
fn params_from_rho(rho: &DensityMatrix) -> [f64; 4] {
    let r00 = rho.entry(0, 0).re.max(0.0);
    let r11 = rho.entry(1, 1).re.max(0.0);
    let r01 = rho.entry(0, 1);
    let t1 = r11.sqrt();
    if t1 < 1e-8 {
        return [r00.sqrt(), t1, 0.0, 0.0];
    }
    // (T^dagger T)_{01} = (t2 - i t3) t1
    let b = r01 / t1;
    let t2 = b.re;
    let t3 = -b.im;
    let t0 = (r00 - t2 * t2 - t3 * t3).max(0.0).sqrt();
    [t0, t1, t2, t3]
}

const PROBABILITY_FLOOR: f64 = 1e-12;

fn objective(input: &TomographyInput, opts: &TomoOptions, params: &[f64]) -> f64 {
    let rho = rho_from_params(&params[..4]);
    let norm = if opts.fit_normalization {
        params[4].exp()
    } else {
        1.0
    };
    let mut total = 0.0;
    for (label, counts) in &input.counts {
        let p = fidelity(&label.state(), &rho).max(PROBABILITY_FLOOR);
        let lambda = norm * input.scale * p;
        let n = *counts as f64;
        total += if opts.poisson_likelihood {
            lambda - n * lambda.ln()
        } else {
            (n - lambda).powi(2) / (2.0 * lambda)
        };
    }
    total
}

/// Bloch vector by direct linear inversion of the complementary pairs;
/// starting point for the first restart.
fn linear_inversion(input: &TomographyInput) -> DensityMatrix {
    let prob = |label: StateLabel| -> Option<f64> {
        input
            .counts
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| *c as f64 / input.scale)
    };
    let component = |plus: StateLabel, minus: StateLabel| -> f64 {
        match (prob(plus), prob(minus)) {
            (Some(p), Some(m)) => p - m,
            _ => 0.0,
        }
    };
    let mut p = [
        component(StateLabel::D, StateLabel::A),
        component(StateLabel::L, StateLabel::R),
        component(StateLabel::H, StateLabel::V),
    ];
    let norm = crate::qubit::norm3(p);
    if norm > 1.0 - 1e-6 {
        p = crate::qubit::scale3(p, (1.0 - 1e-6) / norm);
    }
    DensityMatrix::from_bloch(crate::qubit::BlochVector::new(p[0], p[1], p[2]))
        .unwrap_or_else(|_| DensityMatrix::maximally_mixed())
}

/// Maximum-likelihood state estimate.
///
/// The returned density matrix satisfies all state invariants by
/// construction. `converged` is false when no restart met the tolerance
/// within the iteration cap; the best iterate is returned regardless.
pub fn ml_reconstruct(input: &TomographyInput, opts: &TomoOptions) -> Result<TomoResult> {
    input.validate()?;
    let dim = if opts.fit_normalization { 5 } else { 4 };
    let simplex_opts = SimplexOptions {
        max_iters: opts.max_iters,
        rel_tol: opts.rel_tol,
        abs_tol: 1e-18,
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts.max(1));
    let mut first = params_from_rho(&linear_inversion(input)).to_vec();
    if opts.fit_normalization {
        first.push(0.0);
    }
    starts.push(first);
    for k in 1..opts.restarts.max(1) {
        use rand::Rng;
        let mut rng = stream_rng(opts.seed, "tomo-restart", &[k as u64]);
        starts.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    }

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut iterations = 0_u64;
    for start in starts {
        let step: Vec<f64> = vec![0.1; dim];
        let res = nelder_mead(|t| objective(input, opts, t), &start, &step, &simplex_opts);
        iterations += res.iterations as u64;
        let better = match &best {
            None => true,
            Some((_, fx, _)) => res.fx < *fx,
        };
        if better {
            best = Some((res.x, res.fx, res.converged));
        } else if let Some((_, _, conv)) = &mut best {
            *conv = *conv || res.converged;
        }
    }

    let (x, fx, converged) = best.expect("at least one restart ran");
    Ok(TomoResult {
        rho: rho_from_params(&x[..4]),
        diagnostics: TomoDiagnostics {
            objective: fx,
            iterations,
            converged,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{state_fidelity, PolarizationState};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn exact_counts(rho: &DensityMatrix, scale: f64) -> TomographyInput {
        let counts = StateLabel::ALL
            .iter()
            .map(|&l| {
                let p = fidelity(&l.state(), rho);
                (l, (scale * p).round() as u64)
            })
            .collect();
        TomographyInput { counts, scale }
    }

    #[test]
    fn parametrization_is_always_physical() {
        let mut rng = stream_rng(3, "test-params", &[]);
        for _ in 0..200 {
            let t: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let rho = rho_from_params(&t);
            let m = rho.matrix();
            assert!(m.max_abs_diff(&m.adjoint()) < 1e-12);
            assert_abs_diff_eq!(m.trace().re, 1.0, epsilon = 1e-12);
            assert!(rho.eigenvalues()[0] >= -1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let rho =
            DensityMatrix::from_bloch(crate::qubit::BlochVector::new(0.3, -0.4, 0.2)).unwrap();
        let back = rho_from_params(&params_from_rho(&rho));
        assert!(rho.matrix().max_abs_diff(back.matrix()) < 1e-12);
    }

    #[test]
    fn recovers_pure_state_from_exact_counts() {
        let truth = PolarizationState::d();
        let input = exact_counts(&truth.projector(), 1e6);
        let res = ml_reconstruct(&input, &TomoOptions::default()).unwrap();
        assert!(fidelity(&truth, &res.rho) >= 1.0 - 1e-6);
        assert!(res.diagnostics.converged);
    }

    #[test]
    fn uniform_counts_give_the_mixed_state() {
        let counts: Vec<(StateLabel, u64)> = StateLabel::ALL.iter().map(|&l| (l, 50_000)).collect();
        let input = TomographyInput {
            counts,
            scale: 100_000.0,
        };
        let res = ml_reconstruct(&input, &TomoOptions::default()).unwrap();
        assert!(
            res.rho
                .matrix()
                .max_abs_diff(DensityMatrix::maximally_mixed().matrix())
                < 1e-6
        );
    }

    #[test]
    fn all_zero_counts_is_no_signal() {
        let counts: Vec<(StateLabel, u64)> = StateLabel::ALL.iter().map(|&l| (l, 0)).collect();
        let input = TomographyInput { counts, scale: 1e5 };
        assert!(matches!(
            ml_reconstruct(&input, &TomoOptions::default()),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn too_few_projectors_is_rejected() {
        let input = TomographyInput {
            counts: vec![
                (StateLabel::H, 10),
                (StateLabel::V, 10),
                (StateLabel::D, 10),
            ],
            scale: 20.0,
        };
        assert!(ml_reconstruct(&input, &TomoOptions::default()).is_err());
    }

    #[test]
    fn poisson_and_gaussian_agree_on_clean_data() {
        let truth = PolarizationState::from_bloch_angles(1.0, 0.7);
        let input = exact_counts(&truth.projector(), 1e6);
        let gauss = ml_reconstruct(&input, &TomoOptions::default()).unwrap();
        let poisson = ml_reconstruct(
            &input,
            &TomoOptions {
                poisson_likelihood: true,
                ..TomoOptions::default()
            },
        )
        .unwrap();
        assert!(state_fidelity(&gauss.rho, &poisson.rho) > 1.0 - 1e-6);
    }

    #[test]
    fn fitted_normalization_absorbs_a_scale_error() {
        let truth = PolarizationState::l();
        // data generated at scale 1e6 but reconstructed believing 1.3e6
        let mut input = exact_counts(&truth.projector(), 1e6);
        input.scale = 1.3e6;
        let rigid = ml_reconstruct(&input, &TomoOptions::default()).unwrap();
        let fitted = ml_reconstruct(
            &input,
            &TomoOptions {
                fit_normalization: true,
                ..TomoOptions::default()
            },
        )
        .unwrap();
        let f_rigid = fidelity(&truth, &rigid.rho);
        let f_fitted = fidelity(&truth, &fitted.rho);
        assert!(
            f_fitted > f_rigid,
            "fitted {f_fitted} should beat rigid {f_rigid}"
        );
        assert!(f_fitted > 1.0 - 1e-5);
    }
}
