//! Parameter recovery from decay series: the spectral phase spread
//! `sigma_phi` from purity-versus-n data, and a joint `(sigma_phi, phi0)`
//! fit against full simulated trajectories.

use crate::analytics::{alpha_dot0, evolution_of, fidelity_compensated};
use crate::cavity::{evolve, CavityConfig, QuadratureScheme, SpectrumModel};
use crate::error::{Error, Result};
use crate::optim::{golden_section_min, nelder_mead, SimplexOptions};
use crate::qubit::{DensityMatrix, PolarizationState};

/// Search range and resolution of the 1-D grid stage.
const SIGMA_GRID_MAX: f64 = 0.5;
const SIGMA_GRID_POINTS: usize = 500;

#[derive(Debug, Clone, Copy)]
pub struct SigmaPhiFit {
    pub sigma_phi: f64,
    /// From the local quadratic approximation of the objective; infinite
    /// when the objective carries no curvature information.
    pub std_error: f64,
    /// Weighted sum of squared residuals at the estimate.
    pub chi2: f64,
    /// The series shows no decay; `sigma_phi` was pinned to zero.
    pub flat_objective: bool,
    /// Number of purity values clamped back into [1/2, 1].
    pub clamped: usize,
}

/// Least-squares estimate of `sigma_phi` from a purity series, using the
/// equatorial dephasing law `P(n) = [1 + exp(-2 n^2 sigma^2)] / 2`.
///
/// Deterministic: a 500-point grid on [0, 0.5] brackets the optimum, then
/// golden-section refinement narrows it.
pub fn fit_sigma_phi(series: &[(u32, f64)], weights: Option<&[f64]>) -> Result<SigmaPhiFit> {
    if series.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 points to fit, got {}",
            series.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != series.len() {
            return Err(Error::invalid("weights length must match series length"));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
    }

    let mut clamped = 0;
    let cleaned: Vec<(f64, f64, f64)> = series
        .iter()
        .enumerate()
        .map(|(i, &(n, p))| {
            let w = weights.map_or(1.0, |w| w[i]);
            if !(0.5 - 1e-9..=1.0 + 1e-9).contains(&p) {
                clamped += 1;
            }
            (n as f64, p.clamp(0.5, 1.0), w)
        })
        .collect();

    let objective = |sigma: f64| -> f64 {
        cleaned
            .iter()
            .map(|&(n, p, w)| {
                let model = (1.0 + (-2.0 * n * n * sigma * sigma).exp()) / 2.0;
                w * (p - model).powi(2)
            })
            .sum()
    };

    // a series indistinguishable from "no decay" pins sigma to zero
    if cleaned.iter().all(|&(_, p, _)| p >= 1.0 - 1e-6) {
        return Ok(SigmaPhiFit {
            sigma_phi: 0.0,
            std_error: f64::INFINITY,
            chi2: objective(0.0),
            flat_objective: true,
            clamped,
        });
    }

    let step = SIGMA_GRID_MAX / (SIGMA_GRID_POINTS - 1) as f64;
    let mut best_k = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..SIGMA_GRID_POINTS {
        let val = objective(k as f64 * step);
        if val < best_val {
            best_val = val;
            best_k = k;
        }
    }
    let lo = (best_k.saturating_sub(1)) as f64 * step;
    let hi = ((best_k + 1).min(SIGMA_GRID_POINTS - 1)) as f64 * step;
    let (sigma, chi2) = golden_section_min(objective, lo, hi, 1e-12, 300);

    let std_error = local_std_error(&objective, sigma, cleaned.len(), 1);
    Ok(SigmaPhiFit {
        sigma_phi: sigma,
        std_error,
        chi2,
        flat_objective: false,
        clamped,
    })
}

/// Standard error from the curvature of a scalar least-squares objective.
fn local_std_error<F: Fn(f64) -> f64>(objective: &F, x: f64, points: usize, params: usize) -> f64 {
    if points <= params {
        return f64::INFINITY;
    }
    let h = (x.abs() * 1e-3).max(1e-5);
    let second = (objective(x + h) - 2.0 * objective(x) + objective(x - h)) / (h * h);
    if second <= 0.0 {
        return f64::INFINITY;
    }
    let residual_var = objective(x) / (points - params) as f64;
    (2.0 * residual_var / second).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct JointFit {
    pub sigma_phi: f64,
    pub phi0: f64,
    pub var_sigma: f64,
    pub var_phi0: f64,
    pub chi2: f64,
    /// Set when the configuration carries (almost) no sensitivity to the
    /// parameters, e.g. a decoupled cavity at theta = 0.
    pub wide_uncertainty: bool,
}

/// Joint least squares of `(sigma_phi, phi0)` against simulated
/// trajectories: for each reconstructed state the purity and the
/// rotation-compensated fidelity (compensated with the *candidate* mean
/// rotation, which is what makes phi0 identifiable) are matched to the
/// model values from [`evolve`].
pub fn fit_joint(
    series: &[(u32, DensityMatrix)],
    input: &PolarizationState,
    config: &CavityConfig,
    quad: &QuadratureScheme,
) -> Result<JointFit> {
    if series.len() < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 reconstructed states, got {}",
            series.len()
        )));
    }
    quad.validate()?;

    let objective = |sigma: f64, phi0: f64| -> f64 {
        let sigma = sigma.abs();
        let Ok(sp) = SpectrumModel::new(phi0, sigma) else {
            return f64::INFINITY;
        };
        let mut total = 0.0;
        for (n, rho_hat) in series {
            let Ok(model) = evolve(input, *n, &sp, config, quad) else {
                return f64::INFINITY;
            };
            let p_model = model.purity();
            let f_model = fidelity_compensated(input, &model, *n, &sp, config);
            let p_hat = rho_hat.purity();
            let f_hat = fidelity_compensated(input, rho_hat, *n, &sp, config);
            total += (p_hat - p_model).powi(2) + (f_hat - f_model).powi(2);
        }
        total
    };

    // coarse grid, then simplex refinement from the best cell
    let mut best = (0.0_f64, 0.0_f64, f64::INFINITY);
    for i in 0..=30 {
        let sigma = 0.3 * i as f64 / 30.0;
        for j in 0..=60 {
            let phi0 = 0.6 * j as f64 / 60.0;
            let val = objective(sigma, phi0);
            if val < best.2 {
                best = (sigma, phi0, val);
            }
        }
    }
    let refined = nelder_mead(
        |x| objective(x[0], x[1]),
        &[best.0, best.1],
        &[0.01, 0.01],
        &SimplexOptions {
            max_iters: 2000,
            rel_tol: 1e-14,
            abs_tol: 1e-22,
        },
    );
    let polished = nelder_mead(
        |x| objective(x[0], x[1]),
        &refined.x,
        &[1e-4, 1e-4],
        &SimplexOptions {
            max_iters: 2000,
            rel_tol: 1e-16,
            abs_tol: 1e-28,
        },
    );
    let sigma = polished.x[0].abs();
    let phi0 = polished.x[1];
    let chi2 = polished.fx;

    // curvature-based covariance diagonal
    let points = 2 * series.len();
    let residual_var = chi2 / (points.saturating_sub(2)).max(1) as f64;
    let h_sigma = (sigma * 1e-3).max(1e-5);
    let h_phi = (phi0.abs() * 1e-3).max(1e-5);
    let d2_sigma = (objective(sigma + h_sigma, phi0) - 2.0 * chi2
        + objective(sigma - h_sigma, phi0))
        / (h_sigma * h_sigma);
    let d2_phi = (objective(sigma, phi0 + h_phi) - 2.0 * chi2 + objective(sigma, phi0 - h_phi))
        / (h_phi * h_phi);

    let slope = alpha_dot0(
        evolution_of(config.mode()),
        config.theta(),
        &SpectrumModel::new(phi0, sigma)?,
    );
    let curvature_floor = 1e-9;
    let wide_uncertainty =
        slope.abs() < 1e-6 || d2_sigma <= curvature_floor || d2_phi <= curvature_floor;
    let var_of = |d2: f64| {
        if d2 <= curvature_floor {
            f64::INFINITY
        } else {
            2.0 * residual_var / d2
        }
    };

    Ok(JointFit {
        sigma_phi: sigma,
        phi0,
        var_sigma: var_of(d2_sigma),
        var_phi0: var_of(d2_phi),
        chi2,
        wide_uncertainty,
    })
}
