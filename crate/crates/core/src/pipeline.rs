//! End-to-end synthetic run: evolve the chosen input state, sample counts
//! for every analyzer setting, reconstruct the state at each round trip,
//! and fit the spectral width back out. Deterministic for a fixed seed, and
//! independent of the worker-pool size.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{evolve, CavityConfig, CavityMode, QuadratureScheme, SpectrumModel};
use crate::detect::{CountsRecord, DetectionConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_joint, fit_sigma_phi};
use crate::qubit::{state_fidelity, DensityMatrix, StateLabel};
use crate::seeding::stream_seed;
use crate::tomo::{ml_reconstruct, TomoOptions, TomographyInput};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySettings {
    pub restarts: usize,
    pub poisson_likelihood: bool,
    pub fitted_normalization: bool,
}

impl Default for TomographySettings {
    fn default() -> Self {
        TomographySettings {
            restarts: 10,
            poisson_likelihood: false,
            fitted_normalization: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// 1-D fit of sigma_phi to the purity decay.
    Purity,
    /// Joint (sigma_phi, phi0) fit against simulated trajectories.
    Joint,
}

/// Full description of a synthetic run; the JSON config file mirrors this
/// struct field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub mode: CavityMode,
    pub theta: f64,
    pub phi0: f64,
    pub sigma_phi: f64,
    pub input_state: StateLabel,
    pub n_min: u32,
    pub n_max: u32,
    pub quad_nodes: usize,
    pub detection: DetectionConfig,
    pub tomography: TomographySettings,
    pub fit: FitKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            mode: CavityMode::Free,
            theta: 0.0,
            phi0: 0.2182,
            sigma_phi: 0.0839,
            input_state: StateLabel::D,
            n_min: 1,
            n_max: 12,
            quad_nodes: 64,
            detection: DetectionConfig::default(),
            tomography: TomographySettings::default(),
            fit: FitKind::Purity,
        }
    }
}

impl PipelineConfig {
    pub fn cavity(&self) -> Result<CavityConfig> {
        CavityConfig::new(self.mode, self.theta)
    }

    pub fn spectrum(&self) -> Result<SpectrumModel> {
        SpectrumModel::new(self.phi0, self.sigma_phi)
    }

    pub fn quad(&self) -> QuadratureScheme {
        QuadratureScheme::GaussHermite {
            nodes: self.quad_nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::invalid(
                "need 1 <= n_min <= n_max for the analyzed round trips",
            ));
        }
        self.cavity()?;
        self.spectrum()?;
        self.quad().validate()?;
        self.detection.validate()?;
        Ok(())
    }
}

/// One reconstructed round trip, as serialized to the states JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateReconstruction {
    pub n: u32,
    /// Row-major [re, im] pairs of the reconstructed density matrix.
    pub rho: [[f64; 2]; 4],
    pub purity: f64,
    pub fidelity_vs_target: f64,
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
}

impl StateReconstruction {
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        use num_complex::Complex64 as C64;
        let e = |i: usize| C64::new(self.rho[i][0], self.rho[i][1]);
        DensityMatrix::from_matrix(crate::qubit::Mat2::new(e(0), e(1), e(2), e(3)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub kind: FitKind,
    pub sigma_phi: f64,
    pub std_error: Option<f64>,
    pub phi0: Option<f64>,
    pub chi2: f64,
    pub flat_objective: bool,
    pub wide_uncertainty: bool,
    pub clamped_purities: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub config: PipelineConfig,
    pub truths: Vec<(u32, DensityMatrix)>,
    pub counts: CountsRecord,
    pub states: Vec<StateReconstruction>,
    pub report: FitReport,
}

fn rho_entries(rho: &DensityMatrix) -> [[f64; 2]; 4] {
    let mut out = [[0.0; 2]; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let e = rho.entry(i / 2, i % 2);
        *slot = [e.re, e.im];
    }
    out
}

fn tomo_seed(seed: u64, n: u32) -> u64 {
    u64::from_le_bytes(
        stream_seed(seed, "tomo-n", &[u64::from(n)])[..8]
            .try_into()
            .expect("8 bytes"),
    )
}

/// Run the full chain on `threads` workers (0 = library default). The
/// per-round-trip reconstructions are keyed by counter-based seeds and
/// collected in order, so the output is byte-identical for any pool size.
pub fn run(config: &PipelineConfig, threads: usize) -> Result<PipelineResult> {
    config.validate()?;
    let cavity = config.cavity()?;
    let spectrum = config.spectrum()?;
    let quad = config.quad();
    let input = config.input_state.state();

    let truths: Vec<(u32, DensityMatrix)> = (config.n_min..=config.n_max)
        .map(|n| Ok((n, evolve(&input, n, &spectrum, &cavity, &quad)?)))
        .collect::<Result<_>>()?;

    let counts = CountsRecord::generate(&truths, &config.detection, config.seed)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let states: Vec<StateReconstruction> = pool.install(|| {
        truths
            .par_iter()
            .map(|(n, truth)| {
                let tomo_input = TomographyInput {
                    counts: counts.counts_for_round_trip(*n),
                    scale: config.detection.pulses * config.detection.detection_mu(*n),
                };
                let opts = TomoOptions {
                    restarts: config.tomography.restarts,
                    poisson_likelihood: config.tomography.poisson_likelihood,
                    fit_normalization: config.tomography.fitted_normalization,
                    seed: tomo_seed(config.seed, *n),
                    ..TomoOptions::default()
                };
                let res = ml_reconstruct(&tomo_input, &opts)?;
                Ok(StateReconstruction {
                    n: *n,
                    rho: rho_entries(&res.rho),
                    purity: res.rho.purity(),
                    fidelity_vs_target: state_fidelity(truth, &res.rho),
                    objective: res.diagnostics.objective,
                    iterations: res.diagnostics.iterations,
                    converged: res.diagnostics.converged,
                })
            })
            .collect::<Result<_>>()
    })?;

    let report = match config.fit {
        FitKind::Purity => {
            let series: Vec<(u32, f64)> = states.iter().map(|s| (s.n, s.purity)).collect();
            let fit = fit_sigma_phi(&series, None)?;
            FitReport {
                schema_version: SCHEMA_VERSION,
                kind: FitKind::Purity,
                sigma_phi: fit.sigma_phi,
                std_error: fit.std_error.is_finite().then_some(fit.std_error),
                phi0: None,
                chi2: fit.chi2,
                flat_objective: fit.flat_objective,
                wide_uncertainty: false,
                clamped_purities: fit.clamped,
            }
        }
        FitKind::Joint => {
            let series: Vec<(u32, DensityMatrix)> = states
                .iter()
                .map(|s| Ok((s.n, s.density_matrix()?)))
                .collect::<Result<_>>()?;
            let fit = fit_joint(&series, &input, &cavity, &quad)?;
            FitReport {
                schema_version: SCHEMA_VERSION,
                kind: FitKind::Joint,
                sigma_phi: fit.sigma_phi,
                std_error: fit.var_sigma.is_finite().then(|| fit.var_sigma.sqrt()),
                phi0: Some(fit.phi0),
                chi2: fit.chi2,
                flat_objective: false,
                wide_uncertainty: fit.wide_uncertainty,
                clamped_purities: 0,
            }
        }
    };

    Ok(PipelineResult {
        config: config.clone(),
        truths,
        counts,
        states,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
struct StatesDocument<'a> {
    schema_version: u32,
    seed: u64,
    config: &'a PipelineConfig,
    states: &'a [StateReconstruction],
}

#[derive(Debug, Clone, Serialize)]
struct FitDocument<'a> {
    schema_version: u32,
    seed: u64,
    config: &'a PipelineConfig,
    fit: &'a FitReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenFiles {
    pub counts_csv: PathBuf,
    pub states_json: PathBuf,
    pub fit_json: PathBuf,
}

impl PipelineResult {
    pub fn states_json(&self) -> Result<String> {
        let doc = StatesDocument {
            schema_version: SCHEMA_VERSION,
            seed: self.config.seed,
            config: &self.config,
            states: &self.states,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn fit_json(&self) -> Result<String> {
        let doc = FitDocument {
            schema_version: SCHEMA_VERSION,
            seed: self.config.seed,
            config: &self.config,
            fit: &self.report,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Write `counts.csv`, `states.json` and `fit.json` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<WrittenFiles> {
        std::fs::create_dir_all(dir)?;
        let files = WrittenFiles {
            counts_csv: dir.join("counts.csv"),
            states_json: dir.join("states.json"),
            fit_json: dir.join("fit.json"),
        };
        std::fs::write(&files.counts_csv, self.counts.to_csv())?;
        std::fs::write(&files.states_json, self.states_json()?)?;
        std::fs::write(&files.fit_json, self.fit_json()?)?;
        Ok(files)
    }
}

/// Convenience used by callers that aim for a target expected count level:
/// rescale `pulses` so the brightest analyzed round trip sees roughly
/// `target` expected counts per setting at unit projector overlap.
pub fn pulses_for_target_counts(config: &PipelineConfig, target: f64) -> f64 {
    let mu = config.detection.detection_mu(config.n_min);
    if mu <= 0.0 {
        return 0.0;
    }
    target / mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            n_max: 8,
            detection: DetectionConfig {
                pulses: 2e6,
                survival: 1.0,
                ..DetectionConfig::default()
            },
            tomography: TomographySettings {
                restarts: 4,
                ..TomographySettings::default()
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn end_to_end_recovery_smoke() {
        let result = run(&quick_config(), 1).unwrap();
        assert_eq!(result.states.len(), 8);
        for s in &result.states {
            assert!(
                s.fidelity_vs_target > 0.99,
                "n = {}: {}",
                s.n,
                s.fidelity_vs_target
            );
        }
        assert_abs_diff_eq!(result.report.sigma_phi, 0.0839, epsilon = 0.01);
    }

    #[test]
    fn identical_seeds_are_byte_identical_across_pool_sizes() {
        let config = quick_config();
        let a = run(&config, 1).unwrap();
        let b = run(&config, 4).unwrap();
        assert_eq!(a.counts.to_csv(), b.counts.to_csv());
        assert_eq!(a.states_json().unwrap(), b.states_json().unwrap());
        assert_eq!(a.fit_json().unwrap(), b.fit_json().unwrap());
    }

    #[test]
    fn joint_fit_mode_recovers_both_parameters() {
        let config = PipelineConfig {
            fit: FitKind::Joint,
            n_max: 8,
            detection: DetectionConfig {
                pulses: 5e6,
                survival: 1.0,
                ..DetectionConfig::default()
            },
            tomography: TomographySettings {
                restarts: 4,
                ..TomographySettings::default()
            },
            ..PipelineConfig::default()
        };
        let result = run(&config, 1).unwrap();
        assert_eq!(result.report.kind, FitKind::Joint);
        assert_abs_diff_eq!(result.report.sigma_phi, 0.0839, epsilon = 0.005);
        assert_abs_diff_eq!(result.report.phi0.unwrap(), 0.2182, epsilon = 0.005);
        assert!(!result.report.wide_uncertainty);
        assert!(result.report.std_error.is_some());
    }

    #[test]
    fn zero_pulses_propagates_no_signal() {
        let mut config = quick_config();
        config.detection.pulses = 0.0;
        assert!(matches!(run(&config, 1), Err(Error::NoSignal)));
    }

    #[test]
    fn counts_csv_feeds_tomography_directly() {
        // the documented flow: counts CSV -> parse -> reconstruct per n
        let result = run(&quick_config(), 1).unwrap();
        let parsed = crate::detect::CountsRecord::from_csv(&result.counts.to_csv()).unwrap();
        let n = 3;
        let input = crate::tomo::TomographyInput {
            counts: parsed.counts_for_round_trip(n),
            scale: parsed.config.pulses * parsed.config.detection_mu(n),
        };
        let recon =
            crate::tomo::ml_reconstruct(&input, &crate::tomo::TomoOptions::default()).unwrap();
        let truth = &result.truths.iter().find(|(m, _)| *m == n).unwrap().1;
        assert!(crate::qubit::state_fidelity(truth, &recon.rho) > 0.99);
    }

    #[test]
    fn config_json_round_trip() {
        let config = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
        // unknown fields are rejected
        let bad = r#"{"schema_version": 1, "unknown_field": 3}"#;
        assert!(serde_json::from_str::<PipelineConfig>(bad).is_err());
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let config = PipelineConfig {
            n_min: 0,
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
        let config = PipelineConfig {
            schema_version: 99,
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
        let config = PipelineConfig {
            mode: CavityMode::Free,
            theta: 0.4,
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
