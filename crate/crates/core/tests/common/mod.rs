//! Shared test oracles, deliberately independent of the library's fast
//! paths: powers by repeated matrix multiplication, averages by streaming
//! Monte Carlo.

#![allow(dead_code)]

use bbcav::cavity::{mc_phi_samples, round_trip_unitary, CavityConfig, SpectrumModel};
use bbcav::qubit::{DensityMatrix, Mat2, PolarizationState};

/// Matrix power by square-and-multiply; no angle-axis shortcut.
pub fn mat_pow_repeated(m: &Mat2, mut n: u32) -> Mat2 {
    let mut base = *m;
    let mut acc = Mat2::ID;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

/// Streaming mean and standard error of every real component of the
/// conjugated projector over Monte-Carlo phase samples.
pub struct McOracle {
    /// mean[r][c] = (re, im)
    pub mean: [[(f64, f64); 2]; 2],
    /// standard error of each component
    pub se: [[(f64, f64); 2]; 2],
    pub samples: usize,
}

pub fn mc_oracle_evolve(
    input: &PolarizationState,
    n: u32,
    spectrum: &SpectrumModel,
    config: &CavityConfig,
    samples: usize,
    seed: u64,
) -> McOracle {
    let rho_in = input.projector();
    let phis = mc_phi_samples(spectrum, samples, seed).expect("sampling");
    let mut mean = [[(0.0_f64, 0.0_f64); 2]; 2];
    let mut m2 = [[(0.0_f64, 0.0_f64); 2]; 2];
    for (k, phi) in phis.iter().enumerate() {
        let u = round_trip_unitary(*phi, config);
        let u_n = mat_pow_repeated(u.matrix(), n);
        let term = u_n * *rho_in.matrix() * u_n.adjoint();
        let count = (k + 1) as f64;
        for r in 0..2 {
            for c in 0..2 {
                let e = term.e[r][c];
                let d_re = e.re - mean[r][c].0;
                let d_im = e.im - mean[r][c].1;
                mean[r][c].0 += d_re / count;
                mean[r][c].1 += d_im / count;
                m2[r][c].0 += d_re * (e.re - mean[r][c].0);
                m2[r][c].1 += d_im * (e.im - mean[r][c].1);
            }
        }
    }
    let mut se = [[(0.0_f64, 0.0_f64); 2]; 2];
    let denom = (samples as f64 - 1.0) * samples as f64;
    for r in 0..2 {
        for c in 0..2 {
            se[r][c].0 = (m2[r][c].0 / denom).sqrt();
            se[r][c].1 = (m2[r][c].1 / denom).sqrt();
        }
    }
    McOracle { mean, se, samples }
}

/// Largest violation of |gh - mc_mean| <= 3 se + floor over all components;
/// returns the worst ratio (violation / allowance), <= 1 means pass.
pub fn worst_component_ratio(gh: &DensityMatrix, oracle: &McOracle, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let e = gh.entry(r, c);
            let allow_re = 3.0 * oracle.se[r][c].0 + floor;
            let allow_im = 3.0 * oracle.se[r][c].1 + floor;
            worst = worst.max((e.re - oracle.mean[r][c].0).abs() / allow_re);
            worst = worst.max((e.im - oracle.mean[r][c].1).abs() / allow_im);
        }
    }
    worst
}
