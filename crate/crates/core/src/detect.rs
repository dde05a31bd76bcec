//! Synthetic detection chain: per-round-trip detection probabilities,
//! Poissonian photocounts per analyzer setting, and the timing-histogram
//! round trip (peak building and window integration).
//!
//! The pulse is tapped out of the cavity once per round trip; the mean
//! photon number reaching the detector after `n` trips is attenuated by the
//! intracavity survival per trip, the out-coupling probability, and the
//! detector efficiency. Counts per analyzer setting are Poisson with mean
//! `pulses * (1 - exp(-mu_n * <projector>))`, all randomness keyed by
//! explicit seeds.

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{fidelity, DensityMatrix, StateLabel};
use crate::seeding::stream_rng;

/// Number of analyzer channels in the timing histogram.
pub const MCA_CHANNELS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Mean photon number per pulse at injection.
    pub mu_in: f64,
    /// Per-round-trip out-coupling probability at the tap plate.
    pub extraction: f64,
    /// Per-round-trip intracavity survival probability (all mirrors).
    pub survival: f64,
    pub detector_efficiency: f64,
    /// Laser shots per analyzer setting.
    pub pulses: f64,
    /// Interval between adjacent histogram peaks.
    pub round_trip_ns: f64,
    /// Histogram time resolution.
    pub bin_ps: f64,
    /// Bins summed around each peak.
    pub window_bins: usize,
    /// Flat dark-count probability per pulse, split over the window.
    pub dark_rate: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            mu_in: 1.0,
            extraction: 0.04,
            survival: 0.98 * 0.99 * 0.99,
            detector_efficiency: 0.5,
            pulses: 1e7,
            round_trip_ns: 6.80,
            bin_ps: 102.0,
            window_bins: 10,
            dark_rate: 0.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("extraction", self.extraction),
            ("survival", self.survival),
            ("detector_efficiency", self.detector_efficiency),
            ("dark_rate", self.dark_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(format!(
                    "{name} must be a probability in [0, 1], got {value}"
                )));
            }
        }
        if !self.mu_in.is_finite() || self.mu_in < 0.0 {
            return Err(Error::invalid("mu_in must be finite and non-negative"));
        }
        if !self.pulses.is_finite() || self.pulses < 0.0 {
            return Err(Error::invalid("pulses must be finite and non-negative"));
        }
        if self.round_trip_ns <= 0.0 || self.bin_ps <= 0.0 {
            return Err(Error::invalid("round_trip_ns and bin_ps must be positive"));
        }
        if self.window_bins == 0 {
            return Err(Error::invalid("window_bins must be at least 1"));
        }
        let spacing = self.bins_per_round_trip();
        if spacing < self.window_bins.max(10) as f64 {
            return Err(Error::invalid(format!(
                "peaks are only {spacing:.2} bins apart; integration windows would overlap"
            )));
        }
        Ok(())
    }

    pub fn bins_per_round_trip(&self) -> f64 {
        self.round_trip_ns * 1000.0 / self.bin_ps
    }

    /// Mean photon number seen by the detector at round trip `n`:
    /// `mu_in * survival^n * extraction * detector_efficiency`.
    pub fn detection_mu(&self, n: u32) -> f64 {
        assert!(n >= 1, "detection happens from the first round trip on");
        self.mu_in * self.survival.powi(n as i32) * self.extraction * self.detector_efficiency
    }

    /// Histogram channel of the peak for round trip `n`.
    pub fn peak_center_bin(&self, n: u32) -> usize {
        (n as f64 * self.bins_per_round_trip()).round() as usize
    }

    /// FNV-1a hash of the canonical JSON encoding.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Fraction of detection events carrying two or more photons for a coherent
/// state of mean photon number `mu`.
pub fn two_photon_fraction(mu: f64) -> f64 {
    let single_or_more = 1.0 - (-mu).exp();
    if single_or_more == 0.0 {
        return 0.0;
    }
    (1.0 - (1.0 + mu) * (-mu).exp()) / single_or_more
}

/// Poisson photocount for one (round trip, analyzer) setting.
///
/// Mean `pulses * (1 - exp(-detection_mu(n) * Tr(P rho)))` plus the flat
/// dark term; the draw is keyed by `(seed, n, projector)` so settings can be
/// sampled in any order or in parallel.
pub fn sample_counts(
    state_at_n: &DensityMatrix,
    n: u32,
    projector: StateLabel,
    config: &DetectionConfig,
    seed: u64,
) -> u64 {
    let p = fidelity(&projector.state(), state_at_n);
    let mu = config.detection_mu(n);
    let lambda = config.pulses * (1.0 - (-mu * p).exp()) + config.pulses * config.dark_rate;
    if lambda <= 0.0 {
        return 0;
    }
    let mut rng = stream_rng(seed, "counts", &[u64::from(n), projector.index() as u64]);
    let draw: f64 = rand_distr::Poisson::new(lambda)
        .expect("positive finite mean")
        .sample(&mut rng);
    draw as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub n: u32,
    pub projector: StateLabel,
    pub counts: u64,
}

/// Per-(round trip, projector) photon counts with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub seed: u64,
    pub config: DetectionConfig,
    pub entries: Vec<CountEntry>,
}

impl CountsRecord {
    /// Sample the full six-projector record for each provided state.
    pub fn generate(
        truths: &[(u32, DensityMatrix)],
        config: &DetectionConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut entries = Vec::with_capacity(truths.len() * StateLabel::ALL.len());
        for (n, rho) in truths {
            for label in StateLabel::ALL {
                entries.push(CountEntry {
                    n: *n,
                    projector: label,
                    counts: sample_counts(rho, *n, label, config, seed),
                });
            }
        }
        Ok(CountsRecord {
            seed,
            config: *config,
            entries,
        })
    }

    pub fn get(&self, n: u32, projector: StateLabel) -> Option<u64> {
        self.entries
            .iter()
            .find(|e| e.n == n && e.projector == projector)
            .map(|e| e.counts)
    }

    /// All six projector counts at round trip `n`, in [`StateLabel::ALL`]
    /// order.
    pub fn counts_for_round_trip(&self, n: u32) -> Vec<(StateLabel, u64)> {
        StateLabel::ALL
            .iter()
            .filter_map(|&label| self.get(n, label).map(|c| (label, c)))
            .collect()
    }

    pub fn round_trips(&self) -> Vec<u32> {
        let mut ns: Vec<u32> = self.entries.iter().map(|e| e.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.counts).sum()
    }

    /// CSV with `#` comment header carrying seed and full config.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# schema_version = 1\n");
        out.push_str(&format!("# seed = {}\n", self.seed));
        out.push_str(&format!("# config_hash = {:016x}\n", self.config.hash()));
        out.push_str(&format!(
            "# config = {}\n",
            serde_json::to_string(&self.config).expect("config serializes")
        ));
        out.push_str("n,projector,counts\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.n, e.projector, e.counts));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut seed: Option<u64> = None;
        let mut config: Option<DetectionConfig> = None;
        let mut entries = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("seed = ") {
                    seed = Some(
                        v.parse()
                            .map_err(|e| Error::invalid(format!("bad seed: {e}")))?,
                    );
                } else if let Some(v) = rest.strip_prefix("config = ") {
                    config = Some(serde_json::from_str(v)?);
                }
                continue;
            }
            if line.starts_with("n,") {
                continue;
            }
            let mut parts = line.split(',');
            let (n, projector, counts) = (
                parts.next().ok_or_else(|| Error::invalid("missing n"))?,
                parts
                    .next()
                    .ok_or_else(|| Error::invalid("missing projector"))?,
                parts
                    .next()
                    .ok_or_else(|| Error::invalid("missing counts"))?,
            );
            entries.push(CountEntry {
                n: n.parse()
                    .map_err(|e| Error::invalid(format!("bad n: {e}")))?,
                projector: projector.parse()?,
                counts: counts
                    .parse()
                    .map_err(|e| Error::invalid(format!("bad counts: {e}")))?,
            });
        }
        Ok(CountsRecord {
            seed: seed.ok_or_else(|| Error::invalid("missing `# seed` header"))?,
            config: config.ok_or_else(|| Error::invalid("missing `# config` header"))?,
            entries,
        })
    }
}

// ---------------------------------------------------------------------------
// timing histogram
// ---------------------------------------------------------------------------

fn window_offsets(window_bins: usize) -> std::ops::RangeInclusive<i64> {
    let lo = -(window_bins as i64 / 2);
    lo..=(lo + window_bins as i64 - 1)
}

/// Triangular intra-peak weight; any fixed positive profile works since only
/// window sums are used downstream.
fn profile_weight(offset: i64, window_bins: usize) -> f64 {
    window_bins as f64 / 2.0 + 0.5 - (offset as f64 + 0.5).abs()
}

/// Spread per-round-trip counts into an [`MCA_CHANNELS`]-bin histogram with
/// a fixed triangular profile around each peak. Total counts are conserved
/// exactly (largest-remainder apportionment).
pub fn build_histogram(counts_by_n: &[(u32, u64)], config: &DetectionConfig) -> Result<Vec<u64>> {
    config.validate()?;
    let mut bins = vec![0_u64; MCA_CHANNELS];
    let offsets: Vec<i64> = window_offsets(config.window_bins).collect();
    let total_weight: f64 = offsets
        .iter()
        .map(|&d| profile_weight(d, config.window_bins))
        .sum();
    for &(n, counts) in counts_by_n {
        if n == 0 {
            return Err(Error::invalid("round trips are counted from 1"));
        }
        let center = config.peak_center_bin(n) as i64;
        let first = center + offsets[0];
        let last = center + offsets[offsets.len() - 1];
        if first < 0 || last as usize >= MCA_CHANNELS {
            return Err(Error::OutOfRange(format!(
                "peak for round trip {n} spans bins {first}..={last}, outside the {MCA_CHANNELS}-channel span"
            )));
        }
        // integer apportionment: floors first, then remainders by largest
        // fractional part (ties resolved by window position)
        let shares: Vec<f64> = offsets
            .iter()
            .map(|&d| counts as f64 * profile_weight(d, config.window_bins) / total_weight)
            .collect();
        let floors: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
        let mut remainder = counts - floors.iter().sum::<u64>();
        let mut order: Vec<usize> = (0..offsets.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = shares[a] - shares[a].floor();
            let fb = shares[b] - shares[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let mut alloc = floors;
        for &i in &order {
            if remainder == 0 {
                break;
            }
            alloc[i] += 1;
            remainder -= 1;
        }
        for (&d, &a) in offsets.iter().zip(&alloc) {
            bins[(center + d) as usize] += a;
        }
    }
    Ok(bins)
}

/// Histogram CSV: `#` header block, then `bin_index,count` rows.
pub fn histogram_to_csv(histogram: &[u64], config: &DetectionConfig) -> String {
    let mut out = String::new();
    out.push_str("# schema_version = 1\n");
    out.push_str(&format!("# config_hash = {:016x}\n", config.hash()));
    out.push_str(&format!(
        "# config = {}\n",
        serde_json::to_string(config).expect("config serializes")
    ));
    out.push_str("bin_index,count\n");
    for (i, c) in histogram.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

/// Sum the integration window around each representable peak; exact inverse
/// of [`build_histogram`] on its image.
pub fn integrate_peaks(histogram: &[u64], config: &DetectionConfig) -> Result<Vec<(u32, u64)>> {
    config.validate()?;
    if histogram.len() != MCA_CHANNELS {
        return Err(Error::invalid(format!(
            "histogram must have {MCA_CHANNELS} channels, got {}",
            histogram.len()
        )));
    }
    let offsets: Vec<i64> = window_offsets(config.window_bins).collect();
    let mut out = Vec::new();
    for n in 1_u32.. {
        let center = config.peak_center_bin(n) as i64;
        let first = center + offsets[0];
        let last = center + offsets[offsets.len() - 1];
        if first < 0 || last as usize >= MCA_CHANNELS {
            break;
        }
        let sum: u64 = offsets
            .iter()
            .map(|&d| histogram[(center + d) as usize])
            .sum();
        out.push((n, sum));
    }
    Ok(out)
}
