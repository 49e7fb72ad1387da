//! Synthetic truth spectra, shot sampling, and pseudo-experiments.
//!
//! Truth builders produce normalized spectra (a discretized Gaussian over
//! basis states, a W state, or a range-binned Gaussian). Sampling helpers
//! turn a spectrum into multinomial shot counts, push counts through a
//! response matrix, and simulate a calibration run. [`pseudo_experiments`]
//! repeats sample-fold-unfold cycles to measure estimator bias and spread.
//!
//! All sampling is driven by a caller-supplied seed; a fixed seed gives
//! bitwise identical results independent of thread count.

use crate::error::{Error, Result};
use crate::response::CalibrationData;
use crate::rng::{self, multinomial};
use crate::types::{CountVector, ProbabilityVector, ResponseMatrix};
use crate::unfold::{self, UnfoldConfig};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// A synthetic truth spectrum, buildable into a [`ProbabilityVector`].
#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    /// Discrete Gaussian over the `2^n_qubits` basis-state indices,
    /// centered on the middle state, with weight
    /// `exp(-(b - center)^2 / (2 sigma))`.
    Gaussian { n_qubits: usize, sigma: f64 },
    /// Uniform weight over the `n_qubits` one-hot states.
    WState { n_qubits: usize },
    /// Gaussian integrated over `n_bins` equal-width bins whose centers span
    /// `[lo, hi]`; the first and last bin absorb the tails.
    BinnedGaussian {
        n_bins: usize,
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
}

impl TruthSpec {
    /// Build the normalized spectrum this variant describes.
    pub fn build(&self) -> Result<ProbabilityVector> {
        match *self {
            TruthSpec::Gaussian { n_qubits, sigma } => gaussian_truth(n_qubits, sigma),
            TruthSpec::WState { n_qubits } => w_state_truth(n_qubits),
            TruthSpec::BinnedGaussian {
                n_bins,
                mean,
                sd,
                lo,
                hi,
            } => binned_gaussian_truth(n_bins, mean, sd, lo, hi),
        }
    }
}

fn check_register_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits >= usize::BITS as usize - 1 {
        return Err(Error::InvalidInput(format!(
            "register size must be between 1 and {}, got {n_qubits}",
            usize::BITS - 2
        )));
    }
    Ok(())
}

/// Discrete Gaussian over basis-state indices, centered on state
/// `2^(n_qubits-1)`, with weight `exp(-(b - center)^2 / (2 sigma))` before
/// normalization. Note the single power of `sigma` in the denominator: it
/// scales the squared distance directly, so the center-to-neighbor ratio is
/// `exp(-1 / (2 sigma))`.
pub fn gaussian_truth(n_qubits: usize, sigma: f64) -> Result<ProbabilityVector> {
    check_register_size(n_qubits)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let dim = 1usize << n_qubits;
    let center = (dim / 2) as f64;
    let values: Vec<f64> = (0..dim)
        .map(|b| {
            let d = b as f64 - center;
            (-d * d / (2.0 * sigma)).exp()
        })
        .collect();
    Ok(ProbabilityVector::new(values)?.normalized())
}

/// Uniform weight `1/n` over the one-hot states `2^k`, zero elsewhere.
pub fn w_state_truth(n_qubits: usize) -> Result<ProbabilityVector> {
    check_register_size(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut values = vec![0.0; dim];
    let weight = 1.0 / n_qubits as f64;
    for q in 0..n_qubits {
        values[1usize << q] = weight;
    }
    ProbabilityVector::new(values)
}

/// Gaussian with the given mean and standard deviation integrated over
/// `n_bins` equal-width bins. Bin centers are evenly spaced from `lo` to
/// `hi` inclusive, so the width is `(hi - lo) / (n_bins - 1)`; interior bin
/// masses are CDF differences across `center +/- width/2`, and the two edge
/// bins extend to infinity so the masses sum to one.
pub fn binned_gaussian_truth(
    n_bins: usize,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> Result<ProbabilityVector> {
    if n_bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::InvalidInput(format!(
            "standard deviation must be positive and finite, got {sd}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!(
            "bin range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let normal = Normal::new(mean, sd)
        .map_err(|e| Error::InvalidInput(format!("bad Gaussian parameters: {e}")))?;
    let width = (hi - lo) / (n_bins - 1) as f64;
    let values: Vec<f64> = (0..n_bins)
        .map(|k| {
            let center = lo + k as f64 * width;
            let upper = if k == n_bins - 1 {
                1.0
            } else {
                normal.cdf(center + width / 2.0)
            };
            let lower = if k == 0 {
                0.0
            } else {
                normal.cdf(center - width / 2.0)
            };
            (upper - lower).max(0.0)
        })
        .collect();
    Ok(ProbabilityVector::new(values)?.normalized())
}

/// Draw one multinomial sample of `shots` events from the normalized
/// spectrum. The counts always sum to `shots` exactly.
pub fn sample_counts(truth: &ProbabilityVector, shots: u64, seed: u64) -> Result<CountVector> {
    let probs = truth.normalized();
    let mut rng = rng::stream_rng(seed, 0);
    let counts = multinomial(&mut rng, shots, probs.values());
    let cv = CountVector::new(counts)?;
    match truth.n_qubits() {
        Some(n) => CountVector::with_qubits(cv.counts().to_vec(), n),
        None => Ok(cv),
    }
}

/// Push true counts through the response matrix stochastically: each of the
/// `counts[j]` events in true state `j` lands in a measured state drawn from
/// column `j`. The total count is preserved exactly. Column `j` uses its own
/// random stream, so results do not depend on evaluation order.
pub fn apply_readout_noise(
    response: &ResponseMatrix,
    counts: &CountVector,
    seed: u64,
) -> Result<CountVector> {
    let dim = response.dim();
    if counts.counts().len() != dim {
        return Err(Error::DimensionMismatch {
            left: counts.counts().len(),
            right: dim,
        });
    }
    let mut measured = vec![0u64; dim];
    for j in 0..dim {
        let n = counts.counts()[j];
        if n == 0 {
            continue;
        }
        let mut rng = rng::stream_rng(seed, j as u64);
        let draws = multinomial(&mut rng, n, &response.column(j));
        for (m, d) in measured.iter_mut().zip(&draws) {
            *m += d;
        }
    }
    let cv = CountVector::new(measured)?;
    match response.n_qubits() {
        Some(n) => CountVector::with_qubits(cv.counts().to_vec(), n),
        None => Ok(cv),
    }
}

/// Simulate a calibration run against a known response matrix: prepare each
/// basis state `shots_per_state` times and record the multinomial histogram
/// of measured states. Requires qubit structure, since calibration data is
/// defined over a qubit register.
pub fn sample_calibration(
    response: &ResponseMatrix,
    shots_per_state: u64,
    seed: u64,
) -> Result<CalibrationData> {
    let n_qubits = response.n_qubits().ok_or(Error::MissingQubitStructure)?;
    let dim = response.dim();
    let histograms: Vec<Vec<u64>> = (0..dim)
        .map(|j| {
            let mut rng = rng::stream_rng(seed, j as u64);
            multinomial(&mut rng, shots_per_state, &response.column(j))
        })
        .collect();
    CalibrationData::new(n_qubits, shots_per_state, histograms)
}

/// Mean squared difference between two equally long slices.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// What pseudo-experiment deviations are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// The truth counts actually drawn in each experiment.
    SampledTruth,
    /// The expected counts `shots * truth`, identical across experiments.
    Theoretical,
}

/// One simulated experiment: the reference truth counts and one unfolded
/// estimate per configured method.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoExperiment {
    pub experiment: usize,
    pub reference: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
}

/// Aggregate deviations of a pseudo-experiment ensemble, per method and
/// state: the mean of `estimate - reference` over experiments and its
/// sample standard deviation (divisor `count - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSummary {
    pub mean_difference: Vec<Vec<f64>>,
    pub std_difference: Vec<Vec<f64>>,
}

/// Full result of [`pseudo_experiments`].
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoReport {
    pub methods: Vec<String>,
    pub experiments: Vec<PseudoExperiment>,
    pub summary: PseudoSummary,
}

/// Run repeated sample-fold-unfold cycles. Each experiment draws truth
/// counts from the spectrum, pushes them through the response matrix, and
/// unfolds the noisy counts with every configuration in `configs`.
/// Experiment `e` derives all of its randomness from stream `e + 1` of the
/// seed, so the ensemble is reproducible and parallelism-independent.
pub fn pseudo_experiments(
    truth: &ProbabilityVector,
    response: &ResponseMatrix,
    shots: u64,
    n_experiments: usize,
    configs: &[UnfoldConfig],
    reference: Reference,
    seed: u64,
) -> Result<PseudoReport> {
    if n_experiments < 2 {
        return Err(Error::InvalidReplicaCount(n_experiments));
    }
    if configs.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one unfolding configuration".into(),
        ));
    }
    let dim = response.dim();
    if truth.values().len() != dim {
        return Err(Error::DimensionMismatch {
            left: truth.values().len(),
            right: dim,
        });
    }
    let probs = truth.normalized();
    let expected: Vec<f64> = probs.values().iter().map(|&p| p * shots as f64).collect();

    let experiments: Vec<PseudoExperiment> = (0..n_experiments)
        .into_par_iter()
        .map(|e| -> Result<PseudoExperiment> {
            let mut rng = rng::stream_rng(seed, e as u64 + 1);
            let true_counts = multinomial(&mut rng, shots, probs.values());
            let mut measured = vec![0u64; dim];
            for (j, &n) in true_counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let draws = multinomial(&mut rng, n, &response.column(j));
                for (m, d) in measured.iter_mut().zip(&draws) {
                    *m += d;
                }
            }
            let measured_pv =
                ProbabilityVector::new(measured.iter().map(|&c| c as f64).collect())?;
            let mut estimates = Vec::with_capacity(configs.len());
            for cfg in configs {
                let result = unfold::unfold(response, &measured_pv, cfg)?;
                estimates.push(result.estimate);
            }
            let reference_values = match reference {
                Reference::SampledTruth => true_counts.iter().map(|&c| c as f64).collect(),
                Reference::Theoretical => expected.clone(),
            };
            Ok(PseudoExperiment {
                experiment: e,
                reference: reference_values,
                estimates,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let count = n_experiments as f64;
    let mut mean_difference = vec![vec![0.0; dim]; configs.len()];
    for exp in &experiments {
        for (k, est) in exp.estimates.iter().enumerate() {
            for s in 0..dim {
                mean_difference[k][s] += (est[s] - exp.reference[s]) / count;
            }
        }
    }
    let mut std_difference = vec![vec![0.0; dim]; configs.len()];
    for exp in &experiments {
        for (k, est) in exp.estimates.iter().enumerate() {
            for s in 0..dim {
                let d = est[s] - exp.reference[s] - mean_difference[k][s];
                std_difference[k][s] += d * d / (count - 1.0);
            }
        }
    }
    for row in &mut std_difference {
        for v in row {
            *v = v.sqrt();
        }
    }

    Ok(PseudoReport {
        methods: configs.iter().map(|c| c.method.name().to_string()).collect(),
        experiments,
        summary: PseudoSummary {
            mean_difference,
            std_difference,
        },
    })
}
