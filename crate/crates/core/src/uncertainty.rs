//! Uncertainty decomposition for unfolded spectra.
//!
//! Four per-state components are quantified:
//!
//! * `stat_m` — spread of the estimate under Poisson fluctuations of the
//!   measured counts (bootstrap replicas of the measurement).
//! * `stat_r` — spread under multinomial refluctuation of the calibration
//!   histograms that define the response matrix.
//! * `nonclosure` — the fold-then-unfold residual of the estimate itself,
//!   which captures the truncation bias of an iterative unfolding.
//! * `systematic_r` — the shift of the estimate when the response matrix is
//!   perturbed by an extra uniform flip channel of strength `lambda`.
//!
//! The quoted total combines `stat_m`, `stat_r`, and `nonclosure` in
//! quadrature; `systematic_r` is reported alongside, not folded in.
//! [`uncertainty_scan`] evaluates the decomposition over a list of
//! iteration counts, reusing one set of bootstrap replicas across the whole
//! list so that rows differ only through the estimator, and recommends the
//! iteration count with the smallest state-averaged total.

use crate::error::{Error, Result};
use crate::response::{self, CalibrationData, NoiseModel};
use crate::rng::{self, multinomial, poisson_u64};
use crate::types::{CountVector, ProbabilityVector, ResponseMatrix};
use crate::unfold::{self, Method, UnfoldConfig};
use rayon::prelude::*;

/// Stream domains that keep measurement and calibration bootstrap draws
/// independent of each other for one user-facing seed.
const MEASUREMENT_DOMAIN: u64 = 1;
const CALIBRATION_DOMAIN: u64 = 2;

/// Per-state uncertainty components of one unfolded spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyComponents {
    pub stat_m: Vec<f64>,
    pub stat_r: Vec<f64>,
    pub nonclosure: Vec<f64>,
    pub systematic_r: Vec<f64>,
}

impl UncertaintyComponents {
    /// Per-state quadrature sum of `stat_m`, `stat_r`, and `nonclosure`.
    /// `systematic_r` is deliberately excluded; it is quoted separately.
    pub fn total(&self) -> Vec<f64> {
        self.stat_m
            .iter()
            .zip(&self.stat_r)
            .zip(&self.nonclosure)
            .map(|((&a, &b), &c)| (a * a + b * b + c * c).sqrt())
            .collect()
    }
}

/// State-averaged view of the uncertainty budget: each component is the
/// plain mean over states, and `total` combines the averaged statistical
/// and nonclosure components in quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedUncertainty {
    pub stat_m: f64,
    pub stat_r: f64,
    pub nonclosure: f64,
    pub systematic_r: f64,
    pub total: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// The uncertainty decomposition of one unfolded spectrum at a fixed
/// iteration count, on the scale of the measured counts.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub iterations: usize,
    /// The unfolded estimate the components refer to.
    pub estimate: Vec<f64>,
    pub components: UncertaintyComponents,
    /// Per-state quadrature total (statistical and nonclosure parts).
    pub total: Vec<f64>,
    pub averaged: AveragedUncertainty,
}

/// Rows of [`uncertainty_scan`] plus the recommended iteration count: the
/// row with the smallest state-averaged total (first such row on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScan {
    pub rows: Vec<UncertaintyReport>,
    pub recommended_iterations: usize,
}

/// Deviation of an estimate from a known truth, both on the counts scale:
/// `bias` is the state-averaged absolute deviation, `mse` the state-averaged
/// squared deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRow {
    pub iterations: usize,
    pub bias: f64,
    pub mse: f64,
}

/// Iteration scan of truth deviations, with single-shot baselines from the
/// direct inversion and least-squares estimators on the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasScan {
    pub rows: Vec<BiasRow>,
    pub inversion_bias: f64,
    pub inversion_mse: f64,
    pub least_squares_bias: f64,
    pub least_squares_mse: f64,
}

fn validate_iteration_list(iteration_list: &[usize]) -> Result<()> {
    if iteration_list.is_empty() {
        return Err(Error::EmptyIterationList);
    }
    if iteration_list[0] == 0 {
        return Err(Error::InvalidInput(
            "iteration counts must be at least 1".into(),
        ));
    }
    for pair in iteration_list.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::NonIncreasingIterations);
        }
    }
    Ok(())
}

fn validate_replicas(replicas: usize) -> Result<()> {
    if replicas < 2 {
        return Err(Error::InvalidReplicaCount(replicas));
    }
    Ok(())
}

fn require_ibu(cfg: &UnfoldConfig) -> Result<()> {
    if cfg.method != Method::Ibu {
        return Err(Error::InvalidInput(format!(
            "this analysis is defined for the iterative estimator, got {}",
            cfg.method
        )));
    }
    Ok(())
}

fn counts_as_pv(counts: &CountVector) -> Result<ProbabilityVector> {
    ProbabilityVector::new(counts.counts().iter().map(|&c| c as f64).collect())
}

/// Sample standard deviation per state over replica estimates, divisor
/// `replicas - 1`.
fn std_over_replicas(estimates: &[Vec<f64>]) -> Vec<f64> {
    let b = estimates.len();
    let dim = estimates[0].len();
    let mut mean = vec![0.0; dim];
    for est in estimates {
        for (m, &v) in mean.iter_mut().zip(est) {
            *m += v / b as f64;
        }
    }
    let mut var = vec![0.0; dim];
    for est in estimates {
        for s in 0..dim {
            let d = est[s] - mean[s];
            var[s] += d * d / (b as f64 - 1.0);
        }
    }
    var.into_iter().map(f64::sqrt).collect()
}

/// Draw `replicas` Poisson refluctuations of the measured counts. Replica
/// `b` uses the sub-seed derived from (`seed`, measurement domain, `b`), so
/// the same seed gives the same replicas wherever they are drawn.
fn draw_measurement_replicas(measured: &CountVector, replicas: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..replicas)
        .map(|b| {
            let mut rng = rng::stream_rng(rng::derive_seed(seed, MEASUREMENT_DOMAIN, b as u64), 0);
            measured
                .counts()
                .iter()
                .map(|&c| poisson_u64(&mut rng, c as f64) as f64)
                .collect()
        })
        .collect()
}

/// Refluctuate every calibration histogram multinomially and rebuild the
/// response matrix, once per replica. Replica `b` uses the sub-seed derived
/// from (`seed`, calibration domain, `b`).
fn draw_calibration_replicas(
    calibration: &CalibrationData,
    replicas: usize,
    seed: u64,
) -> Result<Vec<ResponseMatrix>> {
    (0..replicas)
        .map(|b| {
            let mut rng = rng::stream_rng(rng::derive_seed(seed, CALIBRATION_DOMAIN, b as u64), 0);
            let shots = calibration.shots_per_state();
            let histograms: Vec<Vec<u64>> = calibration
                .histograms()
                .iter()
                .map(|hist| {
                    let probs: Vec<f64> = hist.iter().map(|&c| c as f64).collect();
                    multinomial(&mut rng, shots, &probs)
                })
                .collect();
            let replica = CalibrationData::new(calibration.n_qubits(), shots, histograms)?;
            response::build_from_calibration(&replica)
        })
        .collect()
}

/// Per-state standard deviation of the unfolded estimate under Poisson
/// refluctuation of the measured counts. Needs at least two replicas.
pub fn bootstrap_measurement(
    response: &ResponseMatrix,
    measured: &CountVector,
    replicas: usize,
    cfg: &UnfoldConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    validate_replicas(replicas)?;
    let replicas_data = draw_measurement_replicas(measured, replicas, seed);
    let estimates: Vec<Vec<f64>> = replicas_data
        .into_par_iter()
        .map(|values| {
            let pv = ProbabilityVector::new(values)?;
            Ok(unfold::unfold(response, &pv, cfg)?.estimate)
        })
        .collect::<Result<_>>()?;
    Ok(std_over_replicas(&estimates))
}

/// Per-state standard deviation of the unfolded estimate under multinomial
/// refluctuation of the calibration histograms. The measured counts stay
/// fixed; only the response matrix varies across replicas.
pub fn bootstrap_response(
    calibration: &CalibrationData,
    measured: &CountVector,
    replicas: usize,
    cfg: &UnfoldConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    validate_replicas(replicas)?;
    let matrices = draw_calibration_replicas(calibration, replicas, seed)?;
    let pv = counts_as_pv(measured)?;
    let estimates: Vec<Vec<f64>> = matrices
        .into_par_iter()
        .map(|r| Ok(unfold::unfold(&r, &pv, cfg)?.estimate))
        .collect::<Result<_>>()?;
    Ok(std_over_replicas(&estimates))
}

/// Fold the estimate back through the response matrix, unfold the result
/// with the same configuration, and report the per-state absolute deviation
/// from the original estimate. A converged fixed point closes to zero;
/// truncated iteration shows up as a nonzero residual.
pub fn nonclosure(
    response: &ResponseMatrix,
    estimate: &ProbabilityVector,
    cfg: &UnfoldConfig,
) -> Result<Vec<f64>> {
    require_ibu(cfg)?;
    let refolded = response.fold(estimate)?;
    let again = unfold::unfold(response, &refolded, cfg)?;
    Ok(estimate
        .values()
        .iter()
        .zip(&again.estimate)
        .map(|(&a, &b)| (b - a).abs())
        .collect())
}

/// The response matrix with an extra uniform flip channel of strength
/// `lambda` applied to the true state before the nominal response: the
/// composition `R * N(lambda)`. Requires qubit structure. `lambda = 0`
/// returns the matrix unchanged.
pub fn perturbed_response(response: &ResponseMatrix, lambda: f64) -> Result<ResponseMatrix> {
    let n_qubits = response.n_qubits().ok_or(Error::MissingQubitStructure)?;
    if lambda == 0.0 {
        return Ok(response.clone());
    }
    let noise = NoiseModel::uniform(n_qubits, lambda, lambda)?;
    let channel = response::from_noise_model(&noise);
    response.compose(&channel)
}

/// Per-state absolute shift of the estimate when unfolding with the
/// `lambda`-perturbed response matrix instead of the nominal one.
pub fn systematic_response(
    response: &ResponseMatrix,
    measured: &ProbabilityVector,
    lambda: f64,
    cfg: &UnfoldConfig,
) -> Result<Vec<f64>> {
    let nominal = unfold::unfold(response, measured, cfg)?;
    let perturbed = perturbed_response(response, lambda)?;
    let shifted = unfold::unfold(&perturbed, measured, cfg)?;
    Ok(nominal
        .estimate
        .iter()
        .zip(&shifted.estimate)
        .map(|(&a, &b)| (b - a).abs())
        .collect())
}

fn deviation(estimate: &[f64], truth: &[f64]) -> (f64, f64) {
    let dim = estimate.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&e, &t) in estimate.iter().zip(truth) {
        let d = e - t;
        abs_sum += d.abs();
        sq_sum += d * d;
    }
    (abs_sum / dim, sq_sum / dim)
}

/// Scan the deviation of the iterative estimate from a known truth over a
/// strictly increasing list of iteration counts. `truth` and `measured`
/// must be on the same counts scale. The prior and tolerances of `base` are
/// kept; only the iteration count varies. Baseline rows for the direct
/// inversion and least-squares estimators come from the same measured data.
pub fn bias_scan(
    truth: &ProbabilityVector,
    response: &ResponseMatrix,
    measured: &CountVector,
    iteration_list: &[usize],
    base: &UnfoldConfig,
) -> Result<BiasScan> {
    validate_iteration_list(iteration_list)?;
    require_ibu(base)?;
    if truth.len() != response.dim() {
        return Err(Error::DimensionMismatch {
            left: truth.len(),
            right: response.dim(),
        });
    }
    let pv = counts_as_pv(measured)?;
    let rows: Vec<BiasRow> = iteration_list
        .par_iter()
        .map(|&n| {
            let cfg = base.clone().with_iterations(n);
            let result = unfold::unfold(response, &pv, &cfg)?;
            let (bias, mse) = deviation(&result.estimate, truth.values());
            Ok(BiasRow {
                iterations: n,
                bias,
                mse,
            })
        })
        .collect::<Result<_>>()?;
    let inversion = unfold::unfold(response, &pv, &UnfoldConfig::inversion())?;
    let (inversion_bias, inversion_mse) = deviation(&inversion.estimate, truth.values());
    let ls = unfold::unfold(response, &pv, &UnfoldConfig::least_squares())?;
    let (least_squares_bias, least_squares_mse) = deviation(&ls.estimate, truth.values());
    Ok(BiasScan {
        rows,
        inversion_bias,
        inversion_mse,
        least_squares_bias,
        least_squares_mse,
    })
}

/// Evaluate the full uncertainty decomposition at every iteration count in
/// a strictly increasing list.
///
/// The nominal response matrix is built from the calibration data; the
/// measurement and calibration bootstrap replicas are drawn once and shared
/// by every row, so the dependence on the iteration count is isolated from
/// bootstrap noise. The recommended iteration count minimizes the
/// state-averaged quadrature total (statistical and nonclosure components).
pub fn uncertainty_scan(
    calibration: &CalibrationData,
    measured: &CountVector,
    iteration_list: &[usize],
    replicas: usize,
    lambda: f64,
    base: &UnfoldConfig,
    seed: u64,
) -> Result<UncertaintyScan> {
    validate_iteration_list(iteration_list)?;
    validate_replicas(replicas)?;
    require_ibu(base)?;
    let nominal = response::build_from_calibration(calibration)?;
    let pv = counts_as_pv(measured)?;
    if pv.len() != nominal.dim() {
        return Err(Error::DimensionMismatch {
            left: pv.len(),
            right: nominal.dim(),
        });
    }
    let perturbed = perturbed_response(&nominal, lambda)?;
    let measurement_replicas = draw_measurement_replicas(measured, replicas, seed);
    let measurement_pvs: Vec<ProbabilityVector> = measurement_replicas
        .into_iter()
        .map(ProbabilityVector::new)
        .collect::<Result<_>>()?;
    let matrices = draw_calibration_replicas(calibration, replicas, seed)?;

    let rows: Vec<UncertaintyReport> = iteration_list
        .iter()
        .map(|&n| {
            let cfg = base.clone().with_iterations(n);
            let estimate = unfold::unfold(&nominal, &pv, &cfg)?.estimate;

            let stat_m_estimates: Vec<Vec<f64>> = measurement_pvs
                .par_iter()
                .map(|replica| Ok(unfold::unfold(&nominal, replica, &cfg)?.estimate))
                .collect::<Result<_>>()?;
            let stat_m = std_over_replicas(&stat_m_estimates);

            let stat_r_estimates: Vec<Vec<f64>> = matrices
                .par_iter()
                .map(|r| Ok(unfold::unfold(r, &pv, &cfg)?.estimate))
                .collect::<Result<_>>()?;
            let stat_r = std_over_replicas(&stat_r_estimates);

            let estimate_pv = ProbabilityVector::new(estimate.clone())?;
            let nonclosure = nonclosure(&nominal, &estimate_pv, &cfg)?;

            let shifted = unfold::unfold(&perturbed, &pv, &cfg)?.estimate;
            let systematic_r: Vec<f64> = estimate
                .iter()
                .zip(&shifted)
                .map(|(&a, &b)| (b - a).abs())
                .collect();

            let components = UncertaintyComponents {
                stat_m,
                stat_r,
                nonclosure,
                systematic_r,
            };
            let total = components.total();
            let stat_m_avg = mean(&components.stat_m);
            let stat_r_avg = mean(&components.stat_r);
            let nonclosure_avg = mean(&components.nonclosure);
            // The averaged total is the quadrature sum of the averaged
            // components (systematic excluded), not the average of the
            // per-state totals: the recommendation trades off the average
            // sizes of the sources.
            let averaged = AveragedUncertainty {
                stat_m: stat_m_avg,
                stat_r: stat_r_avg,
                nonclosure: nonclosure_avg,
                systematic_r: mean(&components.systematic_r),
                total: (stat_m_avg * stat_m_avg
                    + stat_r_avg * stat_r_avg
                    + nonclosure_avg * nonclosure_avg)
                    .sqrt(),
            };
            Ok(UncertaintyReport {
                iterations: n,
                estimate,
                components,
                total,
                averaged,
            })
        })
        .collect::<Result<_>>()?;

    let mut recommended = rows[0].iterations;
    let mut best = rows[0].averaged.total;
    for row in &rows[1..] {
        if row.averaged.total < best {
            best = row.averaged.total;
            recommended = row.iterations;
        }
    }
    Ok(UncertaintyScan {
        rows,
        recommended_iterations: recommended,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim;
    use crate::unfold::Prior;

    fn identity_response(n_qubits: usize) -> ResponseMatrix {
        let nm = NoiseModel::uniform(n_qubits, 0.0, 0.0).unwrap();
        response::from_noise_model(&nm)
    }

    #[test]
    fn quadrature_total_combines_three_components() {
        let components = UncertaintyComponents {
            stat_m: vec![3.0, 0.0],
            stat_r: vec![4.0, 0.0],
            nonclosure: vec![12.0, 0.0],
            systematic_r: vec![100.0, 7.0],
        };
        let total = components.total();
        assert!((total[0] - 13.0).abs() < 1e-12);
        assert_eq!(total[1], 0.0);
    }

    #[test]
    fn measurement_bootstrap_matches_poisson_spread_for_identity_response() {
        let r = identity_response(2);
        let measured = CountVector::new(vec![10_000; 4]).unwrap();
        let std = bootstrap_measurement(&r, &measured, 400, &UnfoldConfig::inversion(), 7).unwrap();
        for (s, &v) in std.iter().enumerate() {
            assert!(
                (90.0..=110.0).contains(&v),
                "state {s}: std {v} should be near sqrt(10000) = 100"
            );
        }
    }

    #[test]
    fn measurement_bootstrap_shrinks_relative_to_scale_with_more_counts() {
        let r = response::tridiagonal(4, 0.1).unwrap();
        let low = CountVector::new(vec![1_000; 4]).unwrap();
        let high = CountVector::new(vec![100_000; 4]).unwrap();
        let cfg = UnfoldConfig::ibu(5);
        let std_low = bootstrap_measurement(&r, &low, 100, &cfg, 3).unwrap();
        let std_high = bootstrap_measurement(&r, &high, 100, &cfg, 3).unwrap();
        let rel_low = mean(&std_low) / 4_000.0;
        let rel_high = mean(&std_high) / 400_000.0;
        assert!(
            rel_high < rel_low / 3.0,
            "relative spread should fall with counts: {rel_high} vs {rel_low}"
        );
    }

    #[test]
    fn bootstrap_rejects_degenerate_replica_counts() {
        let r = identity_response(1);
        let measured = CountVector::new(vec![10, 10]).unwrap();
        for replicas in [0, 1] {
            assert!(matches!(
                bootstrap_measurement(&r, &measured, replicas, &UnfoldConfig::inversion(), 0),
                Err(Error::InvalidReplicaCount(_))
            ));
        }
    }

    #[test]
    fn noiseless_calibration_bootstrap_is_exactly_zero() {
        // Calibration of a perfect readout: every histogram is a point mass,
        // so every multinomial replica reproduces it and the estimates agree.
        let shots = 5_000;
        let histograms: Vec<Vec<u64>> = (0..4)
            .map(|j| {
                let mut h = vec![0u64; 4];
                h[j] = shots;
                h
            })
            .collect();
        let calib = CalibrationData::new(2, shots, histograms).unwrap();
        let measured = CountVector::new(vec![100, 200, 300, 400]).unwrap();
        let std = bootstrap_response(&calib, &measured, 50, &UnfoldConfig::ibu(3), 11).unwrap();
        assert_eq!(std, vec![0.0; 4]);
    }

    #[test]
    fn calibration_bootstrap_shrinks_with_more_calibration_shots() {
        let nm = NoiseModel::uniform(2, 0.05, 0.08).unwrap();
        let r = response::from_noise_model(&nm);
        let small = sim::sample_calibration(&r, 500, 21).unwrap();
        let large = sim::sample_calibration(&r, 50_000, 22).unwrap();
        let measured = CountVector::new(vec![40_000, 30_000, 20_000, 10_000]).unwrap();
        let cfg = UnfoldConfig::ibu(10);
        let std_small = bootstrap_response(&small, &measured, 80, &cfg, 5).unwrap();
        let std_large = bootstrap_response(&large, &measured, 80, &cfg, 5).unwrap();
        assert!(
            mean(&std_large) < mean(&std_small) / 3.0,
            "{} vs {}",
            mean(&std_large),
            mean(&std_small)
        );
    }

    #[test]
    fn nonclosure_vanishes_at_a_fixed_point() {
        // With the prior set to the truth and the measurement equal to the
        // folded truth, the iterative estimate reproduces the truth exactly,
        // and refolding changes nothing.
        let r = response::tridiagonal(8, 0.2).unwrap();
        let truth = sim::gaussian_truth(3, 2.0).unwrap();
        let scaled =
            ProbabilityVector::new(truth.values().iter().map(|&v| v * 50_000.0).collect())
                .unwrap();
        let folded = r.fold(&scaled).unwrap();
        let cfg = UnfoldConfig::ibu(7).with_prior(Prior::Custom(truth.clone()));
        let estimate = unfold::unfold(&r, &folded, &cfg).unwrap().estimate;
        for (a, b) in estimate.iter().zip(scaled.values()) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
        }
        let residual = nonclosure(&r, &ProbabilityVector::new(estimate).unwrap(), &cfg).unwrap();
        for &v in &residual {
            assert!(v <= 1e-9, "nonclosure {v}");
        }
    }

    #[test]
    fn nonclosure_detects_truncated_iteration() {
        let r = response::tridiagonal(8, 0.25).unwrap();
        let truth = sim::gaussian_truth(3, 2.0).unwrap();
        let scaled =
            ProbabilityVector::new(truth.values().iter().map(|&v| v * 50_000.0).collect())
                .unwrap();
        let folded = r.fold(&scaled).unwrap();
        let short = UnfoldConfig::ibu(1);
        let long = UnfoldConfig::ibu(200);
        let est_short = unfold::unfold(&r, &folded, &short).unwrap().estimate;
        let est_long = unfold::unfold(&r, &folded, &long).unwrap().estimate;
        let nc_short = nonclosure(&r, &ProbabilityVector::new(est_short).unwrap(), &short).unwrap();
        let nc_long = nonclosure(&r, &ProbabilityVector::new(est_long).unwrap(), &long).unwrap();
        assert!(mean(&nc_short) > 10.0 * mean(&nc_long).max(1e-9));
        assert!(mean(&nc_short) > 1.0);
    }

    #[test]
    fn nonclosure_requires_the_iterative_method() {
        let r = identity_response(1);
        let est = ProbabilityVector::new(vec![1.0, 2.0]).unwrap();
        assert!(nonclosure(&r, &est, &UnfoldConfig::inversion()).is_err());
        assert!(nonclosure(&r, &est, &UnfoldConfig::least_squares()).is_err());
    }

    #[test]
    fn perturbed_response_composes_an_extra_flip_channel() {
        let r = identity_response(2);
        let perturbed = perturbed_response(&r, 0.1).unwrap();
        // Identity nominal response: the perturbed matrix is the channel itself.
        assert!((perturbed.entry(0, 0) - 0.81).abs() < 1e-12);
        assert!((perturbed.entry(1, 0) - 0.09).abs() < 1e-12);
        assert!((perturbed.entry(3, 0) - 0.01).abs() < 1e-12);
        for (c, &s) in perturbed.column_sums().iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-12, "column {c}");
        }
    }

    #[test]
    fn perturbed_response_at_zero_strength_is_unchanged() {
        let r = response::tridiagonal(16, 0.25).unwrap();
        let same = perturbed_response(&r, 0.0).unwrap();
        assert_eq!(r.rows_vec(), same.rows_vec());
    }

    #[test]
    fn perturbed_response_requires_qubit_structure() {
        let r = response::tridiagonal(21, 0.1).unwrap();
        assert!(matches!(
            perturbed_response(&r, 0.01),
            Err(Error::MissingQubitStructure)
        ));
    }

    #[test]
    fn systematic_shift_is_zero_without_perturbation() {
        let r = response::tridiagonal(16, 0.25).unwrap();
        let truth = sim::gaussian_truth(4, 3.5).unwrap();
        let folded = r.fold(&truth).unwrap();
        let shift = systematic_response(&r, &folded, 0.0, &UnfoldConfig::ibu(5)).unwrap();
        assert_eq!(shift, vec![0.0; 16]);
    }

    #[test]
    fn systematic_shift_scales_about_linearly_in_lambda() {
        let r = response::tridiagonal(16, 0.25).unwrap();
        let truth = sim::gaussian_truth(4, 3.5).unwrap();
        let scaled =
            ProbabilityVector::new(truth.values().iter().map(|&v| v * 1.0e6).collect()).unwrap();
        let folded = r.fold(&scaled).unwrap();
        let cfg = UnfoldConfig::ibu(10);
        let small = systematic_response(&r, &folded, 0.01, &cfg).unwrap();
        let doubled = systematic_response(&r, &folded, 0.02, &cfg).unwrap();
        let ratio = mean(&doubled) / mean(&small);
        assert!(mean(&small) > 0.0);
        assert!(
            (1.5..=2.5).contains(&ratio),
            "doubling the strength should about double the shift, ratio {ratio}"
        );
    }

    #[test]
    fn bias_scan_shrinks_toward_truth_on_exact_folded_data() {
        let r = response::tridiagonal(8, 0.2).unwrap();
        let truth = sim::gaussian_truth(3, 2.0).unwrap();
        let shots = 100_000.0;
        let scaled_values: Vec<f64> = truth.values().iter().map(|&v| v * shots).collect();
        let scaled = ProbabilityVector::new(scaled_values.clone()).unwrap();
        let folded = r.fold(&scaled).unwrap();
        let measured = CountVector::new(
            folded.values().iter().map(|&v| v.round() as u64).collect(),
        )
        .unwrap();
        let scan = bias_scan(
            &scaled,
            &r,
            &measured,
            &[1, 5, 50],
            &UnfoldConfig::ibu(1),
        )
        .unwrap();
        assert_eq!(scan.rows.len(), 3);
        assert!(scan.rows[0].bias > scan.rows[2].bias);
        assert!(scan.rows[0].mse > scan.rows[2].mse);
        // Rounded counts leave the inversion baseline within rounding error.
        assert!(scan.inversion_bias < 5.0);
        assert!(scan.least_squares_bias < 50.0);
        for row in &scan.rows {
            assert!(row.bias.is_finite() && row.mse >= 0.0);
        }
    }

    #[test]
    fn bias_scan_on_identity_response_is_exact_at_every_count() {
        let r = identity_response(2);
        let truth_counts = CountVector::new(vec![100, 200, 300, 400]).unwrap();
        let truth_pv = counts_as_pv(&truth_counts).unwrap();
        let scan = bias_scan(
            &truth_pv,
            &r,
            &truth_counts,
            &[1, 2],
            &UnfoldConfig::ibu(1),
        )
        .unwrap();
        for row in &scan.rows {
            assert!(row.bias < 1e-9);
        }
        assert!(scan.inversion_bias < 1e-9);
    }

    #[test]
    fn scan_validates_the_iteration_list() {
        let r = identity_response(1);
        let truth = ProbabilityVector::new(vec![1.0, 2.0]).unwrap();
        let measured = CountVector::new(vec![1, 2]).unwrap();
        let base = UnfoldConfig::ibu(1);
        assert!(matches!(
            bias_scan(&truth, &r, &measured, &[], &base),
            Err(Error::EmptyIterationList)
        ));
        assert!(matches!(
            bias_scan(&truth, &r, &measured, &[3, 3], &base),
            Err(Error::NonIncreasingIterations)
        ));
        assert!(matches!(
            bias_scan(&truth, &r, &measured, &[5, 2], &base),
            Err(Error::NonIncreasingIterations)
        ));
        assert!(bias_scan(&truth, &r, &measured, &[0, 1], &base).is_err());
    }

    #[test]
    fn uncertainty_scan_produces_a_complete_reproducible_table() {
        let nm = NoiseModel::uniform(2, 0.04, 0.07).unwrap();
        let r = response::from_noise_model(&nm);
        let calib = sim::sample_calibration(&r, 20_000, 31).unwrap();
        let truth = sim::gaussian_truth(2, 1.5).unwrap();
        let truth_counts = sim::sample_counts(&truth, 80_000, 32).unwrap();
        let measured = sim::apply_readout_noise(&r, &truth_counts, 33).unwrap();
        let list = [1, 2, 5, 10];
        let base = UnfoldConfig::ibu(1);
        let scan = uncertainty_scan(&calib, &measured, &list, 40, 0.01, &base, 9).unwrap();
        assert_eq!(scan.rows.len(), 4);
        for (row, &n) in scan.rows.iter().zip(&list) {
            assert_eq!(row.iterations, n);
            assert_eq!(row.estimate.len(), 4);
            for s in 0..4 {
                assert!(row.components.stat_m[s] > 0.0);
                assert!(row.components.stat_r[s] > 0.0);
                assert!(row.components.nonclosure[s] >= 0.0);
                assert!(row.components.systematic_r[s] > 0.0);
                let expected = (row.components.stat_m[s].powi(2)
                    + row.components.stat_r[s].powi(2)
                    + row.components.nonclosure[s].powi(2))
                .sqrt();
                assert!((row.total[s] - expected).abs() < 1e-12);
            }
            let averaged_quadrature = (row.averaged.stat_m.powi(2)
                + row.averaged.stat_r.powi(2)
                + row.averaged.nonclosure.powi(2))
            .sqrt();
            assert!((row.averaged.total - averaged_quadrature).abs() < 1e-12);
            assert!((mean(&row.components.stat_m) - row.averaged.stat_m).abs() < 1e-12);
        }
        assert!(list.contains(&scan.recommended_iterations));

        let again = uncertainty_scan(&calib, &measured, &list, 40, 0.01, &base, 9).unwrap();
        assert_eq!(scan, again);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let pooled = pool
            .install(|| uncertainty_scan(&calib, &measured, &list, 40, 0.01, &base, 9).unwrap());
        assert_eq!(scan, pooled);
    }

    #[test]
    fn uncertainty_scan_rows_share_bootstrap_draws_with_the_standalone_helpers() {
        let nm = NoiseModel::uniform(2, 0.03, 0.06).unwrap();
        let r = response::from_noise_model(&nm);
        let calib = sim::sample_calibration(&r, 10_000, 41).unwrap();
        let nominal = response::build_from_calibration(&calib).unwrap();
        let measured = CountVector::new(vec![30_000, 25_000, 20_000, 25_000]).unwrap();
        let seed = 17;
        let scan =
            uncertainty_scan(&calib, &measured, &[4], 50, 0.01, &UnfoldConfig::ibu(1), seed)
                .unwrap();
        let stat_m =
            bootstrap_measurement(&nominal, &measured, 50, &UnfoldConfig::ibu(4), seed).unwrap();
        let stat_r =
            bootstrap_response(&calib, &measured, 50, &UnfoldConfig::ibu(4), seed).unwrap();
        assert_eq!(scan.rows[0].components.stat_m, stat_m);
        assert_eq!(scan.rows[0].components.stat_r, stat_r);
    }

    #[test]
    fn uncertainty_scan_requires_the_iterative_base_config() {
        let nm = NoiseModel::uniform(1, 0.02, 0.02).unwrap();
        let r = response::from_noise_model(&nm);
        let calib = sim::sample_calibration(&r, 1_000, 1).unwrap();
        let measured = CountVector::new(vec![500, 500]).unwrap();
        assert!(uncertainty_scan(
            &calib,
            &measured,
            &[1, 2],
            10,
            0.0,
            &UnfoldConfig::inversion(),
            0
        )
        .is_err());
    }

    #[test]
    fn uncertainty_scan_accepts_the_minimum_replica_count() {
        let nm = NoiseModel::uniform(1, 0.02, 0.02).unwrap();
        let r = response::from_noise_model(&nm);
        let calib = sim::sample_calibration(&r, 1_000, 1).unwrap();
        let measured = CountVector::new(vec![600, 400]).unwrap();
        let scan = uncertainty_scan(
            &calib,
            &measured,
            &[3],
            2,
            0.0,
            &UnfoldConfig::ibu(1),
            0,
        )
        .unwrap();
        assert_eq!(scan.rows.len(), 1);
        assert_eq!(scan.recommended_iterations, 3);
        for &v in &scan.rows[0].components.systematic_r {
            assert_eq!(v, 0.0);
        }
    }
}
