//! Response-matrix constructors: measured calibration histograms, per-qubit
//! flip-rate models, and two analytic families used for closure studies.

use crate::error::{Error, Result};
use crate::types::ResponseMatrix;

/// Calibration histograms: for every true basis state, the measured counts
/// over all `2^n` outcomes from `shots_per_state` preparations of that state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationData {
    n_qubits: usize,
    shots_per_state: u64,
    /// `histograms[j][i]` = times state `i` was measured when `j` was prepared.
    histograms: Vec<Vec<u64>>,
}

impl CalibrationData {
    pub fn new(n_qubits: usize, shots_per_state: u64, histograms: Vec<Vec<u64>>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidInput("n_qubits must be at least 1".into()));
        }
        if shots_per_state == 0 {
            return Err(Error::InvalidInput(
                "shots_per_state must be at least 1".into(),
            ));
        }
        let dim = 1usize << n_qubits;
        if histograms.len() != dim {
            return Err(Error::DimensionMismatch {
                left: histograms.len(),
                right: dim,
            });
        }
        for (state, h) in histograms.iter().enumerate() {
            if h.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: h.len(),
                    right: dim,
                });
            }
            let sum: u64 = h.iter().sum();
            if sum != shots_per_state {
                return Err(Error::ShotMismatch {
                    state,
                    sum,
                    expected: shots_per_state,
                });
            }
        }
        Ok(Self {
            n_qubits,
            shots_per_state,
            histograms,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots_per_state(&self) -> u64 {
        self.shots_per_state
    }

    pub fn histograms(&self) -> &[Vec<u64>] {
        &self.histograms
    }
}

/// Independent per-qubit readout flip rates: `p01[q]` is the probability of
/// reading 1 when qubit `q` holds 0, and `p10[q]` the reverse flip.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    p01: Vec<f64>,
    p10: Vec<f64>,
}

impl NoiseModel {
    pub fn new(p01: Vec<f64>, p10: Vec<f64>) -> Result<Self> {
        if p01.is_empty() || p01.len() != p10.len() {
            return Err(Error::DimensionMismatch {
                left: p01.len(),
                right: p10.len(),
            });
        }
        for &p in p01.iter().chain(p10.iter()) {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "flip rate {p} outside [0, 1]"
                )));
            }
        }
        Ok(Self { p01, p10 })
    }

    /// The same flip rates on every qubit.
    pub fn uniform(n_qubits: usize, p01: f64, p10: f64) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidInput("n_qubits must be at least 1".into()));
        }
        Self::new(vec![p01; n_qubits], vec![p10; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.p01.len()
    }

    pub fn p01(&self) -> &[f64] {
        &self.p01
    }

    pub fn p10(&self) -> &[f64] {
        &self.p10
    }
}

/// Response matrix from measured calibration histograms: column `j` is
/// histogram `j` divided by its shot count, renormalized to unit sum at
/// machine precision.
pub fn build_from_calibration(calibration: &CalibrationData) -> Result<ResponseMatrix> {
    let dim = 1usize << calibration.n_qubits();
    let shots = calibration.shots_per_state() as f64;
    let mut data = vec![0.0; dim * dim];
    for (j, h) in calibration.histograms().iter().enumerate() {
        for (i, &c) in h.iter().enumerate() {
            data[i * dim + j] = c as f64 / shots;
        }
    }
    ResponseMatrix::from_raw_normalized(data, dim)
}

/// Tensor-product response of independent per-qubit flips. Entry
/// `(measured, true)` is the product over qubits of the per-qubit transition
/// probability: `p01` / `1 - p01` when the true bit is 0 and the measured bit
/// is 1 / 0, and `p10` / `1 - p10` when the true bit is 1 and the measured
/// bit is 0 / 1.
pub fn from_noise_model(model: &NoiseModel) -> ResponseMatrix {
    let n = model.n_qubits();
    let dim = 1usize << n;
    let mut data = vec![0.0; dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            let mut p = 1.0;
            for q in 0..n {
                let true_bit = j >> q & 1;
                let measured_bit = i >> q & 1;
                p *= match (true_bit, measured_bit) {
                    (0, 0) => 1.0 - model.p01()[q],
                    (0, 1) => model.p01()[q],
                    (1, 0) => model.p10()[q],
                    (1, 1) => 1.0 - model.p10()[q],
                    _ => unreachable!(),
                };
            }
            data[i * dim + j] = p;
        }
    }
    ResponseMatrix::from_raw_normalized(data, dim).expect("columns of a tensor product sum to 1")
}

/// Square migration matrix with nearest-neighbour bin leakage `eps`:
/// `1 - eps` on the two end-bin diagonals, `1 - 2 eps` on interior diagonals,
/// and `eps` on the sub- and super-diagonals. Valid for any `n_bins >= 2`
/// and `0 < eps < 0.5`.
pub fn tridiagonal(n_bins: usize, eps: f64) -> Result<ResponseMatrix> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if n_bins < 2 {
        return Err(Error::InvalidInput(format!(
            "n_bins must be at least 2, got {n_bins}"
        )));
    }
    let mut data = vec![0.0; n_bins * n_bins];
    for j in 0..n_bins {
        let diag = if j == 0 || j == n_bins - 1 {
            1.0 - eps
        } else {
            1.0 - 2.0 * eps
        };
        data[j * n_bins + j] = diag;
        if j > 0 {
            data[(j - 1) * n_bins + j] = eps;
        }
        if j + 1 < n_bins {
            data[(j + 1) * n_bins + j] = eps;
        }
    }
    ResponseMatrix::from_raw_normalized(data, n_bins)
}

/// Symmetric two-state response `[[1 - eps, eps], [eps, 1 - eps]]`, the
/// smallest tridiagonal migration matrix. Its exact inverse is
/// `[[1 - eps, -eps], [-eps, 1 - eps]] / (1 - 2 eps)`, so the largest
/// inverse entry grows as `(1 - eps) / (1 - 2 eps)`.
pub fn two_level(eps: f64) -> Result<ResponseMatrix> {
    tridiagonal(2, eps)
}
