//! Serializable file formats for matrices, spectra, counts, calibration
//! data, noise models, and fit results.
//!
//! Every document carries a `"schema"` field, currently [`SCHEMA_VERSION`];
//! readers reject other versions up front so stale files fail loudly
//! instead of being misread. Optional fields are omitted from the output
//! when absent (`n_qubits` is only written for registers of qubits, not for
//! plain binned spectra).

use crate::error::{Error, Result};
use crate::response::{CalibrationData, NoiseModel};
use crate::types::{CountVector, ProbabilityVector, ResponseMatrix};
use crate::unfold::UnfoldResult;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Version tag written into and expected from every document.
pub const SCHEMA_VERSION: &str = "v1";

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

fn check_schema(schema: &str) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported schema {schema:?}, expected {SCHEMA_VERSION:?}"
        )));
    }
    Ok(())
}

/// A response matrix as a list of rows. `rows[i][j]` is the probability of
/// measuring state `i` when the true state is `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_response(matrix: &ResponseMatrix) -> Self {
        Self {
            schema: default_schema(),
            n_qubits: matrix.n_qubits(),
            rows: matrix.rows_vec(),
        }
    }

    pub fn to_response(&self) -> Result<ResponseMatrix> {
        check_schema(&self.schema)?;
        match self.n_qubits {
            Some(n) => {
                if n == 0 || usize::checked_shl(1, n as u32).map_or(true, |d| d != self.rows.len())
                {
                    return Err(Error::DimensionMismatch {
                        left: self.rows.len(),
                        right: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
                    });
                }
                ResponseMatrix::from_rows(&self.rows)
            }
            None => ResponseMatrix::from_rows_binned(&self.rows),
        }
    }
}

/// A real-valued spectrum. Plain spectra carry only `values`; unfolding
/// outputs also record how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

impl VectorFile {
    pub fn from_probability(vector: &ProbabilityVector) -> Self {
        Self {
            schema: default_schema(),
            n_qubits: vector.n_qubits(),
            values: vector.values().to_vec(),
            method: None,
            iterations_used: None,
            residual_norm: None,
            converged: None,
        }
    }

    /// Wrap an unfolding output, keeping the estimator metadata next to the
    /// estimate itself.
    pub fn from_unfold_result(result: &UnfoldResult, n_qubits: Option<usize>) -> Self {
        Self {
            schema: default_schema(),
            n_qubits,
            values: result.estimate.clone(),
            method: Some(result.method.name().to_string()),
            iterations_used: Some(result.iterations_used),
            residual_norm: result.residual_norm,
            converged: Some(result.converged),
        }
    }

    pub fn to_probability(&self) -> Result<ProbabilityVector> {
        check_schema(&self.schema)?;
        match self.n_qubits {
            Some(n) => ProbabilityVector::with_qubits(self.values.clone(), n),
            None => ProbabilityVector::new(self.values.clone()),
        }
    }
}

/// An integer count histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    pub counts: Vec<u64>,
}

impl CountsFile {
    pub fn from_counts(counts: &CountVector) -> Self {
        Self {
            schema: default_schema(),
            n_qubits: counts.n_qubits(),
            counts: counts.counts().to_vec(),
        }
    }

    pub fn to_counts(&self) -> Result<CountVector> {
        check_schema(&self.schema)?;
        match self.n_qubits {
            Some(n) => CountVector::with_qubits(self.counts.clone(), n),
            None => CountVector::new(self.counts.clone()),
        }
    }
}

/// Raw calibration histograms: `histograms[j][i]` counts how often basis
/// state `i` was measured while state `j` was prepared, each row summing to
/// `shots_per_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub n_qubits: usize,
    pub shots_per_state: u64,
    pub histograms: Vec<Vec<u64>>,
}

impl CalibrationFile {
    pub fn from_calibration(calibration: &CalibrationData) -> Self {
        Self {
            schema: default_schema(),
            n_qubits: calibration.n_qubits(),
            shots_per_state: calibration.shots_per_state(),
            histograms: calibration.histograms().to_vec(),
        }
    }

    pub fn to_calibration(&self) -> Result<CalibrationData> {
        check_schema(&self.schema)?;
        CalibrationData::new(self.n_qubits, self.shots_per_state, self.histograms.clone())
    }
}

/// Per-qubit flip rates: `p01[q]` is the probability of reading qubit `q`
/// as 1 when it is 0, `p10[q]` the reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
}

impl NoiseModelFile {
    pub fn from_noise_model(model: &NoiseModel) -> Self {
        Self {
            schema: default_schema(),
            p01: model.p01().to_vec(),
            p10: model.p10().to_vec(),
        }
    }

    pub fn to_noise_model(&self) -> Result<NoiseModel> {
        check_schema(&self.schema)?;
        NoiseModel::new(self.p01.clone(), self.p10.clone())
    }
}

/// One fitted rate set with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

impl From<&crate::noisefit::FitResult> for FitEntry {
    fn from(fit: &crate::noisefit::FitResult) -> Self {
        Self {
            p01: fit.p01.clone(),
            p10: fit.p10.clone(),
            objective: fit.objective,
            converged: fit.converged,
        }
    }
}

/// Context-resolved transition probabilities of one qubit; index `c` packs
/// the other qubits' bits in ascending position order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedEntry {
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
}

/// Full output of a noise-model fit: the global and per-qubit rate fits
/// plus, per qubit (keyed by its decimal index), the context-resolved
/// transition probabilities read directly from the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub global: FitEntry,
    pub per_qubit: FitEntry,
    pub conditioned: BTreeMap<String, ConditionedEntry>,
}

impl FitFile {
    pub fn validate(&self) -> Result<()> {
        check_schema(&self.schema)
    }
}
