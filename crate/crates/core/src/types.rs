//! Basis-state indexing, histogram containers, and the column-stochastic
//! response matrix with its forward-folding map.
//!
//! Conventions used throughout the crate:
//!
//! * Qubit `q` is bit `q` of the state index, with qubit 0 the least
//!   significant bit. The 5-qubit bitstring "00011" is state index 3.
//! * A response matrix `R` maps true histograms to measured ones,
//!   `measured = R * true`. Rows index the measured state, columns the true
//!   state, and every column sums to 1.
//! * Histograms over `2^n` basis states carry their qubit count `n`. Binned
//!   spectra with an arbitrary number of bins are supported by the same
//!   containers with no qubit structure attached.

use crate::error::{Error, Result};

/// Ingested matrices may deviate from exact column sums of 1 by this much.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-6;

fn infer_n_qubits(len: usize) -> Option<usize> {
    if len >= 2 && len.is_power_of_two() {
        Some(len.trailing_zeros() as usize)
    } else {
        None
    }
}

/// A computational basis state of an `n_qubits` register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateIndex {
    index: usize,
    n_qubits: usize,
}

impl StateIndex {
    pub fn new(index: usize, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits >= usize::BITS as usize {
            return Err(Error::InvalidInput(format!(
                "n_qubits must be between 1 and {}, got {n_qubits}",
                usize::BITS - 1
            )));
        }
        if index >= 1usize << n_qubits {
            return Err(Error::InvalidInput(format!(
                "state index {index} out of range for {n_qubits} qubits"
            )));
        }
        Ok(Self { index, n_qubits })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Value of qubit `q` (bit `q` of the index).
    pub fn bit(&self, qubit: usize) -> Result<bool> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(self.index >> qubit & 1 == 1)
    }

    /// Bitstring with the most significant qubit first: index 3 of a 5-qubit
    /// register prints as "00011".
    pub fn bitstring(&self) -> String {
        (0..self.n_qubits)
            .rev()
            .map(|q| if self.index >> q & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parse a bitstring written most significant qubit first.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        if s.is_empty() || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::InvalidInput(format!("not a bitstring: {s:?}")));
        }
        let mut index = 0usize;
        for b in s.bytes() {
            index = (index << 1) | usize::from(b == b'1');
        }
        Self::new(index, s.len())
    }
}

/// Integer shot counts per basis state or bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    n_qubits: Option<usize>,
}

impl CountVector {
    /// Wrap raw counts. Qubit structure is inferred when the length is a
    /// power of two (at least 2); other lengths are treated as binned spectra.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidInput("empty count vector".into()));
        }
        let n_qubits = infer_n_qubits(counts.len());
        Ok(Self { counts, n_qubits })
    }

    /// Wrap counts over the `2^n_qubits` basis states.
    pub fn with_qubits(counts: Vec<u64>, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || counts.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                left: counts.len(),
                right: 1usize << n_qubits,
            });
        }
        Ok(Self {
            counts,
            n_qubits: Some(n_qubits),
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.n_qubits
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The same histogram with real-valued entries.
    pub fn to_probability(&self) -> ProbabilityVector {
        ProbabilityVector::new(self.counts.iter().map(|&c| c as f64).collect())
            .expect("counts are non-negative")
    }
}

/// Non-negative real weights per basis state or bin. The total is the plain
/// entry sum, so count histograms (total = shots) and normalized
/// distributions (total = 1) share this container.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: Vec<f64>,
    n_qubits: Option<usize>,
    total: f64,
}

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite entry {v} at index {i}"
                )));
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: 0,
                    value: v,
                });
            }
        }
        let total = values.iter().sum();
        let n_qubits = infer_n_qubits(values.len());
        Ok(Self {
            values,
            n_qubits,
            total,
        })
    }

    pub fn with_qubits(values: Vec<f64>, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || values.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: 1usize << n_qubits,
            });
        }
        let v = Self::new(values)?;
        Ok(Self {
            n_qubits: Some(n_qubits),
            ..v
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.n_qubits
    }

    /// Entry sum (the L1 norm, since entries are non-negative).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Rescaled copy with total 1. A zero vector is returned unchanged.
    pub fn normalized(&self) -> ProbabilityVector {
        if self.total <= 0.0 {
            return self.clone();
        }
        let values = self.values.iter().map(|v| v / self.total).collect();
        ProbabilityVector::new(values).expect("rescaling keeps entries non-negative")
    }
}

/// Column-stochastic response matrix: `entry(i, j)` is the probability of
/// measuring state `i` when the true state is `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    /// Row-major storage, `data[i * dim + j]` = row i, column j.
    data: Vec<f64>,
    dim: usize,
    n_qubits: Option<usize>,
}

impl ResponseMatrix {
    /// Validate an ingested raw matrix over qubit basis states. The side must
    /// be a power of two; use [`ResponseMatrix::from_rows_binned`] for spectra
    /// with arbitrary bin counts. Entries must be non-negative and every
    /// column must sum to 1 within [`COLUMN_SUM_TOLERANCE`]. Entries are
    /// stored as given, without renormalization.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Self::from_rows_binned(rows)?;
        if m.n_qubits.is_none() {
            return Err(Error::NotPowerOfTwo { side: m.dim });
        }
        Ok(m)
    }

    /// Validate a raw matrix over plain bins: square, non-negative entries,
    /// columns summing to 1 within [`COLUMN_SUM_TOLERANCE`]. Qubit structure
    /// is inferred when the side is a power of two.
    pub fn from_rows_binned(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix side must be at least 2, got {dim}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::NonSquare {
                    rows: dim,
                    cols: row.len().max(if i == 0 { row.len() } else { dim }),
                });
            }
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry {v} at row {i}, column {j}"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                data.push(v);
            }
        }
        for j in 0..dim {
            let sum: f64 = (0..dim).map(|i| data[i * dim + j]).sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::ColumnSumViolation {
                    col: j,
                    sum,
                    tolerance: COLUMN_SUM_TOLERANCE,
                });
            }
        }
        Ok(Self {
            data,
            dim,
            n_qubits: infer_n_qubits(dim),
        })
    }

    /// Constructor for generated matrices: checks shape and signs, then
    /// normalizes every column to unit sum at machine precision.
    pub(crate) fn from_raw_normalized(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim < 2 || data.len() != dim * dim {
            return Err(Error::NonSquare {
                rows: dim,
                cols: if dim == 0 { 0 } else { data.len() / dim },
            });
        }
        let mut data = data;
        for j in 0..dim {
            let sum: f64 = (0..dim).map(|i| data[i * dim + j]).sum();
            if !(sum > 0.0) {
                return Err(Error::ColumnSumViolation {
                    col: j,
                    sum,
                    tolerance: COLUMN_SUM_TOLERANCE,
                });
            }
            for i in 0..dim {
                data[i * dim + j] /= sum;
            }
        }
        Ok(Self {
            data,
            dim,
            n_qubits: infer_n_qubits(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.n_qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.dim + col]).collect()
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows_vec(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                sums[j] += self.data[i * self.dim + j];
            }
        }
        sums
    }

    /// out[i] = sum_j R[i][j] * x[j], accumulated in ascending j order. Every
    /// routine in the crate that folds through R uses this one code path, so
    /// identical inputs give bitwise identical sums.
    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
    }

    /// out[j] = sum_i R[i][j] * w[i], accumulated in ascending i order.
    pub(crate) fn tmatvec_into(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            let row = self.row(i);
            let wi = w[i];
            for j in 0..self.dim {
                out[j] += row[j] * wi;
            }
        }
    }

    /// Forward-fold a truth vector: `measured = R * t`. The output total
    /// equals the input total up to rounding because columns sum to 1.
    pub fn fold(&self, t: &ProbabilityVector) -> Result<ProbabilityVector> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: t.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.matvec_into(t.values(), &mut out);
        // Rounding can push a product of non-negatives to -0.0; clamp it.
        for v in &mut out {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        ProbabilityVector::new(out)
    }

    /// Matrix product `self * other`, the response of applying `other` first
    /// and `self` second. Columns are renormalized to unit sum.
    pub fn compose(&self, other: &ResponseMatrix) -> Result<ResponseMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let dim = self.dim;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let a = self.data[i * dim + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    data[i * dim + j] += a * other.data[k * dim + j];
                }
            }
        }
        ResponseMatrix::from_raw_normalized(data, dim)
    }
}
