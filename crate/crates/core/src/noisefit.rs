//! Fits of per-qubit flip rates to a measured response matrix.
//!
//! Under independent per-qubit readout flips, every entry of the response
//! matrix is a monomial in the flip and hold probabilities, with exponents
//! counting how many bits flip 0 to 1, hold at 0, flip 1 to 0, or hold at 1
//! between the true and measured state. [`fit_global`] fits one `(p01, p10)`
//! pair shared by all qubits; [`fit_per_qubit`] fits a pair per qubit.
//! Both minimize the summed squared entry deviation over the box
//! `[0, 0.5]` per rate by projected gradient descent with a backtracking
//! line search.

use crate::error::{Error, Result};
use crate::types::{ResponseMatrix, StateIndex};

const RATE_MAX: f64 = 0.5;
const INITIAL_RATE: f64 = 0.05;
const ARMIJO: f64 = 1e-4;
const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_FIT_ITERATIONS: usize = 100_000;
const MIN_BACKTRACK_STEP: f64 = 1e-20;
const RELATIVE_DECREASE_FLOOR: f64 = 1e-15;

/// How many bits flip or hold between a true and a measured state.
/// The four fields always sum to the register size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipExponents {
    /// Bits that are 0 in the true state and 1 in the measured state.
    pub zero_to_one: u32,
    /// Bits that are 0 in both.
    pub zero_hold: u32,
    /// Bits that are 1 in the true state and 0 in the measured state.
    pub one_to_zero: u32,
    /// Bits that are 1 in both.
    pub one_hold: u32,
}

/// Count flip and hold exponents between two states of the same register.
pub fn exponent_counts(true_state: StateIndex, measured_state: StateIndex) -> Result<FlipExponents> {
    if true_state.n_qubits() != measured_state.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: true_state.n_qubits(),
            right: measured_state.n_qubits(),
        });
    }
    let n = true_state.n_qubits();
    let mask = if n == usize::BITS as usize {
        usize::MAX
    } else {
        (1usize << n) - 1
    };
    let t = true_state.index();
    let m = measured_state.index();
    Ok(FlipExponents {
        zero_to_one: (m & !t & mask).count_ones(),
        zero_hold: (!m & !t & mask).count_ones(),
        one_to_zero: (!m & t & mask).count_ones(),
        one_hold: (m & t & mask).count_ones(),
    })
}

/// Fitted flip rates. `p01` and `p10` have length 1 for the global fit and
/// one entry per qubit for the per-qubit fit. `converged` is false only
/// when the optimizer hit its iteration cap while still making progress;
/// the rates are then the best point found.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

fn require_qubits(response: &ResponseMatrix) -> Result<usize> {
    response.n_qubits().ok_or(Error::MissingQubitStructure)
}

/// x^k with the convention x^0 = 1 (also at x = 0).
fn powi(x: f64, k: u32) -> f64 {
    x.powi(k as i32)
}

/// d/dx of x^k, safe at x = 0: returns 0 for k = 0.
fn dpowi(x: f64, k: u32) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * x.powi(k as i32 - 1)
    }
}

/// Summed squared deviation between `response` and the uniform-rate model.
pub fn global_objective(response: &ResponseMatrix, p01: f64, p10: f64) -> Result<f64> {
    let n = require_qubits(response)?;
    let dim = response.dim();
    let mask = (1usize << n) - 1;
    let mut objective = 0.0;
    for j in 0..dim {
        for i in 0..dim {
            let a = (i & !j & mask).count_ones();
            let ah = (!i & !j & mask).count_ones();
            let b = (!i & j & mask).count_ones();
            let bh = (i & j & mask).count_ones();
            let model = powi(p01, a) * powi(1.0 - p01, ah) * powi(p10, b) * powi(1.0 - p10, bh);
            let d = model - response.entry(i, j);
            objective += d * d;
        }
    }
    Ok(objective)
}

/// Analytic gradient of [`global_objective`] with respect to `(p01, p10)`.
pub fn global_gradient(response: &ResponseMatrix, p01: f64, p10: f64) -> Result<[f64; 2]> {
    let n = require_qubits(response)?;
    let dim = response.dim();
    let mask = (1usize << n) - 1;
    let mut g = [0.0, 0.0];
    for j in 0..dim {
        for i in 0..dim {
            let a = (i & !j & mask).count_ones();
            let ah = (!i & !j & mask).count_ones();
            let b = (!i & j & mask).count_ones();
            let bh = (i & j & mask).count_ones();
            let f01 = powi(p01, a) * powi(1.0 - p01, ah);
            let f10 = powi(p10, b) * powi(1.0 - p10, bh);
            let model = f01 * f10;
            let d = model - response.entry(i, j);
            let df01 = dpowi(p01, a) * powi(1.0 - p01, ah) - powi(p01, a) * dpowi(1.0 - p01, ah);
            let df10 = dpowi(p10, b) * powi(1.0 - p10, bh) - powi(p10, b) * dpowi(1.0 - p10, bh);
            g[0] += 2.0 * d * df01 * f10;
            g[1] += 2.0 * d * f01 * df10;
        }
    }
    Ok(g)
}

/// Summed squared deviation between `response` and a per-qubit model.
pub fn per_qubit_objective(response: &ResponseMatrix, p01: &[f64], p10: &[f64]) -> Result<f64> {
    let n = require_qubits(response)?;
    if p01.len() != n || p10.len() != n {
        return Err(Error::DimensionMismatch {
            left: p01.len().max(p10.len()),
            right: n,
        });
    }
    let dim = response.dim();
    let mut objective = 0.0;
    for j in 0..dim {
        for i in 0..dim {
            let mut model = 1.0;
            for q in 0..n {
                model *= qubit_factor(i, j, q, p01[q], p10[q]);
            }
            let d = model - response.entry(i, j);
            objective += d * d;
        }
    }
    Ok(objective)
}

fn qubit_factor(i: usize, j: usize, q: usize, p01: f64, p10: f64) -> f64 {
    match (j >> q & 1, i >> q & 1) {
        (0, 0) => 1.0 - p01,
        (0, 1) => p01,
        (1, 0) => p10,
        (1, 1) => 1.0 - p10,
        _ => unreachable!(),
    }
}

/// Sign of d(factor)/d(rate) for qubit `q`: +1 when the factor is the rate
/// itself, -1 when it is the complement, 0 when the factor involves the other
/// rate. `flip_from_zero` selects p01 (true) or p10 (false).
fn qubit_factor_sign(i: usize, j: usize, q: usize, flip_from_zero: bool) -> f64 {
    match (j >> q & 1, i >> q & 1, flip_from_zero) {
        (0, 1, true) => 1.0,
        (0, 0, true) => -1.0,
        (1, 0, false) => 1.0,
        (1, 1, false) => -1.0,
        _ => 0.0,
    }
}

/// Analytic gradient of [`per_qubit_objective`], laid out as the `p01`
/// derivatives for qubits `0..n` followed by the `p10` derivatives.
pub fn per_qubit_gradient(response: &ResponseMatrix, p01: &[f64], p10: &[f64]) -> Result<Vec<f64>> {
    let n = require_qubits(response)?;
    let dim = response.dim();
    let mut g = vec![0.0; 2 * n];
    for j in 0..dim {
        for i in 0..dim {
            let mut model = 1.0;
            for q in 0..n {
                model *= qubit_factor(i, j, q, p01[q], p10[q]);
            }
            let d = model - response.entry(i, j);
            for q in 0..n {
                // Product over all qubits but q.
                let mut rest = 1.0;
                for qq in 0..n {
                    if qq != q {
                        rest *= qubit_factor(i, j, qq, p01[qq], p10[qq]);
                    }
                }
                let s01 = qubit_factor_sign(i, j, q, true);
                if s01 != 0.0 {
                    g[q] += 2.0 * d * s01 * rest;
                }
                let s10 = qubit_factor_sign(i, j, q, false);
                if s10 != 0.0 {
                    g[n + q] += 2.0 * d * s10 * rest;
                }
            }
        }
    }
    Ok(g)
}

/// Projected gradient descent over the box `[0, RATE_MAX]^dim` with halving
/// line search (Armijo condition). Converged means the projected-gradient
/// norm fell below the tolerance or the line search could no longer buy any
/// decrease at machine precision; only the iteration cap returns
/// `converged = false`.
fn box_projected_descent(
    mut x: Vec<f64>,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, f64, bool) {
    let mut f = objective(&x);
    let mut g = gradient(&x);
    for _ in 0..MAX_FIT_ITERATIONS {
        let stationarity = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| (xi - (xi - gi).clamp(0.0, RATE_MAX)).abs())
            .fold(0.0, f64::max);
        if stationarity < GRADIENT_TOLERANCE {
            return (x, f, true);
        }
        let mut step = 1.0;
        let mut accepted = false;
        let f_before = f;
        while step >= MIN_BACKTRACK_STEP {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(&xi, &gi)| (xi - step * gi).clamp(0.0, RATE_MAX))
                .collect();
            let fc = objective(&candidate);
            let decrease: f64 = x
                .iter()
                .zip(&candidate)
                .zip(&g)
                .map(|((&xi, &ci), &gi)| gi * (xi - ci))
                .sum();
            if fc <= f - ARMIJO * decrease {
                x = candidate;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // An accepted step that bought less than a few ulps of objective
        // has hit the double-precision floor; during genuine convergence
        // each step removes a fixed fraction of the objective instead.
        if accepted && f_before - f <= RELATIVE_DECREASE_FLOOR * f_before.abs() {
            return (x, f, true);
        }
        if !accepted {
            // No step of any size improves the objective: the iterate sits
            // at the floor of what double precision can resolve. For this
            // smooth objective that is convergence, even when the gradient
            // tolerance is out of reach (typical once sampling noise gives
            // the minimum a positive objective value).
            return (x, f, true);
        }
        g = gradient(&x);
    }
    (x, f, false)
}

/// Fit one shared `(p01, p10)` pair to all entries of `response`.
pub fn fit_global(response: &ResponseMatrix) -> Result<FitResult> {
    require_qubits(response)?;
    let objective = |p: &[f64]| {
        global_objective(response, p[0], p[1]).expect("qubit structure checked above")
    };
    let gradient = |p: &[f64]| {
        global_gradient(response, p[0], p[1])
            .expect("qubit structure checked above")
            .to_vec()
    };
    let (x, f, converged) =
        box_projected_descent(vec![INITIAL_RATE, INITIAL_RATE], objective, gradient);
    Ok(FitResult {
        p01: vec![x[0]],
        p10: vec![x[1]],
        objective: f,
        converged,
    })
}

/// Fit an independent `(p01, p10)` pair per qubit.
pub fn fit_per_qubit(response: &ResponseMatrix) -> Result<FitResult> {
    let n = require_qubits(response)?;
    let objective = |p: &[f64]| {
        per_qubit_objective(response, &p[..n], &p[n..]).expect("checked dimensions")
    };
    let gradient =
        |p: &[f64]| per_qubit_gradient(response, &p[..n], &p[n..]).expect("checked dimensions");
    let (x, f, converged) =
        box_projected_descent(vec![INITIAL_RATE; 2 * n], objective, gradient);
    Ok(FitResult {
        p01: x[..n].to_vec(),
        p10: x[n..].to_vec(),
        objective: f,
        converged,
    })
}

/// Transition probabilities of qubit `q` conditioned on the configuration of
/// the other qubits. For every context `c` (the other qubits' bits packed in
/// ascending position order), the first list holds the probability of
/// reading qubit `q` as 1 when the register truly holds the context with
/// qubit `q` at 0, `R[s | bit q, s]`; the second the reverse flip,
/// `R[s without bit q, s | bit q]`. Under independent per-qubit noise each
/// entry factorizes into the qubit's flip rate times the other qubits' hold
/// probabilities, so variation beyond that form signals correlated readout
/// errors.
pub fn conditioned_transitions(
    response: &ResponseMatrix,
    qubit: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = require_qubits(response)?;
    if qubit >= n {
        return Err(Error::QubitOutOfRange {
            qubit,
            n_qubits: n,
        });
    }
    let contexts = 1usize << (n - 1);
    let mut p01_list = Vec::with_capacity(contexts);
    let mut p10_list = Vec::with_capacity(contexts);
    let low_mask = (1usize << qubit) - 1;
    for c in 0..contexts {
        let s0 = ((c & !low_mask) << 1) | (c & low_mask);
        let s1 = s0 | (1usize << qubit);
        p01_list.push(response.entry(s1, s0));
        p10_list.push(response.entry(s0, s1));
    }
    Ok((p01_list, p10_list))
}
