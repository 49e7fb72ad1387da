//! The three unfolding estimators.
//!
//! Given a measured histogram `m` and a column-stochastic response `R` with
//! `m = R t`, estimate the true histogram `t` by:
//!
//! * [`unfold_inversion`] — solve `R t = m` directly. Unbiased, but the
//!   estimate can oscillate and go negative when `R` is poorly conditioned.
//! * [`unfold_least_squares`] — minimize `|m - R t|^2` over the scaled
//!   simplex `{t >= 0, sum(t) = sum(m)}` by projected gradient descent.
//! * [`unfold_ibu`] — iterative Bayesian unfolding (the Richardson-Lucy
//!   update): repeated Bayes inversions starting from a prior, with the
//!   iteration count acting as a regularization strength.
//!
//! All three preserve the total of `m` (exactly for least squares and IBU,
//! up to rounding for inversion) and IBU additionally preserves
//! non-negativity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{ProbabilityVector, ResponseMatrix};

/// Inversion fails when the 1-norm condition estimate exceeds this.
pub const CONDITION_LIMIT: f64 = 1e12;

/// IBU denominators below this are treated as zero.
pub const ZERO_DENOMINATOR_GUARD: f64 = 1e-30;

/// Power-iteration count used to estimate the least-squares step size.
const POWER_ITERATIONS: usize = 50;

/// Estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Inversion,
    LeastSquares,
    Ibu,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Inversion => "inversion",
            Method::LeastSquares => "ls",
            Method::Ibu => "ibu",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inversion" => Ok(Method::Inversion),
            "ls" => Ok(Method::LeastSquares),
            "ibu" => Ok(Method::Ibu),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?}, expected inversion, ls, or ibu"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Starting distribution for IBU.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Every state gets `total(m) / dim`.
    Uniform,
    /// Explicit strictly positive prior. Only its shape matters: IBU is
    /// invariant under rescaling the prior.
    Custom(ProbabilityVector),
}

/// Estimator configuration. `iterations` applies to IBU, the `ls_*` fields
/// to the least-squares solver, and `prior` to IBU.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldConfig {
    pub method: Method,
    pub iterations: usize,
    pub prior: Prior,
    pub ls_tolerance: f64,
    pub ls_max_iterations: usize,
}

impl UnfoldConfig {
    pub fn inversion() -> Self {
        Self {
            method: Method::Inversion,
            ..Self::ibu(1)
        }
    }

    pub fn least_squares() -> Self {
        Self {
            method: Method::LeastSquares,
            ..Self::ibu(1)
        }
    }

    pub fn ibu(iterations: usize) -> Self {
        Self {
            method: Method::Ibu,
            iterations,
            prior: Prior::Uniform,
            ls_tolerance: 1e-8,
            ls_max_iterations: 100_000,
        }
    }

    pub fn with_prior(mut self, prior: Prior) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Result of one unfolding run. `converged` is false only when an iterative
/// solver stopped at its iteration cap; the estimate is still the best
/// iterate found.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldResult {
    pub estimate: Vec<f64>,
    pub method: Method,
    pub iterations_used: usize,
    /// Euclidean norm of `m - R t` at the returned estimate (least squares).
    pub residual_norm: Option<f64>,
    pub converged: bool,
}

/// Run the estimator selected by `cfg.method`.
pub fn unfold(
    response: &ResponseMatrix,
    measured: &ProbabilityVector,
    cfg: &UnfoldConfig,
) -> Result<UnfoldResult> {
    match cfg.method {
        Method::Inversion => unfold_inversion(response, measured),
        Method::LeastSquares => unfold_least_squares(response, measured, cfg),
        Method::Ibu => unfold_ibu(response, measured, cfg),
    }
}

fn check_dims(response: &ResponseMatrix, measured: &ProbabilityVector) -> Result<()> {
    if response.dim() != measured.len() {
        return Err(Error::DimensionMismatch {
            left: response.dim(),
            right: measured.len(),
        });
    }
    Ok(())
}

/// Solve `R t = m` with a partially pivoted LU decomposition. Fails with
/// [`Error::SingularMatrix`] when the solve breaks down or the 1-norm
/// condition estimate exceeds [`CONDITION_LIMIT`].
pub fn unfold_inversion(
    response: &ResponseMatrix,
    measured: &ProbabilityVector,
) -> Result<UnfoldResult> {
    check_dims(response, measured)?;
    let dim = response.dim();
    let a = DMatrix::from_row_slice(dim, dim, response.data());
    let lu = a.clone().lu();
    let cond = condition_estimate(&a, &lu);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::SingularMatrix { cond });
    }
    let rhs = DVector::from_column_slice(measured.values());
    let solution = lu
        .solve(&rhs)
        .ok_or(Error::SingularMatrix { cond: f64::INFINITY })?;
    Ok(UnfoldResult {
        estimate: solution.iter().copied().collect(),
        method: Method::Inversion,
        iterations_used: 0,
        residual_norm: None,
        converged: true,
    })
}

/// 1-norm condition estimate `|A|_1 * est(|A^-1|_1)`, with the inverse norm
/// estimated by Hager's method (the classic few-solve scheme) so no explicit
/// inverse is formed.
fn condition_estimate(a: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = a.nrows();
    let norm_a = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu_t = a.transpose().lu();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut inv_norm = 0.0;
    for _ in 0..5 {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return f64::INFINITY,
        };
        inv_norm = y.iter().map(|v| v.abs()).sum();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = match lu_t.solve(&xi) {
            Some(z) => z,
            None => return f64::INFINITY,
        };
        let (j, z_max) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty vector");
        if z_max <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    norm_a * inv_norm
}

fn residual_sq(response: &ResponseMatrix, m: &[f64], x: &[f64], scratch: &mut [f64]) -> f64 {
    response.matvec_into(x, scratch);
    let mut acc = 0.0;
    for (r, mv) in scratch.iter().zip(m) {
        let d = mv - r;
        acc += d * d;
    }
    acc
}

/// Euclidean projection of `x` onto `{v >= 0, sum(v) = target}` (sort-based).
fn project_simplex(x: &mut [f64], target: f64) {
    if target <= 0.0 {
        x.fill(0.0);
        return;
    }
    let mut u = x.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - target) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Largest squared singular value of `R`, from 50 power iterations of
/// `R^T R` starting at the uniform unit vector.
fn largest_squared_singular_value(response: &ResponseMatrix) -> f64 {
    let dim = response.dim();
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut rv = vec![0.0; dim];
    let mut rtrv = vec![0.0; dim];
    for _ in 0..POWER_ITERATIONS {
        response.matvec_into(&v, &mut rv);
        response.tmatvec_into(&rv, &mut rtrv);
        let norm = rtrv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 0.0 {
            // Start vector sits in the null space; a column-stochastic matrix
            // still has spectral norm at least its largest column norm.
            return 1.0;
        }
        for (vi, &ri) in v.iter_mut().zip(&rtrv) {
            *vi = ri / norm;
        }
    }
    response.matvec_into(&v, &mut rv);
    rv.iter().map(|x| x * x).sum()
}

/// Minimize `|m - R t|^2` over `{t >= 0, sum(t) = sum(m)}` by projected
/// gradient descent with fixed step `1 / L`, `L` the largest squared singular
/// value of `R`. Stops when the relative objective decrease per step falls
/// below `cfg.ls_tolerance`, or at `cfg.ls_max_iterations` (then
/// `converged = false`). Returns the best iterate observed.
pub fn unfold_least_squares(
    response: &ResponseMatrix,
    measured: &ProbabilityVector,
    cfg: &UnfoldConfig,
) -> Result<UnfoldResult> {
    check_dims(response, measured)?;
    if !(cfg.ls_tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "ls_tolerance must be positive, got {}",
            cfg.ls_tolerance
        )));
    }
    if cfg.ls_max_iterations == 0 {
        return Err(Error::InvalidInput(
            "ls_max_iterations must be at least 1".into(),
        ));
    }
    let dim = response.dim();
    let m = measured.values();
    let target = measured.total();
    let step = 1.0 / largest_squared_singular_value(response).max(f64::MIN_POSITIVE);

    let mut x = vec![target / dim as f64; dim];
    let mut scratch = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut f_prev = residual_sq(response, m, &x, &mut scratch);
    let mut best = x.clone();
    let mut f_best = f_prev;
    let mut iterations_used = 0;
    let mut converged = false;

    for iter in 1..=cfg.ls_max_iterations {
        iterations_used = iter;
        // Gradient of 0.5 |m - R x|^2 is R^T (R x - m).
        response.matvec_into(&x, &mut scratch);
        for (s, mv) in scratch.iter_mut().zip(m) {
            *s -= mv;
        }
        response.tmatvec_into(&scratch, &mut grad);
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= step * gi;
        }
        project_simplex(&mut x, target);

        let f = residual_sq(response, m, &x, &mut scratch);
        if f < f_best {
            f_best = f;
            best.copy_from_slice(&x);
        }
        if f_prev <= f64::MIN_POSITIVE || (f_prev - f) / f_prev < cfg.ls_tolerance {
            converged = true;
            break;
        }
        f_prev = f;
    }

    Ok(UnfoldResult {
        estimate: best,
        method: Method::LeastSquares,
        iterations_used,
        residual_norm: Some(f_best.sqrt()),
        converged,
    })
}

/// Iterative Bayesian unfolding: starting from the prior, each sweep updates
/// `t[i] <- t[i] * sum_j R[j][i] * m[j] / (R t)[j]`. Runs exactly
/// `cfg.iterations` sweeps. The entry total of the estimate equals the total
/// of `m` up to rounding, and entries stay non-negative.
///
/// A denominator `(R t)[j]` below [`ZERO_DENOMINATOR_GUARD`] is skipped when
/// `m[j]` is zero and is a [`Error::ZeroDenominator`] failure otherwise.
pub fn unfold_ibu(
    response: &ResponseMatrix,
    measured: &ProbabilityVector,
    cfg: &UnfoldConfig,
) -> Result<UnfoldResult> {
    check_dims(response, measured)?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidInput(
            "IBU needs at least 1 iteration".into(),
        ));
    }
    let dim = response.dim();
    let m = measured.values();
    let mut t: Vec<f64> = match &cfg.prior {
        Prior::Uniform => vec![measured.total() / dim as f64; dim],
        Prior::Custom(p) => {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.len(),
                });
            }
            if p.values().iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidInput(
                    "custom prior must be strictly positive".into(),
                ));
            }
            p.values().to_vec()
        }
    };

    let mut denom = vec![0.0; dim];
    let mut weights = vec![0.0; dim];
    let mut update = vec![0.0; dim];
    for _ in 0..cfg.iterations {
        response.matvec_into(&t, &mut denom);
        for j in 0..dim {
            weights[j] = if denom[j] < ZERO_DENOMINATOR_GUARD {
                if m[j] == 0.0 {
                    0.0
                } else {
                    return Err(Error::ZeroDenominator { state: j });
                }
            } else {
                m[j] / denom[j]
            };
        }
        response.tmatvec_into(&weights, &mut update);
        for (ti, &ui) in t.iter_mut().zip(&update) {
            *ti *= ui;
        }
    }

    Ok(UnfoldResult {
        estimate: t,
        method: Method::Ibu,
        iterations_used: cfg.iterations,
        residual_norm: None,
        converged: true,
    })
}
