//! The linear problem: hard-margin solver, analytic constructions, margin
//! accounting, test-loss estimation, and the signal/noise diagnostics.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{gram_deviation, min_norm_solve};
use crate::rng;
use crate::synthdata::{Dataset, LinearSpec};

/// A unit-norm linear classifier `x -> sign(w^T x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    w: Array1<f64>,
}

impl LinearModel {
    /// Normalizes `w` to unit norm; rejects the zero vector.
    pub fn new(mut w: Array1<f64>) -> Result<Self> {
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("linear model weight must be nonzero and finite"));
        }
        w.mapv_inplace(|v| v / norm);
        Ok(LinearModel { w })
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.w
    }

    pub fn predict_score(&self, x: ndarray::ArrayView1<f64>) -> f64 {
        self.w.dot(&x)
    }
}

/// Margin bookkeeping for one model on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// `y_j f(x_j)` per sample, for the unit-norm model.
    pub per_sample: Vec<f64>,
    /// `gamma = min_j y_j f(x_j)`.
    pub min_margin: f64,
    /// Margin of the unit-norm model (`gamma / ||w||^h` in general).
    pub normalized_margin: f64,
    /// Best available value of `gamma*(S)`, when one is known.
    pub max_margin_estimate: Option<f64>,
    /// `normalized_margin / gamma*(S)`, when the estimate exists.
    pub optimality_ratio: Option<f64>,
    /// Set when the model had zero norm and margins are reported as 0.
    pub zero_norm: bool,
}

/// Signal/noise split of a linear model: `u` along `mu`, `v` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecomposition {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// `q = (mu^T w) / ||v||`, tagged infinite when `v = 0`.
    pub q: QRatio,
}

/// A ratio that may be exactly infinite (never produced by a float division).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QRatio {
    Finite(f64),
    Infinite,
}

impl QRatio {
    pub fn finite(self) -> Option<f64> {
        match self {
            QRatio::Finite(v) => Some(v),
            QRatio::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, QRatio::Infinite)
    }
}

/// Splits `w = u + v` with `u = mu mu^T w`.
pub fn decompose(model: &LinearModel, spec: &LinearSpec) -> LinearDecomposition {
    let w = model.weights();
    let w_mu = spec.mu.dot(w);
    let u = &spec.mu * w_mu;
    let v = w - &u;
    let v_norm = v.dot(&v).sqrt();
    let q = if v_norm == 0.0 { QRatio::Infinite } else { QRatio::Finite(w_mu / v_norm) };
    LinearDecomposition { u, v, q }
}

/// Options for the dual coordinate-ascent solver.
#[derive(Debug, Clone)]
pub struct SolverOpts {
    /// Relative duality-gap target.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seed for the per-epoch coordinate permutations.
    pub seed: u64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts { tol: 1e-8, max_epochs: 200_000, seed: 0 }
    }
}

/// Output of the hard-margin solver: the unit model, its margins, and the
/// dual certificate.
#[derive(Debug, Clone)]
pub struct MaxMarginSolution {
    pub model: LinearModel,
    pub report: MarginReport,
    /// Raw (un-normalized) solution of `min ||w||^2 : y_j x_j^T w >= 1`.
    pub w_raw: Array1<f64>,
    /// Dual variables, one per sample.
    pub alpha: Array1<f64>,
    /// Certified relative duality gap.
    pub gap: f64,
    pub epochs: usize,
}

impl MaxMarginSolution {
    /// `gamma*(S) = 1 / ||w_raw||`.
    pub fn gamma_star(&self) -> f64 {
        self.report.max_margin_estimate.expect("solver always sets the estimate")
    }

    /// Span coefficients `a` with `w_raw = X a` (KKT representation).
    pub fn span_coefficients(&self, ds: &Dataset) -> Array1<f64> {
        Array1::from_shape_fn(ds.n(), |j| self.alpha[j] * ds.y[j])
    }
}

/// Solves the hard-margin problem `min ||w||^2 : y_j x_j^T w >= 1` by dual
/// coordinate ascent over `alpha >= 0`, with random-permutation epochs.
///
/// Separability holds almost surely when `d > n`. The run is certified by the
/// relative duality gap between the dual objective and the primal value of
/// the feasibly rescaled iterate.
pub fn solve_max_margin(ds: &Dataset) -> Result<MaxMarginSolution> {
    solve_max_margin_with(ds, &SolverOpts::default())
}

pub fn solve_max_margin_with(ds: &Dataset, opts: &SolverOpts) -> Result<MaxMarginSolution> {
    let n = ds.n();
    if n == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    // Q_{jk} = y_j y_k x_j^T x_k
    let mut q = ds.x.t().dot(&ds.x);
    for j in 0..n {
        for k in 0..n {
            q[[j, k]] *= ds.y[j] * ds.y[k];
        }
    }
    let mut alpha = Array1::<f64>::zeros(n);
    let mut margins = Array1::<f64>::zeros(n); // margins = Q alpha
    let mut perm: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::substream(rng::derive_seed(opts.seed, rng::tags::SOLVER), 0);
    let mut best_gap = f64::INFINITY;
    let mut epochs_done = 0;

    for epoch in 0..opts.max_epochs {
        epochs_done = epoch + 1;
        for i in (1..n).rev() {
            let j = shuffle_rng.random_range(0..=i);
            perm.swap(i, j);
        }
        for &j in &perm {
            let qjj = q[[j, j]];
            if qjj <= 0.0 {
                continue;
            }
            let new = (alpha[j] + (1.0 - margins[j]) / qjj).max(0.0);
            let delta = new - alpha[j];
            if delta != 0.0 {
                alpha[j] = new;
                for k in 0..n {
                    margins[k] += delta * q[[k, j]];
                }
            }
        }
        if epoch % 8 == 7 || epoch + 1 == opts.max_epochs {
            let quad = alpha.dot(&margins);
            let dual = alpha.sum() - 0.5 * quad;
            let min_m = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_m > 0.0 && dual > 0.0 {
                let primal = 0.5 * quad / (min_m * min_m);
                let gap = (primal - dual) / dual;
                best_gap = best_gap.min(gap);
                if gap <= opts.tol {
                    return Ok(finish_solution(ds, alpha, margins, gap, epochs_done));
                }
            }
        }
    }
    Err(Error::SolverStalled { gap: best_gap, epochs: epochs_done })
}

fn finish_solution(
    ds: &Dataset,
    alpha: Array1<f64>,
    margins: Array1<f64>,
    gap: f64,
    epochs: usize,
) -> MaxMarginSolution {
    let n = ds.n();
    let mut w_raw = Array1::<f64>::zeros(ds.d());
    for j in 0..n {
        let c = alpha[j] * ds.y[j];
        if c != 0.0 {
            w_raw.scaled_add(c, &ds.x.column(j));
        }
    }
    let w_norm = w_raw.dot(&w_raw).sqrt();
    let min_m = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let gamma_star = 1.0 / w_norm;
    let normalized = min_m / w_norm;
    let per_sample: Vec<f64> = margins.iter().map(|m| m / w_norm).collect();
    let model = LinearModel::new(w_raw.clone()).expect("solver weight is nonzero");
    let report = MarginReport {
        per_sample,
        min_margin: normalized,
        normalized_margin: normalized,
        max_margin_estimate: Some(gamma_star),
        optimality_ratio: Some(normalized / gamma_star),
        zero_norm: false,
    };
    MaxMarginSolution { model, report, w_raw, alpha, gap, epochs }
}

/// Margins of an arbitrary unit model on a dataset.
pub fn margin_report(model: &LinearModel, ds: &Dataset) -> MarginReport {
    let per_sample: Vec<f64> =
        (0..ds.n()).map(|j| ds.y[j] * model.predict_score(ds.x.column(j))).collect();
    let min_margin = per_sample.iter().cloned().fold(f64::INFINITY, f64::min);
    MarginReport {
        per_sample,
        min_margin,
        normalized_margin: min_margin,
        max_margin_estimate: None,
        optimality_ratio: None,
        zero_norm: false,
    }
}

/// The good solution `w_g = mu`.
pub fn construct_good(spec: &LinearSpec) -> Result<LinearModel> {
    LinearModel::new(spec.mu.clone())
}

/// The bad overfitting solution: unit-normalized minimum-norm interpolator of
/// the noise block, `xi_j^T w_b = y_j` for all `j`.
pub fn construct_bad(ds: &Dataset, spec: &LinearSpec) -> Result<LinearModel> {
    if ds.d() != spec.d() {
        return Err(Error::invalid("dataset/spec dimension mismatch"));
    }
    let v = min_norm_solve(ds.xi.view(), ds.y.view())?;
    LinearModel::new(v)
}

/// Normalized combination `alpha w_g + beta w_b` (requires `a^2 + b^2 = 1`).
pub fn construct_mixture(
    alpha: f64,
    beta: f64,
    good: &LinearModel,
    bad: &LinearModel,
) -> Result<LinearModel> {
    if (alpha * alpha + beta * beta - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("mixture weights must satisfy alpha^2 + beta^2 = 1"));
    }
    let w = good.weights() * alpha + bad.weights() * beta;
    LinearModel::new(w).map_err(|_| Error::invalid("degenerate mixture: alpha w_g + beta w_b = 0"))
}

/// Maximizer of `alpha gamma_g + beta gamma_b` over `alpha^2 + beta^2 <= 1`:
/// `alpha/beta = gamma_g/gamma_b`, value `sqrt(gamma_g^2 + gamma_b^2)`.
pub fn optimal_mixture(gamma_g: f64, gamma_b: f64) -> Result<(f64, f64, f64)> {
    if gamma_g < 0.0 || gamma_b < 0.0 {
        return Err(Error::invalid("mixture margins must be non-negative"));
    }
    let norm = (gamma_g * gamma_g + gamma_b * gamma_b).sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("both margins zero"));
    }
    Ok((gamma_g / norm, gamma_b / norm, norm))
}

/// Empirical and analytic test error of a linear model.
#[derive(Debug, Clone, Copy)]
pub struct TestError {
    pub empirical: f64,
    /// `2 exp(-q^2 / (8 sigma^2)) + exp(-d/8)`.
    pub analytic_bound: f64,
}

/// Monte-Carlo 0/1 test error on fresh draws plus the analytic tail bound.
///
/// The empirical part samples the exact law of the prediction margin
/// `w^T mu + ||v|| sqrt(d-1) sigma U`, where `U` is the first coordinate of a
/// uniform unit vector in `d - 1` dimensions; this is the distribution of
/// `y w^T x` for `x` drawn fresh, marginalized over the noise sphere.
pub fn test_error(model: &LinearModel, spec: &LinearSpec, mc_samples: usize, seed: u64) -> Result<TestError> {
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be >= 1"));
    }
    let dec = decompose(model, spec);
    let w_mu = spec.mu.dot(model.weights());
    let v_norm = dec.v.dot(&dec.v).sqrt();
    let d = spec.d();
    let analytic = match dec.q {
        QRatio::Infinite => (-(d as f64) / 8.0).exp(),
        QRatio::Finite(q) => {
            2.0 * (-(q * q) / (8.0 * spec.sigma * spec.sigma)).exp() + (-(d as f64) / 8.0).exp()
        }
    };
    let radius = ((d - 1) as f64).sqrt() * spec.sigma;
    let mc_seed = rng::derive_seed(seed, rng::tags::MC_TEST);
    let mut errors = 0.0_f64;
    for k in 0..mc_samples {
        let mut r = rng::substream(mc_seed, k as u64);
        let margin = w_mu + v_norm * radius * sphere_coordinate(&mut r, d - 1);
        if margin < 0.0 {
            errors += 1.0;
        } else if margin == 0.0 {
            errors += 0.5;
        }
    }
    Ok(TestError { empirical: errors / mc_samples as f64, analytic_bound: analytic })
}

/// First coordinate of a uniform unit vector in `dim` dimensions:
/// `g / sqrt(g^2 + s)` with `g` standard normal and `s ~ chi^2(dim - 1)`.
pub(crate) fn sphere_coordinate<R: Rng>(r: &mut R, dim: usize) -> f64 {
    let g: f64 = StandardNormal.sample(r);
    let s = if dim >= 2 { ChiSquared::new((dim - 1) as f64).unwrap().sample(r) } else { 0.0 };
    g / (g * g + s).sqrt()
}

/// Raw per-regime ratios from the main technical lemma: `q / sqrt(kappa)` and
/// `min_j y_j v^T xi_j / (w^T mu)`.
#[derive(Debug, Clone)]
pub struct TechLemmaDiagnostics {
    pub w_dot_mu: f64,
    pub v_norm: f64,
    /// `None` in the construction regime (`w^T mu <= 0`); tagged infinite when `v = 0`.
    pub q_over_sqrt_kappa: Option<QRatio>,
    /// `min_j y_j v^T xi_j / (w^T mu)`; `None` in the construction regime.
    pub min_noise_over_signal: Option<f64>,
}

pub fn tech_lemma_diagnostics(
    model: &LinearModel,
    ds: &Dataset,
    spec: &LinearSpec,
) -> TechLemmaDiagnostics {
    let dec = decompose(model, spec);
    let w_mu = spec.mu.dot(model.weights());
    let v_norm = dec.v.dot(&dec.v).sqrt();
    if w_mu <= 0.0 {
        return TechLemmaDiagnostics {
            w_dot_mu: w_mu,
            v_norm,
            q_over_sqrt_kappa: None,
            min_noise_over_signal: None,
        };
    }
    let sqrt_kappa = spec.kappa().sqrt();
    let q_ratio = match dec.q {
        QRatio::Infinite => QRatio::Infinite,
        QRatio::Finite(q) => QRatio::Finite(q / sqrt_kappa),
    };
    let min_noise = (0..ds.n())
        .map(|j| ds.y[j] * dec.v.dot(&ds.xi.column(j)))
        .fold(f64::INFINITY, f64::min);
    TechLemmaDiagnostics {
        w_dot_mu: w_mu,
        v_norm,
        q_over_sqrt_kappa: Some(q_ratio),
        min_noise_over_signal: Some(min_noise / w_mu),
    }
}

/// Span-condition report: the lower bound on `mu^T w` implied by the average
/// margin, and the resulting loss bound.
#[derive(Debug, Clone, Copy)]
pub struct SpanBound {
    pub mu_dot_lower_bound: f64,
    pub mu_dot_measured: f64,
    /// Average normalized margin `E_j y_j f_w(x_j) / ||w||`.
    pub avg_margin: f64,
    /// `2 exp(-min(1, 1/kappa^2) avg_margin^2 / (8 sigma^2))`.
    pub loss_bound: f64,
    /// Measured Gram deviation used as `delta` in the bound.
    pub gram_deviation: f64,
}

/// Evaluates the span-condition bound for `w = X a`.
///
/// `w` and `a` are both supplied so that the representation can be checked:
/// the bound is only valid for models in the span of the data.
pub fn span_bound(
    ds: &Dataset,
    spec: &LinearSpec,
    w: &Array1<f64>,
    coeffs: &Array1<f64>,
) -> Result<SpanBound> {
    if coeffs.len() != ds.n() || w.len() != ds.d() {
        return Err(Error::invalid("span_bound: shape mismatch"));
    }
    let reconstructed = ds.x.dot(coeffs);
    let resid = (&reconstructed - w).mapv(|v| v * v).sum().sqrt();
    let w_norm = w.dot(w).sqrt();
    if resid > 1e-6 * w_norm.max(1.0) {
        return Err(Error::invalid(format!(
            "w is not X a: residual {resid:.3e} (norm {w_norm:.3e})"
        )));
    }
    let d = spec.d() as f64;
    let sigma = spec.sigma;
    let delta = gram_deviation(ds.xi.view(), sigma, spec.d())?.spectral_norm_dev;
    let y_hat = ds.x.t().dot(w);
    let y_dot = ds.y.dot(&y_hat);
    let y_norm = ds.y.dot(&ds.y).sqrt();
    let bound = (y_dot - 2.0 * delta * sigma * d.sqrt() * y_norm * w_norm)
        / (sigma * sigma * d + y_norm * y_norm);
    let avg_margin = y_dot / (ds.n() as f64 * w_norm);
    let kappa = spec.kappa();
    let loss_bound = 2.0
        * (-(1.0_f64.min(1.0 / (kappa * kappa)) * avg_margin * avg_margin)
            / (8.0 * sigma * sigma))
            .exp();
    Ok(SpanBound {
        mu_dot_lower_bound: bound,
        mu_dot_measured: spec.mu.dot(w),
        avg_margin,
        loss_bound,
        gram_deviation: delta,
    })
}
