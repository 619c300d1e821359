//! Two-layer `relu^h` networks for the XOR problem: forward evaluation,
//! margin accounting, soft-min margin training on the norm sphere, the
//! signal/noise decomposition, and spillover diagnostics.
//!
//! The network is `f_W(x) = E_{i in [m]} a_i phi(w_i^T x)` with the second
//! layer fixed to the block pattern (+1 on the first half of the rows, -1 on
//! the rest) and `||W|| = sqrt(E_i ||w_i||^2)`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{activation, activation_grad, jacobi_eigen, CholeskyFactor};
use crate::linear_margin::MarginReport;
use crate::rng;
use crate::synthdata::{Dataset, Signal, XorSpec};

/// Two-layer network: first layer `W` (m x d rows `w_i`), fixed second layer
/// `a = (+1^{m/2}, -1^{m/2})`, activation exponent `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    pub w: Array2<f64>,
    pub h: f64,
}

impl TwoLayerNet {
    pub fn new(w: Array2<f64>, h: f64) -> Result<Self> {
        crate::linalg::check_exponent(h)?;
        let m = w.nrows();
        if m == 0 || !m.is_multiple_of(4) {
            return Err(Error::invalid(format!("width m={m} must be a positive multiple of 4")));
        }
        Ok(TwoLayerNet { w, h })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    /// Second-layer sign of hidden unit `i`.
    pub fn second_layer(&self, i: usize) -> f64 {
        if i < self.m() / 2 {
            1.0
        } else {
            -1.0
        }
    }

    /// Indices of the positive half `H_+`.
    pub fn h_plus(&self) -> std::ops::Range<usize> {
        0..self.m() / 2
    }

    /// Indices of the negative half `H_-`.
    pub fn h_minus(&self) -> std::ops::Range<usize> {
        self.m() / 2..self.m()
    }

    /// `||W|| = sqrt(E_i ||w_i||^2)`.
    pub fn norm(&self) -> f64 {
        let total: f64 = self.w.iter().map(|v| v * v).sum();
        (total / self.m() as f64).sqrt()
    }

    /// Rescales so that `||W|| = 1`. Errors on the zero network.
    pub fn normalized(&self) -> Result<TwoLayerNet> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite network"));
        }
        let mut w = self.w.clone();
        w.mapv_inplace(|v| v / norm);
        Ok(TwoLayerNet { w, h: self.h })
    }
}

/// `f_W(x) = E_i a_i phi(w_i^T x)`; the prediction is its sign.
pub fn forward(net: &TwoLayerNet, x: ArrayView1<f64>) -> f64 {
    let m = net.m();
    let mut sum = 0.0;
    for i in 0..m {
        sum += net.second_layer(i) * activation(net.w.row(i).dot(&x), net.h);
    }
    sum / m as f64
}

/// Margins of a network on a dataset, normalized by `||W||^h`.
pub fn normalized_margin(net: &TwoLayerNet, ds: &Dataset) -> MarginReport {
    let norm = net.norm();
    if norm == 0.0 {
        return MarginReport {
            per_sample: vec![0.0; ds.n()],
            min_margin: 0.0,
            normalized_margin: 0.0,
            max_margin_estimate: None,
            optimality_ratio: None,
            zero_norm: true,
        };
    }
    let scale = norm.powf(net.h);
    let per_sample: Vec<f64> =
        (0..ds.n()).map(|j| ds.y[j] * forward(net, ds.x.column(j)) / scale).collect();
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

/// The signal-only network: `H_+` rows alternate `+mu1 / -mu1`, `H_-` rows
/// alternate `+mu2 / -mu2`, all unit rows, `||W|| = 1`. Its margin on any
/// XOR dataset is exactly 1/4.
pub fn construct_signal_net(spec: &XorSpec) -> Result<TwoLayerNet> {
    spec.validate()?;
    let m = spec.m;
    let d = spec.d();
    let mut w = Array2::zeros((m, d));
    for i in 0..m {
        let (dir, sign) = if i < m / 2 {
            (&spec.mu1, if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (&spec.mu2, if i % 2 == 0 { 1.0 } else { -1.0 })
        };
        for k in 0..d {
            w[[i, k]] = sign * dir[k];
        }
    }
    TwoLayerNet::new(w, spec.h)
}

/// Soft-min margin `gamma_tau(W) = -tau log sum_j exp(-y_j f_W(x_j) / tau)`.
///
/// Satisfies `gamma_tau <= gamma <= gamma_tau + tau log n`.
pub fn soft_min_margin(net: &TwoLayerNet, ds: &Dataset, tau: f64) -> f64 {
    let margins: Vec<f64> =
        (0..ds.n()).map(|j| ds.y[j] * forward(net, ds.x.column(j))).collect();
    soft_min(&margins, tau)
}

fn soft_min(margins: &[f64], tau: f64) -> f64 {
    let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = margins.iter().map(|g| (-(g - min) / tau).exp()).sum();
    min - tau * z.ln()
}

/// Full-space gradient of the soft-min margin with respect to `W`.
///
/// Used by the finite-difference checks; the trainer itself works in the
/// span of the data, where the same gradient is expressed in coefficients.
pub fn soft_min_margin_grad(net: &TwoLayerNet, ds: &Dataset, tau: f64) -> Array2<f64> {
    let m = net.m();
    let n = ds.n();
    let margins: Vec<f64> =
        (0..n).map(|j| ds.y[j] * forward(net, ds.x.column(j))).collect();
    let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = margins.iter().map(|g| (-(g - min) / tau).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut grad = Array2::zeros((m, net.d()));
    for (j, wj) in weights.iter().enumerate() {
        let omega = wj / z;
        if omega == 0.0 {
            continue;
        }
        let x = ds.x.column(j);
        for i in 0..m {
            let pre = net.w.row(i).dot(&x);
            let coeff =
                omega * ds.y[j] * net.second_layer(i) * activation_grad(pre, net.h) / m as f64;
            if coeff != 0.0 {
                let mut row = grad.row_mut(i);
                row.scaled_add(coeff, &x);
            }
        }
    }
    grad
}

/// Options for soft-min margin ascent on the sphere `||W|| = 1`.
#[derive(Debug, Clone)]
pub struct TrainOpts {
    pub max_steps: usize,
    pub restarts: usize,
    pub seed: u64,
    pub step_size: f64,
    /// Initial temperature; defaults to the margin spread at initialization.
    pub tau0: Option<f64>,
    pub tau_decay: f64,
    pub tau_floor: f64,
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub backtrack_max: usize,
    /// Certification slack: the trained margin is flagged against
    /// `(1 - epsilon) * reference_margin` when a reference is supplied.
    pub epsilon: f64,
    /// Best available lower bound on `gamma*(S)` (typically the margin of the
    /// explicitly constructed network).
    pub reference_margin: Option<f64>,
}

impl Default for TrainOpts {
    fn default() -> Self {
        TrainOpts {
            max_steps: 4000,
            restarts: 3,
            seed: 0,
            step_size: 0.5,
            tau0: None,
            tau_decay: 0.7,
            tau_floor: 1e-4,
            plateau_window: 50,
            plateau_tol: 1e-4,
            backtrack_max: 30,
            epsilon: 0.05,
            reference_margin: None,
        }
    }
}

/// One trace row per accepted (or plateaued) ascent step.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub restart: usize,
    pub step: usize,
    pub tau: f64,
    pub step_size: f64,
    pub soft_margin: f64,
    pub min_margin: f64,
    pub best_margin: f64,
}

/// Training trace across restarts.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub best_restart: usize,
    /// Whether the final margin reached `(1 - epsilon)` of the reference.
    pub target_reached: Option<bool>,
}

/// Trained network plus its margin report and trace.
#[derive(Debug)]
pub struct TrainOutcome {
    pub net: TwoLayerNet,
    pub report: MarginReport,
    pub trace: TrainTrace,
}

/// Coefficient-space coordinates of a network whose rows live in
/// `span(mu1, mu2, xi_1..xi_n) + fixed residual`.
struct CoefState {
    s1: Array1<f64>,
    s2: Array1<f64>,
    a: Array2<f64>, // m x n: v_i = sum_j a_ij xi_j
    rho: f64,
}

impl CoefState {
    fn axpy(&self, eta: f64, g: &CoefGrad) -> CoefState {
        CoefState {
            s1: &self.s1 + &(&g.s1 * eta),
            s2: &self.s2 + &(&g.s2 * eta),
            a: &self.a + &(&g.a * eta),
            rho: self.rho,
        }
    }

    fn rescale(&mut self, f: f64) {
        self.s1.mapv_inplace(|v| v * f);
        self.s2.mapv_inplace(|v| v * f);
        self.a.mapv_inplace(|v| v * f);
        self.rho *= f;
    }
}

struct CoefGrad {
    s1: Array1<f64>,
    s2: Array1<f64>,
    a: Array2<f64>,
}

/// Per-sample signal coordinates: (axis, sign) with axis 0 = mu1, 1 = mu2.
fn sample_axes(ds: &Dataset) -> Result<Vec<(usize, f64)>> {
    ds.signal
        .iter()
        .map(|s| match s {
            Signal::Mu1 => Ok((0, 1.0)),
            Signal::MinusMu1 => Ok((0, -1.0)),
            Signal::Mu2 => Ok((1, 1.0)),
            Signal::MinusMu2 => Ok((1, -1.0)),
            _ => Err(Error::invalid("xor trainer needs an XOR dataset")),
        })
        .collect()
}

struct Evaluation {
    margins: Vec<f64>,
    soft: f64,
    min_margin: f64,
    preacts: Array2<f64>,
    norm2: f64,
}

struct TrainContext<'a> {
    ds: &'a Dataset,
    gram: Array2<f64>,
    axes: Vec<(usize, f64)>,
    res_norm2: Array1<f64>,
    m: usize,
    h: f64,
}

impl TrainContext<'_> {
    fn evaluate(&self, st: &CoefState, tau: f64) -> Evaluation {
        let m = self.m;
        let n = self.ds.n();
        let ak = st.a.dot(&self.gram); // m x n
        // norm^2 = E_i [ s1^2 + s2^2 + a_i K a_i^T + rho^2 ||r_i||^2 ]
        let mut norm2 = st.s1.dot(&st.s1) + st.s2.dot(&st.s2);
        norm2 += st.a.iter().zip(ak.iter()).map(|(x, y)| x * y).sum::<f64>();
        norm2 += st.rho * st.rho * self.res_norm2.sum();
        norm2 /= m as f64;
        let mut preacts = ak;
        for j in 0..n {
            let (axis, sign) = self.axes[j];
            let sig = if axis == 0 { &st.s1 } else { &st.s2 };
            for i in 0..m {
                preacts[[i, j]] += sign * sig[i];
            }
        }
        let mut margins = vec![0.0; n];
        for j in 0..n {
            let mut f = 0.0;
            for i in 0..m {
                let a2 = if i < m / 2 { 1.0 } else { -1.0 };
                f += a2 * activation(preacts[[i, j]], self.h);
            }
            margins[j] = self.ds.y[j] * f / m as f64;
        }
        let soft = soft_min(&margins, tau);
        let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        Evaluation { margins, soft, min_margin, preacts, norm2 }
    }

    /// Margins and pre-activations of the state rescaled by `f`, reusing an
    /// existing evaluation: homogeneity gives `margins * f^h`, `norm2 * f^2`.
    fn rescaled(&self, ev: &Evaluation, f: f64, tau: f64) -> Evaluation {
        let fh = f.powf(self.h);
        let margins: Vec<f64> = ev.margins.iter().map(|g| g * fh).collect();
        let soft = soft_min(&margins, tau);
        let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        Evaluation {
            margins,
            soft,
            min_margin,
            preacts: ev.preacts.mapv(|p| p * f),
            norm2: ev.norm2 * f * f,
        }
    }

    /// Gradient of the soft-min margin with respect to the weights `W`,
    /// expressed in coefficients: the W-space gradient of row `i` is
    /// `gs1[i] mu1 + gs2[i] mu2 + sum_j a[[i,j]] xi_j`, so stepping the
    /// coefficient state by this object reproduces full-space gradient
    /// ascent exactly (the residual direction receives no gradient).
    fn gradient(&self, ev: &Evaluation, tau: f64) -> CoefGrad {
        let m = self.m;
        let n = self.ds.n();
        let min = ev.min_margin;
        let weights: Vec<f64> = ev.margins.iter().map(|g| (-(g - min) / tau).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut g_pre = Array2::zeros((m, n));
        for j in 0..n {
            let omega = weights[j] / z;
            for i in 0..m {
                let a2 = if i < m / 2 { 1.0 } else { -1.0 };
                g_pre[[i, j]] = omega
                    * self.ds.y[j]
                    * a2
                    * activation_grad(ev.preacts[[i, j]], self.h)
                    / m as f64;
            }
        }
        let mut gs1 = Array1::zeros(m);
        let mut gs2 = Array1::zeros(m);
        for j in 0..n {
            let (axis, sign) = self.axes[j];
            for i in 0..m {
                if axis == 0 {
                    gs1[i] += sign * g_pre[[i, j]];
                } else {
                    gs2[i] += sign * g_pre[[i, j]];
                }
            }
        }
        CoefGrad { s1: gs1, s2: gs2, a: g_pre }
    }
}

/// Trains a `(1 - eps)`-near-max-margin network by projected soft-min margin
/// ascent on the norm sphere, with a geometric temperature schedule, random
/// Gaussian restarts, and backtracking line search.
pub fn train_max_margin(ds: &Dataset, spec: &XorSpec, opts: &TrainOpts) -> Result<TrainOutcome> {
    spec.validate()?;
    if ds.d() != spec.d() {
        return Err(Error::invalid("dataset/spec dimension mismatch"));
    }
    let m = spec.m;
    let n = ds.n();
    let d = spec.d();
    let axes = sample_axes(ds)?;
    let gram = ds.xi.t().dot(&ds.xi);
    // A zero noise block (degenerate noiseless data) has no coefficients to
    // initialize; any other singular Gram is a real error.
    let gram_factor = match CholeskyFactor::new(&gram) {
        Ok(f) => Some(f),
        Err(e) => {
            if ds.xi.iter().all(|&v| v == 0.0) {
                None
            } else {
                return Err(e);
            }
        }
    };

    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, CoefState, Array2<f64>, usize)> = None;

    for restart in 0..opts.restarts.max(1) {
        // Gaussian init on the sphere, decomposed into signal coords, noise
        // coefficients, and a residual that never re-enters the pre-activations.
        let init_seed = rng::derive_seed(opts.seed, rng::tags::TRAINER) ^ restart as u64;
        let mut w0 = Array2::zeros((m, d));
        for i in 0..m {
            let mut r = rng::substream(init_seed, i as u64);
            for k in 0..d {
                w0[[i, k]] = StandardNormal.sample(&mut r);
            }
        }
        let mut s1 = Array1::zeros(m);
        let mut s2 = Array1::zeros(m);
        let mut a = Array2::zeros((m, n));
        let mut residual = Array2::zeros((m, d));
        let mut res_norm2 = Array1::zeros(m);
        for i in 0..m {
            let row = w0.row(i);
            s1[i] = row.dot(&spec.mu1);
            s2[i] = row.dot(&spec.mu2);
            let mut res = row.to_owned();
            res.scaled_add(-s1[i], &spec.mu1);
            res.scaled_add(-s2[i], &spec.mu2);
            if let Some(factor) = &gram_factor {
                let coeffs = factor.solve(ds.xi.t().dot(&row).view());
                res -= &ds.xi.dot(&coeffs);
                for (k, c) in coeffs.iter().enumerate() {
                    a[[i, k]] = *c;
                }
            }
            res_norm2[i] = res.dot(&res);
            residual.row_mut(i).assign(&res);
        }
        let ctx = TrainContext { ds, gram: gram.clone(), axes: axes.clone(), res_norm2, m, h: spec.h };
        let mut state = CoefState { s1, s2, a, rho: 1.0 };
        // Project onto the sphere.
        let ev0 = ctx.evaluate(&state, 1.0);
        if ev0.norm2 <= 0.0 {
            return Err(Error::NonFinite("zero initialization".into()));
        }
        state.rescale(1.0 / ev0.norm2.sqrt());

        let mut tau = opts.tau0.unwrap_or_else(|| {
            let ev = ctx.evaluate(&state, 1.0);
            let max = ev.margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (max - ev.min_margin).max(1e-2)
        });
        let mut eta = opts.step_size;
        let mut ev = ctx.evaluate(&state, tau);
        let mut best_margin_here = ev.min_margin;
        let mut best_state_here = (state.s1.clone(), state.s2.clone(), state.a.clone(), state.rho);
        let mut window_anchor = best_margin_here;
        let mut stalled_checks = 0usize;

        for step in 0..opts.max_steps {
            if !ev.soft.is_finite() {
                return Err(Error::NonFinite(format!("soft margin at step {step}")));
            }
            let grad = ctx.gradient(&ev, tau);
            let mut accepted = false;
            let mut eta_try = eta;
            for _ in 0..=opts.backtrack_max {
                let mut cand = state.axpy(eta_try, &grad);
                let cand_raw = ctx.evaluate(&cand, tau);
                if cand_raw.norm2 <= 0.0 || !cand_raw.norm2.is_finite() {
                    eta_try *= 0.5;
                    continue;
                }
                let scale = 1.0 / cand_raw.norm2.sqrt();
                let cand_ev = ctx.rescaled(&cand_raw, scale, tau);
                if cand_ev.soft > ev.soft {
                    cand.rescale(scale);
                    state = cand;
                    ev = cand_ev;
                    accepted = true;
                    eta = (eta_try * 1.25).min(opts.step_size * 16.0);
                    break;
                }
                eta_try *= 0.5;
            }
            if !accepted {
                eta = (eta * 0.5).max(opts.step_size * 1e-6);
            }
            if ev.min_margin > best_margin_here {
                best_margin_here = ev.min_margin;
                best_state_here =
                    (state.s1.clone(), state.s2.clone(), state.a.clone(), state.rho);
            }
            trace.rows.push(TraceRow {
                restart,
                step,
                tau,
                step_size: eta,
                soft_margin: ev.soft,
                min_margin: ev.min_margin,
                best_margin: best_margin_here,
            });
            if (step + 1) % opts.plateau_window == 0 {
                let improved = best_margin_here - window_anchor;
                if improved <= opts.plateau_tol * window_anchor.abs().max(1e-6) {
                    if tau <= opts.tau_floor {
                        stalled_checks += 1;
                        if stalled_checks >= 10 {
                            break;
                        }
                    } else {
                        tau = (tau * opts.tau_decay).max(opts.tau_floor);
                        ev = ctx.evaluate(&state, tau);
                    }
                } else {
                    stalled_checks = 0;
                }
                window_anchor = best_margin_here;
            }
        }

        let replace = match &best {
            None => true,
            Some((margin, ..)) => best_margin_here > *margin,
        };
        if replace {
            let st = CoefState {
                s1: best_state_here.0,
                s2: best_state_here.1,
                a: best_state_here.2,
                rho: best_state_here.3,
            };
            best = Some((best_margin_here, st, residual, restart));
            trace.best_restart = restart;
        }
    }

    let (_, st, residual, _) = best.expect("at least one restart runs");
    let mut w = Array2::zeros((m, d));
    for i in 0..m {
        let mut row = residual.row(i).to_owned();
        row.mapv_inplace(|v| v * st.rho);
        row.scaled_add(st.s1[i], &spec.mu1);
        row.scaled_add(st.s2[i], &spec.mu2);
        let v = ds.xi.dot(&st.a.row(i).to_owned());
        row += &v;
        w.row_mut(i).assign(&row);
    }
    let net = TwoLayerNet::new(w, spec.h)?.normalized()?;
    let mut report = normalized_margin(&net, ds);
    if let Some(reference) = opts.reference_margin {
        report.max_margin_estimate = Some(reference);
        report.optimality_ratio = Some(report.normalized_margin / reference);
        trace.target_reached = Some(report.normalized_margin >= (1.0 - opts.epsilon) * reference);
    }
    Ok(TrainOutcome { net, report, trace })
}

/// Signal/noise decomposition of a network against a dataset.
#[derive(Debug, Clone)]
pub struct NetDecomposition {
    /// Projection of each row onto `span(mu1, mu2)`.
    pub u: Array2<f64>,
    /// Orthogonal remainder.
    pub v: Array2<f64>,
    /// `mu1^T w_i` for every row.
    pub mu1_coords: Array1<f64>,
    /// `mu2^T w_i` for every row.
    pub mu2_coords: Array1<f64>,
    /// `c_{ij} = v_i^T xi_j`.
    pub c: Array2<f64>,
    pub h: f64,
}

impl NetDecomposition {
    /// `||U|| = sqrt(E_i ||u_i||^2)`.
    pub fn u_norm(&self) -> f64 {
        (self.u.iter().map(|v| v * v).sum::<f64>() / self.u.nrows() as f64).sqrt()
    }

    pub fn v_norm(&self) -> f64 {
        (self.v.iter().map(|v| v * v).sum::<f64>() / self.v.nrows() as f64).sqrt()
    }

    /// Per-neuron signal strengths `s_i = mu1^T w_i`, `i in H_+`.
    pub fn s(&self) -> ArrayView1<'_, f64> {
        self.mu1_coords.slice(ndarray::s![..self.u.nrows() / 2])
    }

    /// Per-neuron signal strengths `t_i = mu2^T w_i`, `i in H_-`.
    pub fn t(&self) -> ArrayView1<'_, f64> {
        self.mu2_coords.slice(ndarray::s![self.u.nrows() / 2..])
    }
}

pub fn decompose_net(net: &TwoLayerNet, ds: &Dataset, spec: &XorSpec) -> Result<NetDecomposition> {
    if net.d() != spec.d() || ds.d() != spec.d() {
        return Err(Error::invalid("net/dataset/spec dimension mismatch"));
    }
    let m = net.m();
    let mu1_coords = net.w.dot(&spec.mu1);
    let mu2_coords = net.w.dot(&spec.mu2);
    let mut u = Array2::zeros((m, net.d()));
    for i in 0..m {
        let mut row = u.row_mut(i);
        row.scaled_add(mu1_coords[i], &spec.mu1);
        row.scaled_add(mu2_coords[i], &spec.mu2);
    }
    let v = &net.w - &u;
    let c = v.dot(&ds.xi);
    Ok(NetDecomposition { u, v, mu1_coords, mu2_coords, c, h: net.h })
}

/// The spillover bound
/// `(8 ||U|| + 3)(t + 1) sigma^2 ||V||^2 + 2 ((t + 1) sigma^2 ||V||^2)^{h/2}`.
pub fn spurious_influence_bound(decomp: &NetDecomposition, sigma: f64, t: f64) -> Result<f64> {
    if t < 1.0 {
        return Err(Error::invalid("spurious influence bound needs t >= 1"));
    }
    let u = decomp.u_norm();
    let v2 = decomp.v_norm().powi(2);
    let base = (t + 1.0) * sigma * sigma * v2;
    Ok((8.0 * u + 3.0) * base + 2.0 * base.powf(decomp.h / 2.0))
}

/// Observed coverage of the spillover bound: fraction of fresh draws with
/// `|f_W(x) - f_U(x)| <= bound(t)`, per requested `t`.
pub fn spurious_coverage(
    net: &TwoLayerNet,
    decomp: &NetDecomposition,
    spec: &XorSpec,
    ts: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let sampler = XorSampler::new(net, spec)?;
    let mc_seed = rng::derive_seed(seed, rng::tags::MC_TEST);
    let bounds: Vec<f64> =
        ts.iter().map(|&t| spurious_influence_bound(decomp, spec.sigma, t)).collect::<Result<_>>()?;
    let mut hits = vec![0usize; ts.len()];
    for k in 0..mc_samples {
        let mut r = rng::substream(mc_seed, k as u64);
        let (f_w, f_u, _y) = sampler.draw_split(&mut r);
        let diff = (f_w - f_u).abs();
        for (b, hit) in bounds.iter().zip(hits.iter_mut()) {
            if diff <= *b {
                *hit += 1;
            }
        }
    }
    Ok(ts
        .iter()
        .zip(bounds.iter().zip(hits.iter()))
        .map(|(&t, (&b, &h))| (t, b, h as f64 / mc_samples as f64))
        .collect())
}

/// Cross-cluster mass: how much of the norm budget sits on coordinates that
/// the ideal construction zeroes out.
#[derive(Debug, Clone)]
pub struct CrossMass {
    /// The aggregate quantity `D`.
    pub total: f64,
    /// `(1/2) E_{i: sign(a_i) = -y_j} (v_i^T xi_j)^2` per sample.
    pub per_point: Vec<f64>,
}

pub fn cross_mass_diagnostic(
    decomp: &NetDecomposition,
    ds: &Dataset,
    spec: &XorSpec,
) -> Result<CrossMass> {
    let clusters = ds
        .clusters
        .as_ref()
        .ok_or_else(|| Error::invalid("cross mass needs an XOR dataset with clusters"))?;
    let m = decomp.u.nrows();
    let half = m / 2;
    let d_sigma2 = spec.d() as f64 * spec.sigma * spec.sigma;
    let positives = clusters.positives();
    let negatives = clusters.negatives();

    let mut plus_term = 0.0;
    for i in 0..half {
        let mut noise = 0.0;
        for &j in &negatives {
            noise += decomp.c[[i, j]] * decomp.c[[i, j]];
        }
        plus_term += decomp.mu2_coords[i] * decomp.mu2_coords[i] + noise / d_sigma2;
    }
    let mut minus_term = 0.0;
    for i in half..m {
        let mut noise = 0.0;
        for &j in &positives {
            noise += decomp.c[[i, j]] * decomp.c[[i, j]];
        }
        minus_term += decomp.mu1_coords[i] * decomp.mu1_coords[i] + noise / d_sigma2;
    }
    let total = 0.5 * plus_term / half as f64 + 0.5 * minus_term / half as f64;

    let per_point = (0..ds.n())
        .map(|j| {
            let range = if ds.y[j] > 0.0 { half..m } else { 0..half };
            let mut sum = 0.0;
            for i in range.clone() {
                sum += decomp.c[[i, j]] * decomp.c[[i, j]];
            }
            0.5 * sum / half as f64
        })
        .collect();
    Ok(CrossMass { total, per_point })
}

/// The four signal-presence quantities
/// `(1/2) E_{i in H_+} phi(+-mu1^T w_i)` and `(1/2) E_{i in H_-} phi(+-mu2^T w_i)`.
///
/// For a generalizing near-max-margin network each stays a constant fraction
/// of the margin.
pub fn signal_presence(net: &TwoLayerNet, spec: &XorSpec) -> [f64; 4] {
    let m = net.m();
    let half = m / 2;
    let mu1c = net.w.dot(&spec.mu1);
    let mu2c = net.w.dot(&spec.mu2);
    let mean = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        vals.sum::<f64>() / half as f64
    };
    [
        0.5 * mean(&mut (0..half).map(|i| activation(mu1c[i], net.h))),
        0.5 * mean(&mut (0..half).map(|i| activation(-mu1c[i], net.h))),
        0.5 * mean(&mut (half..m).map(|i| activation(mu2c[i], net.h))),
        0.5 * mean(&mut (half..m).map(|i| activation(-mu2c[i], net.h))),
    ]
}

/// Exact sampler for `f_W(x)` on fresh draws.
///
/// The noise enters only through `(v_i^T xi)_i`, which is jointly Gaussian
/// with covariance `V V^T` after conditioning on the sphere radius. Sampling
/// through an eigenfactorization of the m x m covariance costs O(m rank) per
/// draw instead of O(m d).
struct XorSampler {
    /// `u_i^T z` for z in {+mu1, -mu1, +mu2, -mu2}; m x 4.
    signal_table: Array2<f64>,
    /// Eigenfactor `L` with `L L^T = V V^T`.
    factor: Array2<f64>,
    rank: usize,
    noise_dof: usize,
    radius: f64,
    m: usize,
    h: f64,
}

impl XorSampler {
    fn new(net: &TwoLayerNet, spec: &XorSpec) -> Result<XorSampler> {
        let m = net.m();
        let mu1c = net.w.dot(&spec.mu1);
        let mu2c = net.w.dot(&spec.mu2);
        let mut signal_table = Array2::zeros((m, 4));
        for i in 0..m {
            signal_table[[i, 0]] = mu1c[i];
            signal_table[[i, 1]] = -mu1c[i];
            signal_table[[i, 2]] = mu2c[i];
            signal_table[[i, 3]] = -mu2c[i];
        }
        let mut v = net.w.clone();
        for i in 0..m {
            let mut row = v.row_mut(i);
            row.scaled_add(-mu1c[i], &spec.mu1);
            row.scaled_add(-mu2c[i], &spec.mu2);
        }
        let cov = v.dot(&v.t());
        let (vals, vecs) = jacobi_eigen(&cov, true);
        let vecs = vecs.expect("eigenvectors requested");
        let max = vals.iter().cloned().fold(0.0_f64, f64::max);
        let mut cols: Vec<usize> = (0..m).filter(|&k| vals[k] > max * 1e-14 && vals[k] > 0.0).collect();
        cols.sort_unstable();
        let rank = cols.len();
        let mut factor = Array2::zeros((m, rank));
        for (new_k, &k) in cols.iter().enumerate() {
            let scale = vals[k].sqrt();
            for i in 0..m {
                factor[[i, new_k]] = vecs[[i, k]] * scale;
            }
        }
        let d = spec.d();
        Ok(XorSampler {
            signal_table,
            factor,
            rank,
            noise_dof: (d - 2).saturating_sub(rank),
            radius: ((d - 2) as f64).sqrt() * spec.sigma,
            m,
            h: net.h,
        })
    }

    /// Draws one sample; returns `(f_W(x), f_U(x), y)`.
    fn draw_split<R: Rng>(&self, r: &mut R) -> (f64, f64, f64) {
        let case = r.random_range(0..4u8) as usize;
        let y = if case < 2 { 1.0 } else { -1.0 };
        let mut eta_norm2 = 0.0;
        let mut noise = vec![0.0; self.m];
        for k in 0..self.rank {
            let g: f64 = StandardNormal.sample(r);
            eta_norm2 += g * g;
            for (i, ni) in noise.iter_mut().enumerate() {
                *ni += self.factor[[i, k]] * g;
            }
        }
        let tail = if self.noise_dof > 0 {
            ChiSquared::new(self.noise_dof as f64).unwrap().sample(r)
        } else {
            0.0
        };
        let denom = (eta_norm2 + tail).sqrt();
        let scale = if denom > 0.0 { self.radius / denom } else { 0.0 };
        let mut f_w = 0.0;
        let mut f_u = 0.0;
        for (i, ni) in noise.iter().enumerate() {
            let a2 = if i < self.m / 2 { 1.0 } else { -1.0 };
            let signal = self.signal_table[[i, case]];
            f_w += a2 * activation(signal + ni * scale, self.h);
            f_u += a2 * activation(signal, self.h);
        }
        (f_w / self.m as f64, f_u / self.m as f64, y)
    }
}

/// Monte-Carlo 0/1 test error of a network on fresh draws from the XOR
/// distribution.
///
/// A zero score is a coin flip and contributes half an error; networks that
/// ignore the signal subspace output an exact zero with non-trivial
/// probability (all activations dead), and this convention is what makes
/// their test loss exactly 1/2.
pub fn xor_test_error(net: &TwoLayerNet, spec: &XorSpec, mc_samples: usize, seed: u64) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be >= 1"));
    }
    let sampler = XorSampler::new(net, spec)?;
    let mc_seed = rng::derive_seed(seed, rng::tags::MC_TEST);
    let mut errors = 0.0_f64;
    for k in 0..mc_samples {
        let mut r = rng::substream(mc_seed, k as u64);
        let (f_w, _, y) = sampler.draw_split(&mut r);
        let score = y * f_w;
        if score < 0.0 {
            errors += 1.0;
        } else if score == 0.0 {
            errors += 0.5;
        }
    }
    Ok(errors / mc_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::sample_xor;
    use approx::assert_abs_diff_eq;

    fn spec_small() -> XorSpec {
        XorSpec::canonical(40, 0.2, 24, 1.5, 8).unwrap()
    }

    #[test]
    fn forward_zero_net_and_homogeneity() {
        let spec = spec_small();
        let net = TwoLayerNet::new(Array2::zeros((8, 40)), 1.5).unwrap();
        let x = Array1::from_shape_fn(40, |i| i as f64);
        assert_eq!(forward(&net, x.view()), 0.0);

        let ds = sample_xor(&spec, 1).unwrap();
        let trained = construct_signal_net(&spec).unwrap();
        let f1 = forward(&trained, ds.x.column(0));
        let mut scaled = trained.clone();
        scaled.w.mapv_inplace(|v| 3.0 * v);
        let f3 = forward(&scaled, ds.x.column(0));
        assert_abs_diff_eq!(f3, 3.0_f64.powf(1.5) * f1, epsilon = 1e-9 * f1.abs().max(1.0));
    }

    #[test]
    fn signal_net_margin_is_quarter() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 7).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        assert_abs_diff_eq!(net.norm(), 1.0, epsilon = 1e-12);
        let report = normalized_margin(&net, &ds);
        for margin in &report.per_sample {
            assert_abs_diff_eq!(*margin, 0.25, epsilon = 1e-12);
        }
        // V = 0 for the signal net.
        let dec = decompose_net(&net, &ds, &spec).unwrap();
        assert!(dec.v_norm() <= 1e-12);
    }

    #[test]
    fn normalized_margin_is_scale_invariant() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 3).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        let base = normalized_margin(&net, &ds).normalized_margin;
        for c in [0.5, 2.0, 10.0] {
            let mut scaled = net.clone();
            scaled.w.mapv_inplace(|v| c * v);
            let m = normalized_margin(&scaled, &ds).normalized_margin;
            assert!((m - base).abs() <= 1e-9);
        }
        let zero = TwoLayerNet::new(Array2::zeros((8, 40)), 1.5).unwrap();
        let report = normalized_margin(&zero, &ds);
        assert!(report.zero_norm);
        assert_eq!(report.normalized_margin, 0.0);
    }

    #[test]
    fn decompose_reconstructs_and_projects() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 5).unwrap();
        let mut rng = rng::substream(9, 0);
        let w = Array2::from_shape_fn((8, 40), |_| StandardNormal.sample(&mut rng));
        let net = TwoLayerNet::new(w, 1.5).unwrap();
        let dec = decompose_net(&net, &ds, &spec).unwrap();
        let sum = &dec.u + &dec.v;
        for (a, b) in sum.iter().zip(net.w.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for i in 0..8 {
            assert!(dec.v.row(i).dot(&spec.mu1).abs() <= 1e-10);
            assert!(dec.v.row(i).dot(&spec.mu2).abs() <= 1e-10);
        }
    }

    #[test]
    fn soft_min_sandwiches_true_margin() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 11).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        let true_margin = normalized_margin(&net, &ds).min_margin;
        for tau in [0.5, 0.1, 0.01] {
            let soft = soft_min_margin(&net, &ds, tau);
            assert!(soft <= true_margin + 1e-12);
            assert!(true_margin <= soft + tau * (ds.n() as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn soft_min_gradient_matches_finite_differences() {
        let spec = XorSpec::canonical(5, 0.3, 6, 1.5, 4).unwrap();
        let ds = sample_xor(&spec, 13).unwrap();
        let mut rng = rng::substream(21, 0);
        let w = Array2::from_shape_fn((4, 5), |_| StandardNormal.sample(&mut rng));
        let net = TwoLayerNet::new(w, 1.5).unwrap();
        let tau = 0.25;
        let grad = soft_min_margin_grad(&net, &ds, tau);
        let eps = 1e-6;
        let base_scale = grad.iter().map(|g| g.abs()).fold(0.0_f64, f64::max);
        for i in 0..4 {
            for k in 0..5 {
                let mut plus = net.clone();
                plus.w[[i, k]] += eps;
                let mut minus = net.clone();
                minus.w[[i, k]] -= eps;
                let fd =
                    (soft_min_margin(&plus, &ds, tau) - soft_min_margin(&minus, &ds, tau)) / (2.0 * eps);
                assert!(
                    (fd - grad[[i, k]]).abs() <= 1e-5 * base_scale.max(1.0),
                    "grad mismatch at ({i},{k}): fd {fd} vs {}",
                    grad[[i, k]]
                );
            }
        }
    }

    #[test]
    fn spurious_bound_arithmetic() {
        // ||U|| = 1, ||V|| = 1, sigma^2 = 0.01, t = 1, h = 1.5.
        let m = 4;
        let dec = NetDecomposition {
            u: Array2::eye(m),
            v: Array2::eye(m),
            mu1_coords: Array1::zeros(m),
            mu2_coords: Array1::zeros(m),
            c: Array2::zeros((m, 1)),
            h: 1.5,
        };
        // eye has E_i ||row||^2 = 1.
        let bound = spurious_influence_bound(&dec, 0.1, 1.0).unwrap();
        let expected = 11.0 * 0.02 + 2.0 * 0.02_f64.powf(0.75);
        assert_abs_diff_eq!(bound, expected, epsilon = 1e-12);
        assert!((expected - 0.3264).abs() < 1e-3);
        assert!(spurious_influence_bound(&dec, 0.1, 0.5).is_err());
        // V = 0 makes the bound vanish.
        let dec0 = NetDecomposition {
            v: Array2::zeros((m, m)),
            ..dec
        };
        assert_eq!(spurious_influence_bound(&dec0, 0.1, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn spurious_coverage_is_monotone_in_t() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 19).unwrap();
        let opts = TrainOpts { max_steps: 300, restarts: 1, ..TrainOpts::default() };
        let out = train_max_margin(&ds, &spec, &opts).unwrap();
        let dec = decompose_net(&out.net, &ds, &spec).unwrap();
        let curve =
            spurious_coverage(&out.net, &dec, &spec, &[1.0, 2.0, 4.0, 8.0], 2000, 5).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].2 >= pair[0].2 - 1e-12, "coverage not monotone: {curve:?}");
        }
        assert!(curve.last().unwrap().2 >= 0.95);
    }

    #[test]
    fn cross_mass_zero_for_signal_net() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 23).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        let dec = decompose_net(&net, &ds, &spec).unwrap();
        let cm = cross_mass_diagnostic(&dec, &ds, &spec).unwrap();
        assert!(cm.total <= 1e-20);
        assert!(cm.per_point.iter().all(|&p| p <= 1e-20));
    }

    #[test]
    fn test_error_of_signal_net_is_zero() {
        let spec = XorSpec::canonical(64, 0.05, 16, 1.5, 8).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        let err = xor_test_error(&net, &spec, 10_000, 3).unwrap();
        assert!(err <= 0.01, "err {err}");
    }

    #[test]
    fn training_trace_is_monotone_and_improves_margin() {
        let spec = spec_small();
        let ds = sample_xor(&spec, 29).unwrap();
        let opts = TrainOpts { max_steps: 400, restarts: 2, ..TrainOpts::default() };
        let out = train_max_margin(&ds, &spec, &opts).unwrap();
        let mut last_best = f64::NEG_INFINITY;
        let mut restart_seen = 0;
        for row in &out.trace.rows {
            if row.restart != restart_seen {
                restart_seen = row.restart;
                last_best = f64::NEG_INFINITY;
            }
            assert!(row.best_margin >= last_best - 1e-15);
            last_best = row.best_margin;
        }
        assert!(out.report.normalized_margin > 0.0);
        assert_abs_diff_eq!(out.net.norm(), 1.0, epsilon = 1e-9);
    }
}
