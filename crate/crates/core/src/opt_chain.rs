//! Signal-to-noise thresholds, the trivariate margin program and its closed
//! form, and the explicit near-max-margin network constructions built by
//! chaining a trivariate solution back up to a full two-layer network.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{activation, activation_grad, MinNormContext};
use crate::synthdata::{opposite_xor, Dataset, XorSpec};
use crate::xor_net::{normalized_margin, xor_test_error, TwoLayerNet};

/// `kappa_gen` for the linear problem.
pub const KAPPA_GEN_LINEAR: f64 = 0.0;
/// `kappa_uc` for the linear problem.
pub const KAPPA_UC_LINEAR: f64 = 1.0;
/// `kappa_uc` for the XOR problem (any exponent).
pub const KAPPA_UC_XOR: f64 = 4.0;

/// The two sides of the threshold equation, as `lhs - rhs`:
/// `2^{1/h} sqrt(2/kappa) - sqrt(kappa/(4+kappa)) - sqrt(16/(kappa (4+kappa)))`.
pub fn kappa_gen_xor_residual(kappa: f64, h: f64) -> f64 {
    2.0_f64.powf(1.0 / h) * (2.0 / kappa).sqrt()
        - (kappa / (4.0 + kappa)).sqrt()
        - (16.0 / (kappa * (4.0 + kappa))).sqrt()
}

/// `kappa_gen` for the XOR problem: the root of the defining equation,
/// found by bisection on `(1e-6, 4]` to absolute tolerance 1e-10.
pub fn kappa_gen_xor(h: f64) -> Result<f64> {
    crate::linalg::check_exponent(h)?;
    let (mut lo, mut hi) = (1e-6_f64, 4.0_f64);
    let flo = kappa_gen_xor_residual(lo, h);
    let fhi = kappa_gen_xor_residual(hi, h);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let fmid = kappa_gen_xor_residual(mid, h);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `gamma_0(kappa) = 2 phi(sqrt(2/kappa))`: four times the `b = 0` optimum of
/// the trivariate program at unit budget.
pub fn gamma_0(kappa: f64, h: f64) -> f64 {
    2.0 * activation((2.0 / kappa).sqrt(), h)
}

/// `gamma_star(kappa) = phi(sqrt(kappa/(4+kappa)) + sqrt(16/(kappa(4+kappa))))`:
/// four times the `d = 0` optimum at unit budget.
pub fn gamma_star(kappa: f64, h: f64) -> f64 {
    activation(
        (kappa / (4.0 + kappa)).sqrt() + (16.0 / (kappa * (4.0 + kappa))).sqrt(),
        h,
    )
}

/// Phase regions in the signal-to-noise parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BelowKappaGen,
    Between,
    AboveKappaUc,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::BelowKappaGen => "below_kappa_gen",
            Region::Between => "between",
            Region::AboveKappaUc => "above_kappa_uc",
        }
    }
}

/// Region of a linear instance.
pub fn linear_region(kappa: f64) -> Region {
    if kappa <= KAPPA_GEN_LINEAR {
        Region::BelowKappaGen
    } else if kappa < KAPPA_UC_LINEAR {
        Region::Between
    } else {
        Region::AboveKappaUc
    }
}

/// Region of an XOR instance at exponent `h`.
pub fn xor_region(kappa: f64, h: f64) -> Result<Region> {
    let kgen = kappa_gen_xor(h)?;
    Ok(if kappa <= kgen {
        Region::BelowKappaGen
    } else if kappa < KAPPA_UC_XOR {
        Region::Between
    } else {
        Region::AboveKappaUc
    })
}

/// A solution of the trivariate program
/// `max (1/4)(phi(b+c) + phi(-b+d)) : b^2 + k (c^2 + d^2) <= P5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivariatePoint {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Constraint weight `k = kappa_hat / 4`.
    pub k: f64,
    pub p5: f64,
    pub objective: f64,
    /// Set when `k` sits on the regime boundary `kappa_gen/4` and the `b > 0`
    /// branch was preferred.
    pub boundary: bool,
}

impl TrivariatePoint {
    pub fn constraint_value(&self) -> f64 {
        self.b * self.b + self.k * (self.c * self.c + self.d * self.d)
    }
}

fn opt5_objective(b: f64, c: f64, d: f64, h: f64) -> f64 {
    0.25 * (activation(b + c, h) + activation(-b + d, h))
}

/// Closed-form solution of the trivariate program.
///
/// For `k > kappa_gen(h)/4` the optimum (with `b >= 0`) is
/// `b = sqrt(k/(1+k)) sqrt(P5)`, `c = sqrt(1/(k(1+k))) sqrt(P5)`, `d = 0`;
/// below the threshold it is `b = 0`, `c = d = sqrt(P5/(2k))`. On the
/// boundary the `b > 0` branch is returned with a flag.
pub fn solve_opt5(k: f64, p5: f64, h: f64) -> Result<TrivariatePoint> {
    crate::linalg::check_exponent(h)?;
    if k <= 0.0 || p5 <= 0.0 {
        return Err(Error::invalid("solve_opt5 needs k > 0 and P5 > 0"));
    }
    let threshold = kappa_gen_xor(h)? / 4.0;
    let scale = p5.sqrt();
    let boundary = (k - threshold).abs() <= 1e-12 * threshold.max(1e-12);
    if k > threshold || boundary {
        let b = (k / (1.0 + k)).sqrt() * scale;
        let c = (1.0 / (k * (1.0 + k))).sqrt() * scale;
        Ok(TrivariatePoint { b, c, d: 0.0, k, p5, objective: opt5_objective(b, c, 0.0, h), boundary })
    } else {
        let c = (p5 / (2.0 * k)).sqrt();
        Ok(TrivariatePoint { b: 0.0, c, d: c, k, p5, objective: opt5_objective(0.0, c, c, h), boundary: false })
    }
}

/// Brute-force oracle for the trivariate program: a feasibility-scaled grid
/// search followed by projected-gradient polish. Test-side check for
/// [`solve_opt5`]; canonicalizes the `(b,c,d) -> (-b,d,c)` symmetry so that
/// `b >= 0`.
pub fn opt5_oracle(k: f64, p5: f64, h: f64, grid: usize) -> Result<TrivariatePoint> {
    crate::linalg::check_exponent(h)?;
    if k <= 0.0 || p5 <= 0.0 {
        return Err(Error::invalid("opt5_oracle needs k > 0 and P5 > 0"));
    }
    if grid < 50 {
        return Err(Error::invalid("opt5_oracle needs grid >= 50"));
    }
    let rb = p5.sqrt();
    let rcd = (p5 / k).sqrt();
    // Best boundary-scaled grid point per b-band; polishing several bands
    // hedges against the two critical-point families of the program.
    const BANDS: usize = 12;
    let mut band_best = [(f64::NEG_INFINITY, 0.0, 0.0, 0.0); BANDS];
    let lin = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    for ib in 0..grid {
        let b0 = lin(-rb, rb, ib, grid);
        let band = (ib * BANDS / grid).min(BANDS - 1);
        for ic in 0..grid {
            let c0 = lin(0.0, rcd, ic, grid);
            for id in 0..grid {
                let d0 = lin(0.0, rcd, id, grid);
                let q = b0 * b0 + k * (c0 * c0 + d0 * d0);
                if q == 0.0 {
                    continue;
                }
                // The objective is homogeneous, so every candidate is pushed
                // to the constraint boundary before evaluation.
                let t = (p5 / q).sqrt();
                let (b, c, d) = (b0 * t, c0 * t, d0 * t);
                let obj = opt5_objective(b, c, d, h);
                if obj > band_best[band].0 {
                    band_best[band] = (obj, b, c, d);
                }
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for &(start_obj, b0, c0, d0) in band_best.iter() {
        if !start_obj.is_finite() {
            continue;
        }
        let polished = polish_on_boundary(b0, c0, d0, k, p5, h);
        if polished.0 > best.0 {
            best = polished;
        }
    }
    let (mut obj, mut b, mut c, mut d) = best;
    if b < 0.0 {
        let (bc, bd) = (d, c);
        b = -b;
        c = bc;
        d = bd;
        obj = opt5_objective(b, c, d, h);
    }
    Ok(TrivariatePoint { b, c, d, k, p5, objective: obj, boundary: false })
}

/// Projected-gradient ascent along the constraint boundary with backtracking.
fn polish_on_boundary(
    mut b: f64,
    mut c: f64,
    mut d: f64,
    k: f64,
    p5: f64,
    h: f64,
) -> (f64, f64, f64, f64) {
    let mut obj = opt5_objective(b, c, d, h);
    let mut eta = 0.1 * p5.sqrt();
    for _ in 0..4000 {
        let g = [
            0.25 * (activation_grad(b + c, h) - activation_grad(-b + d, h)),
            0.25 * activation_grad(b + c, h),
            0.25 * activation_grad(-b + d, h),
        ];
        // Remove the component along the constraint normal (b, k c, k d).
        let nrm = [b, k * c, k * d];
        let nn: f64 = nrm.iter().map(|v| v * v).sum();
        let gn: f64 = g.iter().zip(&nrm).map(|(a, b)| a * b).sum();
        let lambda = if nn > 0.0 { gn / nn } else { 0.0 };
        let gt = [g[0] - lambda * nrm[0], g[1] - lambda * nrm[1], g[2] - lambda * nrm[2]];
        let (mut nb, mut nc, mut nd) =
            (b + eta * gt[0], c + eta * gt[1], d + eta * gt[2]);
        let q = nb * nb + k * (nc * nc + nd * nd);
        if q > 0.0 {
            let t = (p5 / q).sqrt();
            nb *= t;
            nc *= t;
            nd *= t;
            let nobj = opt5_objective(nb, nc, nd, h);
            if nobj > obj {
                b = nb;
                c = nc;
                d = nd;
                obj = nobj;
                eta *= 1.2;
                continue;
            }
        }
        eta *= 0.5;
        if eta < 1e-16 {
            break;
        }
    }
    (obj, b, c, d)
}

/// A ratio that may be 0/0 at the optimum (`d = 0` side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioValue {
    Defined(f64),
    Undefined,
}

impl RatioValue {
    pub fn defined(self) -> Option<f64> {
        match self {
            RatioValue::Defined(v) => Some(v),
            RatioValue::Undefined => None,
        }
    }
}

/// Activation-share ratios of a trivariate point: `phi(b)/phi(b+c)`,
/// `phi(-b)/phi(-b+d)`, and the closed-form reference `(1/(1+4/kappa_hat))^h`.
#[derive(Debug, Clone, Copy)]
pub struct TrivariateRatios {
    pub plus: RatioValue,
    pub minus: RatioValue,
    pub reference: f64,
}

pub fn trivariate_ratios(pt: &TrivariatePoint, h: f64) -> TrivariateRatios {
    let kappa_hat = 4.0 * pt.k;
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            RatioValue::Undefined
        } else {
            RatioValue::Defined(num / den)
        }
    };
    TrivariateRatios {
        plus: ratio(activation(pt.b, h), activation(pt.b + pt.c, h)),
        minus: ratio(activation(-pt.b, h), activation(-pt.b + pt.d, h)),
        reference: (1.0 / (1.0 + 4.0 / kappa_hat)).powf(h),
    }
}

/// Which explicit network to build from the trivariate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstructMode {
    /// The near-max-margin construction.
    Optimal,
    /// Force `b = 0`: a near-max-margin network (below the generalization
    /// threshold) that ignores the signal subspace entirely.
    NoGen,
    /// Shrink the signal coordinate by `alpha` and re-tighten the constraint;
    /// a deliberately unbalanced large-margin solution.
    Scaled(f64),
}

/// Builds the explicit network by chaining the trivariate solution back up:
/// duplicate `(b, c, d)` / `(-b, d, c)` across each half-layer, spread the
/// noise targets over the clusters, then realize the noise coordinates as
/// minimum-norm vectors with exact zeros on the cross clusters. The returned
/// network has unit norm.
pub fn construct_network(ds: &Dataset, spec: &XorSpec, mode: ConstructMode) -> Result<TwoLayerNet> {
    spec.validate()?;
    if ds.d() != spec.d() {
        return Err(Error::invalid("dataset/spec dimension mismatch"));
    }
    let clusters = ds
        .clusters
        .as_ref()
        .ok_or_else(|| Error::invalid("construct_network needs an XOR dataset with clusters"))?;
    for (set, label) in [
        (&clusters.mu1, 1.0),
        (&clusters.minus_mu1, 1.0),
        (&clusters.mu2, -1.0),
        (&clusters.minus_mu2, -1.0),
    ] {
        if set.iter().any(|&j| ds.y[j] != label) {
            return Err(Error::invalid("dataset labels do not match an XOR sample"));
        }
    }
    let n_min = clusters.n_min();
    if n_min == 0 {
        return Err(Error::invalid("construct_network needs every cluster non-empty"));
    }
    let d_sigma2 = spec.d() as f64 * spec.sigma * spec.sigma;
    let kappa_hat = 4.0 * n_min as f64 / d_sigma2;
    let k = kappa_hat / 4.0;
    let pt = match mode {
        ConstructMode::Optimal => solve_opt5(k, 1.0, spec.h)?,
        ConstructMode::NoGen => {
            let c = (1.0 / (2.0 * k)).sqrt();
            TrivariatePoint {
                b: 0.0,
                c,
                d: c,
                k,
                p5: 1.0,
                objective: opt5_objective(0.0, c, c, spec.h),
                boundary: false,
            }
        }
        ConstructMode::Scaled(alpha) => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::invalid("scaled mode needs alpha in [0, 1]"));
            }
            let opt = solve_opt5(k, 1.0, spec.h)?;
            let b = alpha * opt.b;
            let cd2 = opt.c * opt.c + opt.d * opt.d;
            let s = ((1.0 - b * b) / (k * cd2)).sqrt();
            let (c, d) = (opt.c * s, opt.d * s);
            TrivariatePoint {
                b,
                c,
                d,
                k,
                p5: 1.0,
                objective: opt5_objective(b, c, d, spec.h),
                boundary: false,
            }
        }
    };

    let m = spec.m;
    let half = m / 2;
    let quarter = m / 4;
    let ctx = MinNormContext::new(ds.xi.view())?;
    let mut w = Array2::zeros((m, spec.d()));
    let n = ds.n();
    for i in 0..m {
        let in_plus = i < half;
        let local = if in_plus { i } else { i - half };
        // Half of each block carries (b, c, d), the other half (-b, d, c).
        let (b_i, c_i, d_i) =
            if local < quarter { (pt.b, pt.c, pt.d) } else { (-pt.b, pt.d, pt.c) };
        let (own_plus, own_minus, dir) = if in_plus {
            (&clusters.mu1, &clusters.minus_mu1, &spec.mu1)
        } else {
            (&clusters.mu2, &clusters.minus_mu2, &spec.mu2)
        };
        let mut rhs = Array1::zeros(n);
        for &j in own_plus {
            rhs[j] = c_i;
        }
        for &j in own_minus {
            rhs[j] = d_i;
        }
        let v = ctx.solve(rhs.view())?;
        let mut row = v;
        row.scaled_add(b_i, dir);
        w.row_mut(i).assign(&row);
    }
    TwoLayerNet::new(w, spec.h)?.normalized()
}

/// Margins and errors of a network on the opposite dataset and distribution.
#[derive(Debug, Clone)]
pub struct OppositeMarginAudit {
    pub margin_s: f64,
    pub margin_psi_s: f64,
    /// `gamma(f, psi(S)) / gamma(f, S)`.
    pub margin_ratio: RatioValue,
    /// 0/1 error on the mapped training set `psi(S)`.
    pub err_psi_s: f64,
    /// Monte-Carlo 0/1 error on the opposite distribution `psi(D)`.
    pub err_psi_d: f64,
}

pub fn opposite_margin_audit(
    net: &TwoLayerNet,
    ds: &Dataset,
    spec: &XorSpec,
    mc_samples: usize,
    seed: u64,
) -> Result<OppositeMarginAudit> {
    let psi_s = opposite_xor(ds, spec)?;
    let on_s = normalized_margin(net, ds);
    let on_psi = normalized_margin(net, &psi_s);
    let err_psi_s = on_psi.per_sample.iter().filter(|&&m| m <= 0.0).count() as f64
        / psi_s.n() as f64;
    let err_psi_d = xor_test_error(net, &spec.swapped(), mc_samples, seed)?;
    let margin_ratio = if on_s.normalized_margin == 0.0 {
        RatioValue::Undefined
    } else {
        RatioValue::Defined(on_psi.normalized_margin / on_s.normalized_margin)
    };
    Ok(OppositeMarginAudit {
        margin_s: on_s.normalized_margin,
        margin_psi_s: on_psi.normalized_margin,
        margin_ratio,
        err_psi_s,
        err_psi_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::sample_xor;
    use crate::xor_net::decompose_net;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kappa_gen_closed_form_agreement() {
        // The defining equation simplifies to kappa = 2^{1 + 2/h} - 4; the
        // bisection must land on it.
        for h in [1.0, 1.1, 1.25, 1.5, 1.75, 1.9, 1.99] {
            let root = kappa_gen_xor(h).unwrap();
            let closed = 2.0_f64.powf(1.0 + 2.0 / h) - 4.0;
            assert!((root - closed).abs() <= 1e-8, "h={h}: {root} vs {closed}");
            assert!(kappa_gen_xor_residual(root, h).abs() <= 1e-9);
        }
    }

    #[test]
    fn kappa_gen_special_values() {
        // h = 1: both sides of the equation equal sqrt(2) at kappa = 4.
        let k1 = kappa_gen_xor(1.0).unwrap();
        assert_abs_diff_eq!(k1, 4.0, epsilon = 1e-9);
        let lhs = 2.0 * (2.0_f64 / 4.0).sqrt();
        assert_abs_diff_eq!(lhs, 2.0_f64.sqrt(), epsilon = 1e-15);
        // h = 1.5: ~1.040.
        let k15 = kappa_gen_xor(1.5).unwrap();
        assert!((k15 - 1.040).abs() <= 0.01, "{k15}");
        // h -> 2: threshold collapses.
        assert!(kappa_gen_xor(1.99).unwrap() < 0.05);
        // Monotone non-increasing on a grid.
        let mut prev = f64::INFINITY;
        for i in 0..10 {
            let h = 1.0 + 0.1 * i as f64;
            let k = kappa_gen_xor(h).unwrap();
            assert!(k <= prev + 1e-12);
            assert!(k > 0.0 && k <= 4.0);
            prev = k;
        }
    }

    #[test]
    fn gamma_curves_cross_at_threshold() {
        for h in [1.1, 1.5, 1.9] {
            let kgen = kappa_gen_xor(h).unwrap();
            assert!((gamma_0(kgen, h) - gamma_star(kgen, h)).abs() <= 1e-8);
        }
        // At kappa_uc = 4 the two inner terms of gamma_star coincide.
        let a = (4.0_f64 / 8.0).sqrt();
        let b = (16.0_f64 / 32.0).sqrt();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_0(2.0, 1.5), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn opt5_closed_form_reference_point() {
        let pt = solve_opt5(1.0, 1.0, 1.5).unwrap();
        assert_abs_diff_eq!(pt.b, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.c, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_eq!(pt.d, 0.0);
        assert_abs_diff_eq!(pt.objective, 2.0_f64.powf(0.75) / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.constraint_value(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn opt5_matches_oracle_on_lattice() {
        for &k in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            for &h in &[1.1, 1.5, 1.9] {
                let closed = solve_opt5(k, 1.0, h).unwrap();
                let oracle = opt5_oracle(k, 1.0, h, 60).unwrap();
                assert!(
                    (closed.objective - oracle.objective).abs() <= 1e-6,
                    "k={k} h={h}: closed {} oracle {}",
                    closed.objective,
                    oracle.objective
                );
                assert!((closed.constraint_value() - 1.0).abs() <= 1e-9);
                // Argument agreement after sign/symmetry canonicalization
                // (the oracle already reports b >= 0).
                for (a, b) in [
                    (closed.b, oracle.b),
                    (closed.c, oracle.c),
                    (closed.d, oracle.d),
                ] {
                    assert!((a - b).abs() <= 1e-3, "k={k} h={h}: args {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn opt5_zero_signal_branch_matches_gamma_0() {
        // Below the threshold the objective equals (P5^{h/2}/4) gamma_0(4k).
        for &(k, h, p5) in &[(0.1, 1.5, 1.0), (0.2, 1.2, 3.0)] {
            let pt = solve_opt5(k, p5, h).unwrap();
            assert_eq!(pt.b, 0.0);
            assert!((pt.constraint_value() - p5).abs() <= 1e-9 * p5);
            let expected = p5.powf(h / 2.0) / 4.0 * gamma_0(4.0 * k, h);
            assert_abs_diff_eq!(pt.objective, expected, epsilon = 1e-12 * expected);
        }
    }

    #[test]
    fn oracle_returns_zero_signal_below_threshold() {
        // kappa_gen(1.1)/4 ~ 0.76, so k = 0.1 sits well below.
        let pt = opt5_oracle(0.1, 1.0, 1.1, 60).unwrap();
        assert!(pt.b.abs() <= 2e-2, "b = {}", pt.b);
        // Objective symmetry under (b,c,d) -> (-b,d,c).
        let h = 1.3;
        let (b, c, d) = (0.4, 0.7, 0.2);
        assert_abs_diff_eq!(
            opt5_objective(b, c, d, h),
            opt5_objective(-b, d, c, h),
            epsilon = 1e-15
        );
    }

    #[test]
    fn opt5_budget_scaling() {
        let h = 1.5;
        let base = solve_opt5(0.8, 1.0, h).unwrap();
        for &p5 in &[0.25, 4.0, 9.0] {
            let scaled = solve_opt5(0.8, p5, h).unwrap();
            assert_abs_diff_eq!(
                scaled.objective,
                p5.powf(h / 2.0) * base.objective,
                epsilon = 1e-12 * scaled.objective.max(1.0)
            );
            assert!((scaled.constraint_value() - p5).abs() <= 1e-9 * p5);
        }
    }

    #[test]
    fn trivariate_ratios_match_reference_at_optimum() {
        // k = 1 (kappa_hat = 4): ratio = (1/2)^h. k = 2 (kappa_hat = 8): (2/3)^h.
        for (k, expect) in [(1.0, 0.5_f64), (2.0, 2.0 / 3.0)] {
            let h = 1.5;
            let pt = solve_opt5(k, 1.0, h).unwrap();
            let ratios = trivariate_ratios(&pt, h);
            let got = ratios.plus.defined().unwrap();
            assert_abs_diff_eq!(got, expect.powf(h), epsilon = 1e-12);
            // At the closed-form optimum the share equals the reference value.
            assert_abs_diff_eq!(got, ratios.reference, epsilon = 1e-12);
            assert_eq!(ratios.minus, RatioValue::Undefined);
        }
    }

    fn test_spec() -> XorSpec {
        XorSpec::from_kappa(512, 2.0, 48, 1.5, 16).unwrap()
    }

    #[test]
    fn constructed_net_margins_are_equal_and_unit_norm() {
        let spec = test_spec();
        let ds = sample_xor(&spec, 31).unwrap();
        let net = construct_network(&ds, &spec, ConstructMode::Optimal).unwrap();
        assert_abs_diff_eq!(net.norm(), 1.0, epsilon = 1e-9);
        let report = normalized_margin(&net, &ds);
        let min = report.min_margin;
        let max = report.per_sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min > 0.0);
        assert!((max - min) / min <= 0.03, "margin spread {} vs {}", min, max);
    }

    #[test]
    fn constructed_net_zeroes_cross_clusters() {
        let spec = test_spec();
        let ds = sample_xor(&spec, 33).unwrap();
        let net = construct_network(&ds, &spec, ConstructMode::Optimal).unwrap();
        let dec = decompose_net(&net, &ds, &spec).unwrap();
        let clusters = ds.clusters.as_ref().unwrap();
        for i in 0..spec.m / 2 {
            for &j in clusters.negatives().iter() {
                assert!(dec.c[[i, j]].abs() <= 1e-8, "c[{i},{j}] = {}", dec.c[[i, j]]);
            }
        }
        for i in spec.m / 2..spec.m {
            for &j in clusters.positives().iter() {
                assert!(dec.c[[i, j]].abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn no_gen_mode_has_exactly_zero_signal() {
        let spec = test_spec();
        let ds = sample_xor(&spec, 35).unwrap();
        let net = construct_network(&ds, &spec, ConstructMode::NoGen).unwrap();
        let dec = decompose_net(&net, &ds, &spec).unwrap();
        // Canonical axis directions make the projection exactly zero.
        assert_eq!(dec.u_norm(), 0.0);
        let report = normalized_margin(&net, &ds);
        assert!(report.min_margin > 0.0);
    }

    #[test]
    fn scaled_mode_tightens_constraint() {
        let spec = test_spec();
        let ds = sample_xor(&spec, 37).unwrap();
        let full = construct_network(&ds, &spec, ConstructMode::Optimal).unwrap();
        let shrunk = construct_network(&ds, &spec, ConstructMode::Scaled(0.5)).unwrap();
        let m_full = normalized_margin(&full, &ds).min_margin;
        let m_half = normalized_margin(&shrunk, &ds).min_margin;
        assert!(m_half > 0.0 && m_half < m_full);
        assert!(construct_network(&ds, &spec, ConstructMode::Scaled(1.5)).is_err());
    }

    #[test]
    fn no_gen_audit_margins_match_on_both_sets() {
        let spec = XorSpec::from_kappa(512, 0.5, 48, 1.5, 16).unwrap();
        let ds = sample_xor(&spec, 39).unwrap();
        let net = construct_network(&ds, &spec, ConstructMode::NoGen).unwrap();
        let audit = opposite_margin_audit(&net, &ds, &spec, 2000, 7).unwrap();
        // The net ignores the signal subspace, which is all psi changes.
        assert_abs_diff_eq!(audit.margin_s, audit.margin_psi_s, epsilon = 1e-9);
        assert_eq!(audit.err_psi_s, 0.0);
    }

    #[test]
    fn signal_net_fails_completely_on_psi() {
        let spec = test_spec();
        let ds = sample_xor(&spec, 41).unwrap();
        let net = crate::xor_net::construct_signal_net(&spec).unwrap();
        let audit = opposite_margin_audit(&net, &ds, &spec, 500, 9).unwrap();
        assert_eq!(audit.err_psi_s, 1.0);
    }
}
