//! Data models: the linear problem and the XOR problem, plus the
//! signal-flipping "opposite dataset" mappings.
//!
//! Samples are always `x = z + xi` with `z` the signal component (a signed
//! ground-truth direction) and `xi` uniform on a sphere inside the orthogonal
//! complement of the signal subspace. Both pieces are stored: the opposite
//! mappings rearrange `z` and `xi` symbolically instead of re-deriving them
//! from `x`, which keeps them exact involutions.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const UNIT_TOL: f64 = 1e-12;

/// Linear problem: ground truth direction `mu`, noise scale `sigma`,
/// ambient dimension `d`, sample count `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    pub mu: Array1<f64>,
    pub sigma: f64,
    pub n: usize,
}

impl LinearSpec {
    pub fn new(mu: Array1<f64>, sigma: f64, n: usize) -> Result<Self> {
        let spec = LinearSpec { mu, sigma, n };
        spec.validate()?;
        Ok(spec)
    }

    /// Axis-aligned instance: `mu = e_1`.
    pub fn canonical(d: usize, sigma: f64, n: usize) -> Result<Self> {
        let mut mu = Array1::zeros(d);
        if d > 0 {
            mu[0] = 1.0;
        }
        Self::new(mu, sigma, n)
    }

    /// Instance with `sigma` derived from the signal-to-noise parameter:
    /// `sigma^2 = n / (d * kappa)`.
    pub fn from_kappa(d: usize, kappa: f64, n: usize) -> Result<Self> {
        if kappa <= 0.0 {
            return Err(Error::invalid("kappa must be positive"));
        }
        Self::canonical(d, (n as f64 / (d as f64 * kappa)).sqrt(), n)
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    /// Signal-to-noise parameter `kappa = n / (d sigma^2)`.
    pub fn kappa(&self) -> f64 {
        self.n as f64 / (self.d() as f64 * self.sigma * self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d() < 2 {
            return Err(Error::invalid("linear spec needs d >= 2"));
        }
        if self.n == 0 {
            return Err(Error::invalid("linear spec needs n >= 1"));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::invalid("linear spec needs sigma > 0"));
        }
        let norm = self.mu.dot(&self.mu).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("mu is not unit norm (|mu| = {norm})")));
        }
        if !self.kappa().is_finite() {
            return Err(Error::invalid("kappa is not finite"));
        }
        Ok(())
    }
}

/// XOR problem: orthonormal directions `mu1`, `mu2`, activation exponent `h`,
/// network width `m` (divisible by 4).
#[derive(Debug, Clone, PartialEq)]
pub struct XorSpec {
    pub mu1: Array1<f64>,
    pub mu2: Array1<f64>,
    pub sigma: f64,
    pub n: usize,
    pub h: f64,
    pub m: usize,
}

impl XorSpec {
    pub fn new(
        mu1: Array1<f64>,
        mu2: Array1<f64>,
        sigma: f64,
        n: usize,
        h: f64,
        m: usize,
    ) -> Result<Self> {
        let spec = XorSpec { mu1, mu2, sigma, n, h, m };
        spec.validate()?;
        Ok(spec)
    }

    /// Axis-aligned instance: `mu1 = e_1`, `mu2 = e_2`.
    pub fn canonical(d: usize, sigma: f64, n: usize, h: f64, m: usize) -> Result<Self> {
        let mut mu1 = Array1::zeros(d);
        let mut mu2 = Array1::zeros(d);
        if d > 1 {
            mu1[0] = 1.0;
            mu2[1] = 1.0;
        }
        Self::new(mu1, mu2, sigma, n, h, m)
    }

    pub fn from_kappa(d: usize, kappa: f64, n: usize, h: f64, m: usize) -> Result<Self> {
        if kappa <= 0.0 {
            return Err(Error::invalid("kappa must be positive"));
        }
        Self::canonical(d, (n as f64 / (d as f64 * kappa)).sqrt(), n, h, m)
    }

    pub fn d(&self) -> usize {
        self.mu1.len()
    }

    pub fn kappa(&self) -> f64 {
        self.n as f64 / (self.d() as f64 * self.sigma * self.sigma)
    }

    /// The distribution with the two ground-truth roles exchanged; this is
    /// what `opposite_xor` output is distributed as.
    pub fn swapped(&self) -> XorSpec {
        XorSpec {
            mu1: self.mu2.clone(),
            mu2: self.mu1.clone(),
            sigma: self.sigma,
            n: self.n,
            h: self.h,
            m: self.m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d() < 3 {
            return Err(Error::invalid("xor spec needs d >= 3"));
        }
        if self.mu2.len() != self.d() {
            return Err(Error::invalid("mu1 and mu2 dimension mismatch"));
        }
        if self.n == 0 {
            return Err(Error::invalid("xor spec needs n >= 1"));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::invalid("xor spec needs sigma > 0"));
        }
        crate::linalg::check_exponent(self.h)?;
        if self.m == 0 || !self.m.is_multiple_of(4) {
            return Err(Error::invalid(format!("width m={} must be a positive multiple of 4", self.m)));
        }
        for (name, v) in [("mu1", &self.mu1), ("mu2", &self.mu2)] {
            let norm = v.dot(v).sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("{name} is not unit norm (|{name}| = {norm})")));
            }
        }
        if self.mu1.dot(&self.mu2).abs() > UNIT_TOL {
            return Err(Error::invalid("mu1 and mu2 are not orthogonal"));
        }
        Ok(())
    }
}

/// Which signed ground-truth direction a sample's signal component is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    Mu,
    MinusMu,
    Mu1,
    MinusMu1,
    Mu2,
    MinusMu2,
}

impl Signal {
    pub fn sign(self) -> f64 {
        match self {
            Signal::Mu | Signal::Mu1 | Signal::Mu2 => 1.0,
            Signal::MinusMu | Signal::MinusMu1 | Signal::MinusMu2 => -1.0,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Signal::Mu | Signal::MinusMu)
    }

    /// XOR label: +1 on the `mu1` axis, -1 on the `mu2` axis.
    pub fn xor_label(self) -> Result<f64> {
        match self {
            Signal::Mu1 | Signal::MinusMu1 => Ok(1.0),
            Signal::Mu2 | Signal::MinusMu2 => Ok(-1.0),
            _ => Err(Error::invalid("not an XOR signal")),
        }
    }

    /// The opposite-dataset role swap `mu1 <-> mu2` (other fields untouched).
    fn xor_swapped(self) -> Result<Signal> {
        match self {
            Signal::Mu1 => Ok(Signal::Mu2),
            Signal::MinusMu1 => Ok(Signal::MinusMu2),
            Signal::Mu2 => Ok(Signal::Mu1),
            Signal::MinusMu2 => Ok(Signal::MinusMu1),
            _ => Err(Error::invalid("not an XOR signal")),
        }
    }

    fn code(self) -> u8 {
        match self {
            Signal::Mu => 0,
            Signal::MinusMu => 1,
            Signal::Mu1 => 2,
            Signal::MinusMu1 => 3,
            Signal::Mu2 => 4,
            Signal::MinusMu2 => 5,
        }
    }

    fn from_code(code: u8) -> Result<Signal> {
        Ok(match code {
            0 => Signal::Mu,
            1 => Signal::MinusMu,
            2 => Signal::Mu1,
            3 => Signal::MinusMu1,
            4 => Signal::Mu2,
            5 => Signal::MinusMu2,
            _ => return Err(Error::invalid(format!("bad signal code {code}"))),
        })
    }
}

/// Index sets of the four XOR clusters, keyed by signal component.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clusters {
    pub mu1: Vec<usize>,
    pub minus_mu1: Vec<usize>,
    pub mu2: Vec<usize>,
    pub minus_mu2: Vec<usize>,
}

impl Clusters {
    pub fn from_signals(signals: &[Signal]) -> Result<Clusters> {
        let mut c = Clusters::default();
        for (j, s) in signals.iter().enumerate() {
            match s {
                Signal::Mu1 => c.mu1.push(j),
                Signal::MinusMu1 => c.minus_mu1.push(j),
                Signal::Mu2 => c.mu2.push(j),
                Signal::MinusMu2 => c.minus_mu2.push(j),
                _ => return Err(Error::invalid("linear signal in XOR cluster partition")),
            }
        }
        Ok(c)
    }

    /// Smallest cluster size `n_min`.
    pub fn n_min(&self) -> usize {
        self.mu1
            .len()
            .min(self.minus_mu1.len())
            .min(self.mu2.len())
            .min(self.minus_mu2.len())
    }

    pub fn n_max(&self) -> usize {
        self.mu1
            .len()
            .max(self.minus_mu1.len())
            .max(self.mu2.len())
            .max(self.minus_mu2.len())
    }

    /// Positive-label indices (signal on the `mu1` axis).
    pub fn positives(&self) -> Vec<usize> {
        let mut p = self.mu1.clone();
        p.extend_from_slice(&self.minus_mu1);
        p
    }

    /// Negative-label indices (signal on the `mu2` axis).
    pub fn negatives(&self) -> Vec<usize> {
        let mut n = self.mu2.clone();
        n.extend_from_slice(&self.minus_mu2);
        n
    }
}

/// A sample `S`: design matrix (columns are samples), labels, and the exact
/// signal/noise split every column was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub signal: Vec<Signal>,
    pub xi: Array2<f64>,
    pub clusters: Option<Clusters>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub(crate) fn signal_codes(&self) -> Vec<u8> {
        self.signal.iter().map(|s| s.code()).collect()
    }

    pub(crate) fn from_parts(
        x: Array2<f64>,
        y: Array1<f64>,
        codes: &[u8],
        xi: Array2<f64>,
        xor: bool,
    ) -> Result<Dataset> {
        let signal = codes.iter().map(|&c| Signal::from_code(c)).collect::<Result<Vec<_>>>()?;
        let clusters = if xor { Some(Clusters::from_signals(&signal)?) } else { None };
        Ok(Dataset { x, y, signal, xi, clusters })
    }
}

/// Draws one noise vector: uniform on the sphere of radius
/// `sqrt(d - dirs.len()) * sigma` orthogonal to every direction in `dirs`.
///
/// Gaussian draw, project out the signal subspace, renormalize. For
/// axis-aligned directions the projected coordinates are exactly zero.
fn sphere_noise<R: Rng>(rng: &mut R, d: usize, dirs: &[&Array1<f64>], sigma: f64) -> Array1<f64> {
    let mut g = Array1::from_shape_fn(d, |_| StandardNormal.sample(rng));
    for dir in dirs {
        let dot = g.dot(*dir);
        g.scaled_add(-dot, dir);
    }
    let radius = ((d - dirs.len()) as f64).sqrt() * sigma;
    let norm = g.dot(&g).sqrt();
    if norm == 0.0 {
        // Probability-zero draw; resample deterministically by advancing the stream.
        return sphere_noise(rng, d, dirs, sigma);
    }
    g.mapv_inplace(|v| v * radius / norm);
    g
}

/// Samples `n` i.i.d. points from the linear distribution.
pub fn sample_linear(spec: &LinearSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.d();
    let n = spec.n;
    let mut x = Array2::zeros((d, n));
    let mut xi = Array2::zeros((d, n));
    let mut y = Array1::zeros(n);
    let mut signal = Vec::with_capacity(n);
    for j in 0..n {
        let mut r = rng::substream(seed, j as u64);
        let label: f64 = if r.random::<bool>() { 1.0 } else { -1.0 };
        let noise = sphere_noise(&mut r, d, &[&spec.mu], spec.sigma);
        for i in 0..d {
            xi[[i, j]] = noise[i];
            x[[i, j]] = label * spec.mu[i] + noise[i];
        }
        y[j] = label;
        signal.push(if label > 0.0 { Signal::Mu } else { Signal::MinusMu });
    }
    Ok(Dataset { x, y, signal, xi, clusters: None })
}

/// Samples `n` i.i.d. points from the XOR distribution; cluster index sets
/// are populated.
pub fn sample_xor(spec: &XorSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.d();
    let n = spec.n;
    let mut x = Array2::zeros((d, n));
    let mut xi = Array2::zeros((d, n));
    let mut y = Array1::zeros(n);
    let mut signal = Vec::with_capacity(n);
    for j in 0..n {
        let mut r = rng::substream(seed, j as u64);
        let s = match r.random_range(0..4u8) {
            0 => Signal::Mu1,
            1 => Signal::MinusMu1,
            2 => Signal::Mu2,
            _ => Signal::MinusMu2,
        };
        let dir = match s {
            Signal::Mu1 | Signal::MinusMu1 => &spec.mu1,
            _ => &spec.mu2,
        };
        let noise = sphere_noise(&mut r, d, &[&spec.mu1, &spec.mu2], spec.sigma);
        let sign = s.sign();
        for i in 0..d {
            xi[[i, j]] = noise[i];
            x[[i, j]] = sign * dir[i] + noise[i];
        }
        let label = s.xor_label()?;
        // |y| = 1 is forced: the signal is exactly one signed direction.
        debug_assert!(label.abs() == 1.0);
        y[j] = label;
        signal.push(s);
    }
    let clusters = Clusters::from_signals(&signal)?;
    Ok(Dataset { x, y, signal, xi, clusters: Some(clusters) })
}

/// Which opposite-dataset mapping to apply to a linear sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OppositeVariant {
    /// `psi((x, y)) = (-mu y + xi, y)`: flips the signal, keeps the noise.
    Psi,
    /// `psi_bar((x, y)) = (mu y - xi, y)`: keeps the signal, negates the noise.
    PsiBar,
}

/// Applies `psi` or `psi_bar` to every sample of a linear dataset.
pub fn opposite_linear(ds: &Dataset, spec: &LinearSpec, variant: OppositeVariant) -> Result<Dataset> {
    spec.validate()?;
    if ds.d() != spec.d() || ds.n() != spec.n {
        return Err(Error::invalid("dataset/spec shape mismatch"));
    }
    if !ds.signal.iter().all(|s| s.is_linear()) {
        return Err(Error::invalid("dataset signal is not +/-mu"));
    }
    let d = ds.d();
    let n = ds.n();
    let mut x = Array2::zeros((d, n));
    let mut xi = Array2::zeros((d, n));
    let mut signal = Vec::with_capacity(n);
    for j in 0..n {
        let (sign, s) = match (variant, ds.signal[j]) {
            (OppositeVariant::Psi, Signal::Mu) => (-1.0, Signal::MinusMu),
            (OppositeVariant::Psi, Signal::MinusMu) => (1.0, Signal::Mu),
            (OppositeVariant::PsiBar, old) => (old.sign(), old),
            _ => unreachable!(),
        };
        let noise_sign = match variant {
            OppositeVariant::Psi => 1.0,
            OppositeVariant::PsiBar => -1.0,
        };
        for i in 0..d {
            let nz = noise_sign * ds.xi[[i, j]];
            xi[[i, j]] = nz;
            x[[i, j]] = sign * spec.mu[i] + nz;
        }
        signal.push(s);
    }
    Ok(Dataset { x, y: ds.y.clone(), signal, xi, clusters: None })
}

/// Applies the XOR opposite mapping: signal roles `mu1 <-> mu2` swap per the
/// four-case table, noise and labels preserved. The result is distributed as
/// `n` samples from the swapped distribution (`spec.swapped()`).
pub fn opposite_xor(ds: &Dataset, spec: &XorSpec) -> Result<Dataset> {
    spec.validate()?;
    if ds.d() != spec.d() || ds.n() != spec.n {
        return Err(Error::invalid("dataset/spec shape mismatch"));
    }
    let d = ds.d();
    let n = ds.n();
    let mut x = Array2::zeros((d, n));
    let mut signal = Vec::with_capacity(n);
    for j in 0..n {
        let s = ds.signal[j].xor_swapped()?;
        let dir = match s {
            Signal::Mu1 | Signal::MinusMu1 => &spec.mu1,
            _ => &spec.mu2,
        };
        let sign = s.sign();
        for i in 0..d {
            x[[i, j]] = sign * dir[i] + ds.xi[[i, j]];
        }
        signal.push(s);
    }
    let clusters = Clusters::from_signals(&signal)?;
    Ok(Dataset { x, y: ds.y.clone(), signal, xi: ds.xi.clone(), clusters: Some(clusters) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_spec_rejects_bad_inputs() {
        assert!(LinearSpec::new(Array1::from(vec![0.5, 0.5]), 0.1, 4).is_err());
        assert!(LinearSpec::canonical(3, 0.0, 4).is_err());
        assert!(LinearSpec::canonical(3, 0.1, 0).is_err());
        assert!(LinearSpec::canonical(1, 0.1, 4).is_err());
    }

    #[test]
    fn xor_spec_rejects_bad_width_and_directions() {
        assert!(XorSpec::canonical(8, 0.1, 4, 1.5, 6).is_err());
        assert!(XorSpec::canonical(8, 0.1, 4, 2.0, 8).is_err());
        let mu1 = Array1::from(vec![1.0, 0.0, 0.0]);
        let skew = Array1::from(vec![0.6, 0.8, 0.0]);
        assert!(XorSpec::new(mu1.clone(), skew, 0.1, 4, 1.5, 8).is_err());
        assert!(XorSpec::new(mu1.clone(), mu1, 0.1, 4, 1.5, 8).is_err());
    }

    #[test]
    fn linear_sample_structure_is_forced() {
        // d = 3, mu = e1: first coordinate is the label, the rest has norm
        // sqrt(2) * sigma.
        let spec = LinearSpec::canonical(3, 0.25, 40).unwrap();
        let ds = sample_linear(&spec, 99).unwrap();
        for j in 0..ds.n() {
            assert_eq!(ds.x[[0, j]], ds.y[j]);
            let rest = ds.x[[1, j]].powi(2) + ds.x[[2, j]].powi(2);
            assert_abs_diff_eq!(rest.sqrt(), 2.0_f64.sqrt() * 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_norm_and_orthogonality_are_exact() {
        let spec = LinearSpec::canonical(257, 0.3, 32).unwrap();
        let ds = sample_linear(&spec, 5).unwrap();
        let target = 256.0 * 0.09;
        for j in 0..ds.n() {
            let norm2 = ds.xi.column(j).dot(&ds.xi.column(j));
            assert!((norm2 - target).abs() <= 1e-9 * target);
            let along = ds.xi.column(j).dot(&spec.mu).abs();
            assert!(along <= 1e-9 * norm2.sqrt());
            // Label consistency: y = mu^T x.
            assert_abs_diff_eq!(spec.mu.dot(&ds.x.column(j)), ds.y[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn xor_labels_and_orthogonality() {
        let spec = XorSpec::canonical(67, 0.2, 50, 1.5, 8).unwrap();
        let ds = sample_xor(&spec, 17).unwrap();
        for j in 0..ds.n() {
            let a = spec.mu1.dot(&ds.x.column(j));
            let b = spec.mu2.dot(&ds.x.column(j));
            let label = (a * a - b * b).signum();
            assert_eq!(label, ds.y[j]);
            assert!(ds.xi.column(j).dot(&spec.mu1).abs() <= 1e-12);
            assert!(ds.xi.column(j).dot(&spec.mu2).abs() <= 1e-12);
            let norm2 = ds.xi.column(j).dot(&ds.xi.column(j));
            let target = 65.0 * 0.04;
            assert!((norm2 - target).abs() <= 1e-9 * target);
        }
        let c = ds.clusters.as_ref().unwrap();
        assert_eq!(c.mu1.len() + c.minus_mu1.len() + c.mu2.len() + c.minus_mu2.len(), 50);
    }

    #[test]
    fn sampled_gram_deviation_is_small_at_scale() {
        // d = 2048, n = 64, sigma = 0.25: the noise Gram deviates from
        // identity by well under 0.5.
        let spec = LinearSpec::canonical(2048, 0.25, 64).unwrap();
        let ds = sample_linear(&spec, 12).unwrap();
        let dev = crate::linalg::gram_deviation(ds.xi.view(), 0.25, 2047)
            .unwrap()
            .spectral_norm_dev;
        assert!(dev <= 0.5, "deviation {dev}");
    }

    #[test]
    fn xor_cluster_sizes_concentrate() {
        // |#cluster - n/4| <= 0.05 n at n = 4000.
        let spec = XorSpec::canonical(16, 0.2, 4000, 1.5, 8).unwrap();
        let ds = sample_xor(&spec, 2).unwrap();
        let c = ds.clusters.as_ref().unwrap();
        for size in [c.mu1.len(), c.minus_mu1.len(), c.mu2.len(), c.minus_mu2.len()] {
            assert!((size as f64 - 1000.0).abs() <= 200.0, "cluster size {size}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let spec = LinearSpec::canonical(32, 0.5, 16).unwrap();
        let a = sample_linear(&spec, 123).unwrap();
        let b = sample_linear(&spec, 123).unwrap();
        assert_eq!(a, b);
        // Growing n keeps earlier samples bit-identical.
        let bigger = LinearSpec::canonical(32, 0.5, 24).unwrap();
        let c = sample_linear(&bigger, 123).unwrap();
        for j in 0..16 {
            assert_eq!(a.y[j], c.y[j]);
            for i in 0..32 {
                assert_eq!(a.x[[i, j]], c.x[[i, j]]);
            }
        }
    }

    #[test]
    fn psi_flips_signal_and_keeps_noise() {
        let spec = LinearSpec::canonical(8, 0.4, 12).unwrap();
        let ds = sample_linear(&spec, 7).unwrap();
        let flipped = opposite_linear(&ds, &spec, OppositeVariant::Psi).unwrap();
        for j in 0..ds.n() {
            assert_eq!(flipped.y[j], ds.y[j]);
            assert_eq!(flipped.x[[0, j]], -ds.y[j]);
            for i in 1..8 {
                assert_eq!(flipped.x[[i, j]], ds.x[[i, j]]);
            }
        }
    }

    #[test]
    fn psi_bar_negates_noise_and_keeps_signal() {
        let spec = LinearSpec::canonical(8, 0.4, 12).unwrap();
        let ds = sample_linear(&spec, 7).unwrap();
        let bar = opposite_linear(&ds, &spec, OppositeVariant::PsiBar).unwrap();
        for j in 0..ds.n() {
            assert_eq!(bar.y[j], ds.y[j]);
            assert_eq!(bar.x[[0, j]], ds.y[j]);
            for i in 1..8 {
                assert_eq!(bar.x[[i, j]], -ds.x[[i, j]]);
            }
        }
    }

    #[test]
    fn opposite_mappings_are_involutions() {
        let spec = LinearSpec::canonical(24, 0.3, 10).unwrap();
        let ds = sample_linear(&spec, 42).unwrap();
        for variant in [OppositeVariant::Psi, OppositeVariant::PsiBar] {
            let once = opposite_linear(&ds, &spec, variant).unwrap();
            let twice = opposite_linear(&once, &spec, variant).unwrap();
            assert_eq!(ds, twice);
        }
        let xspec = XorSpec::canonical(24, 0.3, 10, 1.5, 8).unwrap();
        let xds = sample_xor(&xspec, 42).unwrap();
        let once = opposite_xor(&xds, &xspec).unwrap();
        let twice = opposite_xor(&once, &xspec).unwrap();
        assert_eq!(xds, twice);
    }

    #[test]
    fn opposite_xor_swaps_roles_per_table() {
        let spec = XorSpec::canonical(6, 0.2, 20, 1.5, 8).unwrap();
        let ds = sample_xor(&spec, 3).unwrap();
        let swapped = opposite_xor(&ds, &spec).unwrap();
        for j in 0..ds.n() {
            match ds.signal[j] {
                Signal::Mu1 => assert_eq!(swapped.signal[j], Signal::Mu2),
                Signal::MinusMu2 => assert_eq!(swapped.signal[j], Signal::MinusMu1),
                _ => {}
            }
            assert_eq!(swapped.y[j], ds.y[j]);
        }
        // Measure preserving: cluster sizes carry over under the role swap.
        let c = ds.clusters.as_ref().unwrap();
        let cs = swapped.clusters.as_ref().unwrap();
        assert_eq!(c.mu1.len(), cs.mu2.len());
        assert_eq!(c.minus_mu1.len(), cs.minus_mu2.len());
    }

    #[test]
    fn opposite_rejects_mismatched_dataset() {
        let spec = LinearSpec::canonical(8, 0.4, 12).unwrap();
        let ds = sample_linear(&spec, 7).unwrap();
        let other = LinearSpec::canonical(9, 0.4, 12).unwrap();
        assert!(opposite_linear(&ds, &other, OppositeVariant::Psi).is_err());
        let xspec = XorSpec::canonical(8, 0.4, 12, 1.5, 8).unwrap();
        let xds = sample_xor(&xspec, 7).unwrap();
        assert!(opposite_linear(&xds, &spec, OppositeVariant::Psi).is_err());
    }
}
