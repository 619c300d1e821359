//! Dense linear-algebra kernels and random-matrix diagnostics.
//!
//! Everything here works on the n x n Gram matrix of the noise block rather
//! than on d x d objects, since d >> n throughout. The kernels are
//! hand-rolled (Cholesky, Jacobi eigenvalues, symmetric power iteration);
//! at these sizes (n up to a few hundred) they are plenty fast and keep the
//! crate free of external BLAS/LAPACK backends.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::rng;

/// `relu^h` activation: `phi(z) = max(0, z)^h` for exponent `h` in `[1, 2)`.
pub fn activation(z: f64, h: f64) -> f64 {
    if z > 0.0 {
        z.powf(h)
    } else {
        0.0
    }
}

/// Derivative `h * max(0, z)^(h-1)`, taken as 0 for `z <= 0`.
///
/// For `h > 1` this is the true derivative everywhere; for `h = 1` it is the
/// subgradient choice 0 at the kink.
pub fn activation_grad(z: f64, h: f64) -> f64 {
    if z > 0.0 {
        h * z.powf(h - 1.0)
    } else {
        0.0
    }
}

/// Validates an activation exponent.
pub fn check_exponent(h: f64) -> Result<()> {
    if !(1.0..2.0).contains(&h) {
        return Err(Error::invalid(format!("activation exponent h={h} outside [1, 2)")));
    }
    Ok(())
}

/// Spectral deviation of a noise block from isotropy:
/// `|| (1/(sigma^2 d')) Xi^T Xi - I ||_2` together with the dimensions that
/// produced it. The reference scale `sqrt(n/d')` is reported as a ratio, not
/// checked against any constant: the concentration constant is not pinned.
#[derive(Debug, Clone)]
pub struct GramDeviation {
    pub spectral_norm_dev: f64,
    pub d_prime: usize,
    pub n: usize,
}

impl GramDeviation {
    /// `dev / sqrt(n/d')`: how many "units" of the expected scale were observed.
    pub fn ratio_to_scale(&self) -> f64 {
        self.spectral_norm_dev / (self.n as f64 / self.d_prime as f64).sqrt()
    }

    /// Right-hand side `C * sqrt(n/d')` for a caller-chosen constant.
    pub fn bound_rhs(&self, c: f64) -> f64 {
        c * (self.n as f64 / self.d_prime as f64).sqrt()
    }
}

/// Computes the spectral norm of `(1/(sigma^2 d')) Xi^T Xi - I`.
///
/// `Xi` is d x n with columns of squared norm `sigma^2 d'`. Small matrices
/// (n <= 64) go through a full Jacobi eigendecomposition; larger ones use
/// symmetric power iteration with a `10 n` iteration cap and the Jacobi
/// fallback if the iteration has not settled.
pub fn gram_deviation(xi: ArrayView2<f64>, sigma: f64, d_prime: usize) -> Result<GramDeviation> {
    let n = xi.ncols();
    if n == 0 {
        return Err(Error::invalid("gram_deviation: empty matrix"));
    }
    if sigma <= 0.0 {
        return Err(Error::invalid("gram_deviation: sigma must be positive"));
    }
    let scale = 1.0 / (sigma * sigma * d_prime as f64);
    let mut m = xi.t().dot(&xi);
    m.mapv_inplace(|v| v * scale);
    for j in 0..n {
        m[[j, j]] -= 1.0;
    }
    let dev = spectral_norm_symmetric(&m);
    Ok(GramDeviation { spectral_norm_dev: dev, d_prime, n })
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_symmetric(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n <= 64 {
        return jacobi_eigenvalues(m).iter().fold(0.0, |a, &l| a.max(l.abs()));
    }
    let mut rng = rng::substream(rng::tags::POWER_ITER, 0);
    let mut v: Array1<f64> =
        Array1::from_shape_fn(n, |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let mut norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0_f64;
    for _ in 0..10 * n {
        let mut w = m.dot(&v);
        norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        w.mapv_inplace(|x| x / norm);
        let rayleigh = w.dot(&m.dot(&w));
        if (rayleigh.abs() - lambda.abs()).abs() <= 1e-8 * rayleigh.abs().max(1e-300) {
            return rayleigh.abs();
        }
        lambda = rayleigh;
        v = w;
    }
    // Power iteration can cycle when the top eigenvalues are paired +/-.
    jacobi_eigenvalues(m).iter().fold(0.0, |a, &l| a.max(l.abs()))
}

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi method.
pub fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let (vals, _) = jacobi_eigen(m, false);
    vals
}

/// Eigenvalues and (optionally) eigenvectors of a symmetric matrix.
///
/// Returns `(values, vectors)` where column k of `vectors` is the eigenvector
/// for `values[k]`. Vectors are computed only when `with_vectors` is set.
pub fn jacobi_eigen(m: &Array2<f64>, with_vectors: bool) -> (Vec<f64>, Option<Array2<f64>>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigen: matrix must be square");
    let mut a = m.clone();
    let mut q = if with_vectors { Some(Array2::eye(n)) } else { None };
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for r in p + 1..n {
                off += a[[p, r]] * a[[p, r]];
            }
        }
        let scale: f64 = (0..n).map(|i| a[[i, i]] * a[[i, i]]).sum::<f64>().max(1e-300);
        if off <= 1e-28 * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apq = a[[p, r]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[r, r]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, r]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, r]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[r, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[r, k]] = s * apk + c * aqk;
                }
                if let Some(q) = q.as_mut() {
                    for k in 0..n {
                        let qkp = q[[k, p]];
                        let qkq = q[[k, r]];
                        q[[k, p]] = c * qkp - s * qkq;
                        q[[k, r]] = s * qkp + c * qkq;
                    }
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), q)
}

/// Cholesky factor of a symmetric positive-definite matrix (lower triangular).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Array2<f64>,
}

impl CholeskyFactor {
    /// Factors `g = L L^T`. Fails with the smallest eigenvalue when `g` is not
    /// numerically positive definite.
    pub fn new(g: &Array2<f64>) -> Result<Self> {
        let n = g.nrows();
        let mut l = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut sum = g[[i, j]];
                for k in 0..j {
                    sum -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if sum <= 0.0 {
                        let min_eig = jacobi_eigenvalues(g).into_iter().fold(f64::INFINITY, f64::min);
                        return Err(Error::SingularGram { min_eig });
                    }
                    l[[i, i]] = sum.sqrt();
                } else {
                    l[[i, j]] = sum / l[[j, j]];
                }
            }
        }
        Ok(CholeskyFactor { l })
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut y = b.to_owned();
        for i in 0..n {
            for k in 0..i {
                let v = y[k];
                y[i] -= self.l[[i, k]] * v;
            }
            y[i] /= self.l[[i, i]];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = y[k];
                y[i] -= self.l[[k, i]] * v;
            }
            y[i] /= self.l[[i, i]];
        }
        y
    }

    /// Rough condition estimate from the squared diagonal spread.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.l.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for i in 0..n {
            let d = self.l[[i, i]] * self.l[[i, i]];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi / lo
    }
}

/// Shared context for repeated minimum-norm solves against one noise block.
pub struct MinNormContext<'a> {
    xi: ArrayView2<'a, f64>,
    factor: CholeskyFactor,
}

impl<'a> MinNormContext<'a> {
    pub fn new(xi: ArrayView2<'a, f64>) -> Result<Self> {
        let gram = xi.t().dot(&xi);
        let factor = CholeskyFactor::new(&gram)?;
        let cond = factor.condition_estimate();
        if cond > 1e10 {
            eprintln!("warning: noise Gram condition estimate {cond:.2e} exceeds 1e10; min-norm solves may lose accuracy");
        }
        Ok(MinNormContext { xi, factor })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.factor.condition_estimate()
    }

    /// Minimum-norm `v` with `Xi^T v = c`, via `v = Xi (Xi^T Xi)^{-1} c`.
    pub fn solve(&self, c: ArrayView1<f64>) -> Result<Array1<f64>> {
        let coeff = self.factor.solve(c);
        let v = self.xi.dot(&coeff);
        let resid = &self.xi.t().dot(&v) - &c;
        let c_inf = c.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        let r_inf = resid.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        if c_inf > 0.0 && r_inf > 1e-8 * c_inf {
            // One round of iterative refinement before giving up.
            let corr = self.factor.solve(resid.view());
            let v2 = &v - &self.xi.dot(&corr);
            let r2 = &self.xi.t().dot(&v2) - &c;
            let r2_inf = r2.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            if r2_inf > 1e-8 * c_inf {
                return Err(Error::invalid(format!(
                    "min_norm_solve residual {r2_inf:.3e} exceeds 1e-8 * {c_inf:.3e}"
                )));
            }
            return Ok(v2);
        }
        Ok(v)
    }
}

/// One-shot minimum-norm solve: `argmin ||v|| s.t. Xi^T v = c`.
pub fn min_norm_solve(xi: ArrayView2<f64>, c: ArrayView1<f64>) -> Result<Array1<f64>> {
    MinNormContext::new(xi)?.solve(c)
}
