//! The Riemann–Liouville kernel `K(t,s) = (t-s)_+^{D-I/2}`, its grid-snapped
//! form, the Toeplitz cell weights of the discrete approximation and the
//! covariance of the limit process.
//!
//! The cell integral `n ∫_{(i-1)/n}^{i/n} (m/n - u)^A du` depends on `m - i`
//! only; with `B = A + I` it equals
//! `w_{m-i} = n B^{-1} [((m-i+1)/n)^B - ((m-i)/n)^B]`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{OfbmError, Result};
use crate::io::fmt_f64;
use crate::matfun::{mat_expm1, mat_power, operator_norm, HurstOperator, SquareMatrix};
use crate::quadrature::{adaptive_integrate, AdaptiveConfig};

/// `⌊n t⌋`, tolerant to representation error just below a grid point.
pub fn grid_index(t: f64, n: usize) -> usize {
    let x = t * n as f64;
    let snapped = (x + 1e-12 * x.abs().max(1.0)).floor();
    (snapped.max(0.0) as usize).min(n)
}

/// `⌊n t⌋ / n`.
pub fn snap(t: f64, n: usize) -> f64 {
    grid_index(t, n) as f64 / n as f64
}

/// `K(t, s) = (t - s)^{D - I/2}` for `t > s`, zero otherwise.
pub fn kernel_at(t: f64, s: f64, hurst: &HurstOperator) -> Result<SquareMatrix> {
    if t > s {
        mat_power(t - s, hurst.kernel_exponent())
    } else {
        Ok(SquareMatrix::zeros(hurst.dim()))
    }
}

/// `K^n(t, s) = K(⌊nt⌋/n, s)`.
pub fn kernel_n_at(t: f64, s: f64, n: usize, hurst: &HurstOperator) -> Result<SquareMatrix> {
    kernel_at(snap(t, n), s, hurst)
}

/// Toeplitz weight `w_k = n ∫_{k/n}^{(k+1)/n} v^{D-I/2} dv`.
pub fn weight(k: usize, n: usize, hurst: &HurstOperator) -> Result<SquareMatrix> {
    if n == 0 || k >= n {
        return Err(OfbmError::InvalidInput(format!("weight index needs 0 <= k < n, got k={k}, n={n}")));
    }
    let b = hurst.kernel_exponent().shift(1.0);
    let nf = n as f64;
    let diff = if k == 0 {
        mat_power(1.0 / nf, &b)?
    } else {
        // ((k+1)/n)^B - (k/n)^B = (k/n)^B (exp(ln(1 + 1/k) B) - I)
        let base = mat_power(k as f64 / nf, &b)?;
        let growth = mat_expm1(&b.scale((1.0 / k as f64).ln_1p()))?;
        &base * &growth
    };
    let w = b
        .solve(&diff)
        .map_err(|e| OfbmError::Invariant(format!("D + I/2 must be invertible: {e}")))?;
    Ok(w.scale(nf))
}

/// The full table `w_0 .. w_{n-1}`.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    n: usize,
    hurst: HurstOperator,
    weights: Vec<SquareMatrix>,
}

impl KernelWeights {
    pub fn new(n: usize, hurst: &HurstOperator) -> Result<Self> {
        if n == 0 {
            return Err(OfbmError::InvalidInput("grid size n must be >= 1".into()));
        }
        let weights = (0..n)
            .into_par_iter()
            .map(|k| weight(k, n, hurst))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            hurst: hurst.clone(),
            weights,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.hurst.dim()
    }

    pub fn hurst(&self) -> &HurstOperator {
        &self.hurst
    }

    #[inline]
    pub fn get(&self, k: usize) -> &SquareMatrix {
        &self.weights[k]
    }

    pub fn as_slice(&self) -> &[SquareMatrix] {
        &self.weights
    }

    /// Scalar sequence `w_k[row, col]` for `k = 0..n`.
    pub fn entry_sequence(&self, row: usize, col: usize) -> Vec<f64> {
        self.weights.iter().map(|w| w[(row, col)]).collect()
    }

    /// Weight multiplying increment `i` (1-based) in `X_n(m/n)`; zero for `i > m`.
    pub fn cell_weight(&self, m: usize, i: usize) -> Option<&SquareMatrix> {
        (i >= 1 && i <= m).then(|| &self.weights[m - i])
    }

    /// `(1/n) Σ_{i <= min(m1,m2)} w_{m1-i} w_{m2-i}ᵀ`, which is
    /// `E[X_n(m1/n) X_n(m2/n)ᵀ]` whenever every squared increment equals `1/n`.
    pub fn grid_cross_moment(&self, m1: usize, m2: usize) -> SquareMatrix {
        let d = self.dim();
        let mut acc = SquareMatrix::zeros(d);
        for i in 1..=m1.min(m2) {
            let a = &self.weights[m1 - i];
            let b = &self.weights[m2 - i];
            for r in 0..d {
                for c in 0..d {
                    let mut v = 0.0;
                    for j in 0..d {
                        v += a[(r, j)] * b[(c, j)];
                    }
                    acc[(r, c)] += v;
                }
            }
        }
        acc.scale(1.0 / self.n as f64)
    }

    /// `(1/n) Σ_i ‖w_{m1-i} - w_{m2-i}‖_F²` with out-of-range weights zero:
    /// `E‖X_n(m1/n) - X_n(m2/n)‖²` for exact-square increments.
    pub fn increment_second_moment(&self, m1: usize, m2: usize) -> f64 {
        if m1 == m2 {
            return 0.0;
        }
        let (hi, lo) = if m1 > m2 { (m1, m2) } else { (m2, m1) };
        let mut acc = 0.0;
        for i in 1..=hi {
            let a = &self.weights[hi - i];
            if i <= lo {
                let b = &self.weights[lo - i];
                acc += a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            } else {
                acc += a.as_slice().iter().map(|x| x * x).sum::<f64>();
            }
        }
        acc / self.n as f64
    }

    /// CSV with header `k,row,col,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,row,col,value")?;
        let d = self.dim();
        for (k, w) in self.weights.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    writeln!(out, "{k},{r},{c},{}", fmt_f64(w[(r, c)]))?;
                }
            }
        }
        Ok(())
    }
}

/// Quadrature settings for the covariance of the limit process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceConfig {
    pub quadrature: AdaptiveConfig,
    /// Graded substitution `u = m - x^p` clustering nodes at the singular end.
    pub grading_power: f64,
    /// Largest acceptable error estimate per entry.
    pub max_error: f64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            quadrature: AdaptiveConfig {
                order: 16,
                abs_tol: 1e-12,
                max_panels: 4000,
            },
            grading_power: 4.0,
            max_error: 1e-9,
        }
    }
}

/// Evaluates `C(t,s) = ∫_0^{t∧s} (t-u)^A ((s-u)^A)ᵀ du` and related kernel
/// integrals by adaptive Gauss–Legendre panels.
#[derive(Debug, Clone)]
pub struct CovarianceOracle {
    hurst: HurstOperator,
    config: CovarianceConfig,
}

impl CovarianceOracle {
    pub fn new(hurst: &HurstOperator) -> Self {
        Self::with_config(hurst, CovarianceConfig::default())
    }

    pub fn with_config(hurst: &HurstOperator, config: CovarianceConfig) -> Self {
        Self {
            hurst: hurst.clone(),
            config,
        }
    }

    pub fn hurst(&self) -> &HurstOperator {
        &self.hurst
    }

    fn check_time(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(OfbmError::InvalidInput(format!("time {t} outside [0, 1]")))
        }
    }

    /// `∫_0^{t∧s} f(K(t,u), K(s,u)) du` for a vector-valued `f` of length `len`.
    pub fn pair_integral<F>(&self, t: f64, s: f64, len: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&SquareMatrix, &SquareMatrix) -> Vec<f64>,
    {
        Self::check_time(t)?;
        Self::check_time(s)?;
        let m = t.min(s);
        if m == 0.0 {
            return Ok(vec![0.0; len]);
        }
        let p = self.config.grading_power;
        let a = self.hurst.kernel_exponent();
        let upper = m.powf(1.0 / p);
        let integral = adaptive_integrate(0.0, upper, len, &self.config.quadrature, |x| {
            let xp = x.powf(p);
            let r1 = t - m + xp;
            let r2 = s - m + xp;
            let k1 = mat_power(r1, a)?;
            let jac = p * x.powf(p - 1.0);
            let v = if r1 == r2 { f(&k1, &k1) } else { f(&k1, &mat_power(r2, a)?) };
            Ok(v.into_iter().map(|e| e * jac).collect())
        })?;
        if integral.error_estimate > self.config.max_error {
            return Err(OfbmError::Accuracy {
                estimate: integral.error_estimate,
                tolerance: self.config.max_error,
                panels: integral.panels,
            });
        }
        Ok(integral.value)
    }

    /// `E[X(t) X(s)ᵀ]`.
    pub fn covariance(&self, t: f64, s: f64) -> Result<SquareMatrix> {
        let d = self.hurst.dim();
        let v = self.pair_integral(t, s, d * d, |kt, ks| {
            let mut out = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    out[r * d + c] = (0..d).map(|j| kt[(r, j)] * ks[(c, j)]).sum();
                }
            }
            out
        })?;
        SquareMatrix::from_row_major(d, v)
    }

    /// Per-noise-component pieces `M_j[k,k'] = ∫ K_{k,j}(t,u) K_{k',j}(s,u) du`;
    /// they sum over `j` to `C(t,s)`.
    pub fn column_products(&self, t: f64, s: f64) -> Result<Vec<SquareMatrix>> {
        let d = self.hurst.dim();
        let v = self.pair_integral(t, s, d * d * d, |kt, ks| {
            let mut out = vec![0.0; d * d * d];
            for j in 0..d {
                for k in 0..d {
                    for k2 in 0..d {
                        out[j * d * d + k * d + k2] = kt[(k, j)] * ks[(k2, j)];
                    }
                }
            }
            out
        })?;
        v.chunks(d * d)
            .map(|c| SquareMatrix::from_row_major(d, c.to_vec()))
            .collect()
    }

    /// `∫_0^1 ‖K(t̃,u) - K(s̃,u)‖² du` in operator norm, with `t̃, s̃` snapped
    /// to the grid of size `n`.
    pub fn kernel_l2_increment(&self, t: f64, s: f64, n: usize) -> Result<f64> {
        Self::check_time(t)?;
        Self::check_time(s)?;
        if s > t {
            return Err(OfbmError::InvalidInput(format!("kernel increment needs s <= t, got s={s}, t={t}")));
        }
        if n == 0 {
            return Err(OfbmError::InvalidInput("grid size n must be >= 1".into()));
        }
        let (tt, ss) = (snap(t, n), snap(s, n));
        let gap = tt - ss;
        if gap <= 0.0 {
            return Ok(0.0);
        }
        let p = self.config.grading_power;
        let a = self.hurst.kernel_exponent();
        let finish = |r: crate::quadrature::Integral| -> Result<f64> {
            if r.error_estimate > self.config.max_error {
                return Err(OfbmError::Accuracy {
                    estimate: r.error_estimate,
                    tolerance: self.config.max_error,
                    panels: r.panels,
                });
            }
            Ok(r.value[0])
        };
        // ∫_0^s̃ ‖(t̃-u)^A - (s̃-u)^A‖², u = s̃ - x^p
        let overlap = if ss > 0.0 {
            finish(adaptive_integrate(0.0, ss.powf(1.0 / p), 1, &self.config.quadrature, |x| {
                let xp = x.powf(p);
                let diff = &mat_power(gap + xp, a)? - &mat_power(xp, a)?;
                let nrm = operator_norm(&diff)?;
                Ok(vec![nrm * nrm * p * x.powf(p - 1.0)])
            })?)?
        } else {
            0.0
        };
        // ∫_s̃^t̃ ‖(t̃-u)^A‖², u = t̃ - x^p
        let tail = finish(adaptive_integrate(0.0, gap.powf(1.0 / p), 1, &self.config.quadrature, |x| {
            let xp = x.powf(p);
            let nrm = operator_norm(&mat_power(xp, a)?)?;
            Ok(vec![nrm * nrm * p * x.powf(p - 1.0)])
        })?)?;
        Ok(overlap + tail)
    }
}

/// `E[X(t) X(s)ᵀ]` with default quadrature settings.
pub fn covariance(t: f64, s: f64, hurst: &HurstOperator) -> Result<SquareMatrix> {
    CovarianceOracle::new(hurst).covariance(t, s)
}

/// [`CovarianceOracle::kernel_l2_increment`] with default settings.
pub fn kernel_l2_increment(t: f64, s: f64, n: usize, hurst: &HurstOperator) -> Result<f64> {
    CovarianceOracle::new(hurst).kernel_l2_increment(t, s, n)
}

/// CSV with header `t,s,row,col,value` for every ordered pair of `grid`.
pub fn write_covariance_csv<W: Write>(oracle: &CovarianceOracle, grid: &[f64], mut out: W) -> Result<()> {
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&t| grid.iter().map(move |&s| (t, s))).collect();
    let tables = pairs
        .par_iter()
        .map(|&(t, s)| oracle.covariance(t, s))
        .collect::<Result<Vec<_>>>()?;
    writeln!(out, "t,s,row,col,value")?;
    let d = oracle.hurst().dim();
    for ((t, s), c) in pairs.iter().zip(&tables) {
        for r in 0..d {
            for col in 0..d {
                writeln!(out, "{},{},{r},{col},{}", fmt_f64(*t), fmt_f64(*s), fmt_f64(c[(r, col)]))?;
            }
        }
    }
    Ok(())
}
