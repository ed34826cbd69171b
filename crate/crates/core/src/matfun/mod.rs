//! Real matrix functions: exponential, fractional powers `r^A`, spectral
//! norm and real-part spectral bounds, plus the Hurst operator type that
//! every kernel is parameterized by.

mod eigen;
mod expm;
mod matrix;

use serde::{Deserialize, Serialize};

pub use eigen::{eigenvalues, symmetric_eigenvalues};
pub use expm::{mat_exp, mat_expm1};
pub use matrix::SquareMatrix;

use crate::error::{OfbmError, Result};

/// Extreme real parts of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// `(min Re λ, max Re λ)` over the complex spectrum of `a`.
pub fn spectral_real_bounds(a: &SquareMatrix) -> Result<SpectralBounds> {
    let ev = eigenvalues(a)?;
    let lambda_min = ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let lambda_max = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectralBounds { lambda_min, lambda_max })
}

/// Spectral norm `max_{|x|=1} |Ax|`.
pub fn operator_norm(a: &SquareMatrix) -> Result<f64> {
    a.ensure_finite()?;
    if a.dim() == 1 {
        return Ok(a[(0, 0)].abs());
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s = a.scale(1.0 / scale);
    let gram = &s.transpose() * &s;
    let ev = symmetric_eigenvalues(&gram)?;
    Ok(scale * ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// `r^A = exp((ln r) A)`.
///
/// `r = 0` yields the zero matrix, the limit of `r^A` as `r -> 0+`, which
/// exists only when every eigenvalue of `A` has positive real part.
pub fn mat_power(r: f64, a: &SquareMatrix) -> Result<SquareMatrix> {
    if !r.is_finite() || r < 0.0 {
        return Err(OfbmError::Domain(format!("matrix power base must be finite and >= 0, got {r}")));
    }
    if r == 0.0 {
        let bounds = spectral_real_bounds(a)?;
        if bounds.lambda_min <= 0.0 {
            return Err(OfbmError::Domain(format!(
                "0^A undefined: min real eigenvalue {} is not positive",
                bounds.lambda_min
            )));
        }
        return Ok(SquareMatrix::zeros(a.dim()));
    }
    if r == 1.0 {
        a.ensure_finite()?;
        return Ok(SquareMatrix::identity(a.dim()));
    }
    mat_exp(&a.scale(r.ln()))
}

/// A matrix exponent `D` with `1/2 < λ_D <= Λ_D < 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct HurstOperator {
    matrix: SquareMatrix,
    bounds: SpectralBounds,
    kernel_exponent: SquareMatrix,
}

impl HurstOperator {
    pub fn new(matrix: SquareMatrix) -> Result<Self> {
        matrix.ensure_finite()?;
        let bounds = spectral_real_bounds(&matrix)?;
        if !(bounds.lambda_min > 0.5 && bounds.lambda_max < 1.0) {
            return Err(OfbmError::InvalidInput(format!(
                "Hurst operator needs 1/2 < min Re eigenvalue and max Re eigenvalue < 1; \
                 got lambda_D = {:.17}, Lambda_D = {:.17}",
                bounds.lambda_min, bounds.lambda_max
            )));
        }
        let kernel_exponent = matrix.shift(-0.5);
        Ok(Self {
            matrix,
            bounds,
            kernel_exponent,
        })
    }

    /// Scalar operator `h I_d`.
    pub fn scalar(h: f64, dim: usize) -> Result<Self> {
        Self::new(SquareMatrix::identity(dim).scale(h))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    #[inline]
    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    /// `D - I/2`, the exponent of the Riemann-Liouville kernel.
    #[inline]
    pub fn kernel_exponent(&self) -> &SquareMatrix {
        &self.kernel_exponent
    }

    /// `H = (λ_D + 1/2) / 2`, the Hölder index paired with the default δ.
    pub fn default_holder_index(&self) -> f64 {
        0.5 * (self.bounds.lambda_min + 0.5)
    }
}

impl TryFrom<SquareMatrix> for HurstOperator {
    type Error = OfbmError;

    fn try_from(m: SquareMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<HurstOperator> for SquareMatrix {
    fn from(h: HurstOperator) -> Self {
        h.matrix
    }
}

/// Slack `δ` in the power bounds `‖r^D‖ <= K1 r^{λ_D-δ}` (`r <= 1`) and
/// `‖r^D‖ <= K2 r^{Λ_D+δ}` (`r >= 1`), with `H = λ_D - δ > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundWitness {
    pub delta: f64,
    pub h: f64,
    /// Constants fitted from data, if any.
    pub k1: Option<f64>,
    pub k2: Option<f64>,
}

impl BoundWitness {
    pub fn new(hurst: &HurstOperator, delta: f64) -> Result<Self> {
        let lambda = hurst.bounds().lambda_min;
        if !(delta > 0.0 && delta < lambda - 0.5) {
            return Err(OfbmError::InvalidInput(format!(
                "delta must lie in (0, lambda_D - 1/2) = (0, {}), got {delta}",
                lambda - 0.5
            )));
        }
        Ok(Self {
            delta,
            h: lambda - delta,
            k1: None,
            k2: None,
        })
    }

    /// `δ = (λ_D - 1/2) / 2`.
    pub fn default_for(hurst: &HurstOperator) -> Self {
        let delta = 0.5 * (hurst.bounds().lambda_min - 0.5);
        Self {
            delta,
            h: hurst.bounds().lambda_min - delta,
            k1: None,
            k2: None,
        }
    }

    /// Copies the fitted constants of a report into the witness.
    pub fn with_fit(mut self, report: &PowerBoundReport) -> Self {
        self.k1 = report.small.fitted_constant;
        self.k2 = report.large.fitted_constant;
        self
    }
}

/// Fitted constant for one regime of the power bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    pub exponent: f64,
    pub points: usize,
    /// `sup ‖r^D‖ / r^exponent` over the grid, `None` for an empty regime.
    pub fitted_constant: Option<f64>,
    /// Same supremum over the grid with geometric midpoints inserted.
    pub refined_constant: Option<f64>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBoundReport {
    pub small: RegimeFit,
    pub large: RegimeFit,
}

/// Relative change in the fitted constant tolerated when the grid is refined.
pub const POWER_BOUND_STABILITY: f64 = 0.05;

fn fit_regime(a: &SquareMatrix, exponent: f64, grid: &[f64]) -> Result<RegimeFit> {
    let ratio = |r: f64| -> Result<f64> { Ok(operator_norm(&mat_power(r, a)?)? / r.powf(exponent)) };
    let sup = |pts: &[f64]| -> Result<Option<f64>> {
        let mut best: Option<f64> = None;
        for &r in pts {
            let v = ratio(r)?;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
        Ok(best)
    };
    let fitted = sup(grid)?;
    let mut refined_grid: Vec<f64> = grid.to_vec();
    refined_grid.extend(grid.windows(2).map(|w| (w[0] * w[1]).sqrt()));
    let refined = sup(&refined_grid)?;
    let stable = match (fitted, refined) {
        (Some(f), Some(r)) => f.is_finite() && r.is_finite() && (r - f).abs() <= POWER_BOUND_STABILITY * f,
        _ => false,
    };
    Ok(RegimeFit {
        exponent,
        points: grid.len(),
        fitted_constant: fitted,
        refined_constant: refined,
        stable,
    })
}

/// Fits the smallest constants making the two-regime power bound hold on
/// `grid`; `r = 1` counts toward both regimes.
pub fn verify_power_bound(hurst: &HurstOperator, witness: &BoundWitness, grid: &[f64]) -> Result<PowerBoundReport> {
    if grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(OfbmError::InvalidInput("power-bound grid must lie in (0, inf)".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let small: Vec<f64> = sorted.iter().copied().filter(|&r| r <= 1.0).collect();
    let large: Vec<f64> = sorted.iter().copied().filter(|&r| r >= 1.0).collect();
    let b = hurst.bounds();
    Ok(PowerBoundReport {
        small: fit_regime(hurst.matrix(), b.lambda_min - witness.delta, &small)?,
        large: fit_regime(hurst.matrix(), b.lambda_max + witness.delta, &large)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn power_of_one_is_identity() {
        let a = m(&[&[0.3, -2.0], &[5.0, 0.1]]);
        assert_eq!(mat_power(1.0, &a).unwrap(), SquareMatrix::identity(2));
    }

    #[test]
    fn diagonal_power() {
        let p = mat_power(4.0, &SquareMatrix::from_diag(&[0.75, 0.6])).unwrap();
        assert!((p[(0, 0)] - 2.828_427_124_746_19).abs() < 1e-14);
        assert!((p[(1, 1)] - 2.297_396_709_994_07).abs() < 1e-14);
    }

    #[test]
    fn jordan_block_power() {
        let e = std::f64::consts::E;
        let p = mat_power(e, &m(&[&[0.75, 1.0], &[0.0, 0.75]])).unwrap();
        let c = 0.75f64.exp();
        assert!(p.max_abs_diff(&m(&[&[c, c], &[0.0, c]])) < 1e-14);
    }

    #[test]
    fn power_domain_errors() {
        let a = SquareMatrix::from_diag(&[0.5, 0.2]);
        assert!(matches!(mat_power(-1.0, &a), Err(OfbmError::Domain(_))));
        assert_eq!(mat_power(0.0, &a).unwrap(), SquareMatrix::zeros(2));
        let bad = SquareMatrix::from_diag(&[0.5, 0.0]);
        assert!(matches!(mat_power(0.0, &bad), Err(OfbmError::Domain(_))));
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&SquareMatrix::identity(4)).unwrap(), 1.0);
        assert!((operator_norm(&SquareMatrix::from_diag(&[2.0, -3.0])).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_bounds_examples() {
        let b = spectral_real_bounds(&SquareMatrix::from_diag(&[0.6, 0.9])).unwrap();
        assert_eq!((b.lambda_min, b.lambda_max), (0.6, 0.9));
        let b = spectral_real_bounds(&m(&[&[0.7, -0.3], &[0.3, 0.7]])).unwrap();
        assert!((b.lambda_min - 0.7).abs() < 1e-14 && (b.lambda_max - 0.7).abs() < 1e-14);
    }

    #[test]
    fn hurst_operator_validation_reports_bounds() {
        let err = HurstOperator::new(SquareMatrix::from_diag(&[0.4, 0.9])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda_D = 0.4"), "{msg}");
        assert!(msg.contains("Lambda_D = 0.9"), "{msg}");
        assert!(HurstOperator::new(SquareMatrix::from_diag(&[0.6, 1.0])).is_err());
        let ok = HurstOperator::from_rows(&[vec![0.75, 0.2], vec![0.0, 0.6]]).unwrap();
        assert!((ok.bounds().lambda_min - 0.6).abs() < 1e-10);
        assert!((ok.bounds().lambda_max - 0.75).abs() < 1e-10);
    }

    #[test]
    fn witness_validation_and_default() {
        let d = HurstOperator::scalar(0.75, 1).unwrap();
        assert!(BoundWitness::new(&d, 0.25).is_err());
        assert!(BoundWitness::new(&d, 0.0).is_err());
        let w = BoundWitness::default_for(&d);
        assert!((w.delta - 0.125).abs() < 1e-15);
        assert!((w.h - 0.625).abs() < 1e-15);
    }

    fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let (a, b) = (lo.log10(), hi.log10());
        let steps = ((b - a) * per_decade as f64).round() as usize;
        (0..=steps).map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64)).collect()
    }

    #[test]
    fn scalar_power_bound_constant_is_one() {
        let d = HurstOperator::scalar(0.75, 1).unwrap();
        let w = BoundWitness::new(&d, 0.1).unwrap();
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let rep = verify_power_bound(&d, &w, &grid).unwrap();
        assert!((rep.small.fitted_constant.unwrap() - 1.0).abs() < 1e-14);
        assert!(rep.small.stable);
    }

    #[test]
    fn diagonal_power_bound_constant_is_one() {
        let d = HurstOperator::new(SquareMatrix::from_diag(&[0.6, 0.9])).unwrap();
        let w = BoundWitness::new(&d, 0.05).unwrap();
        let rep = verify_power_bound(&d, &w, &log_grid(1e-4, 1.0, 10)).unwrap();
        assert!((rep.small.fitted_constant.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jordan_power_bound_stabilizes() {
        let d = HurstOperator::from_rows(&[vec![0.75, 1.0], vec![0.0, 0.75]]).unwrap();
        let w = BoundWitness::new(&d, 0.1).unwrap();
        let fits: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&lo| {
                let rep = verify_power_bound(&d, &w, &log_grid(lo, 1.0, 20)).unwrap();
                rep.small.fitted_constant.unwrap()
            })
            .collect();
        assert!(fits.iter().all(|k| k.is_finite()));
        assert!(fits.windows(2).all(|p| p[1] >= p[0] - 1e-12), "{fits:?}");
        let last = fits[fits.len() - 1];
        let prev = fits[fits.len() - 2];
        assert!((last - prev).abs() <= 0.01 * last, "{fits:?}");
        let rep = verify_power_bound(&d, &w, &log_grid(1e-6, 1e3, 20)).unwrap();
        assert!(rep.small.stable && rep.large.stable);
    }
}
