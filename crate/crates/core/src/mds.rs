//! Martingale-difference arrays `ξ_{i,k}`, `i = 1..n`, `k = 1..d`, their
//! partial sums and empirical checks of the boundedness, quadratic-variation
//! and Lindeberg conditions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OfbmError, Result};
use crate::io::fmt_f64;
use crate::kernel::grid_index;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdsKind {
    /// Independent signs `±1/√n`.
    IidRademacher,
    /// `s_i ε_i / √n` with `ε_i` independent signs and `s_i = +1` when the
    /// column's running sum before step `i` is `<= 0`, else `-1`.
    PredictableSign,
    /// Rademacher with one increment of size `2C/√n`; breaks the bound.
    ViolatingSpike,
}

impl MdsKind {
    /// Whether every squared increment equals `1/n` exactly.
    pub fn is_exact_square(self) -> bool {
        matches!(self, Self::IidRademacher | Self::PredictableSign)
    }
}

impl FromStr for MdsKind {
    type Err = OfbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rademacher" | "iid-rademacher" => Ok(Self::IidRademacher),
            "predictable-sign" => Ok(Self::PredictableSign),
            "violating-spike" => Ok(Self::ViolatingSpike),
            other => Err(OfbmError::InvalidInput(format!("unknown generator '{other}'"))),
        }
    }
}

impl fmt::Display for MdsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::IidRademacher => "iid-rademacher",
            Self::PredictableSign => "predictable-sign",
            Self::ViolatingSpike => "violating-spike",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    pub kind: MdsKind,
    /// Bound `C >= 1` with `max |ξ| <= C/√n`.
    #[serde(rename = "C")]
    pub bound: f64,
    pub seed: u64,
}

impl MdsConfig {
    pub fn new(kind: MdsKind, bound: f64, seed: u64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 1.0) {
            return Err(OfbmError::InvalidInput(format!("bound constant C must be >= 1, got {bound}")));
        }
        Ok(Self { kind, bound, seed })
    }

    pub fn rademacher(seed: u64) -> Self {
        Self {
            kind: MdsKind::IidRademacher,
            bound: 1.0,
            seed,
        }
    }

    pub fn predictable_sign(seed: u64) -> Self {
        Self {
            kind: MdsKind::PredictableSign,
            bound: 1.0,
            seed,
        }
    }
}

/// One realization of the increment array, row `i-1` holding `η_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    config: MdsConfig,
}

impl IncrementMatrix {
    /// Wraps externally supplied increments (row-major `n x d`).
    pub fn from_values(n: usize, d: usize, values: Vec<f64>, config: MdsConfig) -> Result<Self> {
        if n == 0 || d == 0 || values.len() != n * d {
            return Err(OfbmError::InvalidInput(format!(
                "increment array needs n, d >= 1 and n*d values (n={n}, d={d}, got {})",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OfbmError::InvalidInput("increments must be finite".into()));
        }
        Ok(Self { n, d, values, config })
    }

    pub fn zeros(n: usize, d: usize, config: MdsConfig) -> Result<Self> {
        Self::from_values(n, d, vec![0.0; n * d], config)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn config(&self) -> &MdsConfig {
        &self.config
    }

    /// `ξ_{i,k}` with `i` 1-based and `k` 0-based.
    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[(i - 1) * self.d + k]
    }

    /// `η_i` (1-based).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[(i - 1) * self.d..i * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(k).step_by(self.d).copied()
    }

    /// CSV with header `i,k,value`, both indices 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,k,value")?;
        for i in 1..=self.n {
            for k in 0..self.d {
                writeln!(out, "{i},{},{}", k + 1, fmt_f64(self.get(i, k)))?;
            }
        }
        Ok(())
    }
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Replication 0 of the configured generator.
pub fn generate(n: usize, d: usize, config: &MdsConfig) -> Result<IncrementMatrix> {
    generate_replication(n, d, config, 0)
}

/// Replication `replication`; column `k` draws from substream `(seed, k, replication)`.
pub fn generate_replication(n: usize, d: usize, config: &MdsConfig, replication: u64) -> Result<IncrementMatrix> {
    if n == 0 || d == 0 {
        return Err(OfbmError::InvalidInput(format!("need n, d >= 1, got n={n}, d={d}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut values = vec![0.0; n * d];
    for k in 0..d {
        let mut rng = substream(config.seed, k, replication);
        match config.kind {
            MdsKind::IidRademacher | MdsKind::ViolatingSpike => {
                for i in 0..n {
                    values[i * d + k] = sign(&mut rng) * scale;
                }
            }
            MdsKind::PredictableSign => {
                let mut running = 0.0;
                for i in 0..n {
                    let s = if running <= 0.0 { 1.0 } else { -1.0 };
                    let x = s * sign(&mut rng) * scale;
                    values[i * d + k] = x;
                    running += x;
                }
            }
        }
    }
    if config.kind == MdsKind::ViolatingSpike {
        let idx = (n / 2) * d;
        values[idx] = values[idx].signum() * 2.0 * config.bound * scale;
    }
    IncrementMatrix::from_values(n, d, values, *config)
}

/// `Σ_{i <= ⌊nt⌋} η_i`.
pub fn partial_sum(inc: &IncrementMatrix, t: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(OfbmError::InvalidInput(format!("time {t} outside [0, 1]")));
    }
    let m = grid_index(t, inc.n);
    let mut acc = vec![0.0; inc.d];
    for row in inc.values[..m * inc.d].chunks(inc.d) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvPoint {
    pub t: f64,
    /// `Σ_{i <= ⌊nt⌋} ξ_{i,k}²` per column.
    pub sums: Vec<f64>,
}

/// Realized statistics behind the martingale-difference conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "C")]
    pub bound: f64,
    pub epsilon: f64,
    /// `√n max |ξ|`.
    pub max_abs_scaled: f64,
    /// `max |n ξ² - 1|`.
    pub square_ratio_max_deviation: f64,
    pub qv_curve: Vec<QvPoint>,
    /// `max |qv(t) - t|` over the reported curve.
    pub qv_curve_max_deviation: f64,
    /// `sup_t |qv(t) - t|` over all `t ∈ [0, 1]`.
    pub qv_sup_deviation: f64,
    /// `max_k Σ_i ξ_{i,k}² 1{|ξ_{i,k}| > ε}`.
    pub lindeberg_sum: f64,
    pub bounded_increments_pass: bool,
    pub square_ratio_pass: bool,
    pub quadratic_variation_pass: bool,
    pub lindeberg_pass: bool,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.bounded_increments_pass && self.square_ratio_pass && self.quadratic_variation_pass && self.lindeberg_pass
    }
}

/// Rounding slack for the exact identities the two-point generators satisfy.
const EXACT_SLACK: f64 = 1e-12;

pub fn check_conditions(inc: &IncrementMatrix, epsilon: f64) -> Result<ConditionReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OfbmError::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
    }
    let (n, d) = (inc.n, inc.d);
    let nf = n as f64;
    let max_abs = inc.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_abs_scaled = nf.sqrt() * max_abs;
    let square_ratio_max_deviation = inc.values.iter().fold(0.0f64, |m, v| m.max((nf * v * v - 1.0).abs()));

    // cumulative squares per column, qv[m][k] = Σ_{i<=m} ξ²
    let mut qv = vec![vec![0.0; d]; n + 1];
    for i in 1..=n {
        for k in 0..d {
            let x = inc.get(i, k);
            qv[i][k] = qv[i - 1][k] + x * x;
        }
    }
    let mut qv_sup_deviation: f64 = 0.0;
    for (m, row) in qv.iter().enumerate() {
        let left = m as f64 / nf;
        let right = if m < n { (m + 1) as f64 / nf } else { 1.0 };
        for &q in row {
            qv_sup_deviation = qv_sup_deviation.max((q - left).abs()).max((q - right).abs());
        }
    }
    let qv_curve: Vec<QvPoint> = (1..=10)
        .map(|j| {
            let t = j as f64 / 10.0;
            QvPoint {
                t,
                sums: qv[grid_index(t, n)].clone(),
            }
        })
        .collect();
    let qv_curve_max_deviation = qv_curve
        .iter()
        .flat_map(|p| p.sums.iter().map(move |q| (q - p.t).abs()))
        .fold(0.0, f64::max);

    let lindeberg_sum = (0..d)
        .map(|k| inc.column(k).filter(|x| x.abs() > epsilon).fold(0.0, |s, x| s + x * x))
        .fold(0.0, f64::max);

    let slack_n = 1.0 / nf + EXACT_SLACK;
    Ok(ConditionReport {
        n,
        d,
        bound: inc.config.bound,
        epsilon,
        max_abs_scaled,
        square_ratio_max_deviation,
        qv_curve,
        qv_curve_max_deviation,
        qv_sup_deviation,
        lindeberg_sum,
        bounded_increments_pass: max_abs_scaled <= inc.config.bound * (1.0 + EXACT_SLACK),
        square_ratio_pass: square_ratio_max_deviation <= EXACT_SLACK,
        quadratic_variation_pass: qv_sup_deviation <= slack_n,
        lindeberg_pass: lindeberg_sum <= EXACT_SLACK,
    })
}
