//! Deterministic and Monte Carlo checks of the ingredients of weak
//! convergence: quadratic sums, covariance limits, Gaussian marginals,
//! operator self-similarity, the increment modulus, and Donsker's theorem for
//! the driving sequence.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{OfbmError, Result};
use crate::kernel::{grid_index, snap, CovarianceOracle, KernelWeights};
use crate::matfun::{mat_power, verify_power_bound, BoundWitness, HurstOperator, SquareMatrix};
use crate::mds::{generate, generate_replication, IncrementMatrix, MdsConfig};
use crate::simulate::{accumulate_replications, SimulationPlan, Simulator};

/// Half-width of the asymptotic 95% Kolmogorov–Smirnov band is `KS_95 / √M`.
pub const KS_95: f64 = 1.36;

/// `S = Σ_l a_l ⟨b, X(t_l)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    pub times: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearFunctional {
    pub fn new(times: Vec<f64>, coefficients: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != coefficients.len() {
            return Err(OfbmError::InvalidInput(format!(
                "functional needs q >= 1 times with one coefficient each, got {} times and {} coefficients",
                times.len(),
                coefficients.len()
            )));
        }
        if b.is_empty() {
            return Err(OfbmError::InvalidInput("functional vector b is empty".into()));
        }
        if times.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(OfbmError::InvalidInput("functional times must lie in (0, 1]".into()));
        }
        if coefficients.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(OfbmError::InvalidInput("functional coefficients must be finite".into()));
        }
        if coefficients.iter().all(|&a| a == 0.0) || b.iter().all(|&x| x == 0.0) {
            return Err(OfbmError::Domain("functional is identically zero".into()));
        }
        Ok(Self { times, coefficients, b })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.b.len() != d {
            return Err(OfbmError::InvalidInput(format!("b has length {}, process dimension is {d}", self.b.len())));
        }
        Ok(())
    }

    pub fn evaluate(&self, path: &crate::simulate::PathGrid) -> f64 {
        self.times
            .iter()
            .zip(&self.coefficients)
            .map(|(&t, a)| a * dot(&self.b, path.at(t)))
            .sum()
    }

    fn quadratic_form(&self, mut block: impl FnMut(usize, usize) -> Result<SquareMatrix>) -> Result<f64> {
        let mut v = 0.0;
        let q = self.times.len();
        for l in 0..q {
            for k in 0..q {
                let c = block(l, k)?;
                v += self.coefficients[l] * self.coefficients[k] * dot(&self.b, &c.mul_vec(&self.b));
            }
        }
        Ok(v)
    }

    /// `Var S` under the limit law.
    pub fn limit_variance(&self, oracle: &CovarianceOracle) -> Result<f64> {
        self.check_dim(oracle.hurst().dim())?;
        self.quadratic_form(|l, k| oracle.covariance(self.times[l], self.times[k]))
    }

    /// `Var S_n` for increments with `ξ² = 1/n`.
    pub fn grid_variance(&self, weights: &KernelWeights) -> Result<f64> {
        self.check_dim(weights.dim())?;
        let n = weights.n();
        self.quadratic_form(|l, k| Ok(weights.grid_cross_moment(grid_index(self.times[l], n), grid_index(self.times[k], n))))
    }
}

/// Knobs shared by the checks; each check reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    pub ladder: Vec<usize>,
    pub replications: usize,
    /// Lindeberg threshold.
    pub epsilon: f64,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Multiple of the 95% KS band used as the pass bar.
    pub ks_factor: f64,
    /// Width of Monte Carlo bands in standard errors.
    pub band_sigmas: f64,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            ladder: (6..=12).map(|p| 1usize << p).collect(),
            replications: 20_000,
            epsilon: 0.1,
            relative_tolerance: 0.05,
            absolute_tolerance: 1e-7,
            ks_factor: 3.0,
            band_sigmas: 4.0,
            times: vec![0.25, 0.5, 0.75, 1.0],
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder[0] == 0 || self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OfbmError::InvalidInput("n-ladder must be non-empty, positive and strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(OfbmError::InvalidInput("replications must be >= 1".into()));
        }
        let tolerances = [
            self.epsilon,
            self.relative_tolerance,
            self.absolute_tolerance,
            self.ks_factor,
            self.band_sigmas,
        ];
        if tolerances.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(OfbmError::InvalidInput("tolerances must be positive".into()));
        }
        if self.times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(OfbmError::InvalidInput("t-grid must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub params: Value,
    pub stats: Value,
    pub pass: bool,
}

impl VerificationReport {
    fn new(name: &str, params: Value, stats: Value, pass: bool) -> Self {
        Self {
            name: name.to_owned(),
            params,
            stats,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log err` against `log n`, ignoring exact zeros.
fn ladder_rate(ns: &[usize], errors: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .unzip();
    (x.len() >= 2).then(|| linear_fit(&x, &y).0)
}

/// `error(2n) < error(n)` between consecutive rungs with `n >= 64`.
fn decreasing_from_64(ns: &[usize], errors: &[f64]) -> bool {
    ns.windows(2)
        .zip(errors.windows(2))
        .filter(|(n, _)| n[0] >= 64)
        .all(|(_, e)| e[1] < e[0])
}

/// Kolmogorov–Smirnov distance between the sample and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max(((i + 1) as f64 / m - f).max(f - i as f64 / m))
    })
}

fn check_sum_inputs(weights: &KernelWeights, inc: &IncrementMatrix, t_l: f64, t_q: f64, j: usize) -> Result<(usize, usize)> {
    if inc.n() != weights.n() || inc.d() != weights.dim() {
        return Err(OfbmError::InvalidInput(format!(
            "increments are {}x{}, weights are for n={} d={}",
            inc.n(),
            inc.d(),
            weights.n(),
            weights.dim()
        )));
    }
    if j >= weights.dim() {
        return Err(OfbmError::InvalidInput(format!("component {j} out of range")));
    }
    for t in [t_l, t_q] {
        if !(t > 0.0 && t <= 1.0) {
            return Err(OfbmError::InvalidInput(format!("time {t} outside (0, 1]")));
        }
    }
    Ok((grid_index(t_l, weights.n()), grid_index(t_q, weights.n())))
}

/// `Σ_i w_{m_l-i}[k,j] w_{m_q-i}[k,j] ξ_{i,j}²`, the realized quadratic sum of
/// one kernel entry.
pub fn lemma6_sum(weights: &KernelWeights, inc: &IncrementMatrix, t_l: f64, t_q: f64, k: usize, j: usize) -> Result<f64> {
    if k >= weights.dim() {
        return Err(OfbmError::InvalidInput(format!("component {k} out of range")));
    }
    let mut b = vec![0.0; weights.dim()];
    b[k] = 1.0;
    corollary_sum(weights, inc, &b, t_l, t_q, j)
}

/// Same sum for the contracted kernel `Σ_k b_k K_{k,j}`.
pub fn corollary_sum(weights: &KernelWeights, inc: &IncrementMatrix, b: &[f64], t_l: f64, t_q: f64, j: usize) -> Result<f64> {
    let (ml, mq) = check_sum_inputs(weights, inc, t_l, t_q, j)?;
    if b.len() != weights.dim() {
        return Err(OfbmError::InvalidInput(format!("b has length {}, dimension is {}", b.len(), weights.dim())));
    }
    let d = weights.dim();
    let contract = |w: &SquareMatrix| (0..d).map(|k| b[k] * w[(k, j)]).sum::<f64>();
    Ok((1..=ml.min(mq))
        .map(|i| {
            let xi = inc.get(i, j);
            contract(weights.get(ml - i)) * contract(weights.get(mq - i)) * xi * xi
        })
        .sum())
}

/// `∫ H(t_l,s) H(t_q,s) ds` with `H = Σ_k b_k K_{k,j}`.
pub fn corollary_limit(oracle: &CovarianceOracle, b: &[f64], t_l: f64, t_q: f64, j: usize) -> Result<f64> {
    let pieces = oracle.column_products(t_l, t_q)?;
    let m = pieces
        .get(j)
        .ok_or_else(|| OfbmError::InvalidInput(format!("component {j} out of range")))?;
    Ok(dot(b, &m.mul_vec(b)))
}

pub fn lemma6_limit(oracle: &CovarianceOracle, t_l: f64, t_q: f64, k: usize, j: usize) -> Result<f64> {
    let mut b = vec![0.0; oracle.hurst().dim()];
    *b.get_mut(k).ok_or_else(|| OfbmError::InvalidInput(format!("component {k} out of range")))? = 1.0;
    corollary_limit(oracle, &b, t_l, t_q, j)
}

/// Quadratic sums along the ladder against their quadrature limits, for every
/// `(k, j)` (or every `j` after contraction with `b`). Entries whose limit is
/// below `1e-6` of the largest are compared on that absolute scale.
fn quadratic_sum_ladder(name: &str, hurst: &HurstOperator, b: Option<&[f64]>, pairs: &[(f64, f64)], config: &TestConfig) -> Result<VerificationReport> {
    config.validate()?;
    let d = hurst.dim();
    let oracle = CovarianceOracle::new(hurst);
    let selectors: Vec<Vec<f64>> = match b {
        Some(b) => vec![b.to_vec()],
        None => (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            })
            .collect(),
    };
    let mut limits = Vec::new();
    for &(tl, tq) in pairs {
        let pieces = oracle.column_products(tl, tq)?;
        for sel in &selectors {
            for (j, m) in pieces.iter().enumerate() {
                limits.push((tl, tq, sel.clone(), j, dot(sel, &m.mul_vec(sel))));
            }
        }
    }
    let scale = limits.iter().fold(0.0f64, |m, l| m.max(l.4.abs()));
    let floor = 1e-6 * scale;
    let mut errors = Vec::with_capacity(config.ladder.len());
    for &n in &config.ladder {
        let weights = KernelWeights::new(n, hurst)?;
        let inc = generate(n, d, &MdsConfig::rademacher(config.seed))?;
        let mut worst = 0.0f64;
        for (tl, tq, sel, j, lim) in &limits {
            let s = corollary_sum(&weights, &inc, sel, *tl, *tq, *j)?;
            worst = worst.max((s - lim).abs() / lim.abs().max(floor));
        }
        errors.push(worst);
    }
    let last = *errors.last().expect("ladder is non-empty");
    let monotone = decreasing_from_64(&config.ladder, &errors);
    let pass = last <= config.relative_tolerance && monotone;
    Ok(VerificationReport::new(
        name,
        json!({
            "D": hurst.matrix().rows(),
            "b": b,
            "pairs": pairs,
            "ladder": config.ladder,
            "relative_tolerance": config.relative_tolerance,
        }),
        json!({
            "relative_errors": errors,
            "final_error": last,
            "monotone": monotone,
            "observed_rate": ladder_rate(&config.ladder, &errors),
            "limits": limits.iter().map(|l| json!({"t_l": l.0, "t_q": l.1, "selector": l.2, "j": l.3, "limit": l.4})).collect::<Vec<_>>(),
        }),
        pass,
    ))
}

/// Lemma-6 sums with exact-square increments against their limits.
pub fn lemma6_convergence(hurst: &HurstOperator, pairs: &[(f64, f64)], config: &TestConfig) -> Result<VerificationReport> {
    quadratic_sum_ladder("lemma6", hurst, None, pairs, config)
}

pub fn corollary_convergence(hurst: &HurstOperator, b: &[f64], pairs: &[(f64, f64)], config: &TestConfig) -> Result<VerificationReport> {
    if b.len() != hurst.dim() {
        return Err(OfbmError::InvalidInput(format!("b has length {}, dimension is {}", b.len(), hurst.dim())));
    }
    quadratic_sum_ladder("corollary", hurst, Some(b), pairs, config)
}

/// Simulates `S_n` and compares its law with `N(0, σ²)`.
pub fn fdd_test(plan: &SimulationPlan, functional: &LinearFunctional, config: &TestConfig) -> Result<VerificationReport> {
    config.validate()?;
    functional.check_dim(plan.d())?;
    let oracle = CovarianceOracle::new(&plan.hurst);
    let sigma2 = functional.limit_variance(&oracle)?;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(OfbmError::Domain(format!("functional has degenerate limit variance {sigma2:e}")));
    }
    let sim = Simulator::new(plan.clone())?;
    let grid_var = functional.grid_variance(sim.weights())?;
    let samples = sim.map_replications(|p| functional.evaluate(p))?;
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|x| x * x).sum::<f64>() / m;
    let sd = sigma2.sqrt();
    let skewness = samples.iter().map(|x| (x / sd).powi(3)).sum::<f64>() / m;
    let excess_kurtosis = samples.iter().map(|x| (x / sd).powi(4)).sum::<f64>() / m - 3.0;
    let normal = Normal::new(0.0, sd).map_err(|e| OfbmError::Numeric(e.to_string()))?;
    let ks = ks_statistic(&samples, |x| normal.cdf(x));
    let ks_bar = config.ks_factor * KS_95 / m.sqrt();
    let variance_error = (var - sigma2).abs() / sigma2;
    // E S² = grid_var exactly; its estimator has standard error ≈ grid_var·√(2/M)
    let identity_z = (var - grid_var) / (grid_var * (2.0 / m).sqrt());
    let pass = variance_error <= config.relative_tolerance && ks <= ks_bar && identity_z.abs() <= config.band_sigmas;
    Ok(VerificationReport::new(
        "fdd",
        json!({
            "n": plan.n,
            "D": plan.hurst.matrix().rows(),
            "generator": plan.generator,
            "replications": plan.replications,
            "functional": functional,
            "relative_tolerance": config.relative_tolerance,
            "ks_factor": config.ks_factor,
            "band_sigmas": config.band_sigmas,
        }),
        json!({
            "limit_variance": sigma2,
            "grid_variance": grid_var,
            "empirical_mean": mean,
            "empirical_variance": var,
            "relative_variance_error": variance_error,
            "variance_identity_z": identity_z,
            "skewness": skewness,
            "excess_kurtosis": excess_kurtosis,
            "ks_distance": ks,
            "ks_bar": ks_bar,
        }),
        pass,
    ))
}

fn relative_frobenius(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    let diff = (a - b).frobenius_norm();
    let scale = b.frobenius_norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn limit_grid(oracle: &CovarianceOracle, times: &[f64]) -> Result<Vec<(usize, usize, SquareMatrix)>> {
    let mut out = Vec::new();
    for l in 0..times.len() {
        for k in l..times.len() {
            out.push((l, k, oracle.covariance(times[l], times[k])?));
        }
    }
    Ok(out)
}

/// Deterministic second moments `(1/n) Σ w wᵀ` of exact-square schemes
/// against `C(t,s)` over the t-grid, along the ladder.
pub fn covariance_convergence(hurst: &HurstOperator, config: &TestConfig) -> Result<VerificationReport> {
    config.validate()?;
    let oracle = CovarianceOracle::new(hurst);
    let times = &config.times;
    let limits = limit_grid(&oracle, times)?;
    let mut errors = Vec::with_capacity(config.ladder.len());
    for &n in &config.ladder {
        let weights = KernelWeights::new(n, hurst)?;
        let worst = limits.iter().fold(0.0f64, |w, (l, k, c)| {
            let e = weights.grid_cross_moment(grid_index(times[*l], n), grid_index(times[*k], n));
            w.max(relative_frobenius(&e, c))
        });
        errors.push(worst);
    }
    let last = *errors.last().expect("ladder is non-empty");
    let monotone = decreasing_from_64(&config.ladder, &errors);
    Ok(VerificationReport::new(
        "covariance",
        json!({
            "D": hurst.matrix().rows(),
            "times": times,
            "ladder": config.ladder,
            "relative_tolerance": config.relative_tolerance,
        }),
        json!({
            "relative_frobenius_errors": errors,
            "final_error": last,
            "monotone": monotone,
            "observed_rate": ladder_rate(&config.ladder, &errors),
        }),
        last <= config.relative_tolerance && monotone,
    ))
}

/// Monte Carlo cross moments of simulated paths against the exact
/// finite-`n` moments, entrywise within `band_sigmas` standard errors; the
/// distance to the limit `C(t,s)` is reported alongside.
pub fn covariance_monte_carlo(plan: &SimulationPlan, config: &TestConfig) -> Result<VerificationReport> {
    config.validate()?;
    let times = &config.times;
    let sim = Simulator::new(plan.clone())?;
    let acc = sim.accumulate(times)?;
    let oracle = CovarianceOracle::new(&plan.hurst);
    let limits = limit_grid(&oracle, times)?;
    let m = acc.count() as f64;
    let n = plan.n;
    let d = plan.d();
    let mut worst_z = 0.0f64;
    let mut limit_errors = Vec::new();
    for (l, k, c) in &limits {
        let (ml, mk) = (grid_index(times[*l], n), grid_index(times[*k], n));
        let exact = sim.weights().grid_cross_moment(ml, mk);
        let var_l = sim.weights().grid_cross_moment(ml, ml);
        let var_k = sim.weights().grid_cross_moment(mk, mk);
        let emp = acc.second_moment(*l, *k);
        for a in 0..d {
            for b in 0..d {
                // Gaussian fourth-moment proxy for the variance of X_a X_b
                let se = ((var_l[(a, a)] * var_k[(b, b)] + exact[(a, b)].powi(2)) / m).sqrt();
                if se > 0.0 {
                    worst_z = worst_z.max((emp[(a, b)] - exact[(a, b)]).abs() / se);
                } else if emp[(a, b)] != exact[(a, b)] {
                    worst_z = f64::INFINITY;
                }
            }
        }
        limit_errors.push(relative_frobenius(&emp, c));
    }
    Ok(VerificationReport::new(
        "covariance-mc",
        json!({
            "n": n,
            "D": plan.hurst.matrix().rows(),
            "generator": plan.generator,
            "replications": plan.replications,
            "times": times,
            "band_sigmas": config.band_sigmas,
        }),
        json!({
            "max_z": worst_z,
            "relative_frobenius_to_limit": limit_errors,
            "moments": acc.report(),
        }),
        worst_z <= config.band_sigmas,
    ))
}

/// `C(ct,cs) = c^D C(t,s) c^{Dᵀ}` entrywise, by two independent quadratures.
pub fn self_similarity_check(hurst: &HurstOperator, pairs: &[(f64, f64)], c: f64, config: &TestConfig) -> Result<VerificationReport> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(OfbmError::InvalidInput(format!("scale c must lie in (0, 1], got {c}")));
    }
    if config.absolute_tolerance.is_nan() || config.absolute_tolerance <= 0.0 {
        return Err(OfbmError::InvalidInput("absolute tolerance must be positive".into()));
    }
    let oracle = CovarianceOracle::new(hurst);
    let cd = mat_power(c, hurst.matrix())?;
    let mut errors = Vec::with_capacity(pairs.len());
    for &(t, s) in pairs {
        let lhs = oracle.covariance(c * t, c * s)?;
        let inner = oracle.covariance(t, s)?;
        let rhs = &(&cd * &inner) * &cd.transpose();
        errors.push(lhs.max_abs_diff(&rhs));
    }
    let worst = errors.iter().fold(0.0f64, |m, e| m.max(*e));
    Ok(VerificationReport::new(
        "self-similarity",
        json!({
            "D": hurst.matrix().rows(),
            "pairs": pairs,
            "c": c,
            "absolute_tolerance": config.absolute_tolerance,
        }),
        json!({ "max_abs_errors": errors, "max_abs_error": worst }),
        worst <= config.absolute_tolerance,
    ))
}

/// Settings of [`tightness_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessConfig {
    pub gaps: Vec<f64>,
    /// Left endpoints; each gap is taken from every start with `s + gap <= 1`
    /// and the largest moment is kept.
    pub starts: Vec<f64>,
    /// Accepted slope window `[2H - below, 2H + above]`.
    pub below: f64,
    pub above: f64,
    /// Triples `(s, t, u)` with `u - s < 1/n`.
    pub degenerate: Vec<(f64, f64, f64)>,
}

impl TightnessConfig {
    /// Gaps `2^-8..2^-2` and degenerate triples within or straddling one cell.
    pub fn standard(n: usize) -> Self {
        let h = 1.0 / n as f64;
        Self {
            gaps: (2..=8).rev().map(|p| 2f64.powi(-p)).collect(),
            starts: vec![0.0, 0.25, 0.5, 0.75],
            below: 0.15,
            above: 0.35,
            degenerate: [0.1, 0.37, 0.5, 0.81]
                .iter()
                .flat_map(|&x| {
                    let s = snap(x, n);
                    [(s + 0.1 * h, s + 0.5 * h, s + 0.9 * h), (s + 0.6 * h, s + 0.9 * h, s + 1.3 * h)]
                })
                .collect(),
        }
    }
}

/// Deterministic `E‖X_n(t) - X_n(s)‖²` for exact-square increments, its
/// log-log slope in `t - s`, and the vanishing of products over triples
/// inside two adjacent cells.
pub fn tightness_check(n: usize, hurst: &HurstOperator, witness: &BoundWitness, config: &TightnessConfig) -> Result<VerificationReport> {
    if config.gaps.len() < 2 || config.gaps.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
        return Err(OfbmError::InvalidInput("tightness needs at least two gaps in (0, 1]".into()));
    }
    let weights = KernelWeights::new(n, hurst)?;
    let moment = |s: f64, t: f64| weights.increment_second_moment(grid_index(t, n), grid_index(s, n));
    let mut moments = Vec::with_capacity(config.gaps.len());
    for &g in &config.gaps {
        let best = config
            .starts
            .iter()
            .filter(|&&s| s >= 0.0 && s + g <= 1.0)
            .map(|&s| moment(s, s + g))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .ok_or_else(|| OfbmError::InvalidInput(format!("no start admits gap {g}")))?;
        moments.push(best);
    }
    if moments.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(OfbmError::InvalidInput("every gap must span at least one grid cell".into()));
    }
    let x: Vec<f64> = config.gaps.iter().map(|g| g.ln()).collect();
    let y: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let target = 2.0 * witness.h;
    let fitted_k = config
        .gaps
        .iter()
        .zip(&moments)
        .fold(0.0f64, |k, (g, m)| k.max(m / g.powf(target)));
    let mut degenerate = Vec::with_capacity(config.degenerate.len());
    for &(s, t, u) in &config.degenerate {
        if !(s <= t && t <= u && u - s < 1.0 / n as f64 && s >= 0.0 && u <= 1.0) {
            return Err(OfbmError::InvalidInput(format!("({s}, {t}, {u}) is not an ordered triple with u - s < 1/n")));
        }
        degenerate.push(moment(s, t) * moment(t, u));
    }
    let in_window = slope >= target - config.below && slope <= target + config.above;
    let degenerate_zero = degenerate.iter().all(|&p| p == 0.0);
    Ok(VerificationReport::new(
        "tightness",
        json!({
            "n": n,
            "D": hurst.matrix().rows(),
            "H": witness.h,
            "gaps": config.gaps,
            "starts": config.starts,
            "window": [target - config.below, target + config.above],
        }),
        json!({
            "moments": moments,
            "slope": slope,
            "intercept": intercept,
            "fitted_constant": fitted_k,
            "degenerate_products": degenerate,
        }),
        in_window && degenerate_zero,
    ))
}

/// Empirical covariance of the partial-sum process `Σ_{i<=⌊nt⌋} η_i` against
/// `min(t̃, s̃) I`, entrywise within `band_sigmas` standard errors.
pub fn donsker_check(n: usize, d: usize, generator: &MdsConfig, config: &TestConfig) -> Result<VerificationReport> {
    config.validate()?;
    if n == 0 || d == 0 {
        return Err(OfbmError::InvalidInput("n and d must be >= 1".into()));
    }
    let times = &config.times;
    let idx: Vec<usize> = times.iter().map(|&t| grid_index(t, n)).collect();
    let acc = accumulate_replications(config.replications, times, d, |r| {
        let inc = generate_replication(n, d, generator, r)?;
        let mut sums = vec![0.0; d];
        let mut out = Vec::with_capacity(idx.len() * d);
        let mut i = 0;
        for &m in &idx {
            // times need not be sorted, so restart when going back
            if m < i {
                sums.iter_mut().for_each(|s| *s = 0.0);
                i = 0;
            }
            while i < m {
                i += 1;
                for (s, x) in sums.iter_mut().zip(inc.row(i)) {
                    *s += x;
                }
            }
            out.extend_from_slice(&sums);
        }
        Ok(out)
    })?;
    let m = acc.count() as f64;
    let mut worst_z = 0.0f64;
    let mut worst_dev = 0.0f64;
    for l in 0..times.len() {
        for k in 0..times.len() {
            let (tl, tk) = (idx[l] as f64 / n as f64, idx[k] as f64 / n as f64);
            let lo = tl.min(tk);
            let emp = acc.second_moment(l, k);
            for a in 0..d {
                for b in 0..d {
                    let (target, var) = if a == b { (lo, tl * tk + lo * lo) } else { (0.0, tl * tk) };
                    let dev = (emp[(a, b)] - target).abs();
                    worst_dev = worst_dev.max(dev);
                    let se = (var / m).sqrt();
                    if se > 0.0 {
                        worst_z = worst_z.max(dev / se);
                    } else if dev > 0.0 {
                        worst_z = f64::INFINITY;
                    }
                }
            }
        }
    }
    Ok(VerificationReport::new(
        "donsker",
        json!({
            "n": n,
            "d": d,
            "generator": generator,
            "replications": config.replications,
            "times": times,
            "band_sigmas": config.band_sigmas,
        }),
        json!({ "max_z": worst_z, "max_abs_deviation": worst_dev, "moments": acc.report() }),
        worst_z <= config.band_sigmas,
    ))
}

/// Fits the constants of the two-regime power bound and passes when both are
/// finite and stable under grid refinement.
pub fn power_bound_check(hurst: &HurstOperator, witness: &BoundWitness, grid: &[f64]) -> Result<VerificationReport> {
    let report = verify_power_bound(hurst, witness, grid)?;
    let pass = report.small.stable && report.large.stable;
    Ok(VerificationReport::new(
        "power-bound",
        json!({ "D": hurst.matrix().rows(), "witness": witness, "grid_points": grid.len() }),
        serde_json::to_value(&report)?,
        pass,
    ))
}
