//! Paths of the approximation `X_n(m/n) = Σ_{i<=m} w_{m-i} η_i`, evaluated
//! either directly or as `d²` scalar FFT convolutions, batch Monte Carlo over
//! replications, and an exact Gaussian sampler for the limit process.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{OfbmError, Result};
use crate::io::fmt_f64;
use crate::kernel::{grid_index, CovarianceOracle, KernelWeights};
use crate::matfun::{HurstOperator, SquareMatrix};
use crate::mds::{generate_replication, IncrementMatrix, MdsConfig};
use crate::rng::substream;

/// Grid size from which plans default to the FFT path.
pub const FFT_THRESHOLD: usize = 256;
/// Largest number of path values a collecting batch may hold.
pub const MAX_STORED_VALUES: usize = 100_000_000;
/// Replications per accumulator leaf; fixed so merges do not depend on the
/// thread count.
const ACCUMULATOR_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Fft,
}

impl FromStr for Method {
    type Err = OfbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "fft" => Ok(Self::Fft),
            other => Err(OfbmError::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::Fft => "fft",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub n: usize,
    pub hurst: HurstOperator,
    /// Increment generator; its seed is the master seed of the plan.
    pub generator: MdsConfig,
    pub replications: usize,
    pub method: Method,
}

impl SimulationPlan {
    pub fn new(n: usize, hurst: HurstOperator, generator: MdsConfig) -> Result<Self> {
        if n == 0 {
            return Err(OfbmError::InvalidInput("grid size n must be >= 1".into()));
        }
        Ok(Self {
            n,
            hurst,
            generator,
            replications: 1,
            method: if n >= FFT_THRESHOLD { Method::Fft } else { Method::Naive },
        })
    }

    pub fn with_replications(mut self, replications: usize) -> Result<Self> {
        if replications == 0 {
            return Err(OfbmError::InvalidInput("replications must be >= 1".into()));
        }
        self.replications = replications;
        Ok(self)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.hurst.dim()
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.generator.seed
    }

    /// Fails when collecting every path would exceed [`MAX_STORED_VALUES`].
    pub fn check_batch_capacity(&self) -> Result<()> {
        let requested = self.replications.saturating_mul(self.n + 1).saturating_mul(self.d());
        if requested > MAX_STORED_VALUES {
            return Err(OfbmError::Capacity {
                requested,
                limit: MAX_STORED_VALUES,
            });
        }
        Ok(())
    }
}

/// Values `X_n(m/n)`, `m = 0..=n`, of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    n: usize,
    d: usize,
    values: Vec<f64>,
    pub seed: u64,
    pub replication: u64,
    pub method: Method,
}

impl PathGrid {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.d..(m + 1) * self.d]
    }

    /// `X_n(t)`, constant on `[m/n, (m+1)/n)`.
    pub fn at(&self, t: f64) -> &[f64] {
        self.row(grid_index(t, self.n))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &PathGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn write_csv_header<W: Write>(d: usize, with_path: bool, mut out: W) -> Result<()> {
        let mut cols: Vec<String> = Vec::new();
        if with_path {
            cols.push("path".into());
        }
        cols.push("m".into());
        cols.push("t".into());
        cols.extend((1..=d).map(|k| format!("x_{k}")));
        writeln!(out, "{}", cols.join(","))?;
        Ok(())
    }

    /// Rows `m,t,x_1..x_d`, prefixed by `path` when `path` is given.
    pub fn write_csv_rows<W: Write>(&self, path: Option<u64>, mut out: W) -> Result<()> {
        for m in 0..=self.n {
            let mut line = String::new();
            if let Some(p) = path {
                line.push_str(&format!("{p},"));
            }
            line.push_str(&format!("{m},{}", fmt_f64(m as f64 / self.n as f64)));
            for v in self.row(m) {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        Self::write_csv_header(self.d, false, &mut out)?;
        self.write_csv_rows(None, out)
    }
}

struct FftKernel {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Spectrum of the weight sequence `w_k[r, c]`, index `r * d + c`.
    spectra: Vec<Vec<Complex64>>,
}

impl FftKernel {
    fn new(weights: &KernelWeights) -> Self {
        let n = weights.n();
        let d = weights.dim();
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let spectra = (0..d * d)
            .map(|rc| {
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for (b, w) in buf.iter_mut().zip(weights.entry_sequence(rc / d, rc % d)) {
                    b.re = w;
                }
                forward.process(&mut buf);
                buf
            })
            .collect();
        Self {
            len,
            forward,
            inverse,
            spectra,
        }
    }
}

impl fmt::Debug for FftKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftKernel").field("len", &self.len).finish()
    }
}

/// A plan with its weight table and FFT spectra precomputed.
#[derive(Debug)]
pub struct Simulator {
    plan: SimulationPlan,
    weights: KernelWeights,
    fft: FftKernel,
}

impl Simulator {
    pub fn new(plan: SimulationPlan) -> Result<Self> {
        let weights = KernelWeights::new(plan.n, &plan.hurst)?;
        let fft = FftKernel::new(&weights);
        Ok(Self { plan, weights, fft })
    }

    pub fn plan(&self) -> &SimulationPlan {
        &self.plan
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    fn check_shape(&self, inc: &IncrementMatrix) -> Result<()> {
        if inc.n() != self.plan.n || inc.d() != self.plan.d() {
            return Err(OfbmError::InvalidInput(format!(
                "increments are {}x{}, plan expects {}x{}",
                inc.n(),
                inc.d(),
                self.plan.n,
                self.plan.d()
            )));
        }
        Ok(())
    }

    /// Direct evaluation of every grid value, `O(d² n²)`.
    pub fn convolve_naive(&self, inc: &IncrementMatrix) -> Result<Vec<f64>> {
        self.check_shape(inc)?;
        let (n, d) = (self.plan.n, self.plan.d());
        let mut out = vec![0.0; (n + 1) * d];
        for m in 1..=n {
            let row = &mut out[m * d..(m + 1) * d];
            for i in 1..=m {
                let w = self.weights.get(m - i);
                let eta = inc.row(i);
                for (r, x) in row.iter_mut().enumerate() {
                    let wr = &w.as_slice()[r * d..(r + 1) * d];
                    *x += wr.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        Ok(out)
    }

    /// Same values through zero-padded FFT convolution, `O(d² n log n)`.
    pub fn convolve_fft(&self, inc: &IncrementMatrix) -> Result<Vec<f64>> {
        self.check_shape(inc)?;
        let (n, d) = (self.plan.n, self.plan.d());
        let len = self.fft.len;
        let columns: Vec<Vec<Complex64>> = (0..d)
            .map(|c| {
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for (b, x) in buf.iter_mut().zip(inc.column(c)) {
                    b.re = x;
                }
                self.fft.forward.process(&mut buf);
                buf
            })
            .collect();
        let mut out = vec![0.0; (n + 1) * d];
        let scale = 1.0 / len as f64;
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for r in 0..d {
            acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (c, col) in columns.iter().enumerate() {
                let spec = &self.fft.spectra[r * d + c];
                for ((a, s), x) in acc.iter_mut().zip(spec).zip(col) {
                    *a += s * x;
                }
            }
            self.fft.inverse.process(&mut acc);
            // linear convolution index m-1 holds X_n(m/n)
            for m in 1..=n {
                out[m * d + r] = acc[m - 1].re * scale;
            }
        }
        Ok(out)
    }

    pub fn path_from_increments(&self, inc: &IncrementMatrix, method: Method) -> Result<PathGrid> {
        let values = match method {
            Method::Naive => self.convolve_naive(inc)?,
            Method::Fft => self.convolve_fft(inc)?,
        };
        Ok(PathGrid {
            n: self.plan.n,
            d: self.plan.d(),
            values,
            seed: inc.config().seed,
            replication: 0,
            method,
        })
    }

    pub fn increments(&self, replication: u64) -> Result<IncrementMatrix> {
        generate_replication(self.plan.n, self.plan.d(), &self.plan.generator, replication)
    }

    pub fn path(&self, replication: u64) -> Result<PathGrid> {
        let inc = self.increments(replication)?;
        let mut p = self.path_from_increments(&inc, self.plan.method)?;
        p.replication = replication;
        Ok(p)
    }

    /// Every replication of the plan, in order.
    pub fn batch(&self) -> Result<Vec<PathGrid>> {
        self.plan.check_batch_capacity()?;
        self.map_replications(|p| p.clone())
    }

    /// Applies `f` to every replication in parallel; results keep replication order.
    pub fn map_replications<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&PathGrid) -> T + Sync,
    {
        (0..self.plan.replications as u64)
            .into_par_iter()
            .map(|r| self.path(r).map(|p| f(&p)))
            .collect()
    }

    /// Streams every replication into moment accumulators at `times`.
    pub fn accumulate(&self, times: &[f64]) -> Result<MomentAccumulator> {
        let (n, d) = (self.plan.n, self.plan.d());
        let indices: Vec<usize> = times.iter().map(|&t| grid_index(t, n)).collect();
        accumulate_replications(self.plan.replications, times, d, |r| {
            let path = self.path(r)?;
            Ok(indices.iter().flat_map(|&m| path.row(m).iter().copied()).collect())
        })
    }
}

/// Moments of `replications` stacked draws `f(r)`, each of length
/// `times.len() * d`. Leaves hold fixed runs of replications and are merged
/// pairwise in order, so the result is bit-identical for any thread count.
pub fn accumulate_replications<F>(replications: usize, times: &[f64], d: usize, f: F) -> Result<MomentAccumulator>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let empty = MomentAccumulator::new(times, d)?;
    let leaves = (0..replications.div_ceil(ACCUMULATOR_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = empty.clone();
            let lo = chunk * ACCUMULATOR_CHUNK;
            let hi = (lo + ACCUMULATOR_CHUNK).min(replications);
            for r in lo..hi {
                acc.add_stacked(&f(r as u64)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(if leaves.is_empty() { empty } else { tree_merge(leaves) })
}

fn tree_merge(mut level: Vec<MomentAccumulator>) -> MomentAccumulator {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge(&b);
            }
            next.push(a);
        }
        level = next;
    }
    level.pop().expect("at least one accumulator leaf")
}

/// Running first and raw second moments of a process at fixed times.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    times: Vec<f64>,
    d: usize,
    count: u64,
    sum: Vec<f64>,
    cross: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(times: &[f64], d: usize) -> Result<Self> {
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(OfbmError::InvalidInput("accumulator times must lie in [0, 1]".into()));
        }
        let q = times.len();
        Ok(Self {
            times: times.to_vec(),
            d,
            count: 0,
            sum: vec![0.0; q * d],
            cross: vec![0.0; q * d * q * d],
        })
    }

    /// Adds `X_n` evaluated at the accumulator times.
    pub fn add_path(&mut self, path: &PathGrid) {
        let stacked: Vec<f64> = self.times.iter().flat_map(|&t| path.at(t).iter().copied()).collect();
        self.add_stacked(&stacked);
    }

    /// Adds one draw given as `(x(t_1), …, x(t_q))` concatenated.
    pub fn add_stacked(&mut self, stacked: &[f64]) {
        let qd = self.times.len() * self.d;
        debug_assert_eq!(stacked.len(), qd);
        for (s, x) in self.sum.iter_mut().zip(stacked) {
            *s += x;
        }
        for a in 0..qd {
            let xa = stacked[a];
            for b in 0..qd {
                self.cross[a * qd + b] += xa * stacked[b];
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        debug_assert_eq!(self.times, other.times);
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mean(&self, l: usize) -> Vec<f64> {
        let c = self.count.max(1) as f64;
        self.sum[l * self.d..(l + 1) * self.d].iter().map(|s| s / c).collect()
    }

    /// Empirical `E[X_n(t_l) X_n(t_q)ᵀ]`.
    pub fn second_moment(&self, l: usize, q: usize) -> SquareMatrix {
        let d = self.d;
        let qd = self.times.len() * d;
        let c = self.count.max(1) as f64;
        let mut m = SquareMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] = self.cross[(l * d + a) * qd + q * d + b] / c;
            }
        }
        m
    }

    pub fn report(&self) -> MomentReport {
        let q = self.times.len();
        MomentReport {
            times: self.times.clone(),
            count: self.count,
            means: (0..q).map(|l| self.mean(l)).collect(),
            second_moments: (0..q).map(|l| (0..q).map(|k| self.second_moment(l, k)).collect()).collect(),
        }
    }
}

/// JSON form of a [`MomentAccumulator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub count: u64,
    pub means: Vec<Vec<f64>>,
    pub second_moments: Vec<Vec<SquareMatrix>>,
}

pub fn simulate_path(plan: &SimulationPlan, replication: u64) -> Result<PathGrid> {
    Simulator::new(plan.clone())?.path(replication)
}

pub fn simulate_batch(plan: &SimulationPlan) -> Result<Vec<PathGrid>> {
    plan.check_batch_capacity()?;
    Simulator::new(plan.clone())?.batch()
}

/// Median wall-clock time of both convolution methods on one increment draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub naive_seconds: f64,
    pub fft_seconds: f64,
    pub speedup: f64,
    pub max_abs_diff: f64,
}

pub fn bench_methods(n: usize, hurst: &HurstOperator, seed: u64, repeats: usize) -> Result<BenchRow> {
    let sim = Simulator::new(SimulationPlan::new(n, hurst.clone(), MdsConfig::rademacher(seed))?)?;
    let inc = sim.increments(0)?;
    let median = |method: Method| -> Result<(f64, PathGrid)> {
        let mut times = Vec::with_capacity(repeats.max(1));
        let mut last = None;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let p = sim.path_from_increments(&inc, method)?;
            times.push(start.elapsed().as_secs_f64());
            last = Some(p);
        }
        times.sort_by(f64::total_cmp);
        Ok((times[times.len() / 2], last.expect("at least one repeat")))
    };
    let (naive_seconds, a) = median(Method::Naive)?;
    let (fft_seconds, b) = median(Method::Fft)?;
    Ok(BenchRow {
        n,
        d: hurst.dim(),
        naive_seconds,
        fft_seconds,
        speedup: naive_seconds / fft_seconds,
        max_abs_diff: a.max_abs_diff(&b),
    })
}

/// Largest stacked dimension `q d` the exact sampler accepts.
pub const EXACT_SAMPLER_MAX_DIM: usize = 64;

/// Draws `(X(t_1), …, X(t_q))` from the zero-mean Gaussian law with block
/// covariance `C(t_l, t_k)`.
#[derive(Debug, Clone)]
pub struct ExactGaussianSampler {
    times: Vec<f64>,
    d: usize,
    factor: SquareMatrix,
    covariance: SquareMatrix,
}

impl ExactGaussianSampler {
    pub fn new(oracle: &CovarianceOracle, times: &[f64]) -> Result<Self> {
        let d = oracle.hurst().dim();
        let q = times.len();
        if q == 0 || q * d > EXACT_SAMPLER_MAX_DIM {
            return Err(OfbmError::InvalidInput(format!(
                "exact sampler needs 1 <= q*d <= {EXACT_SAMPLER_MAX_DIM}, got {}",
                q * d
            )));
        }
        if times.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(OfbmError::InvalidInput("exact sampler times must lie in (0, 1]".into()));
        }
        for (i, a) in times.iter().enumerate() {
            if times[..i].contains(a) {
                return Err(OfbmError::InvalidInput(format!("duplicate sampling time {a}")));
            }
        }
        let pairs: Vec<(usize, usize)> = (0..q).flat_map(|l| (l..q).map(move |k| (l, k))).collect();
        let blocks = pairs
            .par_iter()
            .map(|&(l, k)| oracle.covariance(times[l], times[k]))
            .collect::<Result<Vec<_>>>()?;
        let mut cov = SquareMatrix::zeros(q * d);
        for (&(l, k), c) in pairs.iter().zip(&blocks) {
            for a in 0..d {
                for b in 0..d {
                    cov[(l * d + a, k * d + b)] = c[(a, b)];
                    cov[(k * d + b, l * d + a)] = c[(a, b)];
                }
            }
        }
        let factor = cov.cholesky(1e-9)?;
        Ok(Self {
            times: times.to_vec(),
            d,
            factor,
            covariance: cov,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// The assembled `qd x qd` block covariance.
    pub fn covariance(&self) -> &SquareMatrix {
        &self.covariance
    }

    /// Draw `index` of stream `seed`, as `q` vectors of length `d`.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<Vec<f64>> {
        let mut rng = substream(seed, 0, index);
        let z: Vec<f64> = (0..self.factor.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.factor.mul_vec(&z).chunks(self.d).map(|c| c.to_vec()).collect()
    }
}

/// One draw of the limit process at `times`.
pub fn exact_gaussian_sample(hurst: &HurstOperator, times: &[f64], seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(ExactGaussianSampler::new(&CovarianceOracle::new(hurst), times)?.sample(seed, 0))
}
