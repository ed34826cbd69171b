use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ofbm::io::{parse_matrix_arg, parse_matrix_json};
use ofbm::kernel::{write_covariance_csv, CovarianceOracle};
use ofbm::matfun::{BoundWitness, HurstOperator};
use ofbm::mds::{check_conditions, generate, MdsConfig, MdsKind};
use ofbm::simulate::{bench_methods, Method, PathGrid, SimulationPlan, Simulator};
use ofbm::verify::{
    corollary_convergence, covariance_convergence, covariance_monte_carlo, donsker_check, fdd_test, lemma6_convergence,
    power_bound_check, self_similarity_check, tightness_check, LinearFunctional, TightnessConfig,
    VerificationReport,
};
use serde_json::json;

use crate::config::{CliError, FileConfig};
use crate::{BenchArgs, Check, Cli, Command, CovarianceArgs, Format, GeneratorArgs, MdsCheckArgs, OperatorArgs, SimulateArgs, VerifyArgs};

type Outcome = Result<bool, CliError>;

const DEFAULT_PAIRS: [(f64, f64); 3] = [(1.0, 0.7), (0.6, 0.6), (0.3, 0.9)];

/// Runs the parsed command; `Ok(false)` means a check ran and failed.
pub fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(&a, &file),
        Command::Covariance(a) => covariance(&a, &file),
        Command::Verify(a) => verify(&a, &file),
        Command::MdsCheck(a) => mds_check(&a, &file),
        Command::Bench(a) => bench(&a, &file),
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn format(flag: Option<Format>, file: &FileConfig) -> Result<Format, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match file.format.as_deref() {
        None | Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(CliError::Validation(format!("unknown format '{other}'"))),
    }
}

fn hurst(op: &OperatorArgs, file: &FileConfig) -> Result<HurstOperator, CliError> {
    let matrix = match (&op.hurst, &file.hurst) {
        (Some(arg), _) => Some(parse_matrix_arg(arg)?),
        (None, Some(v)) => Some(parse_matrix_json(&v.to_string())?),
        (None, None) => None,
    };
    let d = op.d.or(file.d);
    match (matrix, d) {
        (Some(m), Some(d)) if m.dim() != d => Err(CliError::Validation(format!("--d {d} does not match D of dimension {}", m.dim()))),
        (Some(m), _) => Ok(HurstOperator::new(m)?),
        (None, d) => Ok(HurstOperator::scalar(0.75, d.unwrap_or(1))?),
    }
}

fn generator(g: &GeneratorArgs, file: &FileConfig) -> Result<MdsConfig, CliError> {
    let kind: MdsKind = g.generator.as_deref().or(file.generator.as_deref()).unwrap_or("rademacher").parse()?;
    Ok(MdsConfig::new(kind, g.bound.or(file.bound).unwrap_or(1.0), g.seed.or(file.seed).unwrap_or(0))?)
}

fn plan(n: usize, hurst: HurstOperator, generator: MdsConfig, paths: usize, method: Option<&str>) -> Result<SimulationPlan, CliError> {
    let mut plan = SimulationPlan::new(n, hurst, generator)?.with_replications(paths)?;
    if let Some(m) = method {
        plan = plan.with_method(m.parse::<Method>()?);
    }
    Ok(plan)
}

fn simulate(a: &SimulateArgs, file: &FileConfig) -> Outcome {
    let h = hurst(&a.operator, file)?;
    let g = generator(&a.generator, file)?;
    let n = a.generator.n.or(file.n).unwrap_or(256);
    let paths = a.paths.or(file.paths).unwrap_or(1);
    let plan = plan(n, h, g, paths, a.method.as_deref().or(file.method.as_deref()))?;
    plan.check_batch_capacity()?;
    let fmt = format(a.format, file)?;
    let sim = Simulator::new(plan.clone())?;
    let batch = sim.batch()?;
    let mut out = output(a.out.as_deref())?;
    match fmt {
        Format::Csv => {
            let multi = batch.len() > 1;
            PathGrid::write_csv_header(plan.d(), multi, &mut out)?;
            for p in &batch {
                p.write_csv_rows(multi.then_some(p.replication), &mut out)?;
            }
        }
        Format::Json => {
            let doc = json!({
                "n": plan.n,
                "d": plan.d(),
                "D": plan.hurst.matrix().rows(),
                "generator": plan.generator,
                "method": plan.method,
                "paths": batch
                    .iter()
                    .map(|p| json!({
                        "replication": p.replication,
                        "values": p.as_slice().chunks(plan.d()).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>(),
            });
            writeln!(out, "{}", serde_json::to_string(&doc).map_err(ofbm::OfbmError::from)?)?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn covariance(a: &CovarianceArgs, file: &FileConfig) -> Outcome {
    let h = hurst(&a.operator, file)?;
    let grid = a.grid.clone().or_else(|| file.grid.clone()).unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]);
    let oracle = CovarianceOracle::new(&h);
    let mut out = output(a.out.as_deref())?;
    match format(a.format, file)? {
        Format::Csv => write_covariance_csv(&oracle, &grid, &mut out)?,
        Format::Json => {
            let mut rows = Vec::new();
            for &t in &grid {
                for &s in &grid {
                    rows.push(json!({ "t": t, "s": s, "matrix": oracle.covariance(t, s)?.rows() }));
                }
            }
            writeln!(out, "{}", serde_json::to_string(&rows).map_err(ofbm::OfbmError::from)?)?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn parse_pairs(raw: &[String]) -> Result<Vec<(f64, f64)>, CliError> {
    raw.iter()
        .map(|p| {
            let bad = || CliError::Validation(format!("pair '{p}' is not of the form t:s"));
            let (t, s) = p.split_once(':').ok_or_else(bad)?;
            Ok((t.trim().parse().map_err(|_| bad())?, s.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn verify(a: &VerifyArgs, file: &FileConfig) -> Outcome {
    if a.check.is_empty() {
        return Err(CliError::Validation("verify needs at least one --check".into()));
    }
    let h = hurst(&a.operator, file)?;
    let d = h.dim();
    let mut config = file.test.clone().unwrap_or_default();
    if let Some(l) = a.ladder.clone().or_else(|| file.ladder.clone()) {
        config.ladder = l;
    }
    if let Some(m) = a.paths.or(file.paths) {
        config.replications = m;
    }
    if let Some(t) = a.grid.clone().or_else(|| file.grid.clone()) {
        config.times = t;
    }
    if let Some(s) = a.generator.seed.or(file.seed) {
        config.seed = s;
    }
    if let Some(e) = file.epsilon {
        config.epsilon = e;
    }
    let tolerance = a.tolerance.or(file.tolerance);
    let pairs = match &a.pairs {
        Some(raw) => parse_pairs(raw)?,
        None => file.pairs.clone().unwrap_or_else(|| DEFAULT_PAIRS.to_vec()),
    };
    let b = a.b.clone().or_else(|| file.b.clone()).unwrap_or_else(|| vec![1.0; d]);
    let gen = generator(&a.generator, file)?;
    let n_or = |default: usize| a.generator.n.or(file.n).unwrap_or(default);
    let witness = match a.delta.or(file.delta) {
        Some(delta) => BoundWitness::new(&h, delta)?,
        None => BoundWitness::default_for(&h),
    };

    let mut reports: Vec<VerificationReport> = Vec::new();
    for check in &a.check {
        let mut cfg = config.clone();
        let report = match check {
            Check::SelfSimilarity => {
                if let Some(t) = tolerance {
                    cfg.absolute_tolerance = t;
                }
                self_similarity_check(&h, &pairs, a.c.or(file.c).unwrap_or(0.5), &cfg)?
            }
            Check::Lemma6 | Check::Corollary | Check::Covariance => {
                if let Some(t) = tolerance {
                    cfg.relative_tolerance = t;
                }
                match check {
                    Check::Lemma6 => lemma6_convergence(&h, &pairs, &cfg)?,
                    Check::Corollary => corollary_convergence(&h, &b, &pairs, &cfg)?,
                    _ => covariance_convergence(&h, &cfg)?,
                }
            }
            Check::CovarianceMc => covariance_monte_carlo(&plan(n_or(256), h.clone(), gen, cfg.replications, None)?, &cfg)?,
            Check::Fdd => {
                if let Some(t) = tolerance {
                    cfg.relative_tolerance = t;
                }
                let times: Vec<f64> = cfg.times.iter().copied().filter(|&t| t > 0.0).collect();
                let coeffs = a.a.clone().or_else(|| file.a.clone()).unwrap_or_else(|| vec![1.0; times.len()]);
                let functional = LinearFunctional::new(times, coeffs, b.clone())?;
                fdd_test(&plan(n_or(512), h.clone(), gen, cfg.replications, None)?, &functional, &cfg)?
            }
            Check::Tightness => {
                let n = n_or(1024);
                tightness_check(n, &h, &witness, &TightnessConfig::standard(n))?
            }
            Check::Donsker => donsker_check(n_or(256), d, &gen, &cfg)?,
            Check::PowerBound => {
                let grid: Vec<f64> = (0..=90).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)).collect();
                power_bound_check(&h, &witness, &grid)?
            }
        };
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass);
    let text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(&reports)
    }
    .map_err(ofbm::OfbmError::from)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(pass)
}

fn mds_check(a: &MdsCheckArgs, file: &FileConfig) -> Outcome {
    let g = generator(&a.generator, file)?;
    let n = a.generator.n.or(file.n).unwrap_or(1024);
    let d = a.d.or(file.d).unwrap_or(1);
    let inc = generate(n, d, &g)?;
    let report = check_conditions(&inc, a.epsilon.or(file.epsilon).unwrap_or(0.1))?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(ofbm::OfbmError::from)?)?;
    out.flush()?;
    Ok(report.all_pass())
}

fn bench(a: &BenchArgs, file: &FileConfig) -> Outcome {
    let h = hurst(&a.operator, file)?;
    let sizes = a.sizes.clone().or_else(|| file.sizes.clone()).unwrap_or_else(|| vec![256, 1024, 4096]);
    let repeats = a.repeats.or(file.repeats).unwrap_or(3);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let rows = sizes
        .iter()
        .map(|&n| bench_methods(n, &h, seed, repeats))
        .collect::<ofbm::Result<Vec<_>>>()?;
    let mut out = output(a.out.as_deref())?;
    match format(a.format, file)? {
        Format::Csv => {
            writeln!(out, "n,d,naive_seconds,fft_seconds,speedup,max_abs_diff")?;
            for r in &rows {
                writeln!(out, "{},{},{:.6e},{:.6e},{:.3},{:.3e}", r.n, r.d, r.naive_seconds, r.fft_seconds, r.speedup, r.max_abs_diff)?;
            }
        }
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rows).map_err(ofbm::OfbmError::from)?)?,
    }
    out.flush()?;
    Ok(true)
}
