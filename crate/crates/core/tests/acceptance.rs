//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofbm::kernel::KernelWeights;
use ofbm::matfun::{mat_exp, mat_power, operator_norm, BoundWitness, HurstOperator, SquareMatrix};
use ofbm::mds::{check_conditions, generate, MdsConfig, MdsKind};
use ofbm::simulate::{bench_methods, Method, SimulationPlan, Simulator};
use ofbm::verify::{
    corollary_convergence, covariance_convergence, donsker_check, fdd_test, lemma6_convergence, self_similarity_check,
    tightness_check, LinearFunctional, TestConfig, TightnessConfig,
};
use ofbm::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn coupled() -> HurstOperator {
    HurstOperator::from_rows(&[vec![0.75, 0.2], vec![0.0, 0.6]]).unwrap()
}

fn rotating() -> HurstOperator {
    HurstOperator::from_rows(&[vec![0.7, 0.1], vec![-0.15, 0.8]]).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize, spread: f64) -> SquareMatrix {
    SquareMatrix::from_row_major(d, (0..d * d).map(|_| rng.random_range(-spread..spread)).collect()).unwrap()
}

fn random_hurst(rng: &mut ChaCha8Rng) -> HurstOperator {
    loop {
        let d = rng.random_range(1..=4);
        let center = rng.random_range(0.6..0.9);
        let m = random_matrix(rng, d, 0.15).shift(center);
        if let Ok(h) = HurstOperator::new(m) {
            return h;
        }
    }
}

fn taylor_exp(a: &SquareMatrix, terms: usize) -> SquareMatrix {
    let mut sum = SquareMatrix::identity(a.dim());
    let mut term = SquareMatrix::identity(a.dim());
    for k in 1..terms {
        term = (&term * a).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    sum
}

fn matrix_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = 0.0f64;
    for _ in 0..100 {
        let h = random_hurst(&mut rng);
        let (r, s) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let lhs = &mat_power(r, h.matrix())? * &mat_power(s, h.matrix())?;
        group = group.max(lhs.max_abs_diff(&mat_power(r * s, h.matrix())?));
    }
    let mut series = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let mut a = random_matrix(&mut rng, d, 1.0);
        let nrm = operator_norm(&a)?;
        if nrm > 2.0 {
            a = a.scale(2.0 / nrm);
        }
        let e = mat_exp(&a)?;
        series = series.max(operator_norm(&(&e - &taylor_exp(&a, 60)))? / operator_norm(&e)?);
    }
    let mut inequalities = 0usize;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let a = random_matrix(&mut rng, d, 3.0);
        let b = random_matrix(&mut rng, d, 3.0);
        let (na, nb) = (operator_norm(&a)?, operator_norm(&b)?);
        let sub = operator_norm(&(&a * &b))? <= na * nb + 1e-12;
        let sandwich = a.max_abs() <= na + 1e-12 && na <= (d as f64).powf(1.5) * a.max_abs() + 1e-12;
        inequalities += usize::from(!(sub && sandwich));
    }
    Ok(Outcome {
        pass: group <= 1e-10 && series <= 1e-12 && inequalities == 0,
        detail: format!("group law {group:.2e}, exp vs series {series:.2e}, inequality violations {inequalities}"),
    })
}

fn weights_vs_quadrature() -> Result<Outcome> {
    let rule = GaussLegendre::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for d in 1..=3 {
        let h = if d == 1 { HurstOperator::scalar(0.75, 1)? } else { random_hurst_dim(&mut rng, d) };
        let a = h.kernel_exponent();
        for n in [16usize, 256, 4096] {
            let w = KernelWeights::new(n, &h)?;
            for k in 1..n {
                let (lo, hi) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                let mut q = SquareMatrix::zeros(d);
                for (x, wt) in rule.iter() {
                    let v = 0.5 * ((hi - lo) * x + hi + lo);
                    q = &q + &mat_power(v, a)?.scale(wt * 0.5 * (hi - lo) * n as f64);
                }
                worst = worst.max(q.max_abs_diff(w.get(k)));
            }
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-10,
        detail: format!("max entry error {worst:.2e} over k >= 1"),
    })
}

fn random_hurst_dim(rng: &mut ChaCha8Rng, d: usize) -> HurstOperator {
    loop {
        let center = rng.random_range(0.6..0.9);
        if let Ok(h) = HurstOperator::new(random_matrix(rng, d, 0.15).shift(center)) {
            return h;
        }
    }
}

fn fft_equivalence() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in [16usize, 128, 1024] {
        let sim = Simulator::new(SimulationPlan::new(n, coupled(), MdsConfig::rademacher(3))?)?;
        let inc = sim.increments(0)?;
        let a = sim.path_from_increments(&inc, Method::Naive)?;
        let b = sim.path_from_increments(&inc, Method::Fft)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    let bench = bench_methods(4096, &coupled(), 3, 5)?;
    Ok(Outcome {
        pass: worst <= 1e-9 && bench.speedup >= 5.0,
        detail: format!("max path difference {worst:.2e}, FFT speedup at n=4096 {:.1}x", bench.speedup),
    })
}

fn scalar_covariance() -> Result<Outcome> {
    let h = HurstOperator::scalar(0.75, 1)?;
    let mut errors = Vec::new();
    for p in 6..=12 {
        let n = 1usize << p;
        let w = KernelWeights::new(n, &h)?;
        errors.push((w.grid_cross_moment(n, n)[(0, 0)] - 2.0 / 3.0).abs() / (2.0 / 3.0));
    }
    let monotone = errors.windows(2).all(|e| e[1] < e[0]);
    let last = *errors.last().unwrap();
    Ok(Outcome {
        pass: last <= 0.02 && monotone,
        detail: format!("relative error at n=4096 {last:.2e}, monotone {monotone}"),
    })
}

fn matrix_covariance() -> Result<Outcome> {
    let config = TestConfig {
        ladder: (6..=9).map(|p| 1usize << p).collect(),
        times: vec![0.25, 0.5, 0.75, 1.0],
        relative_tolerance: 0.05,
        ..TestConfig::default()
    };
    let r = covariance_convergence(&coupled(), &config)?;
    let errors: Vec<String> = r.stats["relative_frobenius_errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| format!("{:.2e}", e.as_f64().unwrap()))
        .collect();
    Ok(Outcome {
        pass: r.pass,
        detail: format!("errors n=64..512 [{}], monotone {}", errors.join(", "), r.stats["monotone"]),
    })
}

fn quadratic_sums() -> Result<Outcome> {
    let config = TestConfig {
        ladder: (6..=12).map(|p| 1usize << p).collect(),
        relative_tolerance: 0.02,
        ..TestConfig::default()
    };
    let pairs = [(1.0, 1.0), (0.5, 1.0), (0.25, 0.75)];
    let reports = [
        lemma6_convergence(&HurstOperator::scalar(0.75, 1)?, &pairs, &config)?,
        lemma6_convergence(&coupled(), &pairs, &config)?,
        corollary_convergence(&coupled(), &[0.6, -1.3], &pairs, &config)?,
    ];
    let detail = reports
        .iter()
        .map(|r| format!("{} {:.2e}", r.name, r.stats["final_error"].as_f64().unwrap()))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome {
        pass: reports.iter().all(|r| r.pass),
        detail: format!("relative error at n=4096: {detail}"),
    })
}

fn fdd() -> Result<Outcome> {
    let plan = SimulationPlan::new(512, coupled(), MdsConfig::rademacher(7))?.with_replications(20_000)?;
    let functional = LinearFunctional::new(vec![0.5, 1.0], vec![0.8, -0.5], vec![1.0, 0.7])?;
    let r = fdd_test(&plan, &functional, &TestConfig::default())?;
    Ok(Outcome {
        pass: r.pass,
        detail: format!(
            "variance error {:.2e}, KS {:.4} (bar {:.4})",
            r.stats["relative_variance_error"].as_f64().unwrap(),
            r.stats["ks_distance"].as_f64().unwrap(),
            r.stats["ks_bar"].as_f64().unwrap()
        ),
    })
}

fn self_similarity() -> Result<Outcome> {
    let pairs = [(1.0, 0.7), (0.6, 0.6), (0.3, 0.9)];
    let config = TestConfig::default();
    let mut worst = 0.0f64;
    let mut pass = true;
    for h in [coupled(), rotating()] {
        for c in [0.25, 0.5, 1.0] {
            let r = self_similarity_check(&h, &pairs, c, &config)?;
            pass &= r.pass;
            worst = worst.max(r.stats["max_abs_error"].as_f64().unwrap());
        }
    }
    Ok(Outcome {
        pass,
        detail: format!("max entry error {worst:.2e}"),
    })
}

fn tightness() -> Result<Outcome> {
    let h = coupled();
    let r = tightness_check(1024, &h, &BoundWitness::default_for(&h), &TightnessConfig::standard(1024))?;
    Ok(Outcome {
        pass: r.pass,
        detail: format!(
            "slope {:.3} in window [{:.2}, {:.2}], degenerate products {}",
            r.stats["slope"].as_f64().unwrap(),
            r.params["window"][0].as_f64().unwrap(),
            r.params["window"][1].as_f64().unwrap(),
            r.stats["degenerate_products"]
        ),
    })
}

fn mds_conditions() -> Result<Outcome> {
    let n = 4096;
    let epsilon = 0.1;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [MdsKind::IidRademacher, MdsKind::PredictableSign] {
        let inc = generate(n, 2, &MdsConfig::new(kind, 1.0, 5)?)?;
        let r = check_conditions(&inc, epsilon)?;
        let exact = r.max_abs_scaled == 1.0 && r.qv_sup_deviation <= 1.0 / n as f64 && r.lindeberg_sum == 0.0;
        pass &= exact && r.all_pass();
        parts.push(format!("{kind}: max {} qv {:.1e} lindeberg {}", r.max_abs_scaled, r.qv_sup_deviation, r.lindeberg_sum));
    }
    let spike = check_conditions(&generate(n, 2, &MdsConfig::new(MdsKind::ViolatingSpike, 1.0, 5)?)?, epsilon)?;
    pass &= !spike.bounded_increments_pass;
    parts.push(format!("violating-spike bounded flag {}", spike.bounded_increments_pass));
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
    })
}

fn donsker() -> Result<Outcome> {
    let config = TestConfig {
        replications: 100_000,
        times: vec![0.25, 0.5, 1.0],
        ..TestConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [MdsConfig::rademacher(11), MdsConfig::predictable_sign(11)] {
        let r = donsker_check(256, 2, &g, &config)?;
        pass &= r.pass;
        parts.push(format!("{} max z {:.2}", g.kind, r.stats["max_z"].as_f64().unwrap()));
    }
    Ok(Outcome {
        pass,
        detail: parts.join(", "),
    })
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("matrix functions", Duration::from_secs(10), matrix_suite),
        ("weight correctness", Duration::from_secs(30), weights_vs_quadrature),
        ("FFT/naive equivalence", Duration::from_secs(60), fft_equivalence),
        ("scalar covariance", Duration::from_secs(60), scalar_covariance),
        ("matrix covariance convergence", Duration::from_secs(300), matrix_covariance),
        ("quadratic sums", Duration::from_secs(120), quadratic_sums),
        ("fdd Gaussianity", Duration::from_secs(300), fdd),
        ("self-similarity", Duration::from_secs(30), self_similarity),
        ("tightness modulus", Duration::from_secs(120), tightness),
        ("MDS conditions", Duration::from_secs(5), mds_conditions),
        ("Donsker sanity", Duration::from_secs(60), donsker),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<30} {} ({detail}; {:.2}s of {}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
