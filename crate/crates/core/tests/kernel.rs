use gauss_quad::GaussLegendre;
use ofbm::kernel::{covariance, kernel_l2_increment, CovarianceOracle, KernelWeights};
use ofbm::matfun::{mat_power, HurstOperator, SquareMatrix};

fn coupled() -> HurstOperator {
    HurstOperator::from_rows(&[vec![0.75, 0.2], vec![0.0, 0.6]]).unwrap()
}

/// Midpoint sum with `panels` cells.
fn riemann(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn scalar_cross_covariance_matches_riemann_sum() {
    let h = HurstOperator::scalar(0.75, 1).unwrap();
    let c = covariance(1.0, 0.5, &h).unwrap()[(0, 0)];
    let oracle = riemann(0.0, 0.5, 1_000_000, |u| (1.0 - u).powf(0.25) * (0.5 - u).powf(0.25));
    // the midpoint rule converges like panels^-1.25 at the (0.5-u)^0.25 endpoint
    assert!((c - oracle).abs() < 1e-7, "{c} vs {oracle}");
}

#[test]
fn matrix_covariance_matches_gauss_legendre_after_substitution() {
    // with u = m - x², the integrand (x²)^A is smooth enough for a fixed rule
    let h = coupled();
    let a = h.kernel_exponent();
    let (t, s) = (0.9f64, 0.6f64);
    let rule = GaussLegendre::new(200).unwrap();
    let mut acc = SquareMatrix::zeros(2);
    for (x, w) in rule.iter() {
        let x = 0.5 * (x + 1.0) * s.sqrt();
        let v = x * x;
        let kt = mat_power(t - s + v, a).unwrap();
        let ks = mat_power(v, a).unwrap();
        acc = &acc + &(&kt * &ks.transpose()).scale(w * 0.5 * s.sqrt() * 2.0 * x);
    }
    let c = covariance(t, s, &h).unwrap();
    assert!(c.max_abs_diff(&acc) < 1e-9, "{c:?} vs {acc:?}");
}

#[test]
fn toeplitz_identity_against_cell_quadrature() {
    let h = coupled();
    let n = 32;
    let w = KernelWeights::new(n, &h).unwrap();
    let rule = GaussLegendre::new(48).unwrap();
    let nf = n as f64;
    for m in [1usize, 7, 32] {
        let tm = m as f64 / nf;
        for i in 1..=m {
            let (lo, hi) = ((i - 1) as f64 / nf, i as f64 / nf);
            let mut q = SquareMatrix::zeros(2);
            for (x, wt) in rule.iter() {
                let y = 0.5 * (x + 1.0);
                // the cell touching u = tm is graded by tm - u = y^8 / n
                let (r, jac) = if i == m {
                    (y.powi(8) / nf, 0.5 * 8.0 * y.powi(7) / nf)
                } else {
                    (tm - (lo + y * (hi - lo)), 0.5 * (hi - lo))
                };
                q = &q + &mat_power(r, h.kernel_exponent()).unwrap().scale(wt * jac * nf);
            }
            assert!(q.max_abs_diff(w.cell_weight(m, i).unwrap()) < 1e-10, "m={m} i={i}");
        }
    }
}

#[test]
fn scalar_l2_increment_matches_riemann_sum() {
    let h = HurstOperator::scalar(0.75, 1).unwrap();
    let (t, s, n) = (0.8, 0.3, 10);
    let v = kernel_l2_increment(t, s, n, &h).unwrap();
    let oracle = riemann(0.0, 0.3, 1_000_000, |u| ((0.8 - u).powf(0.25) - (0.3 - u).powf(0.25)).powi(2)) + 0.5f64.powf(1.5) / 1.5;
    assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
}

#[test]
fn l2_increment_power_bound_is_grid_stable() {
    let h = coupled();
    let oracle = CovarianceOracle::new(&h);
    let big_h = (h.bounds().lambda_min + 0.5) / 2.0;
    let fit = |pts: usize| {
        let mut k = 0.0f64;
        for i in 0..pts {
            for j in 0..i {
                let (t, s) = ((i + 1) as f64 / pts as f64, (j + 1) as f64 / pts as f64);
                let v = oracle.kernel_l2_increment(t, s, 1 << 12).unwrap();
                k = k.max(v / (t - s).powf(2.0 * big_h));
            }
        }
        k
    };
    let (coarse, fine) = (fit(10), fit(20));
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((fine - coarse).abs() <= 0.1 * coarse, "{coarse} vs {fine}");
}

#[test]
fn self_similarity_of_scalar_covariance() {
    let h = HurstOperator::scalar(0.7, 1).unwrap();
    let c = 0.3f64;
    let lhs = covariance(c, c, &h).unwrap()[(0, 0)];
    assert!((lhs - c.powf(1.4) / 1.4).abs() < 1e-10);
}

#[test]
fn covariance_is_positive_definite_on_grid() {
    for h in [coupled(), HurstOperator::from_rows(&[vec![0.7, 0.1], vec![-0.15, 0.8]]).unwrap()] {
        for t in [0.1, 0.4, 1.0] {
            let c = covariance(t, t, &h).unwrap();
            assert!(c.max_abs_diff(&c.transpose()) < 1e-12);
            assert!(c[(0, 0)] > 0.0 && c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)] > 0.0);
        }
    }
}
