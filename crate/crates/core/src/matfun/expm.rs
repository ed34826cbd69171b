//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants, plus an `exp(X) - I` variant that keeps relative accuracy
//! for small `X`.

use super::matrix::SquareMatrix;
use crate::error::Result;

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn lin_comb(terms: &[(f64, &SquareMatrix)], dim: usize) -> SquareMatrix {
    let mut out = SquareMatrix::zeros(dim);
    for (c, m) in terms {
        for (o, v) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *o += c * v;
        }
    }
    out
}

/// `(U, V)` with the [m/m] Padé approximant equal to `(V - U)^{-1} (V + U)`.
fn pade_low(a: &SquareMatrix, b: &[f64]) -> (SquareMatrix, SquareMatrix) {
    let n = a.dim();
    let a2 = a * a;
    let mut powers = vec![SquareMatrix::identity(n)];
    for _ in 1..b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let odd: Vec<(f64, &SquareMatrix)> = powers.iter().enumerate().map(|(k, p)| (b[2 * k + 1], p)).collect();
    let even: Vec<(f64, &SquareMatrix)> = powers.iter().enumerate().map(|(k, p)| (b[2 * k], p)).collect();
    let u = a * &lin_comb(&odd, n);
    let v = lin_comb(&even, n);
    (u, v)
}

fn pade_13(a: &SquareMatrix) -> (SquareMatrix, SquareMatrix) {
    let n = a.dim();
    let b = &B13;
    let id = SquareMatrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * &lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let u_rest = lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)], n);
    let u = a * &(&u_inner + &u_rest);
    let v_inner = &a6 * &lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let v_rest = lin_comb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)], n);
    (u, &v_inner + &v_rest)
}

/// Matrix exponential `exp(A)`.
pub fn mat_exp(a: &SquareMatrix) -> Result<SquareMatrix> {
    a.ensure_finite()?;
    let norm = a.norm_1();
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            return (&v - &u).solve(&(&v + &u));
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));
    let (u, v) = pade_13(&scaled);
    let mut r = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `exp(X) - I`, accurate relative to `‖X‖` when `X` is small.
///
/// Taylor series on `X / 2^s`, then `E <- E (E + 2I)` undoes the scaling.
pub fn mat_expm1(x: &SquareMatrix) -> Result<SquareMatrix> {
    x.ensure_finite()?;
    let n = x.dim();
    let norm = x.norm_1();
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let y = x.scale(0.5f64.powi(s));
    let mut term = y.clone();
    let mut sum = y.clone();
    for k in 2..40 {
        term = (&term * &y).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.norm_1() <= f64::EPSILON * 1e-2 * sum.norm_1() {
            break;
        }
    }
    for _ in 0..s {
        let e_plus = sum.shift(2.0);
        sum = &sum * &e_plus;
    }
    debug_assert_eq!(sum.dim(), n);
    Ok(sum)
}
