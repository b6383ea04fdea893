//! Distribution functions needed by the closed-form dependence models.
//!
//! The standard normal CDF goes through `libm::erfc` (the fdlibm rational
//! approximation, accurate to about one ulp). The Student-t CDF is built on
//! the regularized incomplete beta function, evaluated with the modified
//! Lentz continued fraction.

use std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

const BETA_EPS: f64 = 1e-16;
const BETA_TINY: f64 = 1e-300;
const BETA_MAX_ITER: usize = 10_000;

/// Regularized incomplete beta `I_x(a, b)`.
///
/// `y` must equal `1 - x`; passing it separately keeps precision when `x`
/// is close to one.
pub fn beta_reg(a: f64, b: f64, x: f64, y: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if v.abs() < BETA_TINY { BETA_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_EPS {
            break;
        }
    }
    h
}

/// Student-t distribution function with `df > 0` degrees of freedom
/// (non-integer `df` allowed).
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, x, y);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Maclaurin series of erf, summed to convergence; independent of libm.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn normal_cdf_matches_erf_series() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let oracle = 0.5 * (1.0 + erf_series(x / 2f64.sqrt()));
            assert!((norm_cdf(x) - oracle).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn normal_cdf_tails_and_symmetry() {
        assert_eq!(norm_cdf(0.0), 0.5);
        for &x in &[0.3, 1.7, 4.2, 8.0] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert!(norm_cdf(-40.0) >= 0.0);
        assert_eq!(norm_cdf(40.0), 1.0);
    }

    #[test]
    fn theta_reference_value_for_eq22_params() {
        let theta = 2.0 * norm_cdf(0.4f64.sqrt());
        let oracle = 1.0 + erf_series((0.4f64).sqrt() / 2f64.sqrt());
        assert!((theta - oracle).abs() < 1e-13);
        // The commonly quoted 1.47290 is truncated; the exact value is 1.4729107.
        assert!((theta - 1.472_910_743_134_462).abs() < 1e-13);
        assert!((theta - 1.47290).abs() < 2e-5);
    }

    #[test]
    fn student_t_closed_forms() {
        let t1 = |x: f64| 0.5 + x.atan() / PI;
        let t2 = |x: f64| 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
        let t3 = |x: f64| {
            let s3 = 3f64.sqrt();
            0.5 + (x / (s3 * (1.0 + x * x / 3.0)) + (x / s3).atan()) / PI
        };
        let t4 = |x: f64| {
            let a = x * x / (4.0 + x * x);
            0.5 + 0.5 * a.sqrt() * (1.0 + 0.5 * (1.0 - a)) * x.signum()
        };
        for i in -60..=60 {
            let x = i as f64 * 0.25;
            assert!((student_t_cdf(x, 1.0) - t1(x)).abs() < 1e-13, "df1 x={x}");
            assert!((student_t_cdf(x, 2.0) - t2(x)).abs() < 1e-13, "df2 x={x}");
            assert!((student_t_cdf(x, 3.0) - t3(x)).abs() < 1e-13, "df3 x={x}");
            assert!((student_t_cdf(x, 4.0) - t4(x)).abs() < 1e-13, "df4 x={x}");
        }
    }

    #[test]
    fn student_t_non_integer_df_by_quadrature() {
        // Composite Simpson on the density from 0 to x, added to 1/2.
        let df: f64 = 7.082;
        let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * PI).ln();
        let dens = |u: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + u * u / df).ln()).exp();
        for &x in &[-3.1, -0.7, 0.0, 0.4, 1.9, 5.5] {
            let n = 20_000;
            let hstep = x / n as f64;
            let mut s = dens(0.0) + dens(x);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * dens(i as f64 * hstep);
            }
            let oracle = 0.5 + s * hstep / 3.0;
            assert!((student_t_cdf(x, df) - oracle).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn student_t_approaches_normal() {
        for &x in &[-2.0, -0.5, 1.0, 2.5] {
            assert!((student_t_cdf(x, 1e7) - norm_cdf(x)).abs() < 1e-6);
        }
    }
}
