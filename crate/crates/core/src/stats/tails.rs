use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, out_of_domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// `P[Poi ≥ λ + x]`
    Upper,
    /// `P[Poi ≤ λ − x]`
    Lower,
}

pub(crate) fn poisson_ln_pmf(k: u64, lambda: f64) -> f64 {
    let k = k as f64;
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

fn check_lambda_x(lambda: f64, x: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("x must be positive, got {x}")));
    }
    Ok(())
}

struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn new() -> Self {
        Self { sum: 0.0, c: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Sum of the Poisson(`lambda`) pmf over `lo..=hi` (`hi = None` for the
/// open upper tail). Terms are generated outward from the mode of the range
/// with the pmf ratio recurrence and added with compensation.
fn pmf_range_sum(lambda: f64, lo: u64, hi: Option<u64>) -> f64 {
    let mode = lambda.floor() as u64;
    let start = match hi {
        Some(h) => mode.clamp(lo, h),
        None => mode.max(lo),
    };
    let p0 = poisson_ln_pmf(start, lambda).exp();
    let mut acc = Kahan::new();
    acc.add(p0);
    // downward from start
    let mut p = p0;
    let mut k = start;
    while k > lo {
        p *= k as f64 / lambda;
        k -= 1;
        acc.add(p);
        if p < 1e-18 * acc.sum && (k as f64) < lambda {
            break;
        }
    }
    // upward from start
    let mut p = p0;
    let mut k = start;
    loop {
        if let Some(h) = hi {
            if k >= h {
                break;
            }
        }
        k += 1;
        p *= lambda / k as f64;
        acc.add(p);
        if p == 0.0 || (p < 1e-18 * acc.sum && (k as f64) > lambda) {
            break;
        }
    }
    acc.sum
}

/// Exact Poisson tail `P[Poi ≥ λ+x]` or `P[Poi ≤ λ−x]`.
pub fn poisson_tail_exact(lambda: f64, x: f64, side: TailSide) -> Result<f64> {
    check_lambda_x(lambda, x)?;
    match side {
        TailSide::Upper => {
            let k0 = (lambda + x).ceil() as u64;
            Ok(pmf_range_sum(lambda, k0, None))
        }
        TailSide::Lower => {
            let top = lambda - x;
            if top < 0.0 {
                return Ok(0.0);
            }
            Ok(pmf_range_sum(lambda, 0, Some(top.floor() as u64)))
        }
    }
}

/// `exp(−x²/(2(x+λ)))`, an upper bound for both tails.
pub fn poisson_tail_bound(lambda: f64, x: f64) -> Result<f64> {
    check_lambda_x(lambda, x)?;
    Ok((-x * x / (2.0 * (x + lambda))).exp())
}

/// `h(x) = 2((1+x)ln(1+x) − x)/x²` on `[−1, ∞)`, with `h(−1) = 2`,
/// `h(0) = 1`.
pub fn chernoff_h(x: f64) -> Result<f64> {
    if x.is_nan() || x < -1.0 {
        return Err(out_of_domain(format!("h is defined on [-1, inf), got {x}")));
    }
    if x == -1.0 {
        return Ok(2.0);
    }
    if x.abs() < 1e-4 {
        // 2 Σ_{n≥2} (−x)^(n−2)/(n(n−1))
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 2..10 {
            sum += pow / (n * (n - 1)) as f64;
            pow *= -x;
        }
        return Ok(2.0 * sum);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(2.0 * ((1.0 + x) * x.ln_1p() - x) / (x * x))
}

/// `g(x) = (1+x)·h(x)`.
pub fn chernoff_g(x: f64) -> Result<f64> {
    Ok((1.0 + x) * chernoff_h(x)?)
}

/// `x²/(2λ)·h(±x/λ)`, the Chernoff exponent of the upper (`+`) or lower
/// (`−`) tail. The lower side needs `x < λ`.
pub fn chernoff_exponent(lambda: f64, x: f64, side: TailSide) -> Result<f64> {
    check_lambda_x(lambda, x)?;
    let r = x / lambda;
    let h = match side {
        TailSide::Upper => chernoff_h(r)?,
        TailSide::Lower => {
            if x >= lambda {
                return Err(out_of_domain(format!("lower exponent needs x < lambda, got x={x}, lambda={lambda}")));
            }
            chernoff_h(-r)?
        }
    };
    Ok(x * x / (2.0 * lambda) * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_tails() {
        let e = (-1.0f64).exp();
        let up = poisson_tail_exact(1.0, 1.0, TailSide::Upper).unwrap();
        assert!((up - (1.0 - 2.0 * e)).abs() < 1e-15);
        let lo = poisson_tail_exact(1.0, 1.0, TailSide::Lower).unwrap();
        assert!((lo - e).abs() < 1e-15);
        assert_eq!(poisson_tail_exact(1.0, 2.0, TailSide::Lower).unwrap(), 0.0);
    }

    #[test]
    fn reference_tails_at_lambda_twenty() {
        // 50-digit summations
        let up = poisson_tail_exact(20.0, 5.0, TailSide::Upper).unwrap();
        assert!((up - 0.156_772_621_826_237_7).abs() < 1e-12, "{up}");
        let lo = poisson_tail_exact(20.0, 5.0, TailSide::Lower).unwrap();
        assert!((lo - 0.156_513_134_639_743).abs() < 1e-12, "{lo}");
    }

    #[test]
    fn upper_and_lower_cover_everything() {
        // P[X >= 8] + P[X <= 7] = 1 at lambda = 5
        let up = poisson_tail_exact(5.0, 3.0, TailSide::Upper).unwrap();
        let lo = poisson_tail_exact(5.0, 0.5, TailSide::Lower).unwrap();
        let mid: f64 = (5..=7).map(|k| poisson_ln_pmf(k, 5.0).exp()).sum();
        assert!((up + lo + mid - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bound_values_and_errors() {
        assert!((poisson_tail_bound(1.0, 1.0).unwrap() - (-0.25f64).exp()).abs() < 1e-15);
        assert!(poisson_tail_bound(0.0, 1.0).is_err());
        assert!(poisson_tail_bound(1.0, 0.0).is_err());
        let mut prev = 1.0;
        for i in 1..100 {
            let b = poisson_tail_bound(3.0, f64::from(i) * 0.5).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn h_special_values() {
        assert_eq!(chernoff_h(0.0).unwrap(), 1.0);
        assert_eq!(chernoff_h(-1.0).unwrap(), 2.0);
        let h1 = 2.0 * (2.0 * 2f64.ln() - 1.0);
        assert!((chernoff_h(1.0).unwrap() - h1).abs() < 1e-15);
        assert!(chernoff_h(-1.5).is_err());
        assert!((chernoff_h(1e-4 - 1e-12).unwrap() - chernoff_h(1e-4).unwrap()).abs() < 1e-12);
        assert!(chernoff_exponent(2.0, 2.0, TailSide::Lower).is_err());
    }
}
