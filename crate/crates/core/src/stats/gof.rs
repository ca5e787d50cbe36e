use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::tails::poisson_ln_pmf;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, `P[K > x]`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // theta-function form converges fast for small x
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut s = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 * s || k > 100 {
                break;
            }
            k += 2;
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * f64::from(k * k) * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `P[D_n < d]` for the one-sample statistic, by the Marsaglia–Tsang–Wang
/// matrix recursion.
fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            hm[i * m + j] = if i + 1 >= j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut eq) = matrix_power(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / n as f64;
        if s < 1e-140 {
            s *= 1e140;
            eq -= 140;
        }
    }
    (s * 10f64.powi(eq)).clamp(0.0, 1.0)
}

fn matrix_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let av = a[i * m + l];
            if av == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += av * b[l * m + j];
            }
        }
    }
    c
}

/// Matrix power with a decimal exponent carried separately.
fn matrix_power(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, ehalf) = matrix_power(a, m, n / 2);
    let mut b = matrix_mul(&half, &half, m);
    let mut e = 2 * ehalf;
    if n % 2 == 1 {
        b = matrix_mul(a, &b, m);
    }
    if b[(m / 2) * m + m / 2] > 1e140 {
        for v in b.iter_mut() {
            *v *= 1e-140;
        }
        e += 140;
    }
    (b, e)
}

/// One-sample Kolmogorov–Smirnov test. The p-value is exact for n < 35
/// and asymptotic (Kolmogorov distribution of `√n·D`) from 35 on.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let p_value = if n < 35 {
        1.0 - ks_exact_cdf(n, d)
    } else {
        kolmogorov_sf(nf.sqrt() * d)
    };
    Ok(KsResult { statistic: d, p_value })
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value at
/// effective size `n·m/(n+m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(en * d) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Merged bins as `(first count, last count or None for the open tail)`.
    pub bins: Vec<(u64, Option<u64>)>,
}

/// Chi-square goodness of fit of counts against Poisson(`mean`). Bins are
/// merged until each expected count is at least 5.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> Result<ChiSquareResult> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(invalid(format!("poisson mean must be positive, got {mean}")));
    }
    let n = counts.len();
    if n < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: n });
    }
    let nf = n as f64;
    let max_obs = counts.iter().copied().max().unwrap_or(0);
    let top = max_obs.max((mean + 10.0 * mean.sqrt() + 10.0) as u64);
    let mut expected: Vec<f64> = (0..=top).map(|k| nf * poisson_ln_pmf(k, mean).exp()).collect();
    let head: f64 = expected.iter().sum();
    // the last cell carries the whole upper tail
    *expected.last_mut().expect("non-empty") += (nf - head).max(0.0);
    let mut observed = vec![0.0; top as usize + 1];
    for c in counts {
        observed[*c as usize] += 1.0;
    }

    let mut bins: Vec<(u64, u64, f64, f64)> = Vec::new();
    let (mut start, mut e, mut o) = (0u64, 0.0, 0.0);
    for k in 0..=top {
        e += expected[k as usize];
        o += observed[k as usize];
        if e >= 5.0 {
            bins.push((start, k, e, o));
            start = k + 1;
            e = 0.0;
            o = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.1 = top;
                last.2 += e;
                last.3 += o;
            }
            None => bins.push((start, top, e, o)),
        }
    }
    if bins.len() < 2 {
        return Err(invalid("too few samples for a chi-square test with expected counts >= 5"));
    }
    let statistic: f64 = bins.iter().map(|(_, _, e, o)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
    let p_value = dist.sf(statistic);
    let last = bins.len() - 1;
    let bins = bins
        .iter()
        .enumerate()
        .map(|(i, (a, b, _, _))| (*a, if i == last { None } else { Some(*b) }))
        .collect();
    Ok(ChiSquareResult { statistic, dof, p_value, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn uniform_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn kolmogorov_branches_meet() {
        let a = kolmogorov_sf(1.18 - 1e-12);
        let b = kolmogorov_sf(1.18);
        assert!((a - b).abs() < 1e-10);
        // classic critical value at 5%
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn exact_and_asymptotic_agree_at_the_switch() {
        let n = 34;
        let d = 0.2;
        let exact = 1.0 - ks_exact_cdf(n, d);
        let asym = kolmogorov_sf((n as f64).sqrt() * d);
        assert!((exact - asym).abs() < 0.03, "{exact} vs {asym}");
        // n = 1: D is uniform on [1/2, 1]
        assert!((ks_exact_cdf(1, 0.75) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_has_large_statistic() {
        let r = ks_one_sample(&[0.3; 50], uniform_cdf).unwrap();
        assert!(r.statistic >= 0.5);
        assert!(ks_one_sample(&[], uniform_cdf).is_err());
    }

    #[test]
    fn null_samples_pass_in_most_meta_trials() {
        let mut passes = 0;
        for trial in 0..100 {
            let mut s = RandomStream::for_replicate(42, 1, trial);
            let v: Vec<f64> = (0..500).map(|_| s.uniform()).collect();
            if ks_one_sample(&v, uniform_cdf).unwrap().p_value >= 1e-3 {
                passes += 1;
            }
        }
        assert!(passes >= 99, "{passes}");
    }

    #[test]
    fn shifted_samples_are_rejected() {
        let mut s = RandomStream::new(4, 4);
        let v: Vec<f64> = (0..10_000).map(|_| s.uniform() * 0.95 + 0.05).collect();
        assert!(ks_one_sample(&v, uniform_cdf).unwrap().p_value < 1e-3);
    }

    #[test]
    fn two_sample_identical_and_shifted() {
        let mut s = RandomStream::new(8, 8);
        let a: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let b: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 1e-3);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn chi_square_accepts_poisson_and_rejects_shift() {
        let mut s = RandomStream::new(12, 0);
        let good: Vec<u64> = (0..5000).map(|_| s.poisson(4.0).unwrap()).collect();
        let r = chi_square_poisson(&good, 4.0).unwrap();
        assert!(r.p_value > 1e-3, "{r:?}");
        assert_eq!(r.bins.last().unwrap().1, None);
        let bad: Vec<u64> = (0..5000).map(|_| s.poisson(4.4).unwrap()).collect();
        assert!(chi_square_poisson(&bad, 4.0).unwrap().p_value < 1e-3);
    }
}
