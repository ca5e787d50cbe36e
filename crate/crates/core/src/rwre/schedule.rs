use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Natural log of an arbitrarily large integer.
pub(crate) fn ln_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    (v >> shift).to_f64().expect("64-bit mantissa").ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub k: u32,
    #[serde(with = "decimal")]
    pub big_l: BigUint,
    #[serde(with = "decimal")]
    pub l: BigUint,
    /// `L^{−1/16}`.
    pub epsilon: f64,
    /// `2·C1·L^{1/16}/l`.
    pub speed_step: f64,
    /// Defined from `k6` on.
    pub rho: Option<f64>,
    /// Defined from `k7` on.
    pub v_tilde: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTable {
    pub rows: Vec<ScheduleRow>,
    /// First `k` whose tail `Σ_{j≥k} ε_j` (summed to `k_max`) is at most `δ/4`.
    pub k6: Option<u32>,
    /// First `k ≥ k6` whose tail of speed steps is below `(v_target − ρ)/4`.
    pub k7: Option<u32>,
    /// `ρ < ρ_c − 2δ` holds.
    pub rho_in_range: bool,
}

/// Scales `L_{k+1} = l_k·L_k` with `l_k = ⌊L_k^{1/4}⌋`, sprinkling
/// `ρ_{k6} = ρ_c − 5δ/4`, `ρ_{k+1} = ρ_k − ε_k`, and speeds
/// `ṽ_{k7} = v_target − (v_target − ρ)/8`, `ṽ_{k+1} = ṽ_k − 2·C1·L_k^{1/16}/l_k`.
/// `v_target` stands for the lower speed at `ρ_c − δ`.
#[allow(clippy::too_many_arguments)]
pub fn rwre_schedule(
    l0: &BigUint,
    rho: f64,
    delta: f64,
    c1: f64,
    rho_c_minus: f64,
    v_target: f64,
    k_max: u32,
) -> Result<ScheduleTable> {
    if *l0 < BigUint::from(16u32) {
        return Err(invalid(format!("L0 must be at least 16, got {l0}")));
    }
    for (name, v) in [("rho", rho), ("delta", delta), ("C1", c1), ("rho_c_minus", rho_c_minus)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let mut rows = Vec::with_capacity(k_max as usize + 1);
    let mut big_l = l0.clone();
    for k in 0..=k_max {
        let l = big_l.nth_root(4);
        let ln = ln_big(&big_l);
        let epsilon = (-ln / 16.0).exp();
        let speed_step = 2.0 * c1 * (ln / 16.0 - ln_big(&l)).exp();
        rows.push(ScheduleRow { k, big_l: big_l.clone(), l: l.clone(), epsilon, speed_step, rho: None, v_tilde: None });
        big_l *= l;
    }
    let tail = |f: &dyn Fn(&ScheduleRow) -> f64| {
        let mut acc = vec![0.0; rows.len() + 1];
        for i in (0..rows.len()).rev() {
            acc[i] = acc[i + 1] + f(&rows[i]);
        }
        acc
    };
    let eps_tail = tail(&|r| r.epsilon);
    let k6 = (0..rows.len()).find(|&k| eps_tail[k] <= delta / 4.0);
    let step_tail = tail(&|r| r.speed_step);
    let k7 = k6.and_then(|k6| (k6..rows.len()).find(|&k| step_tail[k] < (v_target - rho) / 4.0));
    if let Some(k6) = k6 {
        let mut r = rho_c_minus - 1.25 * delta;
        for row in &mut rows[k6..] {
            row.rho = Some(r);
            r -= row.epsilon;
        }
    }
    if let Some(k7) = k7 {
        let mut v = v_target - (v_target - rho) / 8.0;
        for row in &mut rows[k7..] {
            row.v_tilde = Some(v);
            v -= row.speed_step;
        }
    }
    Ok(ScheduleTable {
        rows,
        k6: k6.map(|k| k as u32),
        k7: k7.map(|k| k as u32),
        rho_in_range: rho < rho_c_minus - 2.0 * delta,
    })
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("not a decimal integer: {s}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Pow;

    fn ten_to(e: u32) -> BigUint {
        BigUint::from(10u32).pow(e)
    }

    #[test]
    fn first_rows_at_ten_to_the_ten() {
        let t = rwre_schedule(&ten_to(10), 0.1, 0.05, 1.0, 0.3, 0.6, 12).unwrap();
        assert_eq!(t.rows[0].big_l, ten_to(10));
        assert_eq!(t.rows[0].l, BigUint::from(316u32));
        assert!((t.rows[0].epsilon - 10f64.powf(-10.0 / 16.0)).abs() < 1e-12);
        assert!((t.rows[0].epsilon - 0.23714).abs() < 1e-5);
        assert_eq!(t.rows[1].big_l, ten_to(10) * 316u32);
    }

    #[test]
    fn sprinkling_and_speeds_decrease() {
        // past k ≈ 12 the decrements drop below one ulp of ρ
        let t = rwre_schedule(&ten_to(10), 0.1, 0.05, 1.0, 0.3, 0.6, 12).unwrap();
        assert!(t.rho_in_range);
        let k6 = t.k6.unwrap() as usize;
        let rhos: Vec<f64> = t.rows[k6..].iter().map(|r| r.rho.unwrap()).collect();
        assert!(rhos.windows(2).all(|w| w[1] < w[0]));
        assert!(t.rows[..k6].iter().all(|r| r.rho.is_none()));
        // limit stays above ρ_c − 2δ·(…): ρ_∞ ≥ ρ_c − 5δ/4 − δ/4
        assert!(*rhos.last().unwrap() >= 0.3 - 1.5 * 0.05 - 1e-12);
        let k7 = t.k7.unwrap() as usize;
        assert!(k7 >= k6);
        let vs: Vec<f64> = t.rows[k7..].iter().map(|r| r.v_tilde.unwrap()).collect();
        for (w, row) in vs.windows(2).zip(&t.rows[k7..]) {
            assert!(w[1] < w[0] || row.speed_step < 1e-16);
        }
        assert!(*vs.last().unwrap() >= 0.1 + 5.0 / 8.0 * 0.5 - 1e-12);
    }

    #[test]
    fn epsilon_partial_sums_settle() {
        let t = rwre_schedule(&ten_to(10), 0.1, 0.05, 1.0, 0.3, 0.6, 40).unwrap();
        let partial: Vec<f64> = t
            .rows
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.epsilon;
                Some(*acc)
            })
            .collect();
        assert!((partial[40] - partial[20]).abs() < 1e-6);
        // ε underflows to 0 once L passes about 10^5000
        assert!(t.rows.windows(2).all(|w| w[1].epsilon < w[0].epsilon || w[1].epsilon == 0.0));
    }

    #[test]
    fn ln_of_huge_integers() {
        let v = ten_to(5000);
        assert!((ln_big(&v) / (5000.0 * std::f64::consts::LN_10) - 1.0).abs() < 1e-12);
        assert!((ln_big(&BigUint::from(316u32)) - 316f64.ln()).abs() < 1e-15);
        assert!(rwre_schedule(&BigUint::from(15u32), 0.1, 0.1, 1.0, 0.5, 0.6, 3).is_err());
    }
}
