use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One level of the crossing scales. Integers are kept exact and
/// serialized as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub k: u32,
    #[serde(with = "decimal")]
    pub l: BigUint,
    #[serde(with = "decimal")]
    pub big_l: BigUint,
}

impl ScaleRow {
    /// `l_{k+1}^2 ≤ l_k^3` and `l_k^3 ≤ 4·l_{k+1}^2`, i.e.
    /// `l_k^{3/2}/2 ≤ l_{k+1} ≤ l_k^{3/2}`.
    pub fn growth_sandwich(&self, next: &ScaleRow) -> bool {
        let cube = &self.l * &self.l * &self.l;
        let sq = &next.l * &next.l;
        sq <= cube && cube <= sq * 4u32
    }

    /// `l_k ≤ L_k ≤ 2·l_k`.
    pub fn height_sandwich(&self) -> bool {
        self.l <= self.big_l && self.big_l <= &self.l * 2u32
    }

    /// `N_k = L_k + l_k + 1`.
    pub fn jump_range(&self) -> BigUint {
        &self.big_l + &self.l + BigUint::one()
    }
}

/// `l_{k+1} = ⌊√l_k⌋·l_k`, `L_k = ⌊(3/2 + 1/k)·l_k⌋` for `k ≥ 1` and
/// `L_0 = ⌊(3/2)·l_0⌋`.
pub fn detection_schedule(l0: &BigUint, k_max: u32) -> Result<Vec<ScaleRow>> {
    if *l0 < BigUint::from(2u32) {
        return Err(invalid(format!("l0 must be at least 2, got {l0}")));
    }
    let mut rows = Vec::with_capacity(k_max as usize + 1);
    let mut l = l0.clone();
    for k in 0..=k_max {
        let big_l = if k == 0 {
            &l * 3u32 / 2u32
        } else {
            // (3k + 2)·l / (2k)
            &l * (3 * k + 2) / (2 * k)
        };
        rows.push(ScaleRow { k, l: l.clone(), big_l });
        l = l.sqrt() * &l;
        debug_assert!(!l.is_zero());
    }
    Ok(rows)
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

    #[test]
    fn desk_scale_rows() {
        let rows = detection_schedule(&BigUint::from(4u32), 2).unwrap();
        assert_eq!(rows[0].big_l, BigUint::from(6u32));
        assert_eq!(rows[1].l, BigUint::from(8u32));
        // ⌊2.5·8⌋
        assert_eq!(rows[1].big_l, BigUint::from(20u32));
        // ⌊√8⌋·8 = 16, ⌊(3/2 + 1/2)·16⌋ = 32
        assert_eq!(rows[2].l, BigUint::from(16u32));
        assert_eq!(rows[2].big_l, BigUint::from(32u32));
        assert!(detection_schedule(&BigUint::one(), 2).is_err());
    }

    #[test]
    fn googol_start_and_sandwiches() {
        let l0 = BigUint::from(10u32).pow(100u32);
        let rows = detection_schedule(&l0, 10).unwrap();
        assert_eq!(rows[0].l, l0);
        // √(10^100) is exact, so l_1 = 10^150
        assert_eq!(rows[1].l, BigUint::from(10u32).pow(150u32));
        for w in rows.windows(2) {
            assert!(w[0].growth_sandwich(&w[1]));
        }
        // 3/2 + 1/k ≤ 2 only from k = 2 on
        assert!(!rows[1].height_sandwich());
        assert!(rows.iter().filter(|r| r.k != 1).all(ScaleRow::height_sandwich));
    }

    #[test]
    fn rows_serialize_as_decimal_strings() {
        let rows = detection_schedule(&BigUint::from(6u32), 1).unwrap();
        let json = serde_json::to_string(&rows[0]).unwrap();
        assert_eq!(json, r#"{"k":0,"l":"6","big_l":"9"}"#);
        assert_eq!(serde_json::from_str::<ScaleRow>(&json).unwrap(), rows[0]);
    }
}
