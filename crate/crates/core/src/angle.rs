//! Exact arithmetic on rational points of the circle R/Z.
//!
//! Angles are reduced fractions with arbitrary-precision integers; there is
//! no floating point in this module. The degree-d angle map, d-ary digit
//! expansions, circular order, and chord crossing predicates all operate on
//! exact values, so order decisions are never subject to rounding.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AngleError {
    #[error("angle denominator must be positive")]
    ZeroDenominator,
    #[error("circular order is undefined for non-distinct angles")]
    NotDistinct,
    #[error("digit {digit} is not a base-{base} digit")]
    InvalidDigit { digit: u8, base: u32 },
    #[error("repeating digit word must be non-empty")]
    EmptyRepeatingWord,
    #[error("cannot parse angle from {0:?}; expected \"num/den\"")]
    Parse(String),
}

/// A rational point of the circle R/Z, stored as a reduced fraction
/// `num/den` with `0 <= num < den`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Angle {
    num: BigUint,
    den: BigUint,
}

/// Preperiod and period of an angle under the degree-d map `t -> d*t mod 1`.
///
/// Every rational angle is eventually periodic; `preperiod == 0` means the
/// angle itself is periodic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrbitInfo {
    pub preperiod: u32,
    pub period: u32,
}

impl Angle {
    /// Builds the angle `num/den` reduced modulo 1. Any non-negative pair is
    /// accepted; the value is normalized into `[0, 1)` and fully reduced.
    pub fn new(num: BigUint, den: BigUint) -> Result<Self, AngleError> {
        if den.is_zero() {
            return Err(AngleError::ZeroDenominator);
        }
        let num = num % &den;
        let g = num.gcd(&den);
        Ok(Angle {
            num: &num / &g,
            den: &den / &g,
        })
    }

    /// Convenience constructor from machine integers.
    pub fn from_ints(num: u64, den: u64) -> Result<Self, AngleError> {
        Angle::new(BigUint::from(num), BigUint::from(den))
    }

    pub fn zero() -> Self {
        Angle {
            num: BigUint::zero(),
            den: BigUint::one(),
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn denominator(&self) -> &BigUint {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Approximate value in `[0, 1)` turns.
    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::MAX);
        let d = self.den.to_f64().unwrap_or(f64::MAX);
        n / d
    }

    /// The degree-d angle map: `d * self mod 1`, reduced.
    pub fn sigma(&self, d: u32) -> Angle {
        debug_assert!(d >= 2);
        let num = &self.num * BigUint::from(d);
        Angle::new(num, self.den.clone()).expect("denominator stays positive")
    }

    /// Applies `sigma` `k` times.
    pub fn sigma_iter(&self, d: u32, k: u32) -> Angle {
        let mut a = self.clone();
        for _ in 0..k {
            a = a.sigma(d);
        }
        a
    }

    /// The d preimages of `self` under `sigma`, in increasing circular
    /// position: `(self + k) / d` for `k = 0..d-1`.
    pub fn sigma_preimages(&self, d: u32) -> Vec<Angle> {
        let d_big = BigUint::from(d);
        (0..d)
            .map(|k| {
                let num = &self.num + BigUint::from(k) * &self.den;
                Angle::new(num, &self.den * &d_big).expect("denominator stays positive")
            })
            .collect()
    }

    /// Preperiod and period of the `sigma`-orbit of `self`.
    pub fn orbit_info(&self, d: u32) -> OrbitInfo {
        debug_assert!(d >= 2);
        let d_big = BigUint::from(d);
        let mut seen: HashMap<BigUint, u32> = HashMap::new();
        // The orbit lives in {k/den}; tracking raw numerators avoids gcd work.
        let mut p = self.num.clone();
        let mut i: u32 = 0;
        loop {
            if let Some(&first) = seen.get(&p) {
                return OrbitInfo {
                    preperiod: first,
                    period: i - first,
                };
            }
            seen.insert(p.clone(), i);
            p = (&p * &d_big) % &self.den;
            i += 1;
        }
    }

    /// First `n` base-d digits of `self`. Angles with terminating expansions
    /// get the trailing-zeros expansion, never trailing `d-1`s.
    pub fn digits(&self, d: u32, n: usize) -> Vec<u8> {
        debug_assert!((2..=256).contains(&d));
        let d_big = BigUint::from(d);
        let mut out = Vec::with_capacity(n);
        let mut p = self.num.clone();
        for _ in 0..n {
            let scaled = &p * &d_big;
            let digit = (&scaled / &self.den).to_u8().expect("digit < base <= 256");
            out.push(digit);
            p = scaled % &self.den;
        }
        out
    }

    /// The canonical eventually periodic base-d expansion of `self`: the
    /// preperiodic prefix followed by the repeating block.
    pub fn digit_expansion(&self, d: u32) -> (Vec<u8>, Vec<u8>) {
        let info = self.orbit_info(d);
        let all = self.digits(d, (info.preperiod + info.period) as usize);
        let prefix = all[..info.preperiod as usize].to_vec();
        let repeating = all[info.preperiod as usize..].to_vec();
        (prefix, repeating)
    }

    /// Circular distance from `self` to `other` traveling counterclockwise:
    /// `(other - self) mod 1`.
    pub fn ccw_distance(&self, other: &Angle) -> Angle {
        // (b.num * a.den - a.num * b.den) mod (a.den * b.den), kept unsigned.
        let cross_b = &other.num * &self.den;
        let cross_a = &self.num * &other.den;
        let den = &self.den * &other.den;
        let num = if cross_b >= cross_a {
            cross_b - cross_a
        } else {
            &den - (cross_a - cross_b)
        };
        Angle::new(num, den).expect("denominator stays positive")
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Angle {
    /// Numeric order of representatives in `[0, 1)`.
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Angle {
    type Err = AngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num_s, den_s) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num = BigUint::from_str(num_s).map_err(|_| AngleError::Parse(s.to_string()))?;
        let den = BigUint::from_str(den_s).map_err(|_| AngleError::Parse(s.to_string()))?;
        Angle::new(num, den)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e: AngleError| D::Error::custom(e))
    }
}

/// Exact value of the eventually periodic base-d expansion
/// `0.prefix(repeating)^inf`, reduced modulo 1.
pub fn from_periodic_digits(
    prefix: &[u8],
    repeating: &[u8],
    d: u32,
) -> Result<Angle, AngleError> {
    if repeating.is_empty() {
        return Err(AngleError::EmptyRepeatingWord);
    }
    let d_big = BigUint::from(d);
    let word_value = |word: &[u8]| -> Result<BigUint, AngleError> {
        let mut v = BigUint::zero();
        for &digit in word {
            if u32::from(digit) >= d {
                return Err(AngleError::InvalidDigit { digit, base: d });
            }
            v = v * &d_big + BigUint::from(digit);
        }
        Ok(v)
    };
    let prefix_value = word_value(prefix)?;
    let repeating_value = word_value(repeating)?;
    let d_pow_prefix = d_big.pow(prefix.len() as u32);
    let d_pow_rep = d_big.pow(repeating.len() as u32);
    let rep_den = &d_pow_rep - BigUint::one();
    // prefix/d^L + repeating/((d^q - 1) d^L)
    let num = prefix_value * &rep_den + repeating_value;
    let den = d_pow_prefix * rep_den;
    Angle::new(num, den)
}

/// True iff traveling counterclockwise from `a` one meets `b` strictly
/// before `c`. Errors when the three angles are not pairwise distinct.
pub fn in_ccw_order(a: &Angle, b: &Angle, c: &Angle) -> Result<bool, AngleError> {
    if a == b || b == c || a == c {
        return Err(AngleError::NotDistinct);
    }
    Ok(a.ccw_distance(b) < a.ccw_distance(c))
}

/// True iff the chord with endpoint angles `p` crosses the chord with
/// endpoint angles `q` inside the open unit disk. Chords sharing an endpoint
/// (or degenerate chords) never cross.
pub fn leaves_cross(p: (&Angle, &Angle), q: (&Angle, &Angle)) -> bool {
    if p.0 == p.1 || q.0 == q.1 {
        return false;
    }
    if q.0 == p.0 || q.0 == p.1 || q.1 == p.0 || q.1 == p.1 {
        return false;
    }
    let width = p.0.ccw_distance(p.1);
    let inside = |x: &Angle| p.0.ccw_distance(x) < width;
    inside(q.0) != inside(q.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(num: u64, den: u64) -> Angle {
        Angle::from_ints(num, den).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(a(1, 3).sigma(2), a(2, 3));
        assert_eq!(Angle::zero().sigma(2), Angle::zero());
        assert_eq!(a(1, 4).sigma(3), a(3, 4));
    }

    #[test]
    fn orbit_info_examples() {
        assert_eq!(
            a(1, 7).orbit_info(2),
            OrbitInfo {
                preperiod: 0,
                period: 3
            }
        );
        assert_eq!(
            a(1, 6).orbit_info(2),
            OrbitInfo {
                preperiod: 1,
                period: 2
            }
        );
        assert_eq!(
            Angle::zero().orbit_info(2),
            OrbitInfo {
                preperiod: 0,
                period: 1
            }
        );
    }

    #[test]
    fn digit_examples() {
        assert_eq!(a(1, 3).digits(2, 4), vec![0, 1, 0, 1]);
        assert_eq!(Angle::zero().digits(2, 3), vec![0, 0, 0]);
        assert_eq!(a(2, 3).digits(2, 4), vec![1, 0, 1, 0]);
        // Terminating expansion uses trailing zeros.
        assert_eq!(a(1, 2).digits(2, 4), vec![1, 0, 0, 0]);
    }

    #[test]
    fn from_periodic_digits_examples() {
        assert_eq!(from_periodic_digits(&[], &[0, 1], 2).unwrap(), a(1, 3));
        assert_eq!(from_periodic_digits(&[1, 0], &[0, 1], 2).unwrap(), a(7, 12));
        assert_eq!(from_periodic_digits(&[], &[0], 2).unwrap(), Angle::zero());
        // The all-ones expansion wraps to 0.
        assert_eq!(from_periodic_digits(&[], &[1], 2).unwrap(), Angle::zero());
        assert!(from_periodic_digits(&[0], &[], 2).is_err());
        assert!(from_periodic_digits(&[], &[2], 2).is_err());
    }

    #[test]
    fn ccw_order_examples() {
        assert!(in_ccw_order(&a(1, 10), &a(1, 2), &a(9, 10)).unwrap());
        assert!(!in_ccw_order(&a(1, 10), &a(9, 10), &a(1, 2)).unwrap());
        assert!(in_ccw_order(&a(9, 10), &a(1, 10), &a(1, 2)).unwrap());
        assert_eq!(
            in_ccw_order(&a(1, 10), &a(1, 10), &a(1, 2)),
            Err(AngleError::NotDistinct)
        );
    }

    #[test]
    fn leaves_cross_examples() {
        assert!(!leaves_cross((&a(1, 3), &a(2, 3)), (&a(1, 6), &a(5, 6))));
        assert!(leaves_cross(
            (&Angle::zero(), &a(1, 2)),
            (&a(1, 4), &a(3, 4))
        ));
        assert!(!leaves_cross((&a(1, 7), &a(2, 7)), (&a(2, 7), &a(4, 7))));
    }

    #[test]
    fn parse_and_display_roundtrip() {
        let x: Angle = "7/12".parse().unwrap();
        assert_eq!(x, a(7, 12));
        assert_eq!(x.to_string(), "7/12");
        assert_eq!(Angle::zero().to_string(), "0/1");
        let y: Angle = "5/3".parse().unwrap();
        assert_eq!(y, a(2, 3));
        assert!("bad".parse::<Angle>().is_err());
    }

    proptest! {
        #[test]
        fn sigma_preimage_fibers(num in 0u64..500, den in 1u64..500, d in 2u32..5) {
            let x = a(num, den);
            let pre = x.sigma_preimages(d);
            prop_assert_eq!(pre.len(), d as usize);
            for p in &pre {
                prop_assert_eq!(p.sigma(d), x.clone());
            }
            for i in 0..pre.len() {
                for j in i + 1..pre.len() {
                    prop_assert_ne!(&pre[i], &pre[j]);
                }
            }
        }

        #[test]
        fn expansion_roundtrips(num in 0u64..500, den in 1u64..500, d in 2u32..5) {
            let x = a(num, den);
            let (prefix, repeating) = x.digit_expansion(d);
            let back = from_periodic_digits(&prefix, &repeating, d).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn orbit_info_consistency(num in 0u64..300, den in 1u64..300, d in 2u32..5) {
            let x = a(num, den);
            let info = x.orbit_info(d);
            prop_assert!(info.period >= 1);
            let at_preperiod = x.sigma_iter(d, info.preperiod);
            let around = x.sigma_iter(d, info.preperiod + info.period);
            prop_assert_eq!(at_preperiod, around);
        }

        #[test]
        fn ccw_rotation_invariance(
            xs in proptest::collection::hash_set((0u64..200, 1u64..200), 3)
        ) {
            let v: Vec<Angle> = xs.iter().map(|&(n, d)| a(n, d)).collect();
            let (x, y, z) = (&v[0], &v[1], &v[2]);
            if x == y || y == z || x == z {
                return Ok(());
            }
            let o = in_ccw_order(x, y, z).unwrap();
            prop_assert_eq!(in_ccw_order(y, z, x).unwrap(), o);
            prop_assert_eq!(in_ccw_order(z, x, y).unwrap(), o);
            prop_assert_eq!(in_ccw_order(x, z, y).unwrap(), !o);
        }

        #[test]
        fn crossing_is_symmetric(
            p0 in (0u64..60, 1u64..60), p1 in (0u64..60, 1u64..60),
            q0 in (0u64..60, 1u64..60), q1 in (0u64..60, 1u64..60)
        ) {
            let (p0, p1) = (a(p0.0, p0.1), a(p1.0, p1.1));
            let (q0, q1) = (a(q0.0, q0.1), a(q1.0, q1.1));
            prop_assert_eq!(
                leaves_cross((&p0, &p1), (&q0, &q1)),
                leaves_cross((&q0, &q1), (&p0, &p1))
            );
            // Endpoint order within a chord is irrelevant.
            prop_assert_eq!(
                leaves_cross((&p0, &p1), (&q0, &q1)),
                leaves_cross((&p1, &p0), (&q1, &q0))
            );
        }
    }
}
