//! Quadratic tuning combinatorics: the external connecting function `p` as a
//! digit substitution, its monotone inverse `nu`, exact semiconjugacy and
//! order-preservation checks, and the numerically certified placement report.
//!
//! A tuning is encoded by a characteristic angle pair `(theta-, theta+)` of
//! period `n` whose base-d expansions repeat the digit words `u` and `v`.
//! Substituting `0 -> u`, `1 -> v` into the binary expansion of a small
//! angle embeds the small circle's combinatorics among ambient angles;
//! decoding blocks of length `n` inverts it on its image.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::angle::{from_periodic_digits, in_ccw_order, Angle};
use crate::ray::{LandingStatus, TraceError, Tracer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("inner degree {0} is unsupported; only quadratic (k = 2) tuning is implemented")]
    UnsupportedInnerDegree(u32),
    #[error("ambient degree must be at least 2, got {0}")]
    AmbientDegreeTooSmall(u32),
    #[error("tuning period must be at least 1")]
    PeriodTooSmall,
    #[error("{angle} is not periodic of period dividing {n} under the degree-{d} map")]
    NotPeriodic { angle: Angle, n: u32, d: u32 },
    #[error("{angle} has exact period {actual}, not the declared period {n}")]
    PeriodMismatch { angle: Angle, actual: u32, n: u32 },
    #[error("tuning words coincide; theta- and theta+ do not determine a substitution")]
    DegenerateWords,
}

/// Characteristic angle pair of a renormalization window together with its
/// digit words and degrees. `d` is the ambient degree, `k` the straightened
/// (inner) degree; only `k = 2` is supported.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningData {
    theta_minus: Angle,
    theta_plus: Angle,
    period: u32,
    word_u: Vec<u8>,
    word_v: Vec<u8>,
    ambient_degree: u32,
    inner_degree: u32,
}

impl TuningData {
    /// Builds tuning data from the characteristic pair, inferring the period
    /// from the orbit of `theta-`.
    pub fn new(
        theta_minus: Angle,
        theta_plus: Angle,
        ambient_degree: u32,
        inner_degree: u32,
    ) -> Result<Self, TuningError> {
        let info = theta_minus.orbit_info(ambient_degree);
        if info.preperiod != 0 {
            return Err(TuningError::NotPeriodic {
                angle: theta_minus,
                n: 0,
                d: ambient_degree,
            });
        }
        TuningData::with_period(theta_minus, theta_plus, info.period, ambient_degree, inner_degree)
    }

    /// Builds tuning data with an explicitly declared period, as read from
    /// the JSON interchange form.
    pub fn with_period(
        theta_minus: Angle,
        theta_plus: Angle,
        period: u32,
        ambient_degree: u32,
        inner_degree: u32,
    ) -> Result<Self, TuningError> {
        if inner_degree != 2 {
            return Err(TuningError::UnsupportedInnerDegree(inner_degree));
        }
        if ambient_degree < 2 {
            return Err(TuningError::AmbientDegreeTooSmall(ambient_degree));
        }
        if period == 0 {
            return Err(TuningError::PeriodTooSmall);
        }
        let word_u = periodic_word(&theta_minus, period, ambient_degree)?;
        let mut word_v = periodic_word(&theta_plus, period, ambient_degree)?;
        if word_u == word_v {
            // The wrap expansion of angle 0 is the all-(d-1)s word; it is the
            // only alternative reading and yields the identity tuning.
            if theta_plus.is_zero() {
                word_v = vec![(ambient_degree - 1) as u8; period as usize];
            } else {
                return Err(TuningError::DegenerateWords);
            }
        }
        for theta in [&theta_minus, &theta_plus] {
            let info = theta.orbit_info(ambient_degree);
            if info.preperiod == 0 && info.period != period && !theta.is_zero() {
                return Err(TuningError::PeriodMismatch {
                    angle: theta.clone(),
                    actual: info.period,
                    n: period,
                });
            }
        }
        Ok(TuningData {
            theta_minus,
            theta_plus,
            period,
            word_u,
            word_v,
            ambient_degree,
            inner_degree,
        })
    }

    /// The identity tuning of a degree-2 ambient circle: words `0` and `1`,
    /// period 1, `p = nu = id`.
    pub fn identity() -> Self {
        TuningData {
            theta_minus: Angle::zero(),
            theta_plus: Angle::zero(),
            period: 1,
            word_u: vec![0],
            word_v: vec![1],
            ambient_degree: 2,
            inner_degree: 2,
        }
    }

    pub fn theta_minus(&self) -> &Angle {
        &self.theta_minus
    }

    pub fn theta_plus(&self) -> &Angle {
        &self.theta_plus
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn ambient_degree(&self) -> u32 {
        self.ambient_degree
    }

    pub fn inner_degree(&self) -> u32 {
        self.inner_degree
    }

    pub fn word_u(&self) -> &[u8] {
        &self.word_u
    }

    pub fn word_v(&self) -> &[u8] {
        &self.word_v
    }

    pub fn is_degenerate_pair(&self) -> bool {
        self.theta_minus == self.theta_plus
    }

    /// The external connecting function `p`: substitutes each binary digit
    /// of `a` by the corresponding tuning word and returns the exact value.
    pub fn tuning_p(&self, a: &Angle) -> Angle {
        let (prefix, repeating) = a.digit_expansion(self.inner_degree);
        let substitute = |digits: &[u8]| -> Vec<u8> {
            digits
                .iter()
                .flat_map(|&digit| {
                    if digit == 0 {
                        self.word_u.iter().copied()
                    } else {
                        self.word_v.iter().copied()
                    }
                })
                .collect()
        };
        from_periodic_digits(
            &substitute(&prefix),
            &substitute(&repeating),
            self.ambient_degree,
        )
        .expect("substituted words are valid base-d digits")
    }

    /// The inverse reading `nu`: decodes the base-d expansion of `b` in
    /// blocks of length `n`. Returns `None` when some block is neither `u`
    /// nor `v`, i.e. `b` is outside the combinatorial domain.
    pub fn tuning_nu(&self, b: &Angle) -> Option<Angle> {
        let n = self.period as usize;
        let (prefix, repeating) = b.digit_expansion(self.ambient_degree);
        let prefix_blocks = prefix.len().div_ceil(n);
        let rep_blocks = repeating.len().lcm(&n) / n;
        let total_digits = prefix_blocks * n + rep_blocks * n;

        let digit_at = |i: usize| -> u8 {
            if i < prefix.len() {
                prefix[i]
            } else {
                repeating[(i - prefix.len()) % repeating.len()]
            }
        };
        let mut decoded = Vec::with_capacity(prefix_blocks + rep_blocks);
        for block_idx in 0..(total_digits / n) {
            let block: Vec<u8> = (block_idx * n..(block_idx + 1) * n).map(digit_at).collect();
            if block == self.word_u {
                decoded.push(0u8);
            } else if block == self.word_v {
                decoded.push(1u8);
            } else {
                return None;
            }
        }
        Some(
            from_periodic_digits(
                &decoded[..prefix_blocks],
                &decoded[prefix_blocks..],
                self.inner_degree,
            )
            .expect("binary digits are valid"),
        )
    }
}

impl Serialize for TuningData {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TuningData", 5)?;
        s.serialize_field("theta_minus", &self.theta_minus)?;
        s.serialize_field("theta_plus", &self.theta_plus)?;
        s.serialize_field("n", &self.period)?;
        s.serialize_field("d", &self.ambient_degree)?;
        s.serialize_field("k", &self.inner_degree)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for TuningData {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            theta_minus: Angle,
            theta_plus: Angle,
            n: u32,
            d: u32,
            k: u32,
        }
        let raw = Raw::deserialize(deserializer)?;
        TuningData::with_period(raw.theta_minus, raw.theta_plus, raw.n, raw.d, raw.k)
            .map_err(D::Error::custom)
    }
}

/// The n-digit word whose infinite repetition has value `theta`:
/// `theta * (d^n - 1)` written in base d. Errors when `theta` is not fixed
/// by n steps of the degree-d map.
fn periodic_word(theta: &Angle, n: u32, d: u32) -> Result<Vec<u8>, TuningError> {
    let modulus = BigUint::from(d).pow(n) - BigUint::one();
    let scaled = theta.numerator() * &modulus;
    let (value, rem) = scaled.div_rem(theta.denominator());
    if !rem.is_zero() {
        return Err(TuningError::NotPeriodic {
            angle: theta.clone(),
            n,
            d,
        });
    }
    let d_big = BigUint::from(d);
    let mut digits = vec![0u8; n as usize];
    let mut v = value;
    for slot in (0..n as usize).rev() {
        let (q, r) = v.div_rem(&d_big);
        digits[slot] = r.to_u8().expect("digit < base");
        v = q;
    }
    Ok(digits)
}

/// Exact semiconjugacy check in return-map form: `nu(sigma_d^n(b)) =
/// sigma_k(nu(b))` for every sample.
#[derive(Debug, Clone, Serialize)]
pub struct SemiconjugacyReport {
    pub ok: bool,
    /// Samples failing the identity, or outside the domain of `nu`.
    pub failures: Vec<Angle>,
}

pub fn verify_semiconjugacy(tuning: &TuningData, samples: &[Angle]) -> SemiconjugacyReport {
    let d = tuning.ambient_degree();
    let k = tuning.inner_degree();
    let n = tuning.period();
    let mut failures = Vec::new();
    for b in samples {
        let holds = match (tuning.tuning_nu(b), tuning.tuning_nu(&b.sigma_iter(d, n))) {
            (Some(nu_b), Some(nu_advanced)) => nu_advanced == nu_b.sigma(k),
            _ => false,
        };
        if !holds {
            failures.push(b.clone());
        }
    }
    SemiconjugacyReport {
        ok: failures.is_empty(),
        failures,
    }
}

/// Exact circular-order preservation over all sample triples.
#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub ok: bool,
    pub witness: Option<(Angle, Angle, Angle)>,
}

pub fn verify_order_preserving(tuning: &TuningData, samples: &[Angle]) -> OrderReport {
    let pairs: Vec<(Angle, Angle)> = samples
        .iter()
        .map(|a| (a.clone(), tuning.tuning_p(a)))
        .collect();
    match order_violation_witness(&pairs) {
        Some((i, j, k)) => OrderReport {
            ok: false,
            witness: Some((pairs[i].0.clone(), pairs[j].0.clone(), pairs[k].0.clone())),
        },
        None => OrderReport {
            ok: true,
            witness: None,
        },
    }
}

/// Finds a triple on which a sampled map fails to preserve circular order
/// (or collapses two points). Exposed for adversarial checks against maps
/// other than a genuine tuning substitution.
pub fn order_violation_witness(pairs: &[(Angle, Angle)]) -> Option<(usize, usize, usize)> {
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if pairs[i].1 == pairs[j].1 {
                let k = (0..pairs.len()).find(|&k| k != i && k != j)?;
                return Some((i, j, k));
            }
            for k in j + 1..pairs.len() {
                let source = in_ccw_order(&pairs[i].0, &pairs[j].0, &pairs[k].0)
                    .expect("samples are distinct");
                let image = match in_ccw_order(&pairs[i].1, &pairs[j].1, &pairs[k].1) {
                    Ok(order) => order,
                    Err(_) => return Some((i, j, k)),
                };
                if source != image {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

/// The first `count` rational angles in denominator-then-numerator order:
/// 0, 1/2, 1/3, 2/3, 1/4, 3/4, ... A deterministic dense anchor sample.
pub fn farey_angles(count: usize) -> Vec<Angle> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(Angle::zero());
    let mut den: u64 = 2;
    while out.len() < count {
        for num in 1..den {
            if num.gcd(&den) == 1 {
                out.push(Angle::from_ints(num, den).expect("den >= 2"));
                if out.len() == count {
                    return out;
                }
            }
        }
        den += 1;
    }
    out
}

/// Numerically certified placement report for a tuning against an actual
/// polynomial: exact order preservation of `p` on the anchor sample plus the
/// fraction of sampled angles whose ambient ray `R(p(a))` certifiably lands
/// inside the renormalization window.
#[derive(Debug, Clone, Serialize)]
pub struct StrategicReport {
    pub anchor_sample: Vec<Angle>,
    pub order_preserved: bool,
    pub order_witness: Option<(Angle, Angle, Angle)>,
    pub landing_agreement: f64,
    pub failures: Vec<(Angle, String)>,
}

/// How many return-map steps of the landing point must stay inside the
/// window before an angle counts as certified.
const WINDOW_BUDGET: u32 = 8;

pub fn strategic_report(
    tuning: &TuningData,
    tracer: &Tracer,
    samples: &[Angle],
    depth: u32,
) -> Result<StrategicReport, TraceError> {
    let order = verify_order_preserving(tuning, samples);

    // Window test: for a genuine pair the wake of the co-landing
    // characteristic rays contains the small Julia set; the degenerate pair
    // (identity tuning) leaves the whole bounded plane as the window.
    let wake = if tuning.is_degenerate_pair() {
        None
    } else {
        Some(Wake::from_characteristic_rays(tuning, tracer, depth)?)
    };

    let outcomes: Vec<(Angle, Result<bool, String>)> = samples
        .par_iter()
        .map(|a| {
            let image = tuning.tuning_p(a);
            let verdict = certify_member(tuning, tracer, &image, depth, wake.as_ref());
            (a.clone(), verdict)
        })
        .collect();

    let mut failures = Vec::new();
    let mut members = 0usize;
    for (angle, outcome) in outcomes {
        match outcome {
            Ok(true) => members += 1,
            Ok(false) => failures.push((angle, "landing point left the window".to_string())),
            Err(reason) => failures.push((angle, reason)),
        }
    }
    let landing_agreement = if samples.is_empty() {
        1.0
    } else {
        members as f64 / samples.len() as f64
    };
    Ok(StrategicReport {
        anchor_sample: samples.to_vec(),
        order_preserved: order.ok,
        order_witness: order.witness,
        landing_agreement,
        failures,
    })
}

/// The wake cut off by the two characteristic rays: a closed polygon made of
/// one ray polyline, a far arc, and the other ray polyline back to the
/// common refined landing point (the root).
struct Wake {
    polygon: Vec<Complex64>,
    root: Complex64,
}

impl Wake {
    fn from_characteristic_rays(
        tuning: &TuningData,
        tracer: &Tracer,
        depth: u32,
    ) -> Result<Wake, TraceError> {
        let minus = tuning.theta_minus();
        let plus = tuning.theta_plus();
        let root = {
            let landing = tracer.land(minus, depth)?;
            match (&landing.status, landing.certified_periodic) {
                (LandingStatus::Landed, Some(cert)) => cert.point,
                _ => {
                    return Err(TraceError::Undetermined {
                        a: minus.clone(),
                        b: plus.clone(),
                        reason: "characteristic ray did not certifiably land".to_string(),
                    })
                }
            }
        };
        if !tracer.co_land(minus, plus, depth)? {
            return Err(TraceError::Undetermined {
                a: minus.clone(),
                b: plus.clone(),
                reason: "characteristic rays do not co-land".to_string(),
            });
        }
        let ray_minus = tracer.trace_ray(minus, depth)?.trace;
        let ray_plus = tracer.trace_ray(plus, depth)?.trace;

        let mut polygon = Vec::new();
        polygon.push(root);
        // Out along theta-: trace points run far-to-near, so reverse them.
        polygon.extend(ray_minus.points.iter().rev());
        // Counterclockwise far arc from theta- to theta+.
        let far_radius = ray_minus.points[0].norm();
        let start = minus.to_f64();
        let mut span = plus.to_f64() - start;
        if span <= 0.0 {
            span += 1.0;
        }
        const ARC_SAMPLES: usize = 64;
        for i in 1..ARC_SAMPLES {
            let turn = start + span * i as f64 / ARC_SAMPLES as f64;
            polygon.push(Complex64::from_polar(
                far_radius,
                2.0 * std::f64::consts::PI * turn,
            ));
        }
        // Down along theta+ back to the root.
        polygon.extend(ray_plus.points.iter());
        polygon.push(root);
        Ok(Wake { polygon, root })
    }

    fn contains(&self, z: Complex64) -> bool {
        if (z - self.root).norm() < 1e-6 {
            return true;
        }
        // Even-odd ray casting.
        let mut inside = false;
        for w in self.polygon.windows(2) {
            let (p, q) = (w[0], w[1]);
            if (p.im > z.im) != (q.im > z.im) {
                let x = p.re + (z.im - p.im) / (q.im - p.im) * (q.re - p.re);
                if x > z.re {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Lands the ambient ray at `image` and checks that the refined landing
/// point stays within the window for `WINDOW_BUDGET` return-map steps.
fn certify_member(
    tuning: &TuningData,
    tracer: &Tracer,
    image: &Angle,
    depth: u32,
    wake: Option<&Wake>,
) -> Result<bool, String> {
    let landing = tracer
        .land(image, depth)
        .map_err(|e| format!("trace failed: {e}"))?;
    let point = match (&landing.status, landing.certified_periodic) {
        (LandingStatus::Landed, Some(cert)) => cert.point,
        (status, _) => return Err(format!("ray {image} not certified ({status:?})")),
    };
    let n = tuning.period();
    let radius = tracer.spec().escape_radius();
    let mut z = point;
    for _ in 0..WINDOW_BUDGET {
        match wake {
            Some(wake) => {
                if !wake.contains(z) {
                    return Ok(false);
                }
            }
            None => {
                if z.norm() > radius {
                    return Ok(false);
                }
            }
        }
        for _ in 0..n {
            z = tracer.spec().evaluate(z);
        }
        if !z.is_finite() {
            return Ok(false);
        }
    }
    Ok(true)
}
