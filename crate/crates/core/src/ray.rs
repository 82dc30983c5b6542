//! Numerical tracing of external rays by Böttcher-coordinate pullback,
//! with landing detection and co-landing certification for rational angles.
//!
//! A ray at angle `a` is computed on a geometric grid of potential
//! (Green's-function) levels. The seed sits far out, where the Böttcher
//! coordinate is close to the identity; each deeper point is the
//! Newton-solved preimage under `P` of the already-known point at `d` times
//! the potential on the ray of angle `sigma(a)`. Seeding Newton from the
//! previous point on the same ray selects the preimage branch that keeps the
//! trace in the homotopy class of the ray, so the whole forward orbit of the
//! angle is traced as one family.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::angle::{Angle, OrbitInfo};
use crate::poly::{ConnectivityReport, PolyError, PolynomialSpec, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("Julia set is disconnected; external rays are only traced for connected Julia sets")]
    Disconnected(ConnectivityReport),
    #[error("trace depth must be at least 1")]
    DepthTooSmall,
    #[error("co-landing of {a} and {b} is undetermined: {reason}")]
    Undetermined { a: Angle, b: Angle, reason: String },
    #[error("co-landing requires two distinct angles")]
    EqualAngles,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Tolerances and schedule constants for the tracer.
#[derive(Debug, Clone)]
pub struct TracerConfig {
    /// Intermediate sub-steps per potential level.
    pub substeps: u32,
    /// Newton step-norm convergence threshold for pullbacks and refinement.
    pub newton_tol: f64,
    /// Newton iteration cap per pullback.
    pub newton_max_iter: u32,
    /// Cauchy-cluster diameter below which a trace is declared landed.
    pub landing_tol: f64,
    /// Number of trailing potential levels entering the cluster test.
    pub cluster_levels: u32,
    /// Distance below which two refined landing points co-land.
    pub colanding_tol: f64,
    /// Residual bound for certifying a refined (pre)periodic point.
    pub certification_tol: f64,
    /// Iteration budget for the connectivity precondition.
    pub connectivity_budget: u32,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            substeps: 8,
            newton_tol: 1e-12,
            newton_max_iter: 64,
            landing_tol: 1e-6,
            cluster_levels: 5,
            colanding_tol: 1e-6,
            certification_tol: 1e-9,
            connectivity_budget: 256,
        }
    }
}

/// Polyline approximation of an external ray, ordered by decreasing
/// potential; the first point lies outside the escape radius.
#[derive(Debug, Clone)]
pub struct RayTrace {
    pub angle: Angle,
    pub points: Vec<Complex64>,
    pub potentials: Vec<f64>,
}

impl Serialize for RayTrace {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("RayTrace", 3)?;
        s.serialize_field("angle", &self.angle)?;
        let pts: Vec<[f64; 2]> = self.points.iter().map(|z| [z.re, z.im]).collect();
        s.serialize_field("points", &pts)?;
        s.serialize_field("potentials", &self.potentials)?;
        s.end()
    }
}

/// A trace plus the numeric failure that truncated it, if any.
#[derive(Debug, Clone)]
pub struct TracedRay {
    pub trace: RayTrace,
    pub failure: Option<NumericFailure>,
}

/// Newton failed to converge while pulling back the family ray `angle`
/// to the given potential.
#[derive(Debug, Clone)]
pub struct NumericFailure {
    pub angle: Angle,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LandingStatus {
    Landed,
    TruncatedBudget,
    TruncatedNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierClass {
    Repelling,
    Parabolic,
    Indeterminate,
}

/// Newton-refined (pre)periodic landing point with its return-map multiplier.
#[derive(Debug, Clone, Serialize)]
pub struct CertifiedPoint {
    pub preperiod: u32,
    pub period: u32,
    #[serde(serialize_with = "serialize_complex")]
    pub point: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub multiplier: Complex64,
    pub class: MultiplierClass,
}

fn serialize_complex<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Landing verdict for one traced ray.
#[derive(Debug, Clone, Serialize)]
pub struct LandingResult {
    pub status: LandingStatus,
    #[serde(serialize_with = "serialize_opt_complex")]
    pub landing_point: Option<Complex64>,
    pub certified_periodic: Option<CertifiedPoint>,
}

fn serialize_opt_complex<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    z.map(|z| [z.re, z.im]).serialize(s)
}

/// Ray tracer for one polynomial with a connected Julia set.
///
/// Construction runs the connectivity heuristic and rejects polynomials
/// whose critical orbits escape. All methods are pure; tracing distinct
/// angles from several threads is safe and deterministic.
#[derive(Debug, Clone)]
pub struct Tracer {
    spec: PolynomialSpec,
    escape_radius: f64,
    connectivity: ConnectivityReport,
    config: TracerConfig,
}

impl Tracer {
    pub fn new(spec: PolynomialSpec) -> Result<Self, TraceError> {
        Tracer::with_config(spec, TracerConfig::default())
    }

    pub fn with_config(spec: PolynomialSpec, config: TracerConfig) -> Result<Self, TraceError> {
        let connectivity = spec.connectivity(config.connectivity_budget)?;
        if connectivity.verdict == Verdict::Disconnected {
            return Err(TraceError::Disconnected(connectivity));
        }
        let escape_radius = spec.escape_radius();
        Ok(Tracer {
            spec,
            escape_radius,
            connectivity,
            config,
        })
    }

    pub fn spec(&self) -> &PolynomialSpec {
        &self.spec
    }

    pub fn config(&self) -> &TracerConfig {
        &self.config
    }

    pub fn connectivity(&self) -> &ConnectivityReport {
        &self.connectivity
    }

    pub fn degree(&self) -> u32 {
        self.spec.degree() as u32
    }

    /// Starting potential: the seed sits at radius `escape_radius^4`.
    fn base_potential(&self) -> f64 {
        self.escape_radius.ln() * 4.0
    }

    /// Traces the ray at `angle` down `depth` potential levels.
    ///
    /// On Newton failure the trace computed so far is returned together with
    /// the failure description; it is never silently discarded.
    pub fn trace_ray(&self, angle: &Angle, depth: u32) -> Result<TracedRay, TraceError> {
        if depth < 1 {
            return Err(TraceError::DepthTooSmall);
        }
        let d = self.degree();
        let m = self.config.substeps as usize;
        let g0 = self.base_potential();
        let d_f = d as f64;

        // Forward orbit of the angle; ray k pulls back against ray succ(k).
        let info = angle.orbit_info(d);
        let orbit_len = (info.preperiod + info.period) as usize;
        let mut orbit = Vec::with_capacity(orbit_len);
        let mut a = angle.clone();
        for _ in 0..orbit_len {
            orbit.push(a.clone());
            a = a.sigma(d);
        }
        let succ =
            |k: usize| -> usize { if k + 1 < orbit_len { k + 1 } else { info.preperiod as usize } };

        let total_steps = depth as usize * m;
        let potential = |s: usize| g0 * d_f.powf(-(s as f64) / m as f64);
        let turns: Vec<f64> = orbit.iter().map(Angle::to_f64).collect();

        let mut history: Vec<Vec<Complex64>> =
            vec![Vec::with_capacity(total_steps + 1); orbit_len];
        let mut failure = None;

        'steps: for s in 0..=total_steps {
            let t = potential(s);
            for k in 0..orbit_len {
                let z = if s <= m {
                    // Böttcher identity zone: phi(z) ~ z this far out.
                    Complex64::from_polar(t.exp(), 2.0 * std::f64::consts::PI * turns[k])
                } else {
                    let target = history[succ(k)][s - m];
                    let seed = history[k][s - 1];
                    match self.newton_pullback(target, seed) {
                        Some(z) => z,
                        None => {
                            failure = Some(NumericFailure {
                                angle: orbit[k].clone(),
                                potential: t,
                            });
                            break 'steps;
                        }
                    }
                };
                history[k].push(z);
            }
        }

        let points = std::mem::take(&mut history[0]);
        let potentials = (0..points.len()).map(potential).collect();
        Ok(TracedRay {
            trace: RayTrace {
                angle: angle.clone(),
                points,
                potentials,
            },
            failure,
        })
    }

    /// Newton solve of `P(z) = target` seeded at `seed`.
    fn newton_pullback(&self, target: Complex64, seed: Complex64) -> Option<Complex64> {
        let mut z = seed;
        for _ in 0..self.config.newton_max_iter {
            let dp = self.spec.evaluate_derivative(z);
            if dp.norm() == 0.0 || !dp.is_finite() {
                return None;
            }
            let step = (self.spec.evaluate(z) - target) / dp;
            z -= step;
            if !z.is_finite() {
                return None;
            }
            if step.norm() < self.config.newton_tol {
                return Some(z);
            }
        }
        None
    }

    /// Traces the ray and decides whether it lands: the points at the
    /// trailing `cluster_levels` whole potential levels must cluster within
    /// the landing tolerance. For rational angles the cluster point is then
    /// refined by Newton on the (pre)periodic-point equation.
    pub fn land(&self, angle: &Angle, depth: u32) -> Result<LandingResult, TraceError> {
        let traced = self.trace_ray(angle, depth)?;
        if traced.failure.is_some() {
            return Ok(LandingResult {
                status: LandingStatus::TruncatedNumeric,
                landing_point: None,
                certified_periodic: None,
            });
        }
        let m = self.config.substeps as usize;
        let levels = self.config.cluster_levels;
        if depth < levels {
            return Ok(LandingResult {
                status: LandingStatus::TruncatedBudget,
                landing_point: None,
                certified_periodic: None,
            });
        }
        let tail: Vec<Complex64> = (depth - levels + 1..=depth)
            .map(|u| traced.trace.points[u as usize * m])
            .collect();
        let mut diameter = 0.0f64;
        for i in 0..tail.len() {
            for j in i + 1..tail.len() {
                diameter = diameter.max((tail[i] - tail[j]).norm());
            }
        }
        if diameter >= self.config.landing_tol {
            return Ok(LandingResult {
                status: LandingStatus::TruncatedBudget,
                landing_point: None,
                certified_periodic: None,
            });
        }
        let landing_point = *traced.trace.points.last().expect("trace is non-empty");
        let info = angle.orbit_info(self.degree());
        let certified_periodic = self.refine_periodic(landing_point, info);
        Ok(LandingResult {
            status: LandingStatus::Landed,
            landing_point: Some(landing_point),
            certified_periodic,
        })
    }

    /// Newton refinement of a candidate landing point `x` of an angle with
    /// orbit data `(l, n)`: solves `P^(l+n)(x) = P^l(x)` and certifies the
    /// residual. Returns `None` when Newton leaves the basin or the residual
    /// stays above the certification tolerance.
    fn refine_periodic(&self, candidate: Complex64, info: OrbitInfo) -> Option<CertifiedPoint> {
        let l = info.preperiod;
        let n = info.period;
        let mut x = candidate;
        let mut converged = false;
        for _ in 0..self.config.newton_max_iter {
            let (g, dg) = self.return_map_gap(x, l, n)?;
            if dg.norm() == 0.0 {
                return None;
            }
            let step = g / dg;
            x -= step;
            if !x.is_finite() {
                return None;
            }
            if step.norm() < self.config.newton_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        let (g, _) = self.return_map_gap(x, l, n)?;
        if g.norm() >= self.config.certification_tol {
            return None;
        }
        // Refinement must not wander off to some unrelated solution.
        if (x - candidate).norm() > 10.0 * self.config.landing_tol {
            return None;
        }
        let multiplier = self.cycle_multiplier(x, l, n);
        let modulus = multiplier.norm();
        let class = if modulus > 1.0 + 1e-6 {
            MultiplierClass::Repelling
        } else if (modulus - 1.0).abs() <= 1e-6 {
            MultiplierClass::Parabolic
        } else {
            MultiplierClass::Indeterminate
        };
        Some(CertifiedPoint {
            preperiod: l,
            period: n,
            point: x,
            multiplier,
            class,
        })
    }

    /// `g(x) = P^(l+n)(x) - P^l(x)` and its derivative, by forward
    /// accumulation along the orbit.
    fn return_map_gap(&self, x: Complex64, l: u32, n: u32) -> Option<(Complex64, Complex64)> {
        let mut z = x;
        let mut deriv = Complex64::new(1.0, 0.0);
        let mut at_l = (z, deriv);
        for i in 0..(l + n) {
            if i == l {
                at_l = (z, deriv);
            }
            deriv *= self.spec.evaluate_derivative(z);
            z = self.spec.evaluate(z);
            if !z.is_finite() || !deriv.is_finite() {
                return None;
            }
        }
        if l + n == l {
            at_l = (z, deriv);
        }
        Some((z - at_l.0, deriv - at_l.1))
    }

    /// Multiplier `(P^n)'(y)` of the cycle through `y = P^l(x)`.
    fn cycle_multiplier(&self, x: Complex64, l: u32, n: u32) -> Complex64 {
        let mut y = x;
        for _ in 0..l {
            y = self.spec.evaluate(y);
        }
        let mut deriv = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            deriv *= self.spec.evaluate_derivative(y);
            y = self.spec.evaluate(y);
        }
        deriv
    }

    /// True iff the rays at `a` and `b` certifiably land on the same point.
    ///
    /// Identical orbit data is an exact necessary condition checked first;
    /// the numeric part compares Newton-refined landing points. Truncated or
    /// uncertified landings surface as `TraceError::Undetermined`, never as
    /// `false`.
    pub fn co_land(&self, a: &Angle, b: &Angle, depth: u32) -> Result<bool, TraceError> {
        if a == b {
            return Err(TraceError::EqualAngles);
        }
        let d = self.degree();
        if a.orbit_info(d) != b.orbit_info(d) {
            return Ok(false);
        }
        let mut refined = Vec::with_capacity(2);
        for angle in [a, b] {
            let landing = self.land(angle, depth)?;
            match landing.certified_periodic {
                Some(cert) if landing.status == LandingStatus::Landed => refined.push(cert.point),
                _ => {
                    return Err(TraceError::Undetermined {
                        a: a.clone(),
                        b: b.clone(),
                        reason: match landing.status {
                            LandingStatus::Landed => "landing point could not be certified",
                            LandingStatus::TruncatedBudget => "trace truncated by budget",
                            LandingStatus::TruncatedNumeric => "trace truncated numerically",
                        }
                        .to_string(),
                    })
                }
            }
        }
        Ok((refined[0] - refined[1]).norm() < self.config.colanding_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_spec;

    fn angle(n: u64, d: u64) -> Angle {
        Angle::from_ints(n, d).unwrap()
    }

    fn tracer(spec: &str) -> Tracer {
        Tracer::new(parse_spec(spec).unwrap()).unwrap()
    }

    /// Circular distance between two points in turns.
    fn turn_distance(x: f64, a: f64) -> f64 {
        let d = (x - a).rem_euclid(1.0);
        d.min(1.0 - d)
    }

    #[test]
    fn power_map_rays_are_radial() {
        for (spec, deg) in [("1,0,0", 2u32), ("1,0,0,0", 3u32)] {
            let t = tracer(spec);
            for num in 0..8u64 {
                let a = angle(num, 8);
                let traced = t.trace_ray(&a, 20).unwrap();
                assert!(traced.failure.is_none());
                let expected = a.to_f64();
                for z in &traced.trace.points {
                    let arg = z.arg() / (2.0 * std::f64::consts::PI);
                    assert!(
                        turn_distance(arg, expected) < 1e-9,
                        "degree {deg} ray {a} left the radial line"
                    );
                }
            }
        }
    }

    #[test]
    fn trace_is_ordered_and_starts_outside() {
        let t = tracer("c=-1");
        let traced = t.trace_ray(&angle(1, 3), 25).unwrap();
        let trace = &traced.trace;
        assert!(trace.points[0].norm() > t.spec().escape_radius());
        for w in trace.potentials.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert_eq!(trace.points.len(), trace.potentials.len());
    }

    #[test]
    fn chebyshev_ray_zero_lands_at_two() {
        let t = tracer("c=-2");
        let result = t.land(&Angle::zero(), 30).unwrap();
        assert_eq!(result.status, LandingStatus::Landed);
        let cert = result.certified_periodic.unwrap();
        assert!((cert.point - Complex64::new(2.0, 0.0)).norm() < 1e-9);
        assert_eq!(cert.class, MultiplierClass::Repelling);
    }

    #[test]
    fn chebyshev_ray_half_is_preperiodic() {
        let t = tracer("c=-2");
        let result = t.land(&angle(1, 2), 30).unwrap();
        assert_eq!(result.status, LandingStatus::Landed);
        let cert = result.certified_periodic.unwrap();
        assert_eq!((cert.preperiod, cert.period), (1, 1));
        assert!((cert.point - Complex64::new(-2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn square_ray_lands_on_unit_circle() {
        let t = tracer("1,0,0");
        let result = t.land(&angle(1, 3), 30).unwrap();
        assert_eq!(result.status, LandingStatus::Landed);
        let expected = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!((result.certified_periodic.unwrap().point - expected).norm() < 1e-9);
    }

    #[test]
    fn basilica_alpha_fixed_point() {
        // The alpha cycle multiplier is only ~1.53, so the ray approaches its
        // landing point like potential^0.3; the cluster tolerance needs a
        // deep trace.
        let t = tracer("c=-1");
        let result = t.land(&angle(1, 3), 80).unwrap();
        let cert = result.certified_periodic.unwrap();
        let alpha = (1.0 - 5.0f64.sqrt()) / 2.0;
        assert!((cert.point - Complex64::new(alpha, 0.0)).norm() < 1e-9);
        assert_eq!(cert.class, MultiplierClass::Repelling);
    }

    #[test]
    fn co_landing_examples() {
        let basilica = tracer("c=-1");
        assert!(basilica.co_land(&angle(1, 3), &angle(2, 3), 80).unwrap());

        let square = tracer("1,0,0");
        assert!(!square.co_land(&angle(1, 3), &angle(2, 3), 30).unwrap());

        let rabbit = tracer("c=-0.122561+0.744862i");
        assert!(rabbit.co_land(&angle(1, 7), &angle(2, 7), 150).unwrap());
    }

    #[test]
    fn co_land_is_symmetric_and_rejects_equal() {
        let t = tracer("c=-1");
        let ab = t.co_land(&angle(1, 3), &angle(2, 3), 80).unwrap();
        let ba = t.co_land(&angle(2, 3), &angle(1, 3), 80).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(
            t.co_land(&angle(1, 3), &angle(1, 3), 30),
            Err(TraceError::EqualAngles)
        );
    }

    #[test]
    fn shallow_depth_truncates_instead_of_landing() {
        let t = tracer("c=-1");
        let result = t.land(&angle(1, 3), 3).unwrap();
        assert_eq!(result.status, LandingStatus::TruncatedBudget);
        assert!(result.landing_point.is_none());
    }

    #[test]
    fn parabolic_landing_truncates_within_budget() {
        // c = 1/4 has a parabolic fixed point; the ray at angle 0 approaches
        // it logarithmically and never clusters, so the budget policy must
        // surface truncation rather than a false landing.
        let t = tracer("c=0.25");
        let result = t.land(&Angle::zero(), 60).unwrap();
        assert_eq!(result.status, LandingStatus::TruncatedBudget);
        assert!(result.landing_point.is_none());
    }

    #[test]
    fn disconnected_julia_set_is_rejected() {
        let spec = parse_spec("c=-5").unwrap();
        match Tracer::new(spec) {
            Err(TraceError::Disconnected(report)) => {
                assert_eq!(report.verdict, Verdict::Disconnected)
            }
            other => panic!("expected disconnected rejection, got {other:?}"),
        }
    }

    #[test]
    fn equivariance_under_the_polynomial() {
        // P maps the point of ray a at potential t to the point of ray
        // sigma(a) at potential d*t.
        for spec in ["c=-1", "c=-0.122561+0.744862i", "1,0,0,0"] {
            let t = tracer(spec);
            let d = t.degree();
            let m = t.config().substeps as usize;
            let a = angle(1, 7);
            let ray_a = t.trace_ray(&a, 20).unwrap().trace;
            let ray_sa = t.trace_ray(&a.sigma(d), 20).unwrap().trace;
            // The top level is the Böttcher seed zone; pullback equivariance
            // starts one sub-step into the Newton zone.
            for s in m + 1..ray_a.points.len() {
                let image = t.spec().evaluate(ray_a.points[s]);
                let expected = ray_sa.points[s - m];
                assert!(
                    (image - expected).norm() < 1e-6,
                    "equivariance failed for {spec} at index {s}"
                );
            }
        }
    }

    #[test]
    fn trace_json_shape() {
        let t = tracer("1,0,0");
        let traced = t.trace_ray(&angle(1, 4), 5).unwrap();
        let json = serde_json::to_value(&traced.trace).unwrap();
        assert_eq!(json["angle"], "1/4");
        assert!(json["points"].as_array().unwrap().len() == 41);
        assert!(json["potentials"].as_array().unwrap().len() == 41);
    }
}
