//! Monic complex polynomials: evaluation, critical orbits, escape tests,
//! and the connectedness heuristic for their Julia sets.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Convergence threshold for the simultaneous critical-point solver.
pub const ROOT_TOL: f64 = 1e-12;
/// Iteration cap for the simultaneous critical-point solver.
pub const ROOT_MAX_ITER: u32 = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial must be monic (leading coefficient 1), got {0}")]
    NonMonic(Complex64),
    #[error("polynomial degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("polynomial degree must be at most 255, got {0}")]
    DegreeTooLarge(usize),
    #[error("critical-point solver did not converge within {0} iterations")]
    RootSolverDiverged(u32),
    #[error("cannot parse polynomial from {0:?}")]
    Parse(String),
    #[error("cannot parse complex number from {0:?}")]
    ParseComplex(String),
}

/// A monic polynomial of degree >= 2 with complex coefficients, stored
/// highest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSpec {
    coeffs: Vec<Complex64>,
}

/// Outcome of the finite-budget connectedness test on the critical orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub verdict: Verdict,
    pub escaping_critical_points: Vec<(f64, f64)>,
    pub iteration_budget_used: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Every critical orbit stayed below the escape radius for the full
    /// budget. A finite budget cannot prove connectedness, so this verdict
    /// is best-effort; the report records the budget used.
    Connected,
    Disconnected,
    Undetermined,
}

impl PolynomialSpec {
    /// Builds a spec from coefficients listed highest degree first.
    ///
    /// The degree is capped at 255 so that base-d digit arithmetic on
    /// angles stays within single-byte digits.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        if coeffs.len() < 3 {
            return Err(PolyError::DegreeTooSmall(coeffs.len().saturating_sub(1)));
        }
        if coeffs.len() > 256 {
            return Err(PolyError::DegreeTooLarge(coeffs.len() - 1));
        }
        let lead = coeffs[0];
        if (lead - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(PolyError::NonMonic(lead));
        }
        let mut coeffs = coeffs;
        coeffs[0] = Complex64::new(1.0, 0.0);
        Ok(PolynomialSpec { coeffs })
    }

    /// The quadratic family member `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        PolynomialSpec {
            coeffs: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                c,
            ],
        }
    }

    /// The pure power map `z^d`.
    pub fn power(d: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        coeffs[0] = Complex64::new(1.0, 0.0);
        PolynomialSpec { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Horner evaluation of `P(z)`.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Coefficients of `P'`, highest degree first.
    pub fn derivative_coeffs(&self) -> Vec<Complex64> {
        let d = self.degree();
        self.coeffs[..d]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * (d - i) as f64)
            .collect()
    }

    /// Horner evaluation of `P'(z)`.
    pub fn evaluate_derivative(&self, z: Complex64) -> Complex64 {
        let d = self.degree();
        self.coeffs[..d]
            .iter()
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (i, &c)| {
                acc * z + c * (d - i) as f64
            })
    }

    /// Radius R such that `|z| > R` forces `|P(z)| > |z|` and escape:
    /// `max(2, sum of coefficient moduli)`.
    pub fn escape_radius(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm()).sum();
        sum.max(2.0)
    }

    /// The critical points of `P`, i.e. the roots of `P'`, found by
    /// simultaneous (Aberth-Ehrlich) iteration.
    pub fn critical_points(&self) -> Result<Vec<Complex64>, PolyError> {
        all_roots(&self.derivative_coeffs())
    }

    /// Iterates each critical orbit for up to `budget` steps; any orbit
    /// exceeding the escape radius proves the Julia set disconnected.
    pub fn connectivity(&self, budget: u32) -> Result<ConnectivityReport, PolyError> {
        assert!(budget >= 1, "connectivity budget must be at least 1");
        let radius = self.escape_radius();
        let mut escaping = Vec::new();
        for &crit in &self.critical_points()? {
            let mut z = crit;
            for _ in 0..budget {
                if z.norm() > radius {
                    escaping.push((crit.re, crit.im));
                    break;
                }
                z = self.evaluate(z);
            }
        }
        escaping.sort_by(|a, b| a.partial_cmp(b).expect("critical points are finite"));
        escaping.dedup();
        let verdict = if escaping.is_empty() {
            Verdict::Connected
        } else {
            Verdict::Disconnected
        };
        Ok(ConnectivityReport {
            verdict,
            escaping_critical_points: escaping,
            iteration_budget_used: budget,
        })
    }
}

impl fmt::Display for PolynomialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.degree();
        write!(f, "z^{d}")?;
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            if c.norm() == 0.0 {
                continue;
            }
            let power = d - i;
            if power == 0 {
                write!(f, " + ({})", format_complex(*c))?;
            } else if power == 1 {
                write!(f, " + ({})z", format_complex(*c))?;
            } else {
                write!(f, " + ({})z^{power}", format_complex(*c))?;
            }
        }
        Ok(())
    }
}

fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

/// Parses the CLI polynomial syntax: either a coefficient list such as
/// `1,0,-1` (highest degree first, so `z^2 - 1`) or the quadratic shorthand
/// `c=-0.1226+0.7449i` for `z^2 + c`.
pub fn parse_spec(input: &str) -> Result<PolynomialSpec, PolyError> {
    let s = input.trim();
    if let Some(c_str) = s.strip_prefix("c=") {
        let c = parse_complex(c_str)?;
        return Ok(PolynomialSpec::quadratic(c));
    }
    let coeffs = s
        .split(',')
        .map(parse_complex)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| PolyError::Parse(input.to_string()))?;
    PolynomialSpec::new(coeffs)
}

/// Parses a complex literal: `1.5`, `-2i`, `i`, `1+2i`, `-0.12-0.74i`,
/// including exponent notation in either part.
pub fn parse_complex(input: &str) -> Result<Complex64, PolyError> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(PolyError::ParseComplex(input.to_string()));
    }
    let err = || PolyError::ParseComplex(input.to_string());

    let parse_imag = |t: &str| -> Result<f64, PolyError> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| err()),
        }
    };

    if !s.ends_with('i') && !s.ends_with('I') {
        return s
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| err());
    }
    let body = &s[..s.len() - 1];
    // Split at the last top-level sign that is not an exponent sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
            split = Some(i);
            break;
        }
    }
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| err())?;
            let im = parse_imag(&body[i..])?;
            Ok(Complex64::new(re, im))
        }
        None => Ok(Complex64::new(0.0, parse_imag(body)?)),
    }
}

/// All complex roots of a polynomial given by coefficients highest degree
/// first, via Aberth-Ehrlich simultaneous iteration.
pub fn all_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, PolyError> {
    let lead = coeffs
        .iter()
        .position(|c| c.norm() > 0.0)
        .unwrap_or(coeffs.len());
    let coeffs = &coeffs[lead..];
    if coeffs.len() <= 1 {
        return Ok(Vec::new());
    }
    let n = coeffs.len() - 1;
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| c / coeffs[0]).collect();

    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in &monic {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };

    // Cauchy-style radius; deterministic staggered starting angles.
    let radius = 1.0 + monic.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.3;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    for _ in 0..ROOT_MAX_ITER {
        let mut max_step = 0.0f64;
        let snapshot = roots.clone();
        for i in 0..n {
            let z = snapshot[i];
            let (p, dp) = eval(z);
            if p.norm() == 0.0 {
                continue;
            }
            let newton = if dp.norm() == 0.0 {
                Complex64::new(1e-8, 1e-8)
            } else {
                p / dp
            };
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, &w) in snapshot.iter().enumerate() {
                if j != i {
                    let diff = z - w;
                    if diff.norm() > 0.0 {
                        repulsion += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() == 0.0 { newton } else { newton / denom };
            roots[i] = z - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < ROOT_TOL {
            return Ok(roots);
        }
    }
    Err(PolyError::RootSolverDiverged(ROOT_MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        let basilica = PolynomialSpec::quadratic(c(-1.0, 0.0));
        assert_eq!(basilica.evaluate(c(0.0, 0.0)), c(-1.0, 0.0));
        let square = PolynomialSpec::power(2);
        assert_eq!(square.evaluate(c(0.0, 1.0)), c(-1.0, 0.0));
        let chebyshev = PolynomialSpec::quadratic(c(-2.0, 0.0));
        assert_eq!(chebyshev.evaluate(c(2.0, 0.0)), c(2.0, 0.0));
    }

    #[test]
    fn escape_radius_examples() {
        assert_eq!(PolynomialSpec::power(2).escape_radius(), 2.0);
        assert_eq!(
            PolynomialSpec::quadratic(c(-2.0, 0.0)).escape_radius(),
            3.0
        );
        assert_eq!(
            PolynomialSpec::quadratic(c(-1.0, 0.0)).escape_radius(),
            2.0
        );
    }

    #[test]
    fn connectivity_examples() {
        let basilica = PolynomialSpec::quadratic(c(-1.0, 0.0));
        let report = basilica.connectivity(100).unwrap();
        assert_eq!(report.verdict, Verdict::Connected);
        assert!(report.escaping_critical_points.is_empty());
        assert_eq!(report.iteration_budget_used, 100);

        let far = PolynomialSpec::quadratic(c(-5.0, 0.0));
        let report = far.connectivity(100).unwrap();
        assert_eq!(report.verdict, Verdict::Disconnected);
        assert_eq!(report.escaping_critical_points, vec![(0.0, 0.0)]);

        let square = PolynomialSpec::power(2);
        assert_eq!(
            square.connectivity(100).unwrap().verdict,
            Verdict::Connected
        );
    }

    #[test]
    fn connectivity_monotone_in_budget() {
        let far = PolynomialSpec::quadratic(c(-5.0, 0.0));
        let mut seen_disconnected = false;
        for budget in 1..40 {
            let verdict = far.connectivity(budget).unwrap().verdict;
            if seen_disconnected {
                assert_eq!(verdict, Verdict::Disconnected);
            }
            seen_disconnected |= verdict == Verdict::Disconnected;
        }
        assert!(seen_disconnected);
    }

    #[test]
    fn critical_points_of_cubic() {
        // P = z^3 - 3z has critical points +-1.
        let spec = PolynomialSpec::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let mut roots = spec.critical_points().unwrap();
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((roots[0] - c(-1.0, 0.0)).norm() < 1e-9);
        assert!((roots[1] - c(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn critical_points_multiple_root() {
        // P = z^4: P' = 4z^3, a triple root at 0.
        let spec = PolynomialSpec::power(4);
        for root in spec.critical_points().unwrap() {
            assert!(root.norm() < 1e-6);
        }
    }

    #[test]
    fn parse_spec_forms() {
        let p = parse_spec("1,0,-1").unwrap();
        assert_eq!(p, PolynomialSpec::quadratic(c(-1.0, 0.0)));
        let q = parse_spec("c=-1").unwrap();
        assert_eq!(q, PolynomialSpec::quadratic(c(-1.0, 0.0)));
        let r = parse_spec("c=-0.122561+0.744862i").unwrap();
        assert_eq!(r, PolynomialSpec::quadratic(c(-0.122561, 0.744862)));
        assert!(parse_spec("2,0,0").is_err());
        assert!(parse_spec("1,1").is_err());
        let huge = std::iter::once("1".to_string())
            .chain(std::iter::repeat_n("0".to_string(), 300))
            .collect::<Vec<_>>()
            .join(",");
        assert!(matches!(parse_spec(&huge), Err(PolyError::DegreeTooLarge(300))));
        assert!(parse_spec("junk").is_err());
    }

    #[test]
    fn parse_complex_forms() {
        assert_eq!(parse_complex("1.5").unwrap(), c(1.5, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("1-2i").unwrap(), c(1.0, -2.0));
        assert_eq!(parse_complex("1e-3+2e-4i").unwrap(), c(1e-3, 2e-4));
        assert!(parse_complex("one").is_err());
    }

    proptest! {
        #[test]
        fn evaluate_exact_on_integers(
            a2 in -9i64..10, a1 in -9i64..10, a0 in -9i64..10, z in -9i64..10
        ) {
            let spec = PolynomialSpec::new(vec![
                c(1.0, 0.0),
                c(a2 as f64, 0.0),
                c(a1 as f64, 0.0),
                c(a0 as f64, 0.0),
            ]).unwrap();
            let exact = z * z * z + a2 * z * z + a1 * z + a0;
            let got = spec.evaluate(c(z as f64, 0.0));
            prop_assert_eq!(got, c(exact as f64, 0.0));
        }

        #[test]
        fn small_real_c_is_connected(c_milli in -250i64..=250, budget in 1u32..200) {
            // For z^2 + c with real |c| <= 1/4 the critical orbit stays in
            // [-1/2, 1/2], so the verdict is connected at any budget.
            let spec = PolynomialSpec::quadratic(c(c_milli as f64 / 1000.0, 0.0));
            let report = spec.connectivity(budget).unwrap();
            prop_assert_eq!(report.verdict, Verdict::Connected);
        }
    }
}
