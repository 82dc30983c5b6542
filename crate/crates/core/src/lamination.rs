//! Rational laminations: co-landing angle classes, pullback closures,
//! unlinkedness, and invariance under the degree-d angle map.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::angle::{leaves_cross, Angle};
use crate::ray::{LandingStatus, TraceError, Tracer};

#[derive(Debug, Error)]
pub enum LaminationError {
    #[error("angle class must contain at least one angle")]
    EmptyClass,
    #[error("classes {0} and {1} share an angle without being equal")]
    OverlappingClasses(AngleClass, AngleClass),
    #[error(
        "landing points of {a} and {c} are {distance:.3e} apart, beyond the co-landing \
         tolerance, but tolerance chaining merged their classes"
    )]
    ToleranceChain { a: Angle, c: Angle, distance: f64 },
    #[error("angles {a} and {b} were merged by landing proximity but have different orbit data")]
    OrbitMismatch { a: Angle, b: Angle },
    #[error("lamination built from ray tracing is linked: {0} crosses {1}")]
    LinkedBuild(AngleClass, AngleClass),
    #[error(
        "pullback of {class} at level {level} admits {count} unlinked groupings; \
         the combinatorics alone cannot decide, the polynomial dynamics must"
    )]
    PullbackAmbiguous {
        class: AngleClass,
        level: u32,
        count: usize,
    },
    #[error("pullback of {class} at level {level} admits no unlinked grouping")]
    PullbackBlocked { class: AngleClass, level: u32 },
    #[error("generators must be pairwise unlinked: {0} crosses {1}")]
    LinkedGenerators(AngleClass, AngleClass),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A finite set of angles understood to land on a common point, stored in
/// increasing circular position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AngleClass {
    angles: Vec<Angle>,
}

impl AngleClass {
    pub fn new(mut angles: Vec<Angle>) -> Result<Self, LaminationError> {
        if angles.is_empty() {
            return Err(LaminationError::EmptyClass);
        }
        angles.sort();
        angles.dedup();
        Ok(AngleClass { angles })
    }

    pub fn singleton(a: Angle) -> Self {
        AngleClass { angles: vec![a] }
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    /// Always false: the constructor rejects empty classes.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, a: &Angle) -> bool {
        self.angles.binary_search(a).is_ok()
    }

    pub fn smallest(&self) -> &Angle {
        &self.angles[0]
    }

    /// Boundary chords of the class hull: the single chord of a pair, the
    /// polygon edges of a larger class, nothing for a singleton.
    pub fn chords(&self) -> Vec<(&Angle, &Angle)> {
        match self.angles.len() {
            0 | 1 => Vec::new(),
            2 => vec![(&self.angles[0], &self.angles[1])],
            k => (0..k)
                .map(|i| (&self.angles[i], &self.angles[(i + 1) % k]))
                .collect(),
        }
    }

    /// Elementwise image under the degree-d map, deduplicated.
    pub fn sigma_image(&self, d: u32) -> Vec<Angle> {
        let mut image: Vec<Angle> = self.angles.iter().map(|a| a.sigma(d)).collect();
        image.sort();
        image.dedup();
        image
    }

    fn crosses(&self, other: &AngleClass) -> bool {
        for p in self.chords() {
            for q in other.chords() {
                if leaves_cross(p, q) {
                    return true;
                }
            }
        }
        false
    }

    fn disjoint_from(&self, other: &AngleClass) -> bool {
        self.angles.iter().all(|a| !other.contains(a))
    }
}

impl fmt::Display for AngleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.angles.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// A degree together with a finite set of pairwise disjoint angle classes,
/// sorted by smallest member.
///
/// The constructor enforces disjointness; unlinkedness is a separate check
/// (`check_unlinked`) so that deliberately linked instances can be built and
/// diagnosed.
#[derive(Debug, Clone, PartialEq)]
pub struct Lamination {
    degree: u32,
    classes: Vec<AngleClass>,
    warnings: Vec<String>,
}

impl Lamination {
    pub fn new(degree: u32, classes: Vec<AngleClass>) -> Result<Self, LaminationError> {
        let mut classes = classes;
        classes.sort();
        classes.dedup();
        for i in 0..classes.len() {
            for j in i + 1..classes.len() {
                if !classes[i].disjoint_from(&classes[j]) {
                    return Err(LaminationError::OverlappingClasses(
                        classes[i].clone(),
                        classes[j].clone(),
                    ));
                }
            }
        }
        Ok(Lamination {
            degree,
            classes,
            warnings: Vec::new(),
        })
    }

    pub fn empty(degree: u32) -> Self {
        Lamination {
            degree,
            classes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn classes(&self) -> &[AngleClass] {
        &self.classes
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn push_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    /// The class containing `a`, if any.
    pub fn class_of(&self, a: &Angle) -> Option<&AngleClass> {
        self.classes.iter().find(|c| c.contains(a))
    }

    pub fn contains_class(&self, class: &AngleClass) -> bool {
        self.classes.binary_search(class).is_ok()
    }
}

impl Serialize for Lamination {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Lamination", 3)?;
        s.serialize_field("degree", &self.degree)?;
        let classes: Vec<Vec<String>> = self
            .classes
            .iter()
            .map(|c| c.angles.iter().map(Angle::to_string).collect())
            .collect();
        s.serialize_field("classes", &classes)?;
        s.serialize_field("warnings", &self.warnings)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Lamination {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            degree: u32,
            classes: Vec<Vec<String>>,
            #[serde(default)]
            warnings: Vec<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let mut classes = Vec::with_capacity(raw.classes.len());
        for angles in raw.classes {
            let parsed = angles
                .iter()
                .map(|s| s.parse::<Angle>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            classes.push(AngleClass::new(parsed).map_err(D::Error::custom)?);
        }
        let mut lam = Lamination::new(raw.degree, classes).map_err(D::Error::custom)?;
        lam.warnings = raw.warnings;
        Ok(lam)
    }
}

/// Result of the brute-force pairwise crossing check.
#[derive(Debug, Clone)]
pub struct CrossingReport {
    pub ok: bool,
    pub violations: Vec<(AngleClass, AngleClass)>,
}

/// Brute-force pairwise `leaves_cross` over all boundary chords of all
/// class pairs.
pub fn check_unlinked(lam: &Lamination) -> CrossingReport {
    let mut violations = Vec::new();
    let classes = lam.classes();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            if classes[i].crosses(&classes[j]) {
                violations.push((classes[i].clone(), classes[j].clone()));
            }
        }
    }
    CrossingReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Result of the forward-invariance check.
#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub ok: bool,
    /// Offending classes together with their elementwise images.
    pub violations: Vec<(AngleClass, Vec<Angle>)>,
}

/// For every class C, the elementwise image under the degree map must be a
/// singleton or contained in a single class of the lamination.
pub fn check_invariant(lam: &Lamination) -> InvariantReport {
    let mut violations = Vec::new();
    for class in lam.classes() {
        let image = class.sigma_image(lam.degree());
        if image.len() == 1 {
            continue;
        }
        let covered = lam
            .classes()
            .iter()
            .any(|c| image.iter().all(|a| c.contains(a)));
        if !covered {
            violations.push((class.clone(), image));
        }
    }
    InvariantReport {
        ok: violations.is_empty(),
        violations,
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
    }
}

/// Builds the rational lamination of the polynomial behind `tracer`: every
/// rational angle with denominator at most `max_den` is landed, angles are
/// merged into classes by certified co-landing, and singletons are dropped.
///
/// Angles whose landing cannot be certified are excluded and surface as
/// warnings on the result, never silently.
pub fn build_rational_lamination(
    tracer: &Tracer,
    max_den: u32,
    depth: u32,
) -> Result<Lamination, LaminationError> {
    let degree = tracer.degree();
    let mut angles = Vec::new();
    for den in 2..=max_den as u64 {
        for num in 1..den {
            let a = Angle::from_ints(num, den).expect("den >= 2");
            // Reduced forms only, so each angle is landed once.
            if a.denominator() == &num_bigint::BigUint::from(den) {
                angles.push(a);
            }
        }
    }
    angles.sort();

    // Landing is parallel per angle; everything after this collect is
    // sequential and ordered, so results do not depend on thread scheduling.
    let landings: Vec<_> = angles
        .par_iter()
        .map(|a| tracer.land(a, depth))
        .collect::<Result<Vec<_>, _>>()?;

    let mut certified: Vec<(usize, num_complex::Complex64)> = Vec::new();
    let mut warnings = Vec::new();
    for (idx, (angle, landing)) in angles.iter().zip(&landings).enumerate() {
        match (&landing.status, &landing.certified_periodic) {
            (LandingStatus::Landed, Some(cert)) => certified.push((idx, cert.point)),
            (LandingStatus::Landed, None) => {
                warnings.push(format!("{angle}: landed but certification failed"))
            }
            (LandingStatus::TruncatedBudget, _) => {
                warnings.push(format!("{angle}: trace truncated by budget"))
            }
            (LandingStatus::TruncatedNumeric, _) => {
                warnings.push(format!("{angle}: trace truncated numerically"))
            }
        }
    }

    // Union-find accelerated by a tolerance-sized grid on landing points.
    let tol = tracer.config().colanding_tol;
    let mut uf = UnionFind::new(certified.len());
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (slot, &(_, point)) in certified.iter().enumerate() {
        let cell = ((point.re / tol).floor() as i64, (point.im / tol).floor() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(neighbors) = grid.get(&(cell.0 + dx, cell.1 + dy)) {
                    for &other in neighbors {
                        if (certified[other].1 - point).norm() < tol {
                            uf.union(slot, other);
                        }
                    }
                }
            }
        }
        grid.entry(cell).or_default().push(slot);
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for slot in 0..certified.len() {
        let root = uf.find(slot);
        groups.entry(root).or_default().push(slot);
    }

    let mut classes = Vec::new();
    for (_, slots) in groups {
        if slots.len() < 2 {
            continue;
        }
        // Certified co-landing must hold for every pair, not just along the
        // merge chain, and the orbit data must agree exactly.
        for i in 0..slots.len() {
            for j in i + 1..slots.len() {
                let (ia, pa) = certified[slots[i]];
                let (ib, pb) = certified[slots[j]];
                if (pa - pb).norm() >= tol {
                    return Err(LaminationError::ToleranceChain {
                        a: angles[ia].clone(),
                        c: angles[ib].clone(),
                        distance: (pa - pb).norm(),
                    });
                }
                if angles[ia].orbit_info(degree) != angles[ib].orbit_info(degree) {
                    return Err(LaminationError::OrbitMismatch {
                        a: angles[ia].clone(),
                        b: angles[ib].clone(),
                    });
                }
            }
        }
        let members = slots.iter().map(|&s| angles[certified[s].0].clone()).collect();
        classes.push(AngleClass::new(members)?);
    }

    let mut lam = Lamination::new(degree, classes)?;
    lam.warnings = warnings;

    // Geometric rays cannot cross; a crossing here is a numerical co-landing
    // defect and must break the build.
    let crossing = check_unlinked(&lam);
    if let Some((a, b)) = crossing.violations.into_iter().next() {
        return Err(LaminationError::LinkedBuild(a, b));
    }
    Ok(lam)
}

/// Adjoins sigma-preimage classes of every class, `levels` times.
///
/// For each class the preimage angles admit several groupings into classes
/// that map onto it; a grouping is accepted only when it is the unique one
/// that keeps the lamination unlinked and classes disjoint. Zero or several
/// surviving groupings are errors: the combinatorics alone cannot decide,
/// and guessing would silently change the model.
pub fn pullback_closure(
    lam: &Lamination,
    generators: &[AngleClass],
    levels: u32,
) -> Result<Lamination, LaminationError> {
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            if generators[i].crosses(&generators[j]) {
                return Err(LaminationError::LinkedGenerators(
                    generators[i].clone(),
                    generators[j].clone(),
                ));
            }
        }
    }
    let degree = lam.degree();
    let mut classes: Vec<AngleClass> = lam.classes().to_vec();
    for g in generators {
        if !classes.contains(g) {
            classes.push(g.clone());
        }
    }
    classes.sort();

    for level in 1..=levels {
        let snapshot = classes.clone();
        for class in &snapshot {
            if class.len() == 1 {
                // Singleton classes pull back to singletons.
                let present: HashSet<&Angle> =
                    classes.iter().flat_map(|c| c.angles().iter()).collect();
                let mut new_singletons = Vec::new();
                for pre in class.smallest().sigma_preimages(degree) {
                    if !present.contains(&pre) {
                        new_singletons.push(AngleClass::singleton(pre));
                    }
                }
                classes.extend(new_singletons);
                classes.sort();
                continue;
            }
            let grouping = unique_preimage_grouping(class, &classes, degree, level)?;
            for g in grouping {
                if !classes.contains(&g) {
                    classes.push(g.clone());
                }
            }
            classes.sort();
        }
    }

    let mut out = Lamination::new(degree, classes)?;
    out.warnings = lam.warnings().to_vec();
    Ok(out)
}

/// Enumerates all transversal groupings of the preimage angles of `class`
/// and returns the single one compatible with `existing`.
fn unique_preimage_grouping(
    class: &AngleClass,
    existing: &[AngleClass],
    degree: u32,
    level: u32,
) -> Result<Vec<AngleClass>, LaminationError> {
    let preimages: Vec<Vec<Angle>> = class
        .angles()
        .iter()
        .map(|a| a.sigma_preimages(degree))
        .collect();
    let k = class.len();
    let d = degree as usize;

    // Assign to each angle's preimage list a bijection onto the d groups;
    // the first list is the identity to kill group relabeling.
    let mut valid: Vec<Vec<AngleClass>> = Vec::new();
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); k];
    assignment[0] = (0..d).collect();
    enumerate_assignments(1, k, d, &mut assignment, &mut |assignment| {
        let mut groups: Vec<Vec<Angle>> = vec![Vec::new(); d];
        for (color, perm) in assignment.iter().enumerate() {
            for (slot, &group) in perm.iter().enumerate() {
                groups[group].push(preimages[color][slot].clone());
            }
        }
        let candidate: Vec<AngleClass> = groups
            .into_iter()
            .map(|g| AngleClass::new(g).expect("preimage groups are non-empty"))
            .collect();
        if grouping_is_valid(&candidate, existing) {
            valid.push(candidate);
        }
    });

    match valid.len() {
        1 => Ok(valid.pop().expect("length checked")),
        0 => Err(LaminationError::PullbackBlocked {
            class: class.clone(),
            level,
        }),
        count => Err(LaminationError::PullbackAmbiguous {
            class: class.clone(),
            level,
            count,
        }),
    }
}

fn enumerate_assignments(
    color: usize,
    k: usize,
    d: usize,
    assignment: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&Vec<Vec<usize>>),
) {
    if color == k {
        visit(assignment);
        return;
    }
    let mut perm: Vec<usize> = (0..d).collect();
    permute(&mut perm, 0, &mut |p| {
        assignment[color] = p.to_vec();
        enumerate_assignments(color + 1, k, d, assignment, visit);
    });
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn grouping_is_valid(candidate: &[AngleClass], existing: &[AngleClass]) -> bool {
    for (i, class) in candidate.iter().enumerate() {
        for other in &candidate[i + 1..] {
            if class.crosses(other) {
                return false;
            }
        }
        for old in existing {
            if class == old {
                continue;
            }
            if !class.disjoint_from(old) || class.crosses(old) {
                return false;
            }
        }
    }
    true
}
