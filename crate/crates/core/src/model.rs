//! The pinched-disk quotient of a lamination: cut-point and gap nodes with
//! their circular boundary data, plus the transport of a small (tuned)
//! model into an ambient lamination and the factorization check between the
//! two quotients.

use std::collections::HashMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::angle::Angle;
use crate::lamination::{check_invariant, check_unlinked, AngleClass, Lamination, LaminationError};
use crate::tuning::TuningData;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("lamination is linked ({0} crosses {1}); the pinched-disk quotient is undefined")]
    Linked(AngleClass, AngleClass),
    #[error("{what}: expected degree {expected}, got {got}")]
    DegreeMismatch {
        what: &'static str,
        expected: u32,
        got: u32,
    },
    #[error("ambient leaves are linked: {0} crosses {1}")]
    AmbientLinked(AngleClass, AngleClass),
    #[error("transported class {0} crosses ambient class {1}; tuning data is inconsistent")]
    ImageCrossing(AngleClass, AngleClass),
    #[error("transported classes overlap ambient classes without agreeing: {0}")]
    ImageOverlap(LaminationError),
    #[error("extended lamination is not invariant at class {0}")]
    ImageNotInvariant(AngleClass),
    #[error(transparent)]
    Lamination(#[from] LaminationError),
}

/// Node of the pinched-disk quotient graph: a cut point carrying an angle
/// class, or a complementary gap carrying its boundary vertices in circular
/// order.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelNode {
    Class(AngleClass),
    Gap { boundary: Vec<Angle> },
}

/// Finite-resolution pinched-disk quotient of a lamination.
///
/// Class nodes come first, in lamination order (sorted by smallest angle);
/// gap nodes follow, sorted by smallest boundary angle. Edges join a gap to
/// each class on its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub nodes: Vec<ModelNode>,
    pub edges: Vec<(usize, usize)>,
}

impl ModelGraph {
    pub fn class_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, ModelNode::Class(_)))
            .count()
    }

    pub fn gap_count(&self) -> usize {
        self.nodes.len() - self.class_count()
    }
}

impl Serialize for ModelGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "lowercase")]
        enum NodeRepr<'a> {
            Class { id: usize, angles: Vec<String> },
            Gap { id: usize, boundary: &'a [Angle] },
        }
        let nodes: Vec<NodeRepr> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, node)| match node {
                ModelNode::Class(c) => NodeRepr::Class {
                    id,
                    angles: c.angles().iter().map(Angle::to_string).collect(),
                },
                ModelNode::Gap { boundary } => NodeRepr::Gap { id, boundary },
            })
            .collect();
        let mut s = serializer.serialize_struct("ModelGraph", 2)?;
        s.serialize_field("nodes", &nodes)?;
        s.serialize_field("edges", &self.edges)?;
        s.end()
    }
}

/// The class containing `a`, or the singleton `{a}`.
pub fn fiber(lam: &Lamination, a: &Angle) -> AngleClass {
    lam.class_of(a)
        .cloned()
        .unwrap_or_else(|| AngleClass::singleton(a.clone()))
}

/// Computes the finite quotient structure of the circle by the equivalence
/// generated by the lamination's classes: one node per class, one node per
/// complementary gap, edges by boundary incidence.
pub fn quotient_model(lam: &Lamination) -> Result<ModelGraph, ModelError> {
    let crossing = check_unlinked(lam);
    if let Some((a, b)) = crossing.violations.into_iter().next() {
        return Err(ModelError::Linked(a, b));
    }

    let classes = lam.classes();
    let cut_classes: Vec<(usize, &AngleClass)> = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.len() >= 2)
        .collect();

    let mut nodes: Vec<ModelNode> = classes.iter().map(|c| ModelNode::Class(c.clone())).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();

    if cut_classes.is_empty() {
        // No chords: the model is the whole circle, one gap.
        let gap_id = nodes.len();
        nodes.push(ModelNode::Gap { boundary: Vec::new() });
        for (class_id, _) in classes.iter().enumerate() {
            edges.push((class_id, gap_id));
        }
        return Ok(ModelGraph { nodes, edges });
    }

    let faces = trace_faces(&cut_classes);

    // Gap ordering: by smallest boundary angle.
    let mut gaps: Vec<(Vec<Angle>, Vec<usize>, Vec<usize>)> = faces
        .into_iter()
        .map(|f| (f.boundary, f.class_ids, f.arc_ids))
        .collect();
    gaps.sort_by(|a, b| a.0[0].cmp(&b.0[0]));

    // Arc index -> gap node id, for singleton attachment.
    let mut arc_to_gap: HashMap<usize, usize> = HashMap::new();
    for (slot, gap) in gaps.iter().enumerate() {
        let gap_id = classes.len() + slot;
        for &arc in &gap.2 {
            arc_to_gap.insert(arc, gap_id);
        }
    }

    let vertices: Vec<Angle> = {
        let mut v: Vec<Angle> = cut_classes
            .iter()
            .flat_map(|(_, c)| c.angles().iter().cloned())
            .collect();
        v.sort();
        v
    };

    for (slot, (boundary, class_ids, _)) in gaps.iter().enumerate() {
        let gap_id = classes.len() + slot;
        nodes.push(ModelNode::Gap {
            boundary: boundary.clone(),
        });
        let mut ids = class_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        for class_id in ids {
            edges.push((class_id, gap_id));
        }
    }

    // Singleton classes sit on some arc and attach to that arc's gap.
    for (class_id, class) in classes.iter().enumerate() {
        if class.len() != 1 {
            continue;
        }
        let a = class.smallest();
        let arc = match vertices.binary_search(a) {
            // Disjointness makes equality impossible.
            Ok(_) => unreachable!("singleton coincides with a cut point"),
            Err(pos) => (pos + vertices.len() - 1) % vertices.len(),
        };
        let gap_id = arc_to_gap[&arc];
        edges.push((class_id, gap_id));
    }

    edges.sort_unstable();
    edges.dedup();
    Ok(ModelGraph { nodes, edges })
}

struct Face {
    /// Boundary vertices in traversal order, rotated so the smallest leads.
    boundary: Vec<Angle>,
    /// Lamination class indices of chords on the boundary.
    class_ids: Vec<usize>,
    /// Arc indices (arc i runs from vertex i to vertex i+1) on the boundary.
    arc_ids: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeKind {
    /// Circle arc from vertex `i` to vertex `i+1 mod M`.
    Arc,
    /// Boundary chord of the class with the stored lamination index.
    Chord(usize),
}

/// Traces the faces of the planar graph formed by the circle arcs and all
/// class chords, and returns the gap faces (faces touching the circle from
/// inside). Chord-only faces are class-polygon interiors; the face touching
/// the circle from outside is dropped.
fn trace_faces(cut_classes: &[(usize, &AngleClass)]) -> Vec<Face> {
    let mut vertices: Vec<Angle> = cut_classes
        .iter()
        .flat_map(|(_, c)| c.angles().iter().cloned())
        .collect();
    vertices.sort();
    let m = vertices.len();
    let index_of = |a: &Angle| vertices.binary_search(a).expect("class angle is a vertex");

    // Undirected edges; half-edge 2e is endpoints.0 -> endpoints.1.
    let mut edge_ends: Vec<(usize, usize)> = Vec::new();
    let mut edge_kind: Vec<EdgeKind> = Vec::new();
    for i in 0..m {
        edge_ends.push((i, (i + 1) % m));
        edge_kind.push(EdgeKind::Arc);
    }
    for (class_id, class) in cut_classes {
        for (a, b) in class.chords() {
            edge_ends.push((index_of(a), index_of(b)));
            edge_kind.push(EdgeKind::Chord(*class_id));
        }
    }

    // Rotation system: outgoing half-edges at each vertex in rotational
    // order starting at the counterclockwise tangent. A chord's slot is its
    // target's circular offset; the outgoing arc sits before every chord,
    // the incoming arc (traversed backwards) after every chord.
    let mut rotations: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut keys: Vec<Vec<(Angle, u8)>> = vec![Vec::new(); m];
    for (e, &(u, v)) in edge_ends.iter().enumerate() {
        let (key_u, key_v) = match edge_kind[e] {
            EdgeKind::Arc => (
                (vertices[u].ccw_distance(&vertices[v]), 0u8),
                (vertices[v].ccw_distance(&vertices[u]), 2u8),
            ),
            EdgeKind::Chord(_) => (
                (vertices[u].ccw_distance(&vertices[v]), 1u8),
                (vertices[v].ccw_distance(&vertices[u]), 1u8),
            ),
        };
        rotations[u].push(2 * e);
        keys[u].push(key_u);
        rotations[v].push(2 * e + 1);
        keys[v].push(key_v);
    }
    for vertex in 0..m {
        let mut order: Vec<usize> = (0..rotations[vertex].len()).collect();
        order.sort_by(|&x, &y| keys[vertex][x].cmp(&keys[vertex][y]));
        rotations[vertex] = order.iter().map(|&x| rotations[vertex][x]).collect();
    }

    let half_count = 2 * edge_ends.len();
    let half_source = |h: usize| {
        let (u, v) = edge_ends[h / 2];
        if h & 1 == 0 {
            u
        } else {
            v
        }
    };
    let half_target = |h: usize| half_source(h ^ 1);

    // Interior-on-the-left traversal: continue with the clockwise successor
    // of the reversed half-edge.
    let next_half = |h: usize| -> usize {
        let twin = h ^ 1;
        let at = half_target(h);
        let rotation = &rotations[at];
        let pos = rotation
            .iter()
            .position(|&x| x == twin)
            .expect("twin is incident to the target vertex");
        rotation[(pos + rotation.len() - 1) % rotation.len()]
    };

    let mut visited = vec![false; half_count];
    let mut faces = Vec::new();
    for start in 0..half_count {
        if visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut h = start;
        loop {
            visited[h] = true;
            cycle.push(h);
            h = next_half(h);
            if h == start {
                break;
            }
        }

        // Clockwise circle travel has the exterior on its left: outer face.
        let is_outer = cycle
            .iter()
            .any(|&h| edge_kind[h / 2] == EdgeKind::Arc && h & 1 == 1);
        if is_outer {
            continue;
        }
        let mut class_ids = Vec::new();
        let mut arc_ids = Vec::new();
        for &h in &cycle {
            match edge_kind[h / 2] {
                EdgeKind::Arc => arc_ids.push(h / 2),
                EdgeKind::Chord(class_id) => class_ids.push(class_id),
            }
        }
        if arc_ids.is_empty() {
            // Chord-only face: a class-polygon interior, not a gap.
            continue;
        }
        let walk: Vec<Angle> = cycle
            .iter()
            .map(|&h| vertices[half_source(h)].clone())
            .collect();
        let lead = walk
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .expect("face walk is non-empty");
        let boundary = walk[lead..].iter().chain(&walk[..lead]).cloned().collect();
        faces.push(Face {
            boundary,
            class_ids,
            arc_ids,
        });
    }
    faces
}

/// Transports every class of the small lamination into the ambient circle
/// through the tuning substitution, closes the transported family under the
/// ambient angle map across the renormalization cycle, unions the ambient
/// leaves, and validates the result.
///
/// Per-piece closure: the small Julia set has one copy per return-map step,
/// so each transported class contributes its first `n` forward images; after
/// `n` steps the image is again a transported class, exactly.
pub fn extend_model(
    sub: &Lamination,
    tuning: &TuningData,
    ambient: &Lamination,
) -> Result<Lamination, ModelError> {
    if sub.degree() != tuning.inner_degree() {
        return Err(ModelError::DegreeMismatch {
            what: "small lamination",
            expected: tuning.inner_degree(),
            got: sub.degree(),
        });
    }
    if ambient.degree() != tuning.ambient_degree() {
        return Err(ModelError::DegreeMismatch {
            what: "ambient lamination",
            expected: tuning.ambient_degree(),
            got: ambient.degree(),
        });
    }
    let ambient_crossing = check_unlinked(ambient);
    if let Some((a, b)) = ambient_crossing.violations.into_iter().next() {
        return Err(ModelError::AmbientLinked(a, b));
    }

    let d = tuning.ambient_degree();
    let mut classes: Vec<AngleClass> = ambient.classes().to_vec();
    let ambient_count = classes.len();
    for class in sub.classes() {
        let mut image = AngleClass::new(
            class.angles().iter().map(|a| tuning.tuning_p(a)).collect(),
        )?;
        for _ in 0..tuning.period() {
            if !classes.contains(&image) {
                classes.push(image.clone());
            }
            image = AngleClass::new(image.sigma_image(d))?;
        }
    }
    let transported = classes[ambient_count..].to_vec();

    let extended = Lamination::new(d, classes).map_err(ModelError::ImageOverlap)?;

    let crossing = check_unlinked(&extended);
    if let Some((a, b)) = crossing.violations.into_iter().next() {
        // Name the transported side first when one side came through p.
        let (first, second) = if transported.contains(&a) {
            (a, b)
        } else {
            (b, a)
        };
        return Err(ModelError::ImageCrossing(first, second));
    }
    let invariance = check_invariant(&extended);
    if let Some((class, _)) = invariance.violations.into_iter().next() {
        return Err(ModelError::ImageNotInvariant(class));
    }
    Ok(extended)
}

/// Checks the factorization between quotients: the quotient of the extended
/// lamination restricted to the transported classes must be graph-isomorphic
/// to the quotient of the small lamination, under the bijection induced by
/// the substitution itself.
pub fn restricted_quotient_isomorphic(
    sub: &Lamination,
    tuning: &TuningData,
    extended: &Lamination,
) -> Result<bool, ModelError> {
    let mut image_classes = Vec::with_capacity(sub.classes().len());
    for class in sub.classes() {
        let image = AngleClass::new(
            class.angles().iter().map(|a| tuning.tuning_p(a)).collect(),
        )?;
        if !extended.contains_class(&image) {
            return Ok(false);
        }
        image_classes.push(image);
    }
    let restriction = Lamination::new(extended.degree(), image_classes.clone())?;

    let g_sub = quotient_model(sub)?;
    let g_img = quotient_model(&restriction)?;
    if g_sub.class_count() != g_img.class_count() || g_sub.gap_count() != g_img.gap_count() {
        return Ok(false);
    }

    // Map the i-th sub class (in lamination order) to the position of its
    // p-image in the restriction's order.
    let mut index_map = Vec::with_capacity(sub.classes().len());
    for class in sub.classes() {
        let image = AngleClass::new(
            class.angles().iter().map(|a| tuning.tuning_p(a)).collect(),
        )?;
        match restriction.classes().iter().position(|c| *c == image) {
            Some(pos) => index_map.push(pos),
            None => return Ok(false),
        }
    }

    // Gaps are compared through the multiset of their boundary class sets.
    let gap_signatures = |g: &ModelGraph, relabel: Option<&[usize]>| -> Vec<Vec<usize>> {
        let class_count = g.class_count();
        let mut sets: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(class_id, gap_id) in &g.edges {
            let mapped = relabel.map_or(class_id, |r| r[class_id]);
            sets.entry(gap_id - class_count).or_default().push(mapped);
        }
        let mut signatures: Vec<Vec<usize>> = (0..g.gap_count())
            .map(|slot| {
                let mut s = sets.remove(&slot).unwrap_or_default();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        signatures.sort();
        signatures
    };

    Ok(gap_signatures(&g_sub, Some(&index_map)) == gap_signatures(&g_img, None))
}
