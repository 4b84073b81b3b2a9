//! Segment complexes: a frame with gapped edges or nested complexes glued
//! along anchor pairs.

mod attach;
mod bending;

pub use attach::{attach, AttachError, AttachThread, Attached};
pub(crate) use attach::{attach_matrix, BodyRef};
pub use bending::{
    bend, bend_matrix, bend_sequential, bend_sequential_matrix, bend_single_formula, bend_single_matrix,
    BendError, BendingTriple,
};

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::metric::{DistMatrix, MetricError, PseudometricSpace, ZeroClassPartition};
use crate::rational::Q;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bend(#[from] BendError),
    #[error(transparent)]
    Attach(#[from] AttachError),
    #[error("gapped edge needs 0 <= g <= l and l > 0 (l = {length}, g = {gap})")]
    BadEdge { length: String, gap: String },
    #[error("thread {thread}: anchor {index} is not a frame point")]
    AnchorIndex { thread: usize, index: usize },
    #[error("thread {thread}: anchors must differ unless the thread is a wedge")]
    DegenerateAnchors { thread: usize },
    #[error("thread {thread}: a wedge thread needs equal anchors and equal boundary points")]
    BadWedge { thread: usize },
    #[error("thread {thread}: boundary point {index} outside the body")]
    BoundaryIndex { thread: usize, index: usize },
    #[error("link ({a}, {b}) is not a pair of distinct frame points")]
    BadLink { a: usize, b: usize },
}

/// A segment of length `length` with a centred gap of length `gap` removed,
/// sampled with `samples` interior points on each arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GappedEdge {
    pub length: Q,
    pub gap: Q,
    pub samples: usize,
}

impl GappedEdge {
    pub fn new(length: Q, gap: Q, samples: usize) -> Result<Self, ComplexError> {
        if !length.is_positive() || gap.is_negative() || gap > length {
            return Err(ComplexError::BadEdge {
                length: length.to_string(),
                gap: gap.to_string(),
            });
        }
        Ok(Self { length, gap, samples })
    }

    pub fn arm_length(&self) -> Q {
        (&self.length - &self.gap) / Q::from_integer(2.into())
    }

    pub fn point_count(&self) -> usize {
        2 * self.samples + 4
    }

    /// Positions on `[0, l]`: `x`, left samples, `u`, `v`, right samples, `y`.
    pub fn positions(&self) -> Vec<Q> {
        let a = self.arm_length();
        let k = self.samples;
        let step = &a / Q::from_integer((k as i64 + 1).into());
        let v = &a + &self.gap;
        let mut out = Vec::with_capacity(self.point_count());
        out.push(Q::zero());
        for i in 1..=k {
            out.push(&step * Q::from_integer((i as i64).into()));
        }
        out.push(a);
        for i in 0..=k {
            out.push(&v + &step * Q::from_integer((i as i64).into()));
        }
        out.push(self.length.clone());
        out
    }

    pub fn point_names(&self) -> Vec<String> {
        let k = self.samples;
        let mut out = vec!["x".to_string()];
        out.extend((1..=k).map(|i| format!("l{i}")));
        out.push("u".into());
        out.push("v".into());
        out.extend((1..=k).map(|i| format!("r{i}")));
        out.push("y".into());
        out
    }

    /// `false` on the arm through `x`, `true` on the arm through `y`.
    pub fn sides(&self) -> Vec<bool> {
        let half = self.samples + 2;
        (0..self.point_count()).map(|i| i >= half).collect()
    }

    pub fn space(&self) -> PseudometricSpace {
        let pos = self.positions();
        let m = DistMatrix::from_fn(pos.len(), |i, j| (&pos[i] - &pos[j]).abs());
        PseudometricSpace::new(self.point_names(), m).expect("sizes agree")
    }

    pub fn boundary(&self) -> (usize, usize) {
        (0, self.point_count() - 1)
    }

    fn local_annotations(&self) -> Vec<EdgeAnnotation> {
        let pos = self.positions();
        let k = self.samples;
        let u = k + 1;
        let mut out = Vec::new();
        let solid = |a: usize, b: usize| EdgeAnnotation {
            a,
            b,
            length: &pos[b] - &pos[a],
            gap: Q::zero(),
            class: EdgeClass::Solid,
            solid_from: Some(0),
        };
        for i in 0..u {
            out.push(solid(i, i + 1));
        }
        for i in u + 1..pos.len() - 1 {
            out.push(solid(i, i + 1));
        }
        let class = if self.gap.is_zero() {
            EdgeClass::Solid
        } else if self.gap == self.length {
            EdgeClass::P1u
        } else {
            EdgeClass::Gap
        };
        out.push(EdgeAnnotation {
            a: u,
            b: u + 1,
            length: self.gap.clone(),
            gap: self.gap.clone(),
            class,
            solid_from: if self.gap.is_zero() { Some(0) } else { None },
        });
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ThreadBody {
    GappedEdge(GappedEdge),
    /// Nested complex; `boundary` indexes its flattened points.
    Complex {
        complex: Box<SegmentComplex>,
        boundary: (usize, usize),
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub anchors: (usize, usize),
    pub body: ThreadBody,
    /// Attached at the single point `anchors.0` through `boundary.0`.
    pub wedge: bool,
}

impl Thread {
    pub fn edge(x: usize, y: usize, edge: GappedEdge) -> Self {
        Self {
            anchors: (x, y),
            body: ThreadBody::GappedEdge(edge),
            wedge: false,
        }
    }

    pub fn nested(x: usize, y: usize, complex: SegmentComplex, boundary: (usize, usize)) -> Self {
        Self {
            anchors: (x, y),
            body: ThreadBody::Complex {
                complex: Box::new(complex),
                boundary,
            },
            wedge: false,
        }
    }

    pub fn wedge(z: usize, complex: SegmentComplex, point: usize) -> Self {
        Self {
            anchors: (z, z),
            body: ThreadBody::Complex {
                complex: Box::new(complex),
                boundary: (point, point),
            },
            wedge: true,
        }
    }

    pub fn anchor_distance(&self, frame: &PseudometricSpace) -> Q {
        if self.wedge {
            Q::zero()
        } else {
            frame.d(self.anchors.0, self.anchors.1).clone()
        }
    }

    pub fn boundary(&self) -> (usize, usize) {
        match &self.body {
            ThreadBody::GappedEdge(e) => e.boundary(),
            ThreadBody::Complex { boundary, .. } => *boundary,
        }
    }

    /// Stages needed before the body is total on its boundary.
    pub fn depth(&self) -> usize {
        match &self.body {
            ThreadBody::GappedEdge(_) => 1,
            ThreadBody::Complex { complex, .. } => complex.depth(),
        }
    }
}

/// Latent solid connection between two frame points (a rectifiable piece of
/// the frame geometry).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLink {
    pub a: usize,
    pub b: usize,
    pub length: Q,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentComplex {
    pub frame: PseudometricSpace,
    /// Frame moves carry full metric cost until `restore_stage`.
    pub p1u: bool,
    /// Undistorted metric behind the frame, when the frame is `ω ∘ base`.
    pub base: Option<DistMatrix>,
    pub links: Vec<FrameLink>,
    /// Stage from which the links of a p1u frame count as solid.
    pub restore_stage: Option<usize>,
    pub threads: Vec<Thread>,
    pub collapsed: Vec<BendingTriple>,
}

impl SegmentComplex {
    /// A bare p1u frame.
    pub fn new(frame: PseudometricSpace) -> Self {
        Self {
            frame,
            p1u: true,
            base: None,
            links: Vec::new(),
            restore_stage: None,
            threads: Vec::new(),
            collapsed: Vec::new(),
        }
    }

    pub fn with_threads(mut self, threads: Vec<Thread>) -> Self {
        self.threads = threads;
        self
    }

    /// Stage at which a frame link becomes solid.
    pub fn link_solid_from(&self) -> Option<usize> {
        if self.p1u {
            self.restore_stage
        } else {
            Some(0)
        }
    }

    pub fn depth(&self) -> usize {
        let links = if self.links.is_empty() {
            0
        } else {
            self.link_solid_from().map_or(0, |s| s + 1)
        };
        self.threads.iter().map(Thread::depth).max().unwrap_or(0).max(links)
    }

    /// Largest stage at which some solid annotation in the tree switches on.
    pub fn max_scheduled_stage(&self) -> usize {
        let own = if self.links.is_empty() {
            0
        } else {
            self.link_solid_from().unwrap_or(0)
        };
        self.threads
            .iter()
            .map(|t| match &t.body {
                ThreadBody::GappedEdge(_) => 0,
                ThreadBody::Complex { complex, .. } => complex.max_scheduled_stage(),
            })
            .max()
            .unwrap_or(0)
            .max(own)
    }

    pub fn nesting(&self) -> usize {
        self.threads
            .iter()
            .map(|t| match &t.body {
                ThreadBody::GappedEdge(_) => 1,
                ThreadBody::Complex { complex, .. } => 1 + complex.nesting(),
            })
            .max()
            .unwrap_or(0)
    }

    /// Structural checks; metric agreement at the anchors is checked by
    /// [`flatten`].
    pub fn check_structure(&self) -> Result<(), ComplexError> {
        let n = self.frame.len();
        for l in &self.links {
            if l.a >= n || l.b >= n || l.a == l.b {
                return Err(ComplexError::BadLink { a: l.a, b: l.b });
            }
        }
        for (t, th) in self.threads.iter().enumerate() {
            let (x, y) = th.anchors;
            for i in [x, y] {
                if i >= n {
                    return Err(ComplexError::AnchorIndex { thread: t, index: i });
                }
            }
            let (b0, b1) = th.boundary();
            if th.wedge {
                if x != y || b0 != b1 {
                    return Err(ComplexError::BadWedge { thread: t });
                }
            } else if x == y {
                return Err(ComplexError::DegenerateAnchors { thread: t });
            }
            if let ThreadBody::Complex { complex, boundary } = &th.body {
                complex.check_structure()?;
                let m = complex.point_count();
                for i in [boundary.0, boundary.1] {
                    if i >= m {
                        return Err(ComplexError::BoundaryIndex { thread: t, index: i });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.frame.len()
            + self
                .threads
                .iter()
                .map(|t| {
                    let own = match &t.body {
                        ThreadBody::GappedEdge(e) => e.point_count(),
                        ThreadBody::Complex { complex, .. } => complex.point_count(),
                    };
                    own - if t.wedge { 1 } else { 2 }
                })
                .sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Rectifiable piece.
    Solid,
    /// Removed middle of a gapped edge.
    Gap,
    /// Gap filling the whole edge.
    P1u,
    /// Frame link that becomes solid later, or never.
    Link,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeAnnotation {
    pub a: usize,
    pub b: usize,
    pub length: Q,
    pub gap: Q,
    pub class: EdgeClass,
    /// First stage at which the edge is a free move.
    pub solid_from: Option<usize>,
}

impl EdgeAnnotation {
    pub fn solid_at(&self, stage: usize) -> bool {
        self.solid_from.is_some_and(|s| s <= stage)
    }
}

#[derive(Clone, Debug)]
pub struct Flattened {
    pub space: PseudometricSpace,
    pub annotations: Vec<EdgeAnnotation>,
    pub frame_len: usize,
    /// Global index of every body point, per thread.
    pub thread_points: Vec<Vec<usize>>,
}

impl Flattened {
    pub fn solid_pairs(&self, stage: usize) -> Vec<(usize, usize)> {
        self.annotations
            .iter()
            .filter(|e| e.solid_at(stage))
            .map(|e| (e.a, e.b))
            .collect()
    }

    /// Components joined by edges solid at `stage`.
    pub fn arms_at(&self, stage: usize) -> ZeroClassPartition {
        components(self.space.len(), &self.solid_pairs(stage))
    }
}

pub(crate) fn components(n: usize, pairs: &[(usize, usize)]) -> ZeroClassPartition {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(a, b) in pairs {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    ZeroClassPartition::from_labels(&roots)
}

struct LocalBody {
    space: PseudometricSpace,
    annotations: Vec<EdgeAnnotation>,
}

fn flatten_body(body: &ThreadBody) -> Result<LocalBody, ComplexError> {
    match body {
        ThreadBody::GappedEdge(e) => Ok(LocalBody {
            space: e.space(),
            annotations: e.local_annotations(),
        }),
        ThreadBody::Complex { complex, .. } => {
            let f = flatten(complex)?;
            Ok(LocalBody {
                space: f.space,
                annotations: f.annotations,
            })
        }
    }
}

/// Materialises every sample point and the ambient attachment pseudometric.
///
/// Point order: frame points, then each thread's free body points in thread
/// order, recursively (depth-first).
pub fn flatten(cx: &SegmentComplex) -> Result<Flattened, ComplexError> {
    cx.check_structure()?;
    let bodies: Vec<LocalBody> = cx
        .threads
        .par_iter()
        .map(|t| flatten_body(&t.body))
        .collect::<Result<_, _>>()?;
    let anchor_lists: Vec<(Vec<usize>, Vec<usize>)> = cx
        .threads
        .iter()
        .map(|t| {
            let (b0, b1) = t.boundary();
            if t.wedge {
                (vec![t.anchors.0], vec![b0])
            } else {
                (vec![t.anchors.0, t.anchors.1], vec![b0, b1])
            }
        })
        .collect();
    let refs: Vec<BodyRef<'_>> = bodies
        .iter()
        .zip(&anchor_lists)
        .map(|(b, (a, bd))| BodyRef {
            anchors: a,
            body: b.space.dist(),
            boundary: bd,
        })
        .collect();
    let (mut m, maps) = attach_matrix(cx.frame.dist(), &refs)?;
    for t in &cx.collapsed {
        if t.x >= cx.frame.len() || t.y >= cx.frame.len() {
            return Err(BendError::Index(t.x.max(t.y)).into());
        }
        if t.x == t.y {
            return Err(BendError::Diagonal(t.x).into());
        }
        if &t.a > m.get(t.x, t.y) {
            return Err(BendError::Exceeds {
                x: t.x,
                y: t.y,
                a: t.a.to_string(),
                current: m.get(t.x, t.y).to_string(),
            }
            .into());
        }
    }
    m = bend_sequential_matrix(&m, &cx.collapsed);

    let nf = cx.frame.len();
    let mut labels = cx.frame.labels().to_vec();
    labels.resize(m.len(), String::new());
    let solid_from = cx.link_solid_from();
    let mut annotations: Vec<EdgeAnnotation> = cx
        .links
        .iter()
        .map(|l| EdgeAnnotation {
            a: l.a,
            b: l.b,
            length: l.length.clone(),
            gap: Q::zero(),
            class: if solid_from == Some(0) {
                EdgeClass::Solid
            } else {
                EdgeClass::Link
            },
            solid_from,
        })
        .collect();
    for (t, (body, map)) in bodies.iter().zip(&maps).enumerate() {
        for (p, &g) in map.iter().enumerate() {
            if g >= nf {
                labels[g] = format!("t{t}/{}", body.space.labels()[p]);
            }
        }
        annotations.extend(body.annotations.iter().map(|e| EdgeAnnotation {
            a: map[e.a],
            b: map[e.b],
            ..e.clone()
        }));
    }
    Ok(Flattened {
        space: PseudometricSpace::new(labels, m)?,
        annotations,
        frame_len: nf,
        thread_points: maps,
    })
}

/// Rectifiable components of the flattened complex at stage 0.
pub fn arms(cx: &SegmentComplex) -> Result<ZeroClassPartition, ComplexError> {
    Ok(flatten(cx)?.arms_at(0))
}

/// Witness pair where a p1u-flagged frame fails to sit strictly above its
/// base metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct P1uFlagViolation {
    pub i: usize,
    pub j: usize,
}

/// Checks `frame > base` on every pair with `0 < base < diam(base)`; the
/// diameter is fixed by the distortion and exempt.
pub fn validate_p1u_flag(cx: &SegmentComplex) -> Result<(), P1uFlagViolation> {
    if !cx.p1u {
        return Ok(());
    }
    let Some(base) = &cx.base else {
        return Ok(());
    };
    let diam = base.max_entry();
    let n = base.len();
    for i in 0..n {
        for j in i + 1..n {
            let b = base.get(i, j);
            if b.is_positive() && b < &diam && cx.frame.d(i, j) <= b {
                return Err(P1uFlagViolation { i, j });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn two_points(d: Q) -> PseudometricSpace {
        PseudometricSpace::from_matrix(DistMatrix::from_fn(2, |i, j| if i == j { Q::zero() } else { d.clone() }))
    }

    #[test]
    fn edge_positions() {
        let e = GappedEdge::new(q(3, 2), q(1, 2), 1).unwrap();
        assert_eq!(
            e.positions(),
            vec![qi(0), q(1, 4), q(1, 2), qi(1), q(5, 4), q(3, 2)]
        );
        assert_eq!(e.sides(), vec![false, false, false, true, true, true]);
        assert!(GappedEdge::new(qi(1), qi(2), 0).is_err());
    }

    #[test]
    fn flatten_single_edge() {
        let e = GappedEdge::new(q(3, 2), q(1, 2), 1).unwrap();
        let cx = SegmentComplex::new(two_points(q(3, 2))).with_threads(vec![Thread::edge(0, 1, e)]);
        let f = flatten(&cx).unwrap();
        assert_eq!(f.space.len(), 2 + 4);
        assert!(f.space.validate().is_valid());
        assert_eq!(f.space.labels()[2], "t0/l1");
        let gaps = f.annotations.iter().filter(|a| a.class == EdgeClass::Gap).count();
        let solid = f.annotations.iter().filter(|a| a.class == EdgeClass::Solid).count();
        assert_eq!((gaps, solid), (1, 4));
        let arms = f.arms_at(0);
        assert_eq!(arms.len(), 2);
        assert!(arms.same_block(0, 2));
        assert!(arms.same_block(1, 5));
    }

    #[test]
    fn solid_thread_merges_anchors() {
        let e = GappedEdge::new(qi(1), qi(0), 0).unwrap();
        let cx = SegmentComplex::new(two_points(qi(1))).with_threads(vec![Thread::edge(0, 1, e)]);
        assert_eq!(arms(&cx).unwrap().len(), 1);
        let bare = SegmentComplex::new(two_points(qi(1)));
        assert_eq!(arms(&bare).unwrap().len(), 2);
    }

    #[test]
    fn collapsed_constraints_bend_the_frame() {
        let mut cx = SegmentComplex::new(two_points(qi(2)));
        cx.collapsed.push(BendingTriple::new(0, 1, q(1, 3)));
        let f = flatten(&cx).unwrap();
        assert_eq!(f.space.d(0, 1), &q(1, 3));
        cx.collapsed[0].a = qi(3);
        assert!(matches!(flatten(&cx), Err(ComplexError::Bend(_))));
    }

    #[test]
    fn anchor_mismatch() {
        let e = GappedEdge::new(qi(2), qi(1), 0).unwrap();
        let cx = SegmentComplex::new(two_points(qi(1))).with_threads(vec![Thread::edge(0, 1, e)]);
        assert!(matches!(flatten(&cx), Err(ComplexError::Attach(AttachError::Mismatch { .. }))));
    }
}
