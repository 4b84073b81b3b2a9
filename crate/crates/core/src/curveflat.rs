//! Curve-flat pseudometrics on segment complexes.
//!
//! Two independent computations:
//! * the chain oracle: free moves inside solid components, jumps cost the
//!   current pseudodistance, shortest chains over the whole flattened space;
//! * the stage engine, which evolves every thread on its own, bends the frame
//!   by the thread anchor values and re-attaches.

use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::complex::{
    attach_matrix, bend_matrix, bend_single_matrix, components, flatten, BendingTriple, BodyRef, ComplexError,
    Flattened, GappedEdge, SegmentComplex, ThreadBody,
};
use crate::metric::{DistMatrix, PseudometricSpace, ZeroClassPartition};
use crate::rational::{min_q, Q};

/// Contracted graph: solid components as nodes, jump cost between two
/// components is the least ambient distance between their members.
#[derive(Clone, Debug)]
pub struct GapCostGraph {
    pub components: ZeroClassPartition,
    pub jump: DistMatrix,
}

impl GapCostGraph {
    pub fn new(ambient: &DistMatrix, solid: &[(usize, usize)]) -> Self {
        let components = components(ambient.len(), solid);
        let c = components.len();
        let mut jump: Vec<Option<Q>> = vec![None; c * c];
        let n = ambient.len();
        for i in 0..n {
            let bi = components.block_of[i];
            for j in i + 1..n {
                let bj = components.block_of[j];
                if bi == bj {
                    continue;
                }
                let v = ambient.get(i, j);
                let slot = &mut jump[bi * c + bj];
                if slot.as_ref().is_none_or(|cur| v < cur) {
                    *slot = Some(v.clone());
                    jump[bj * c + bi] = Some(v.clone());
                }
            }
        }
        let jump = DistMatrix::from_fn(c, |a, b| {
            if a == b {
                Q::zero()
            } else {
                jump[a * c + b].clone().expect("every pair of components has a jump")
            }
        });
        Self { components, jump }
    }

    /// Cheapest chain cost between every pair of points.
    pub fn chain_costs(&self) -> DistMatrix {
        let mut comp = self.jump.clone();
        comp.close();
        let b = &self.components.block_of;
        DistMatrix::from_fn(b.len(), |i, j| comp.get(b[i], b[j]).clone())
    }
}

/// One curve-flat step on a flattened pseudometric with the given solid pairs.
pub fn cf_oracle_flat(ambient: &DistMatrix, solid: &[(usize, usize)]) -> DistMatrix {
    GapCostGraph::new(ambient, solid).chain_costs()
}

/// First-order curve-flat pseudometric on all sample points.
pub fn cf_oracle(cx: &SegmentComplex) -> Result<PseudometricSpace, ComplexError> {
    let f = flatten(cx)?;
    let m = cf_oracle_flat(f.space.dist(), &f.solid_pairs(0));
    Ok(PseudometricSpace::new(f.space.labels().to_vec(), m)?)
}

/// `ρ^0, ..., ρ^max_stage` by repeated oracle steps with the solid structure
/// active at each stage.
pub fn oracle_stages(f: &Flattened, max_stage: usize) -> Vec<DistMatrix> {
    let mut out = vec![f.space.dist().clone()];
    for beta in 0..max_stage {
        let next = cf_oracle_flat(&out[beta], &f.solid_pairs(beta));
        out.push(next);
    }
    out
}

#[derive(Clone, Debug)]
pub enum ThreadState {
    /// Gapped edge before its first step.
    Segment(GappedEdge),
    Live(Box<CurveFlatState>),
    /// Body reduced to its two boundary classes at distance `c`; `far[p]`
    /// tells whether body point `p` sits with the second boundary point.
    Collapsed { c: Q, far: Vec<bool> },
}

impl ThreadState {
    fn body_matrix(&self) -> DistMatrix {
        match self {
            ThreadState::Segment(e) => e.space().dist().clone(),
            ThreadState::Live(s) => s.materialized.clone(),
            ThreadState::Collapsed { c, far } => {
                DistMatrix::from_fn(far.len(), |i, j| if far[i] == far[j] { Q::zero() } else { c.clone() })
            }
        }
    }

    pub fn is_collapsed(&self) -> bool {
        matches!(self, ThreadState::Collapsed { .. })
    }
}

/// Stage-β snapshot: bent frame, per-thread states, and the full matrix.
#[derive(Clone, Debug)]
pub struct CurveFlatState {
    pub stage: usize,
    complex: Arc<SegmentComplex>,
    pub bent_frame: PseudometricSpace,
    pub threads: Vec<ThreadState>,
    /// Intrinsic anchor value of each thread (0 for wedges).
    pub anchor_values: Vec<Q>,
    pub materialized: DistMatrix,
}

impl CurveFlatState {
    pub fn complex(&self) -> &SegmentComplex {
        &self.complex
    }
}

fn assemble(
    complex: Arc<SegmentComplex>,
    stage: usize,
    threads: Vec<ThreadState>,
) -> Result<CurveFlatState, ComplexError> {
    let cx = &*complex;
    let bodies: Vec<DistMatrix> = threads.par_iter().map(ThreadState::body_matrix).collect();
    let mut anchor_values = Vec::with_capacity(threads.len());
    let mut caps: Vec<BendingTriple> = Vec::new();
    for (t, body) in cx.threads.iter().zip(&bodies) {
        let (b0, b1) = t.boundary();
        let c = body.get(b0, b1).clone();
        if !t.wedge {
            caps.push(BendingTriple::new(t.anchors.0, t.anchors.1, c.clone()));
        }
        anchor_values.push(c);
    }
    caps.extend(cx.collapsed.iter().cloned());
    if stage > 0 && cx.link_solid_from().is_some_and(|s| s < stage) {
        caps.extend(cx.links.iter().map(|l| BendingTriple::new(l.a, l.b, Q::zero())));
    }
    let frame = bend_matrix(cx.frame.dist(), &caps);

    let shaped: Vec<DistMatrix> = cx
        .threads
        .par_iter()
        .zip(bodies)
        .map(|(t, body)| {
            if t.wedge {
                body
            } else {
                let (b0, b1) = t.boundary();
                bend_single_matrix(&body, b0, b1, frame.get(t.anchors.0, t.anchors.1))
            }
        })
        .collect();
    let anchors: Vec<(Vec<usize>, Vec<usize>)> = cx
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
    let refs: Vec<BodyRef<'_>> = shaped
        .iter()
        .zip(&anchors)
        .map(|(b, (a, bd))| BodyRef {
            anchors: a,
            body: b,
            boundary: bd,
        })
        .collect();
    let (materialized, _) = attach_matrix(&frame, &refs)?;
    let bent_frame = PseudometricSpace::new(cx.frame.labels().to_vec(), frame)?;
    Ok(CurveFlatState {
        stage,
        complex,
        bent_frame,
        threads,
        anchor_values,
        materialized,
    })
}

fn initial_thread(body: &ThreadBody) -> Result<ThreadState, ComplexError> {
    Ok(match body {
        ThreadBody::GappedEdge(e) => ThreadState::Segment(e.clone()),
        ThreadBody::Complex { complex, .. } => ThreadState::Live(Box::new(cf_initial(complex)?)),
    })
}

/// Stage-0 state; its materialized matrix is the flattened ambient metric.
pub fn cf_initial(cx: &SegmentComplex) -> Result<CurveFlatState, ComplexError> {
    cx.check_structure()?;
    let threads = cx
        .threads
        .par_iter()
        .map(|t| initial_thread(&t.body))
        .collect::<Result<Vec<_>, _>>()?;
    assemble(Arc::new(cx.clone()), 0, threads)
}

fn settle(prev: &CurveFlatState, next: CurveFlatState, boundary: (usize, usize)) -> ThreadState {
    let quiet = next.materialized == prev.materialized
        && next.threads.iter().all(ThreadState::is_collapsed)
        && next.complex.max_scheduled_stage() <= prev.stage;
    if quiet {
        let m = &next.materialized;
        let (b0, b1) = boundary;
        let total = (0..m.len()).all(|p| m.get(p, b0).is_zero() || m.get(p, b1).is_zero());
        if total {
            let far = (0..m.len()).map(|p| !m.get(p, b0).is_zero()).collect();
            return ThreadState::Collapsed {
                c: m.get(b0, b1).clone(),
                far,
            };
        }
    }
    ThreadState::Live(Box::new(next))
}

fn step_thread(state: &ThreadState, body: &ThreadBody) -> Result<ThreadState, ComplexError> {
    Ok(match (state, body) {
        (ThreadState::Segment(e), _) => ThreadState::Collapsed {
            c: e.gap.clone(),
            far: e.sides(),
        },
        (ThreadState::Live(s), ThreadBody::Complex { boundary, .. }) => {
            let next = cf_step(s)?;
            settle(s, next, *boundary)
        }
        (ThreadState::Live(s), ThreadBody::GappedEdge(_)) => ThreadState::Live(Box::new(cf_step(s)?)),
        (c @ ThreadState::Collapsed { .. }, _) => c.clone(),
    })
}

/// One curve-flat step, computed per thread and re-attached.
pub fn cf_step(state: &CurveFlatState) -> Result<CurveFlatState, ComplexError> {
    let cx = state.complex.clone();
    let threads = state
        .threads
        .par_iter()
        .zip(cx.threads.par_iter())
        .map(|(s, t)| step_thread(s, &t.body))
        .collect::<Result<Vec<_>, _>>()?;
    assemble(cx, state.stage + 1, threads)
}

#[derive(Clone, Debug)]
pub struct CfTrace {
    /// States for stages `0..=last`.
    pub states: Vec<CurveFlatState>,
    pub fixed_point: Option<usize>,
}

impl CfTrace {
    /// Matrix at `stage`, repeating the fixed point past its end.
    pub fn matrix_at(&self, stage: usize) -> &DistMatrix {
        let i = stage.min(self.states.len() - 1);
        &self.states[i].materialized
    }

    pub fn state_at(&self, stage: usize) -> &CurveFlatState {
        &self.states[stage.min(self.states.len() - 1)]
    }
}

/// Steps until the matrix repeats with no solid structure left to switch on,
/// or until `max_stage`. The step after `max_stage` may be computed to
/// confirm a fixed point there.
pub fn cf_iterate(state: CurveFlatState, max_stage: usize) -> Result<CfTrace, ComplexError> {
    let pending = state.complex.max_scheduled_stage();
    let mut states = vec![state];
    loop {
        let cur = states.last().expect("nonempty");
        let beta = cur.stage;
        if beta > max_stage {
            states.pop();
            return Ok(CfTrace {
                states,
                fixed_point: None,
            });
        }
        let next = cf_step(cur)?;
        if beta >= pending && next.materialized == cur.materialized {
            return Ok(CfTrace {
                states,
                fixed_point: Some(beta),
            });
        }
        states.push(next);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfIndex {
    Finite(usize),
    Exceeds(usize),
}

pub fn cf_index(cx: &SegmentComplex, max_stage: usize) -> Result<CfIndex, ComplexError> {
    let trace = cf_iterate(cf_initial(cx)?, max_stage)?;
    Ok(match trace.fixed_point {
        Some(b) => CfIndex::Finite(b),
        None => CfIndex::Exceeds(max_stage),
    })
}

#[derive(Clone, Debug)]
pub struct CommutationReport {
    /// cf of the bent ambient metric.
    pub bent_then_cf: DistMatrix,
    /// Bending of the cf metric by `(x, y, b)`.
    pub cf_then_bent: DistMatrix,
    pub b: Q,
    pub first_difference: Option<(usize, usize)>,
}

impl CommutationReport {
    pub fn holds(&self) -> bool {
        self.first_difference.is_none()
    }
}

/// Both sides of `(d_B)_cf = (d_cf)_B` for a triple on flattened indices,
/// with `b = min(d_cf(x, y), a)`.
pub fn check_pair_bending_commutation(
    cx: &SegmentComplex,
    triple: &BendingTriple,
) -> Result<CommutationReport, ComplexError> {
    let f = flatten(cx)?;
    let solid = f.solid_pairs(0);
    let ambient = f.space.dist();
    let bent = crate::complex::bend(&f.space, std::slice::from_ref(triple))?;
    let lhs = cf_oracle_flat(bent.dist(), &solid);
    let cf = cf_oracle_flat(ambient, &solid);
    let b = min_q(cf.get(triple.x, triple.y), &triple.a);
    let rhs = bend_matrix(&cf, &[BendingTriple::new(triple.x, triple.y, b.clone())]);
    let first_difference = lhs.first_difference(&rhs);
    Ok(CommutationReport {
        bent_then_cf: lhs,
        cf_then_bent: rhs,
        b,
        first_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{GappedEdge, Thread};
    use crate::rational::{q, qi};

    fn pair(d: Q) -> PseudometricSpace {
        PseudometricSpace::from_matrix(DistMatrix::from_fn(2, |i, j| if i == j { Q::zero() } else { d.clone() }))
    }

    fn segment() -> SegmentComplex {
        let e = GappedEdge::new(q(3, 2), q(1, 2), 1).unwrap();
        SegmentComplex::new(pair(q(3, 2))).with_threads(vec![Thread::edge(0, 1, e)])
    }

    #[test]
    fn gapped_segment_collapses() {
        let cf = cf_oracle(&segment()).unwrap();
        assert_eq!(cf.d(0, 1), &q(1, 2));
        // x, l1, u on one arm
        assert!(cf.d(0, 2).is_zero());
        assert!(cf.d(0, 3).is_zero());
        let (quot, _) = cf.quotient_by_zero();
        assert_eq!(quot.len(), 2);
        assert_eq!(cf_index(&segment(), 4).unwrap(), CfIndex::Finite(1));
    }

    #[test]
    fn engine_matches_oracle_on_one_edge() {
        let cx = segment();
        let f = flatten(&cx).unwrap();
        let s0 = cf_initial(&cx).unwrap();
        assert_eq!(&s0.materialized, f.space.dist());
        let s1 = cf_step(&s0).unwrap();
        assert_eq!(s1.materialized, cf_oracle_flat(f.space.dist(), &f.solid_pairs(0)));
        assert_eq!(s1.bent_frame.d(0, 1), &q(1, 2));
        assert_eq!(s1.anchor_values, vec![q(1, 2)]);
    }

    #[test]
    fn bare_frame_is_fixed_at_zero() {
        let cx = SegmentComplex::new(pair(qi(2)));
        assert_eq!(cf_index(&cx, 3).unwrap(), CfIndex::Finite(0));
        assert_eq!(cf_oracle(&cx).unwrap().dist(), cx.frame.dist());
    }

    #[test]
    fn non_p1u_link_frame_collapses() {
        let mut cx = SegmentComplex::new(pair(qi(1)));
        cx.p1u = false;
        cx.links.push(crate::complex::FrameLink { a: 0, b: 1, length: qi(1) });
        assert_eq!(cf_index(&cx, 3).unwrap(), CfIndex::Finite(1));
        assert!(cf_oracle(&cx).unwrap().d(0, 1).is_zero());
    }

    #[test]
    fn commutation_on_segment_endpoints() {
        let r = check_pair_bending_commutation(&segment(), &BendingTriple::new(0, 1, q(1, 4))).unwrap();
        assert!(r.holds());
        assert_eq!(r.cf_then_bent.get(0, 1), &q(1, 4));
    }
}
