//! Lipschitz and co-Lipschitz constants of finite maps, and the stagewise
//! preimage inequality for maps between segment complexes.

use std::fmt;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::complex::{flatten, ComplexError, SegmentComplex, ThreadBody};
use crate::curveflat::{cf_index, cf_initial, cf_iterate, CfIndex};
use crate::metric::{DistMatrix, PseudometricSpace};
use crate::rational::Q;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LipError {
    #[error("assignment has {got} entries for {expected} source points")]
    NotTotal { got: usize, expected: usize },
    #[error("assignment sends point {0} outside the target")]
    OutOfRange(usize),
    #[error("points {p} and {q} are at distance 0 but have distinct images: not Lipschitz")]
    NotLipschitz { p: usize, q: usize },
    #[error("target point {0} has no preimage")]
    NotSurjective(usize),
    #[error("map is not a Lipschitz quotient (co-Lipschitz constant is infinite)")]
    NotQuotient,
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// A constant that may be infinite.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Finite(Q),
    Infinite,
}

impl Constant {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Constant::Finite(q) => Some(q),
            Constant::Infinite => None,
        }
    }

    pub fn mul(&self, other: &Constant) -> Constant {
        match (self, other) {
            (Constant::Finite(a), Constant::Finite(b)) => Constant::Finite(a * b),
            _ => Constant::Infinite,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Finite(q) => write!(f, "{q}"),
            Constant::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMap {
    pub source: PseudometricSpace,
    pub target: PseudometricSpace,
    pub assignment: Vec<usize>,
}

impl FiniteMap {
    pub fn new(source: PseudometricSpace, target: PseudometricSpace, assignment: Vec<usize>) -> Result<Self, LipError> {
        if assignment.len() != source.len() {
            return Err(LipError::NotTotal {
                got: assignment.len(),
                expected: source.len(),
            });
        }
        if let Some(&bad) = assignment.iter().find(|&&a| a >= target.len()) {
            return Err(LipError::OutOfRange(bad));
        }
        Ok(Self {
            source,
            target,
            assignment,
        })
    }

    pub fn identity(space: PseudometricSpace) -> Self {
        let n = space.len();
        Self {
            source: space.clone(),
            target: space,
            assignment: (0..n).collect(),
        }
    }

    pub fn is_surjective(&self) -> bool {
        self.missing_target().is_none()
    }

    fn missing_target(&self) -> Option<usize> {
        let mut hit = vec![false; self.target.len()];
        for &a in &self.assignment {
            hit[a] = true;
        }
        hit.iter().position(|h| !h)
    }

    fn fibers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.target.len()];
        for (p, &a) in self.assignment.iter().enumerate() {
            out[a].push(p);
        }
        out
    }
}

/// `max ρ(f x, f y) / d(x, y)` over pairs at positive distance.
pub fn lip_constant(f: &FiniteMap) -> Result<Q, LipError> {
    let n = f.source.len();
    let mut best = Q::zero();
    for p in 0..n {
        for q in p + 1..n {
            let img = f.target.d(f.assignment[p], f.assignment[q]);
            let d = f.source.d(p, q);
            if d.is_zero() {
                if img.is_positive() {
                    return Err(LipError::NotLipschitz { p, q });
                }
                continue;
            }
            let r = img / d;
            if r > best {
                best = r;
            }
        }
    }
    Ok(best)
}

/// `max_{x, y} min_{p ∈ f⁻¹(y)} d(x, p) / ρ(f x, y)`; a target point at
/// distance 0 from `f x` needs a preimage at distance 0 from `x`.
pub fn colip_constant(f: &FiniteMap) -> Result<Constant, LipError> {
    if let Some(y) = f.missing_target() {
        return Err(LipError::NotSurjective(y));
    }
    let fibers = f.fibers();
    let mut best = Constant::Finite(Q::zero());
    for x in 0..f.source.len() {
        let fx = f.assignment[x];
        for (y, fiber) in fibers.iter().enumerate() {
            let near = fiber
                .iter()
                .map(|&p| f.source.d(x, p))
                .min()
                .expect("surjective");
            let r = f.target.d(fx, y);
            let c = if r.is_zero() {
                if near.is_zero() {
                    continue;
                }
                Constant::Infinite
            } else {
                Constant::Finite(near / r)
            };
            if c > best {
                best = c;
            }
        }
    }
    Ok(best)
}

fn balls_hold(f: &FiniteMap, c: &Q) -> bool {
    let n = f.source.len();
    let m = f.target.len();
    (0..n).all(|x| {
        let fx = f.assignment[x];
        let mut radii: Vec<&Q> = (0..m).map(|y| f.target.d(fx, y)).collect();
        radii.sort();
        radii.dedup();
        radii.into_iter().all(|r| {
            let reach = c * r;
            let mut image = vec![false; m];
            for p in 0..n {
                if f.source.d(x, p) <= &reach {
                    image[f.assignment[p]] = true;
                }
            }
            (0..m).all(|y| f.target.d(fx, y) > r || image[y])
        })
    })
}

/// Smallest `C` with `B(f x, r) ⊂ f(B(x, C r))` for all `x` and all critical
/// radii `r`, by search over the finitely many candidate ratios.
pub fn colip_by_balls(f: &FiniteMap) -> Result<Constant, LipError> {
    if let Some(y) = f.missing_target() {
        return Err(LipError::NotSurjective(y));
    }
    let n = f.source.len();
    let mut cands = vec![Q::zero()];
    for x in 0..n {
        let fx = f.assignment[x];
        for p in 0..n {
            let r = f.target.d(fx, f.assignment[p]);
            if r.is_positive() {
                cands.push(f.source.d(x, p) / r);
            }
        }
    }
    cands.sort();
    cands.dedup();
    // inclusion is monotone in C
    let (mut lo, mut hi) = (0usize, cands.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if balls_hold(f, &cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(if lo == cands.len() {
        Constant::Infinite
    } else {
        Constant::Finite(cands[lo].clone())
    })
}

/// A map between the flattened point sets of two complexes.
#[derive(Clone, Debug)]
pub struct ComplexMap {
    pub source: SegmentComplex,
    pub target: SegmentComplex,
    pub assignment: Vec<usize>,
}

impl ComplexMap {
    pub fn ambient(&self) -> Result<FiniteMap, LipError> {
        let s = flatten(&self.source)?.space;
        let t = flatten(&self.target)?.space;
        FiniteMap::new(s, t, self.assignment.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreimageWitness {
    pub stage: usize,
    pub x: usize,
    pub y: usize,
    pub p: usize,
    /// `d_cf^k(x, p)`.
    pub lhs: Q,
    /// `C ρ_cf^k(f x, y)`.
    pub rhs: Q,
}

impl PreimageWitness {
    pub fn margin(&self) -> Q {
        &self.rhs - &self.lhs
    }

    pub fn holds(&self) -> bool {
        !self.margin().is_negative()
    }
}

#[derive(Clone, Debug)]
pub struct LipschitzQuotientReport {
    pub lip: Constant,
    pub colip: Constant,
    pub product: Constant,
    pub witnesses: Vec<PreimageWitness>,
    pub violations: Vec<PreimageWitness>,
    pub stages: usize,
}

impl LipschitzQuotientReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn stage_matrices(cx: &SegmentComplex, max_stage: usize) -> Result<Vec<DistMatrix>, LipError> {
    let trace = cf_iterate(cf_initial(cx)?, max_stage)?;
    Ok((0..=max_stage).map(|k| trace.matrix_at(k).clone()).collect())
}

/// For every stage `k ≤ max_stage`, point `x` and target point `y`, picks
/// the preimage `p` of `y` closest to `x` in `d_cf^k` and checks
/// `d_cf^k(x, p) ≤ C ρ_cf^k(f x, y)` with `C` the co-Lipschitz constant.
pub fn verify_preimage_inequality(map: &ComplexMap, max_stage: usize) -> Result<LipschitzQuotientReport, LipError> {
    let amb = map.ambient()?;
    let lip = lip_constant(&amb)?;
    let colip = colip_constant(&amb)?;
    let Constant::Finite(c) = colip.clone() else {
        return Err(LipError::NotQuotient);
    };
    let src = stage_matrices(&map.source, max_stage)?;
    let tgt = stage_matrices(&map.target, max_stage)?;
    let fibers = amb.fibers();
    let f = &map.assignment;
    let witnesses: Vec<PreimageWitness> = (0..=max_stage)
        .flat_map(|k| (0..f.len()).map(move |x| (k, x)))
        .collect::<Vec<_>>()
        .par_iter()
        .flat_map_iter(|&(k, x)| {
            let d = &src[k];
            let r = &tgt[k];
            let c = &c;
            fibers.iter().enumerate().map(move |(y, fiber)| {
                let p = *fiber
                    .iter()
                    .min_by(|&&a, &&b| d.get(x, a).cmp(d.get(x, b)).then(a.cmp(&b)))
                    .expect("surjective");
                PreimageWitness {
                    stage: k,
                    x,
                    y,
                    p,
                    lhs: d.get(x, p).clone(),
                    rhs: c * r.get(f[x], y),
                }
            })
        })
        .collect();
    let violations = witnesses.iter().filter(|w| !w.holds()).cloned().collect();
    let lip = Constant::Finite(lip);
    Ok(LipschitzQuotientReport {
        product: lip.mul(&colip),
        lip,
        colip,
        witnesses,
        violations,
        stages: max_stage,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexReport {
    pub source: CfIndex,
    pub target: CfIndex,
    /// `None` when either index exceeds the stage budget.
    pub holds: Option<bool>,
}

pub fn verify_index_monotonicity(map: &ComplexMap, max_stage: usize) -> Result<IndexReport, LipError> {
    let amb = map.ambient()?;
    lip_constant(&amb)?;
    if colip_constant(&amb)? == Constant::Infinite {
        return Err(LipError::NotQuotient);
    }
    let source = cf_index(&map.source, max_stage)?;
    let target = cf_index(&map.target, max_stage)?;
    let holds = match (source, target) {
        (CfIndex::Finite(a), CfIndex::Finite(b)) => Some(a >= b),
        _ => None,
    };
    Ok(IndexReport { source, target, holds })
}

/// Class map of a complex onto the metric quotient of its stage-`k` matrix.
pub fn class_map_onto_stage(cx: &SegmentComplex, stage: usize) -> Result<ComplexMap, LipError> {
    let trace = cf_iterate(cf_initial(cx)?, stage)?;
    let labels = flatten(cx)?.space.labels().to_vec();
    let m = trace.matrix_at(stage).clone();
    let space = PseudometricSpace::new(labels, m).map_err(ComplexError::from)?;
    let (quot, part) = space.quotient_by_zero();
    Ok(ComplexMap {
        source: cx.clone(),
        target: SegmentComplex::new(quot.with_metric_flag(false)),
        assignment: part.block_of,
    })
}

/// Sends every point of a gapped graph to the frame point on its arm.
pub fn arm_projection(cx: &SegmentComplex, base: &PseudometricSpace) -> Result<ComplexMap, LipError> {
    let f = flatten(cx)?;
    let arms = f.arms_at(0);
    let mut owner = vec![usize::MAX; arms.len()];
    for x in 0..f.frame_len {
        owner[arms.block_of[x]] = x;
    }
    let assignment: Vec<usize> = arms.block_of.iter().map(|&b| owner[b]).collect();
    if let Some(p) = assignment.iter().position(|&a| a == usize::MAX) {
        return Err(LipError::OutOfRange(p));
    }
    Ok(ComplexMap {
        source: cx.clone(),
        target: SegmentComplex::new(base.clone().with_metric_flag(false)),
        assignment,
    })
}

/// Refines every top-level gapped edge of `cx` by `refine` and maps the fine
/// samples to the nearest coarse sample on the same arm (ties go toward the
/// anchor). Nested bodies, wedges and frame points map to themselves.
pub fn subsample_map(cx: &SegmentComplex, refine: usize) -> Result<ComplexMap, LipError> {
    let refine = refine.max(1);
    let mut fine = cx.clone();
    for t in &mut fine.threads {
        if let ThreadBody::GappedEdge(e) = &mut t.body {
            e.samples = (e.samples + 1) * refine - 1;
        }
    }
    let src = flatten(&fine)?;
    let tgt = flatten(cx)?;
    let mut assignment: Vec<usize> = (0..src.space.len()).collect();
    for (t, thread) in cx.threads.iter().enumerate() {
        let (sp, tp) = (&src.thread_points[t], &tgt.thread_points[t]);
        match &thread.body {
            ThreadBody::GappedEdge(e) => {
                let (ks, kt) = ((e.samples + 1) * refine - 1, e.samples);
                let near = |i: usize| (2 * i + refine - 1) / (2 * refine);
                for (i, &g) in sp.iter().enumerate() {
                    let j = if i <= ks + 1 {
                        near(i)
                    } else {
                        kt + 2 + near(i - (ks + 2))
                    };
                    assignment[g] = tp[j];
                }
            }
            ThreadBody::Complex { .. } => {
                for (&g, &h) in sp.iter().zip(tp) {
                    assignment[g] = h;
                }
            }
        }
    }
    Ok(ComplexMap {
        source: fine,
        target: cx.clone(),
        assignment,
    })
}
