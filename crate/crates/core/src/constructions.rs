//! Builders: gapped segments and graphs, admissible tuples, and the
//! prescribed-index complexes.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::complex::{
    bend_matrix, BendingTriple, ComplexError, FrameLink, GappedEdge, SegmentComplex, Thread,
};
use crate::curveflat::{cf_initial, cf_step};
use crate::distortion::{default_steepness, DistortionError, DistortionPL};
use crate::metric::{DistMatrix, PseudometricSpace, ValidationReport};
use crate::rational::{pow2, qi, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("not a valid metric: {0}")]
    NotMetric(ValidationReport),
    #[error("distortion falls below the identity at {0}")]
    BelowIdentity(String),
    #[error("distortion does not fix the diameter: ω({diam}) = {value}")]
    DiameterNotFixed { diam: String, value: String },
    #[error("need at least two points")]
    TooFewPoints,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("epsilon must be positive")]
    BadEpsilon,
    #[error("point subset contains an invalid or repeated index")]
    BadSubset,
    #[error("scale {requested} needs more stages than the {available} generated")]
    InsufficientStages { requested: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuildWarning {
    /// `ω(d) = d` on this pair: the edge is all gap.
    DegeneratePair { x: usize, y: usize },
    /// The point subset is proper; no isometry claim is made for it.
    UnverifiedRegime,
    /// Pairs too close to be covered by the generated stages.
    UncertifiedPairs(usize),
}

/// A finite metric space together with its rectifiable pieces.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub space: PseudometricSpace,
    pub links: Vec<FrameLink>,
}

impl Geometry {
    pub fn discrete(space: PseudometricSpace) -> Self {
        Self {
            space,
            links: Vec::new(),
        }
    }
}

fn require_metric(m: &PseudometricSpace) -> Result<(), BuildError> {
    let report = m.clone().with_metric_flag(true).validate();
    if !report.is_valid() {
        return Err(BuildError::NotMetric(report));
    }
    if m.len() < 2 {
        return Err(BuildError::TooFewPoints);
    }
    Ok(())
}

fn line_space(positions: &[Q], names: Vec<String>) -> PseudometricSpace {
    let m = DistMatrix::from_fn(positions.len(), |i, j| (&positions[i] - &positions[j]).abs());
    PseudometricSpace::new(names, m).expect("sizes agree").with_metric_flag(true)
}

/// The sampled gapped segment as a metric space, with links along both arms
/// (and across the gap when it is empty).
pub fn gapped_segment_space(length: &Q, gap: &Q, samples: usize) -> Result<Geometry, BuildError> {
    let e = GappedEdge::new(length.clone(), gap.clone(), samples)?;
    let pos = e.positions();
    let u = samples + 1;
    let links = (0..pos.len() - 1)
        .filter(|&i| i != u || gap.is_zero())
        .map(|i| FrameLink {
            a: i,
            b: i + 1,
            length: &pos[i + 1] - &pos[i],
        })
        .collect();
    Ok(Geometry {
        space: line_space(&pos, e.point_names()),
        links,
    })
}

/// `[0, length]` sampled at `samples` interior points.
pub fn segment_space(length: &Q, samples: usize) -> Geometry {
    let step = length / Q::from_integer((samples as i64 + 1).into());
    let pos: Vec<Q> = (0..samples + 2).map(|i| &step * qi(i as i64)).collect();
    let names = (0..pos.len()).map(|i| format!("s{i}")).collect();
    let links = (0..pos.len() - 1)
        .map(|i| FrameLink {
            a: i,
            b: i + 1,
            length: step.clone(),
        })
        .collect();
    Geometry {
        space: line_space(&pos, names),
        links,
    }
}

/// Path `0, r, 2r, ..., length` with mesh `length / segments`.
pub fn path_metric(segments: usize, length: &Q) -> Geometry {
    segment_space(length, segments.saturating_sub(1))
}

fn edge_for(d: &Q, w: &DistortionPL, samples: usize) -> Result<GappedEdge, BuildError> {
    let l = w.eval(d)?;
    if &l < d {
        return Err(BuildError::BelowIdentity(d.to_string()));
    }
    Ok(GappedEdge::new(l, d.clone(), samples)?)
}

/// Two points at `ω(dxy)` joined by one gapped edge with gap `dxy`.
pub fn gapped_segment(dxy: &Q, w: &DistortionPL, samples: usize) -> Result<SegmentComplex, BuildError> {
    if !dxy.is_positive() {
        return Err(BuildError::TooFewPoints);
    }
    let e = edge_for(dxy, w, samples)?;
    let frame = line_space(&[Q::zero(), e.length.clone()], vec!["x".into(), "y".into()]);
    let mut cx = SegmentComplex::new(frame).with_threads(vec![Thread::edge(0, 1, e)]);
    cx.base = Some(DistMatrix::from_fn(2, |i, j| if i == j { Q::zero() } else { dxy.clone() }));
    Ok(cx)
}

#[derive(Clone, Debug)]
pub struct GappedGraph {
    pub complex: SegmentComplex,
    pub subset: Vec<usize>,
    pub warnings: Vec<BuildWarning>,
}

/// Frame `ω ∘ d` (p1u) with one gapped edge per pair of `subset`.
pub fn gapped_graph(
    m: &PseudometricSpace,
    w: &DistortionPL,
    subset: &[usize],
    samples: usize,
) -> Result<GappedGraph, BuildError> {
    require_metric(m)?;
    let diam = m.diameter().expect("nonempty");
    if !w.dominates_identity_up_to(&diam) {
        return Err(BuildError::BelowIdentity(diam.to_string()));
    }
    let mut seen = vec![false; m.len()];
    for &i in subset {
        if i >= m.len() || seen[i] {
            return Err(BuildError::BadSubset);
        }
        seen[i] = true;
    }
    let mut warnings = Vec::new();
    if subset.len() < m.len() {
        warnings.push(BuildWarning::UnverifiedRegime);
    }
    let mut threads = Vec::new();
    for (a, &x) in subset.iter().enumerate() {
        for &y in &subset[a + 1..] {
            let e = edge_for(m.d(x, y), w, samples)?;
            if e.gap == e.length {
                warnings.push(BuildWarning::DegeneratePair { x, y });
            }
            threads.push(Thread::edge(x, y, e));
        }
    }
    let mut complex = SegmentComplex::new(m.apply_distortion(w).with_metric_flag(false)).with_threads(threads);
    complex.base = Some(m.dist().clone());
    Ok(GappedGraph {
        complex,
        subset: subset.to_vec(),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissibleStage {
    pub n: usize,
    pub delta: Q,
    pub eps: Q,
    pub net: Vec<usize>,
    pub pool: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissiblePair {
    pub alpha: usize,
    pub x: usize,
    pub y: usize,
    /// Stage whose pool first contributed the pair.
    pub stage: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdmissibilityReport {
    /// `(k, p, q)` with no pair meeting the scale-`k` inequality.
    pub a3_failures: Vec<(usize, usize, usize)>,
    /// Pool pairs exceeding their stage's distance envelope.
    pub envelope_failures: Vec<(usize, usize)>,
}

impl AdmissibilityReport {
    pub fn holds(&self) -> bool {
        self.a3_failures.is_empty() && self.envelope_failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct AdmissibleTuple {
    pub distortion: DistortionPL,
    pub eps: Q,
    pub diam: Q,
    pub n_stages: usize,
    pub stages: Vec<AdmissibleStage>,
    pub pairs: Vec<AdmissiblePair>,
    /// Pairs of `M` whose scale lies beyond the generated stages.
    pub uncertified: Vec<(usize, usize)>,
    pub report: AdmissibilityReport,
}

/// Largest `k` with `d ≤ 2^{-k} diam`.
pub fn scale_band(d: &Q, diam: &Q) -> usize {
    let mut k = 0;
    let mut bound = diam / Q::from_integer(2.into());
    while d <= &bound {
        k += 1;
        bound /= Q::from_integer(2.into());
        if k > 4096 {
            break;
        }
    }
    k
}

impl AdmissibleTuple {
    pub fn certified_scale(&self) -> usize {
        self.n_stages - 1
    }

    pub fn require_scale(&self, k: usize) -> Result<(), BuildError> {
        if k < self.n_stages {
            Ok(())
        } else {
            Err(BuildError::InsufficientStages {
                requested: k,
                available: self.n_stages,
            })
        }
    }

    pub fn bending_triples(&self, m: &PseudometricSpace) -> Vec<BendingTriple> {
        self.pairs
            .iter()
            .map(|p| BendingTriple::new(p.x, p.y, m.d(p.x, p.y).clone()))
            .collect()
    }
}

/// Nets, pools and the concatenated pair list for `n_stages` stages.
pub fn build_admissible(
    m: &PseudometricSpace,
    alpha: usize,
    eps: &Q,
    w: &DistortionPL,
    n_stages: usize,
) -> Result<AdmissibleTuple, BuildError> {
    require_metric(m)?;
    if !eps.is_positive() {
        return Err(BuildError::BadEpsilon);
    }
    if n_stages == 0 {
        return Err(BuildError::InsufficientStages {
            requested: 0,
            available: 0,
        });
    }
    let diam = m.diameter().expect("nonempty");
    let wd = w.eval(&diam)?;
    if wd != diam {
        return Err(BuildError::DiameterNotFixed {
            diam: diam.to_string(),
            value: wd.to_string(),
        });
    }
    let wm = m.apply_distortion(w);
    let n = m.len();
    let four = Q::from_integer(4.into());

    let mut stages = Vec::with_capacity(n_stages);
    let mut pairs: Vec<AdmissiblePair> = Vec::new();
    let mut report = AdmissibilityReport::default();
    for s in 1..=n_stages {
        let delta = &diam * pow2(-(s as i32 - 1));
        let delta_next = &diam * pow2(-(s as i32));
        let eps_n = pow2(-(s as i32)) * &delta_next * eps / &four;
        let mut net: Vec<usize> = Vec::new();
        for p in 0..n {
            if net.iter().all(|&e| wm.d(p, e) > &eps_n) {
                net.push(p);
            }
        }
        let envelope = &delta + &eps_n * Q::from_integer(2.into());
        let mut pool = Vec::new();
        for (a, &x) in net.iter().enumerate() {
            for &y in &net[a + 1..] {
                if m.d(x, y) <= &envelope {
                    pool.push((x, y));
                }
            }
        }
        for &(x, y) in &pool {
            if m.d(x, y) > &envelope {
                report.envelope_failures.push((x, y));
            }
            if !pairs.iter().any(|p| (p.x, p.y) == (x, y)) {
                pairs.push(AdmissiblePair {
                    alpha: alpha.saturating_sub(1),
                    x,
                    y,
                    stage: s,
                });
            }
        }
        stages.push(AdmissibleStage {
            n: s,
            delta,
            eps: eps_n,
            net,
            pool,
        });
    }

    let mut uncertified = Vec::new();
    for p in 0..n {
        for q in p + 1..n {
            let band = scale_band(m.d(p, q), &diam);
            if band >= n_stages {
                uncertified.push((p, q));
                continue;
            }
            for k in 0..=band {
                let rhs = pow2(-(k as i32)) * eps * m.d(p, q);
                let two = Q::from_integer(2.into());
                let ok = pairs.iter().any(|e| {
                    let direct = (wm.d(p, e.x) + wm.d(q, e.y)) * &two;
                    let swapped = (wm.d(p, e.y) + wm.d(q, e.x)) * &two;
                    direct <= rhs || swapped <= rhs
                });
                if !ok {
                    report.a3_failures.push((k, p, q));
                }
            }
        }
    }

    Ok(AdmissibleTuple {
        distortion: w.clone(),
        eps: eps.clone(),
        diam,
        n_stages,
        stages,
        pairs,
        uncertified,
        report,
    })
}

/// Output of the prescribed-index builders.
#[derive(Clone, Debug)]
pub struct TheoremB {
    pub complex: SegmentComplex,
    pub tuple: Option<AdmissibleTuple>,
    pub warnings: Vec<BuildWarning>,
    /// Depth of every top-level thread.
    pub thread_depths: Vec<usize>,
    pub certified_scale: usize,
}

/// Prescribed-index complex over a discrete finite metric.
pub fn build_theorem_b(
    m: &PseudometricSpace,
    alpha: usize,
    eps: &Q,
    w: &DistortionPL,
    n_stages: usize,
    samples: usize,
) -> Result<TheoremB, BuildError> {
    build_theorem_b_over(&Geometry::discrete(m.clone()), alpha, eps, w, n_stages, samples)
}

/// Frame `(M, ω ∘ d)` with one thread per admissible pair. Pairs with
/// `3 ω(d) > diam` and all pairs at depth 1 get a gapped edge; the others get
/// the depth `α - 1` construction over their gapped segment, built with `ω`
/// rescaled to the segment's length.
pub fn build_theorem_b_over(
    geom: &Geometry,
    alpha: usize,
    eps: &Q,
    w: &DistortionPL,
    n_stages: usize,
    samples: usize,
) -> Result<TheoremB, BuildError> {
    if alpha == 0 {
        return Err(BuildError::ZeroDepth);
    }
    let m = &geom.space;
    let tuple = build_admissible(m, alpha, eps, w, n_stages)?;
    let diam = tuple.diam.clone();
    let three = Q::from_integer(3.into());
    let mut warnings = Vec::new();
    if !tuple.uncertified.is_empty() {
        warnings.push(BuildWarning::UncertifiedPairs(tuple.uncertified.len()));
    }
    let mut threads = Vec::with_capacity(tuple.pairs.len());
    let mut depths = Vec::with_capacity(tuple.pairs.len());
    for p in &tuple.pairs {
        let d = m.d(p.x, p.y);
        let e = edge_for(d, w, samples)?;
        let degenerate = e.gap == e.length;
        if degenerate {
            warnings.push(BuildWarning::DegeneratePair { x: p.x, y: p.y });
        }
        if alpha == 1 || degenerate || &e.length * &three > diam {
            threads.push(Thread::edge(p.x, p.y, e));
            depths.push(1);
            continue;
        }
        let inner_geom = gapped_segment_space(&e.length, d, samples)?;
        let inner_w = w.rescaled(&(&e.length / &diam));
        let inner = build_theorem_b_over(&inner_geom, alpha - 1, eps, &inner_w, n_stages, samples)?;
        let last = inner_geom.space.len() - 1;
        let t = Thread::nested(p.x, p.y, inner.complex, (0, last));
        depths.push(t.depth());
        threads.push(t);
    }
    let mut complex = SegmentComplex::new(m.apply_distortion(w).with_metric_flag(false)).with_threads(threads);
    complex.base = Some(m.dist().clone());
    if !geom.links.is_empty() {
        complex.links = geom.links.clone();
        complex.restore_stage = Some(depths.iter().copied().max().unwrap_or(0));
    }
    let certified_scale = tuple.certified_scale();
    Ok(TheoremB {
        complex,
        tuple: Some(tuple),
        warnings,
        thread_depths: depths,
        certified_scale,
    })
}

/// Finite-frame variant: `(M, d)` with `n_stages` threads wedged at point 0,
/// thread `n` a depth `α - 1` construction over a segment of length
/// `2^{-n} diam / 3` (the bare segment when `α = 1`).
pub fn build_theorem_b_single_anchor(
    m: &PseudometricSpace,
    alpha: usize,
    eps: &Q,
    w: &DistortionPL,
    n_stages: usize,
    samples: usize,
) -> Result<TheoremB, BuildError> {
    if alpha == 0 {
        return Err(BuildError::ZeroDepth);
    }
    require_metric(m)?;
    let diam = m.diameter().expect("nonempty");
    let wd = w.eval(&diam)?;
    if wd != diam {
        return Err(BuildError::DiameterNotFixed {
            diam: diam.to_string(),
            value: wd.to_string(),
        });
    }
    let mut threads = Vec::new();
    let mut depths = Vec::new();
    let mut warnings = Vec::new();
    for n in 1..=n_stages {
        let len = &diam * pow2(-(n as i32)) / Q::from_integer(3.into());
        let seg = segment_space(&len, samples);
        let body = if alpha == 1 {
            let mut c = SegmentComplex::new(seg.space);
            c.p1u = false;
            c.links = seg.links;
            c
        } else {
            let inner_w = w.rescaled(&(&len / &diam));
            let built = build_theorem_b_over(&seg, alpha - 1, eps, &inner_w, n_stages, samples)?;
            warnings.extend(built.warnings);
            built.complex
        };
        let t = Thread::wedge(0, body, 0);
        depths.push(t.depth());
        threads.push(t);
    }
    let complex = SegmentComplex::new(m.clone().with_metric_flag(false)).with_threads(threads);
    Ok(TheoremB {
        complex,
        tuple: None,
        warnings,
        thread_depths: depths,
        certified_scale: n_stages.saturating_sub(1),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicRow {
    pub mesh: Q,
    pub points: usize,
    /// `max ρ^1(p, q) / d(p, q)` over distinct frame points.
    pub ratio: Q,
    /// `(1 + mesh)^2`.
    pub bound: Q,
}

/// Stage-1 distortion of the depth-1 construction over finer and finer
/// samplings of a length space.
pub fn refine_geodesic_check(family: &[(Q, Geometry)], eps: &Q, samples: usize) -> Result<Vec<GeodesicRow>, BuildError> {
    let mut rows = Vec::with_capacity(family.len());
    for (mesh, geom) in family {
        let m = &geom.space;
        let diam = m.diameter().map_err(|_| BuildError::TooFewPoints)?;
        let w = DistortionPL::steep(&diam, &default_steepness())?;
        let min_d = (0..m.len())
            .flat_map(|i| (0..m.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| m.d(i, j).clone())
            .min()
            .ok_or(BuildError::TooFewPoints)?;
        let n_stages = scale_band(&min_d, &diam) + 1;
        let built = build_theorem_b_over(geom, 1, eps, &w, n_stages, samples)?;
        let s1 = cf_step(&cf_initial(&built.complex)?)?;
        let mut ratio = Q::zero();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let r = s1.bent_frame.d(i, j) / m.d(i, j);
                if r > ratio {
                    ratio = r;
                }
            }
        }
        let b = Q::one() + mesh;
        rows.push(GeodesicRow {
            mesh: mesh.clone(),
            points: m.len(),
            ratio,
            bound: &b * &b,
        });
    }
    Ok(rows)
}

/// Full bending of `ω ∘ d` by every admissible pair at its own distance.
pub fn full_bending(m: &PseudometricSpace, tuple: &AdmissibleTuple) -> DistMatrix {
    let wm = m.apply_distortion(&tuple.distortion);
    bend_matrix(wm.dist(), &tuple.bending_triples(m))
}
