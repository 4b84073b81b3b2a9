//! Seeded property suites over random instances, with witness shrinking.

use itertools::Itertools;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::complex::{
    attach, bend, bend_matrix, bend_sequential, bend_single_formula, flatten, AttachThread, BendingTriple, SegmentComplex,
};
use crate::constructions::{
    build_admissible, build_theorem_b, full_bending, gapped_graph, path_metric, refine_geodesic_check, scale_band,
};
use crate::curveflat::{
    cf_index, cf_initial, cf_iterate, cf_oracle, check_pair_bending_commutation, oracle_stages, CfIndex,
};
use crate::io::{csv_string, ComplexJson, IoError, MapJson, SpaceJson};
use crate::lipquot::{
    arm_projection, class_map_onto_stage, colip_by_balls, colip_constant, lip_constant, subsample_map,
    verify_index_monotonicity, verify_preimage_inequality, ComplexMap, Constant, FiniteMap,
};
use crate::metric::{DistMatrix, PseudometricSpace};
use crate::random::Gen;
use crate::rational::{fmt_q, pow2, q, qi, Q};

pub const SUITES: [&str; 9] = [
    "bending",
    "attachment",
    "pair-commutation",
    "attach-cf-commutation",
    "theorem-a",
    "theorem-b",
    "scale-bound",
    "geodesic-limit",
    "lipquot",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("unknown suite {0:?}; known: {known}", known = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("point range {0}..={1} is empty or below 2")]
    BadPoints(usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteParams {
    pub seed: u64,
    pub instances: usize,
    pub min_points: usize,
    pub max_points: usize,
    pub stages: usize,
    pub samples: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 50,
            min_points: 3,
            max_points: 6,
            stages: 3,
            samples: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub instance: usize,
    pub property: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Shrunk failing instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub params: SuiteParams,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_csv(&self) -> Result<String, IoError> {
        reports_to_csv(std::slice::from_ref(self))
    }
}

/// One row per check across all reports.
pub fn reports_to_csv(reports: &[SuiteReport]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "instance", "property", "passed"])?;
    for r in reports {
        for c in &r.checks {
            w.write_record([r.suite.as_str(), &c.instance.to_string(), &c.property, &c.passed.to_string()])?;
        }
    }
    csv_string(w)
}

/// `Ok(())` or a failure description.
type Outcome = Result<(), String>;

fn expect(cond: bool, detail: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(detail())
    }
}

fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
}

pub fn run_suite(name: &str, params: &SuiteParams) -> Result<SuiteReport, VerifyError> {
    if !SUITES.contains(&name) {
        return Err(VerifyError::UnknownSuite(name.to_string()));
    }
    if params.min_points < 2 || params.min_points > params.max_points {
        return Err(VerifyError::BadPoints(params.min_points, params.max_points));
    }
    let mut checks: Vec<Check> = (0..params.instances)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut g = Gen::new(instance_seed(params.seed, i));
            let mut out = match name {
                "bending" => bending_instance(&mut g, params),
                "attachment" => attachment_instance(&mut g, params),
                "pair-commutation" => pair_commutation_instance(&mut g, params),
                "attach-cf-commutation" => attach_cf_instance(&mut g, params),
                "theorem-a" => theorem_a_instance(&mut g, params),
                "theorem-b" => theorem_b_instance(&mut g, params, i),
                "scale-bound" => scale_bound_instance(&mut g, params),
                "geodesic-limit" => geodesic_instance(i),
                "lipquot" => lipquot_instance(&mut g, params, i),
                _ => unreachable!(),
            };
            for c in &mut out {
                c.instance = i;
            }
            out
        })
        .collect();
    checks.sort_by(|a, b| a.instance.cmp(&b.instance).then_with(|| a.property.cmp(&b.property)));
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(SuiteReport {
        suite: name.to_string(),
        params: params.clone(),
        passed: checks.len() - failed,
        failed,
        checks,
    })
}

fn record(property: &str, outcome: Outcome, witness: impl FnOnce() -> Value) -> Check {
    let passed = outcome.is_ok();
    Check {
        instance: 0,
        property: property.to_string(),
        passed,
        detail: outcome.err(),
        witness: if passed { None } else { Some(witness()) },
    }
}

/// Removes points one at a time while `fails` keeps failing; triples touching
/// a removed point are dropped and the rest reindexed.
pub fn shrink_space(
    space: &PseudometricSpace,
    triples: &[BendingTriple],
    fails: impl Fn(&PseudometricSpace, &[BendingTriple]) -> bool,
) -> (PseudometricSpace, Vec<BendingTriple>) {
    let mut cur = (space.clone(), triples.to_vec());
    'outer: loop {
        if cur.0.len() <= 2 {
            break;
        }
        for drop in 0..cur.0.len() {
            let keep: Vec<usize> = (0..cur.0.len()).filter(|&i| i != drop).collect();
            let re = |i: usize| if i > drop { i - 1 } else { i };
            let ts: Vec<BendingTriple> = cur
                .1
                .iter()
                .filter(|t| t.x != drop && t.y != drop)
                .map(|t| BendingTriple::new(re(t.x), re(t.y), t.a.clone()))
                .collect();
            let s = cur.0.restrict(&keep);
            if fails(&s, &ts) {
                cur = (s, ts);
                continue 'outer;
            }
        }
        break;
    }
    cur
}

/// Removes threads (and collapsed constraints) while `fails` keeps failing.
pub fn shrink_threads(cx: &SegmentComplex, fails: impl Fn(&SegmentComplex) -> bool) -> SegmentComplex {
    let mut cur = cx.clone();
    'outer: loop {
        for t in 0..cur.threads.len() {
            let mut c = cur.clone();
            c.threads.remove(t);
            if fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        for t in 0..cur.collapsed.len() {
            let mut c = cur.clone();
            c.collapsed.remove(t);
            if fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

fn triples_json(ts: &[BendingTriple]) -> Value {
    Value::Array(ts.iter().map(|t| json!({"x": t.x, "y": t.y, "a": fmt_q(&t.a)})).collect())
}

fn space_witness(s: &PseudometricSpace, ts: &[BendingTriple]) -> Value {
    json!({"space": SpaceJson::of(s), "triples": triples_json(ts)})
}

fn complex_witness(cx: &SegmentComplex) -> Value {
    serde_json::to_value(ComplexJson::of(cx)).expect("serializable")
}

fn points(g: &mut Gen, p: &SuiteParams) -> usize {
    g.range(p.min_points, p.max_points)
}

/// Shortest paths by repeated edge relaxation over the original distances
/// plus one shortcut edge per triple.
pub fn shortcut_oracle(d: &DistMatrix, triples: &[BendingTriple]) -> DistMatrix {
    let n = d.len();
    let mut edges: Vec<(usize, usize, Q)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push((i, j, d.get(i, j).clone()));
            }
        }
    }
    for t in triples {
        edges.push((t.x, t.y, t.a.clone()));
        edges.push((t.y, t.x, t.a.clone()));
    }
    let mut out = DistMatrix::zeros(n);
    for s in 0..n {
        let mut dist: Vec<Option<Q>> = vec![None; n];
        dist[s] = Some(Q::zero());
        for _ in 0..n {
            let mut changed = false;
            for (a, b, w) in &edges {
                if let Some(da) = &dist[*a] {
                    let cand = da + w;
                    if dist[*b].as_ref().is_none_or(|db| &cand < db) {
                        dist[*b] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for (t, v) in dist.into_iter().enumerate() {
            out.set(s, t, v.expect("complete graph"));
        }
    }
    out
}

fn bending_props(s: &PseudometricSpace, ts: &[BendingTriple]) -> Vec<(&'static str, Outcome)> {
    let mut out = Vec::new();
    let Ok(b) = bend(s, ts) else {
        return vec![("bend-accepts", Err("bend rejected valid triples".into()))];
    };
    out.push((
        "shortcut-oracle",
        expect(b.dist() == &shortcut_oracle(s.dist(), ts), || "bend differs from relaxation oracle".into()),
    ));
    out.push((
        "pseudometric",
        expect(b.validate().is_valid(), || "bent matrix violates the axioms".into()),
    ));
    out.push((
        "below-and-capped",
        expect(
            b.dist().le_entrywise(s.dist()) && ts.iter().all(|t| b.d(t.x, t.y) <= &t.a),
            || "bent matrix not below the input or above a cap".into(),
        ),
    ));
    out.push((
        "idempotent",
        expect(&bend_matrix(b.dist(), ts) == b.dist(), || "bending twice changes the result".into()),
    ));
    if ts.is_empty() {
        out.push(("empty-is-identity", expect(b.dist() == s.dist(), || "empty bending changed d".into())));
    }
    if ts.len() == 1 {
        out.push((
            "single-formula",
            expect(
                bend_single_formula(s, &ts[0]).map(|f| f == b).unwrap_or(false),
                || "closed form differs from closure".into(),
            ),
        ));
    }
    if ts.len() <= 4 {
        let bad = ts
            .iter()
            .cloned()
            .permutations(ts.len())
            .find(|p| bend_sequential(s, p).map(|r| r.dist() != b.dist()).unwrap_or(true));
        out.push((
            "sequential-all-orders",
            expect(bad.is_none(), || format!("order {:?} differs", bad.map(|p| p.len()))),
        ));
    }
    out
}

fn bending_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = points(g, p);
    let s = if g.chance(0.5) { g.metric(n) } else { g.pseudometric(n) };
    let k = g.range(0, 4);
    let ts = g.triples(&s, k);
    bending_props(&s, &ts)
        .into_iter()
        .map(|(name, o)| {
            record(name, o, || {
                let fails = |s: &PseudometricSpace, t: &[BendingTriple]| {
                    bending_props(s, t).into_iter().any(|(n2, o2)| n2 == name && o2.is_err())
                };
                let (s2, t2) = shrink_space(&s, &ts, fails);
                space_witness(&s2, &t2)
            })
        })
        .collect()
}

/// Largest pseudometric on the disjoint union that is below every input
/// metric, with anchors glued at distance 0.
pub fn union_closure_oracle(frame: &PseudometricSpace, threads: &[AttachThread]) -> (DistMatrix, Vec<usize>) {
    let mut offsets = Vec::new();
    let mut n = frame.len();
    for t in threads {
        offsets.push(n);
        n += t.body.len();
    }
    let mut m = DistMatrix::from_fn(n, |i, j| if i == j { Q::zero() } else { qi(1_000_000_000) });
    for i in 0..frame.len() {
        for j in 0..frame.len() {
            m.set(i, j, frame.d(i, j).clone());
        }
    }
    for (t, off) in threads.iter().zip(&offsets) {
        for i in 0..t.body.len() {
            for j in 0..t.body.len() {
                m.set(off + i, off + j, t.body.d(i, j).clone());
            }
        }
        for (&a, &b) in t.anchors.iter().zip(&t.boundary) {
            m.set_sym(a, off + b, Q::zero());
        }
    }
    m.close();
    (m, offsets)
}

fn attachment_props(frame: &PseudometricSpace, threads: &[AttachThread]) -> Vec<(&'static str, Outcome)> {
    let at = match attach(frame, threads) {
        Ok(a) => a,
        Err(e) => return vec![("attach-accepts", Err(e.to_string()))],
    };
    let (oracle, offsets) = union_closure_oracle(frame, threads);
    let mut idx: Vec<usize> = (0..frame.len()).collect();
    idx.resize(at.space.len(), usize::MAX);
    for (t, off) in offsets.iter().enumerate() {
        for (p, &gi) in at.maps[t].iter().enumerate() {
            if gi >= frame.len() {
                idx[gi] = off + p;
            }
        }
    }
    let agrees = (0..at.space.len()).all(|i| (0..at.space.len()).all(|j| at.space.d(i, j) == oracle.get(idx[i], idx[j])));
    let frame_kept = (0..frame.len()).all(|i| (0..frame.len()).all(|j| at.space.d(i, j) == frame.d(i, j)));
    let bodies_kept = threads.iter().zip(&at.maps).all(|(t, map)| {
        (0..t.body.len()).all(|i| (0..t.body.len()).all(|j| at.space.d(map[i], map[j]) == t.body.d(i, j)))
    });
    vec![
        ("union-closure-oracle", expect(agrees, || "attachment differs from the union closure".into())),
        ("frame-isometric", expect(frame_kept, || "frame distances changed".into())),
        ("bodies-isometric", expect(bodies_kept, || "a body's distances changed".into())),
        ("pseudometric", expect(at.space.validate().is_valid(), || "attachment violates the axioms".into())),
    ]
}

fn attachment_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = points(g, p);
    let threads = g.range(1, 3);
    let cx = g.depth1_complex(n, threads, p.samples);
    let mut threads: Vec<AttachThread> = cx
        .threads
        .iter()
        .map(|t| {
            let crate::complex::ThreadBody::GappedEdge(e) = &t.body else { unreachable!() };
            AttachThread {
                anchors: vec![t.anchors.0, t.anchors.1],
                body: e.space(),
                boundary: vec![0, e.point_count() - 1],
            }
        })
        .collect();
    if g.chance(0.5) {
        let k = g.range(2, 4);
        let body = g.metric(k);
        let z = g.below(n);
        let b = g.below(k);
        threads.push(AttachThread {
            anchors: vec![z],
            body,
            boundary: vec![b],
        });
    }
    let frame = cx.frame.clone();
    attachment_props(&frame, &threads)
        .into_iter()
        .map(|(name, o)| {
            record(name, o, || {
                json!({
                    "frame": SpaceJson::of(&frame),
                    "threads": threads.iter().map(|t| json!({
                        "anchors": t.anchors, "body": SpaceJson::of(&t.body), "boundary": t.boundary
                    })).collect::<Vec<_>>()
                })
            })
        })
        .collect()
}

fn pair_commutation_fails(cx: &SegmentComplex, t: &BendingTriple) -> Option<String> {
    match check_pair_bending_commutation(cx, t) {
        Ok(r) if r.holds() => None,
        Ok(r) => Some(format!("first difference at {:?} (b = {})", r.first_difference, fmt_q(&r.b))),
        Err(e) => Some(e.to_string()),
    }
}

fn pair_commutation_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = points(g, p);
    let threads = g.range(1, 3);
    let cx = g.depth1_complex(n, threads, p.samples);
    let (x, y) = g.distinct_pair(n);
    let t = BendingTriple::new(x, y, cx.frame.d(x, y) * g.rational(0, 4, 4));
    let fail = pair_commutation_fails(&cx, &t);
    vec![record("bent-cf-equals-cf-bent", fail.map_or(Ok(()), Err), || {
        let small = shrink_threads(&cx, |c| pair_commutation_fails(c, &t).is_some());
        json!({"complex": complex_witness(&small), "triple": triples_json(std::slice::from_ref(&t))})
    })]
}

fn attach_cf_fails(cx: &SegmentComplex, stages: usize) -> Option<String> {
    let f = match flatten(cx) {
        Ok(f) => f,
        Err(e) => return Some(e.to_string()),
    };
    let oracle = oracle_stages(&f, stages);
    let trace = match cf_initial(cx).and_then(|s| cf_iterate(s, stages)) {
        Ok(t) => t,
        Err(e) => return Some(e.to_string()),
    };
    (0..=stages)
        .find(|&k| trace.matrix_at(k) != &oracle[k])
        .map(|k| format!("engine and oracle differ at stage {k}"))
}

fn attach_cf_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = points(g, p).min(5);
    let threads = g.range(1, 3);
    let cx = g.depth2_complex(n, threads, p.samples);
    let fail = attach_cf_fails(&cx, p.stages);
    vec![record("engine-equals-oracle", fail.map_or(Ok(()), Err), || {
        complex_witness(&shrink_threads(&cx, |c| attach_cf_fails(c, p.stages).is_some()))
    })]
}

fn theorem_a_fails(m: &PseudometricSpace, w: &crate::DistortionPL, samples: usize) -> Option<String> {
    let all: Vec<usize> = (0..m.len()).collect();
    let gg = match gapped_graph(m, w, &all, samples) {
        Ok(g) => g,
        Err(e) => return Some(e.to_string()),
    };
    let cf = match cf_oracle(&gg.complex) {
        Ok(c) => c,
        Err(e) => return Some(e.to_string()),
    };
    let (quot, _) = cf.quotient_by_zero();
    if quot.len() != m.len() {
        return Some(format!("quotient has {} points, expected {}", quot.len(), m.len()));
    }
    if quot.labels() != m.labels() {
        return Some("quotient classes are not labelled by the frame points".into());
    }
    (quot.dist() != m.dist()).then(|| format!("distance differs at {:?}", quot.dist().first_difference(m.dist())))
}

fn theorem_a_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = points(g, p);
    let m = g.metric(n);
    let w = g.distortion(&m.diameter().expect("nonempty"));
    let fail = theorem_a_fails(&m, &w, p.samples);
    vec![record("quotient-isometric-to-m", fail.map_or(Ok(()), Err), || {
        let (small, _) = shrink_space(&m, &[], |s, _| {
            let w2 = crate::DistortionPL::new(w.breakpoints().to_vec(), w.steepness().clone()).expect("valid");
            s.diameter().ok() == m.diameter().ok() && theorem_a_fails(s, &w2, p.samples).is_some()
        });
        json!({"space": SpaceJson::of(&small), "distortion": crate::io::DistortionJson::of(&w)})
    })]
}

fn theorem_b_instance(g: &mut Gen, p: &SuiteParams, i: usize) -> Vec<Check> {
    let n = points(g, p).min(4);
    let m = g.metric(n);
    let diam = m.diameter().expect("nonempty");
    let w = g.distortion(&diam);
    let alpha = 1 + i % 2;
    let eps = q(1, 4);
    let min_d = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| m.d(a, b).clone())
        .min()
        .expect("two points");
    let n_stages = (scale_band(&min_d, &diam) + 1).min(6);
    let witness = || json!({"space": SpaceJson::of(&m), "alpha": alpha, "stages": n_stages});
    let built = match build_theorem_b(&m, alpha, &eps, &w, n_stages, 0) {
        Ok(b) => b,
        Err(e) => return vec![record("builds", Err(e.to_string()), witness)],
    };
    let mut out = Vec::new();
    let depth = built.thread_depths.iter().copied().max().unwrap_or(0);
    let trace = match cf_initial(&built.complex).and_then(|s| cf_iterate(s, alpha + 2)) {
        Ok(t) => t,
        Err(e) => return vec![record("iterates", Err(e.to_string()), witness)],
    };
    let index = match trace.fixed_point {
        Some(k) => CfIndex::Finite(k),
        None => CfIndex::Exceeds(alpha + 2),
    };
    out.push(record(
        "index",
        expect(depth <= alpha && index == CfIndex::Finite(depth), || {
            format!("index {index:?}, thread depth {depth}, alpha {alpha}")
        }),
        witness,
    ));
    let top = trace.matrix_at(alpha);
    let mut bound_fail = None;
    for a in 0..n {
        for b in a + 1..n {
            let d = m.d(a, b);
            let r = top.get(a, b);
            let k = scale_band(d, &diam);
            let mut upper = d * (Q::one() + &eps);
            if k < n_stages {
                upper = d * (Q::one() + pow2(-(k as i32)) * &eps);
            }
            if r < d || r > &upper {
                bound_fail.get_or_insert(format!("pair ({a},{b}): {} outside [{}, {}]", fmt_q(r), fmt_q(d), fmt_q(&upper)));
            }
        }
    }
    out.push(record("stage-alpha-bounds", bound_fail.map_or(Ok(()), Err), witness));
    let fl = flatten(&built.complex).expect("built complexes flatten");
    let ydiam = fl.space.diameter().expect("nonempty");
    out.push(record(
        "diameter",
        expect(ydiam <= &diam * qi(3), || format!("diam(Y) = {}", fmt_q(&ydiam))),
        witness,
    ));
    let mut s_fail = None;
    for beta in 0..=alpha {
        let st = trace.state_at(beta);
        for (t, th) in built.complex.threads.iter().enumerate() {
            if th.wedge {
                continue;
            }
            let (x, y) = th.anchors;
            let dxy = m.d(x, y);
            let want = if beta >= built.thread_depths[t] {
                dxy.clone()
            } else {
                w.eval(dxy).expect("nonnegative")
            };
            if st.anchor_values[t] != want {
                s_fail.get_or_insert(format!(
                    "thread {t} at stage {beta}: {} != {}",
                    fmt_q(&st.anchor_values[t]),
                    fmt_q(&want)
                ));
            }
        }
    }
    out.push(record("anchor-values", s_fail.map_or(Ok(()), Err), witness));
    out
}

fn scale_bound_instance(g: &mut Gen, p: &SuiteParams) -> Vec<Check> {
    let n = g.range(p.min_points.max(4), p.max_points.max(4));
    let m = g.metric(n);
    let diam = m.diameter().expect("nonempty");
    let w = g.distortion(&diam);
    let eps = if g.chance(0.5) { q(1, 4) } else { q(1, 2) };
    let min_d = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| m.d(a, b).clone())
        .min()
        .expect("two points");
    let n_stages = scale_band(&min_d, &diam) + 1;
    let witness = || json!({"space": SpaceJson::of(&m), "eps": fmt_q(&eps)});
    let tuple = match build_admissible(&m, 1, &eps, &w, n_stages) {
        Ok(t) => t,
        Err(e) => return vec![record("builds", Err(e.to_string()), witness)],
    };
    let rho = full_bending(&m, &tuple);
    let mut fail = None;
    for a in 0..n {
        for b in a + 1..n {
            let d = m.d(a, b);
            let k = scale_band(d, &diam);
            if k >= n_stages {
                continue;
            }
            let upper = d * (Q::one() + pow2(-(k as i32)) * &eps);
            let r = rho.get(a, b);
            if r < d || r > &upper {
                fail.get_or_insert(format!("pair ({a},{b}) at scale {k}: {}", fmt_q(r)));
            }
        }
    }
    vec![
        record(
            "admissible",
            expect(tuple.report.holds(), || format!("{:?}", tuple.report)),
            witness,
        ),
        record("scale-bound", fail.map_or(Ok(()), Err), witness),
    ]
}

fn geodesic_instance(i: usize) -> Vec<Check> {
    let length = [qi(1), q(3, 2), qi(2)][i % 3].clone();
    let family: Vec<(Q, crate::constructions::Geometry)> = [2usize, 4, 8]
        .iter()
        .map(|&s| (&length / qi(s as i64), path_metric(s, &length)))
        .collect();
    let witness = || json!({"length": fmt_q(&length), "segments": [2, 4, 8]});
    let rows = match refine_geodesic_check(&family, &q(1, 4), 0) {
        Ok(r) => r,
        Err(e) => return vec![record("builds", Err(e.to_string()), witness)],
    };
    let within = rows.iter().all(|r| r.ratio <= r.bound);
    let monotone = rows.windows(2).all(|w| w[1].ratio <= w[0].ratio);
    let ratios: Vec<String> = rows.iter().map(|r| fmt_q(&r.ratio)).collect();
    vec![
        record("within-bound", expect(within, || format!("ratios {ratios:?}")), witness),
        record("nonincreasing", expect(monotone, || format!("ratios {ratios:?}")), witness),
    ]
}

fn map_witness(map: &ComplexMap) -> Value {
    MapJson::of(map).map_or(Value::Null, |m| serde_json::to_value(m).expect("serializable"))
}

fn quotient_checks(map: &ComplexMap, stages: usize, tag: &str) -> Vec<Check> {
    let Ok(amb) = map.ambient() else {
        return Vec::new();
    };
    let is_quotient = lip_constant(&amb).is_ok() && matches!(colip_constant(&amb), Ok(Constant::Finite(_)));
    if !is_quotient {
        return Vec::new();
    }
    let ineq = match verify_preimage_inequality(map, stages) {
        Ok(r) if r.holds() => Ok(()),
        Ok(r) => Err(format!("{} violations", r.violations.len())),
        Err(e) => Err(e.to_string()),
    };
    let mono = match verify_index_monotonicity(map, stages + 4) {
        Ok(r) if r.holds != Some(false) => Ok(()),
        Ok(r) => Err(format!("source {:?} < target {:?}", r.source, r.target)),
        Err(e) => Err(e.to_string()),
    };
    vec![
        record(&format!("{tag}-preimage-inequality"), ineq, || map_witness(map)),
        record(&format!("{tag}-index-monotone"), mono, || map_witness(map)),
    ]
}

fn lipquot_instance(g: &mut Gen, p: &SuiteParams, i: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let n = g.range(2, 12);
    let k = g.range(1, n);
    let src = if g.chance(0.5) { g.metric(n) } else { g.pseudometric(n) };
    let tgt = g.metric(k);
    let f = FiniteMap::new(src, tgt, g.surjection(n, k)).expect("total");
    let formula = colip_constant(&f);
    let balls = colip_by_balls(&f);
    out.push(record(
        "colip-formula-equals-balls",
        expect(formula == balls, || format!("{formula:?} vs {balls:?}")),
        || json!({"source": SpaceJson::of(&f.source), "target": SpaceJson::of(&f.target), "assignment": f.assignment}),
    ));
    let stages = p.stages.min(2);
    let (frame_pts, threads) = (g.range(2, 4), g.range(1, 3));
    let cx = if i % 2 == 0 {
        g.depth1_complex(frame_pts, threads, p.samples.min(2))
    } else {
        g.depth2_complex(frame_pts, threads, p.samples.min(1))
    };
    let stage = g.range(0, 2);
    if let Ok(map) = class_map_onto_stage(&cx, stage) {
        out.extend(quotient_checks(&map, stages, "class-map"));
        let nk = map.assignment.iter().max().map_or(1, |m| m + 1);
        let classes = g.range(1, nk);
        let s = g.surjection(nk, classes);
        let comp = ComplexMap {
            source: cx.clone(),
            target: SegmentComplex::new(g.metric(classes).with_metric_flag(false)),
            assignment: map.assignment.iter().map(|&a| s[a]).collect(),
        };
        out.extend(quotient_checks(&comp, stages, "composed"));
    }
    if let Ok(map) = subsample_map(&cx, 2) {
        out.extend(quotient_checks(&map, stages, "subsample"));
    }
    let mpts = g.range(2, 4);
    let m = g.metric(mpts);
    let w = g.distortion(&m.diameter().expect("nonempty"));
    let all: Vec<usize> = (0..m.len()).collect();
    if let Ok(gg) = gapped_graph(&m, &w, &all, p.samples.min(1)) {
        if let Ok(map) = arm_projection(&gg.complex, &m) {
            out.extend(quotient_checks(&map, stages, "arm-projection"));
        }
    }
    out
}

/// p1u preservation on the corpus: a source with index 0 has targets of index 0.
pub fn p1u_preserved(map: &ComplexMap, max_stage: usize) -> Option<bool> {
    let s = cf_index(&map.source, max_stage).ok()?;
    let t = cf_index(&map.target, max_stage).ok()?;
    (s == CfIndex::Finite(0)).then_some(t == CfIndex::Finite(0))
}
