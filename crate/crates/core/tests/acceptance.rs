//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cfq_core::complex::{
    bend, bend_sequential, bend_single_formula, flatten, BendingTriple, SegmentComplex,
};
use cfq_core::constructions::{
    build_admissible, build_theorem_b, full_bending, gapped_graph, gapped_segment, path_metric, refine_geodesic_check,
    scale_band, Geometry,
};
use cfq_core::curveflat::{
    cf_index, cf_initial, cf_iterate, cf_oracle, cf_step, check_pair_bending_commutation, oracle_stages, CfIndex,
};
use cfq_core::lipquot::{class_map_onto_stage, verify_index_monotonicity, verify_preimage_inequality};
use cfq_core::random::Gen;
use cfq_core::rational::{fmt_q, pow2, q, qi, Q};
use cfq_core::verify::{run_suite, shortcut_oracle, SuiteParams};
use cfq_core::{DistMatrix, DistortionPL, PseudometricSpace};
use itertools::Itertools;
use num_traits::{One, Zero};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn line(points: &[Q]) -> PseudometricSpace {
    PseudometricSpace::from_matrix(DistMatrix::from_fn(points.len(), |i, j| {
        let d = &points[i] - &points[j];
        if d < Q::zero() { -d } else { d }
    }))
    .with_metric_flag(true)
}

fn four_point() -> (PseudometricSpace, DistortionPL) {
    let m = line(&[qi(0), q(1, 16), q(1, 2), qi(1)]);
    let w = DistortionPL::new(vec![(qi(0), qi(0)), (q(1, 16), q(1, 4)), (qi(1), qi(1))], qi(4)).unwrap();
    (m, w)
}

fn c1_gapped_segment() -> Outcome {
    let w = DistortionPL::new(vec![(qi(0), qi(0)), (q(1, 2), q(3, 2)), (qi(2), qi(2))], qi(3)).map_err(|e| e.to_string())?;
    ensure(w.eval(&q(1, 2)).unwrap() == q(3, 2), || "omega(1/2) != 3/2".into())?;
    for samples in [0, 1, 3] {
        let cx = gapped_segment(&q(1, 2), &w, samples).map_err(|e| e.to_string())?;
        let f = flatten(&cx).map_err(|e| e.to_string())?;
        let cf = cf_oracle(&cx).map_err(|e| e.to_string())?;
        let (quot, part) = cf.quotient_by_zero();
        ensure(quot.len() == 2 && quot.d(0, 1) == &q(1, 2), || {
            format!("samples {samples}: quotient has {} points", quot.len())
        })?;
        // every arm point sits at distance 0 from its anchor
        for p in f.frame_len..f.space.len() {
            let anchor = if f.space.labels()[p].contains("/l") || f.space.labels()[p].ends_with("/u") { 0 } else { 1 };
            ensure(cf.d(p, anchor).is_zero() && part.same_block(p, anchor), || {
                format!("samples {samples}: {} not collapsed onto its anchor", f.space.labels()[p])
            })?;
        }
    }
    Ok("samples 0,1,3: two points at 1/2".into())
}

fn c2_theorem_a() -> Outcome {
    let mut total_points = 0;
    for seed in 0..100u64 {
        let mut g = Gen::new(20_000 + seed);
        let n = g.range(4, 8);
        let m = g.metric(n);
        let w = g.distortion(&m.diameter().unwrap());
        let all: Vec<usize> = (0..n).collect();
        let gg = gapped_graph(&m, &w, &all, 1).map_err(|e| format!("seed {seed}: {e}"))?;
        let cf = cf_oracle(&gg.complex).map_err(|e| format!("seed {seed}: {e}"))?;
        total_points += cf.len();
        let (quot, _) = cf.quotient_by_zero();
        ensure(quot.len() == n && quot.labels() == m.labels(), || format!("seed {seed}: {} classes", quot.len()))?;
        ensure(quot.dist() == m.dist(), || {
            format!("seed {seed}: differs at {:?}", quot.dist().first_difference(m.dist()))
        })?;
    }
    Ok(format!("100 metrics, {total_points} flattened points"))
}

fn c3_bending() -> Outcome {
    let mut perms = 0;
    for seed in 0..200u64 {
        let mut g = Gen::new(30_000 + seed);
        let n = g.range(2, 10);
        let s = if g.chance(0.5) { g.metric(n) } else { g.pseudometric(n) };
        let k = g.range(0, 4);
        let ts = g.triples(&s, k);
        let b = bend(&s, &ts).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(b.dist() == &shortcut_oracle(s.dist(), &ts), || format!("seed {seed}: shortcut oracle differs"))?;
        if ts.len() == 1 {
            let f = bend_single_formula(&s, &ts[0]).map_err(|e| e.to_string())?;
            ensure(f == b, || format!("seed {seed}: single-pair formula differs"))?;
        }
        for p in ts.iter().cloned().permutations(ts.len()) {
            perms += 1;
            let r = bend_sequential(&s, &p).map_err(|e| e.to_string())?;
            ensure(r.dist() == b.dist(), || format!("seed {seed}: order-dependent result"))?;
        }
    }
    Ok(format!("200 instances, {perms} orders"))
}

fn c4_pair_commutation() -> Outcome {
    for seed in 0..200u64 {
        let mut g = Gen::new(40_000 + seed);
        let n = g.range(3, 6);
        let threads = g.range(1, 3);
        let cx = g.depth1_complex(n, threads, 1);
        let (x, y) = g.distinct_pair(n);
        let t = BendingTriple::new(x, y, cx.frame.d(x, y) * g.rational(0, 4, 4));
        let r = check_pair_bending_commutation(&cx, &t).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(r.holds(), || format!("seed {seed}: differs at {:?}", r.first_difference))?;
    }
    Ok("200 depth-1 complexes".into())
}

fn c5_attach_cf() -> Outcome {
    let mut points = 0;
    for seed in 0..100u64 {
        let mut g = Gen::new(50_000 + seed);
        let n = g.range(3, 5);
        let threads = g.range(1, 4);
        let cx = if seed % 4 == 0 {
            g.depth1_complex(n, threads, 2)
        } else {
            g.depth2_complex(n, threads, 1)
        };
        let f = flatten(&cx).map_err(|e| format!("seed {seed}: {e}"))?;
        points += f.space.len();
        let oracle = oracle_stages(&f, 3);
        let trace = cf_iterate(cf_initial(&cx).map_err(|e| e.to_string())?, 3).map_err(|e| e.to_string())?;
        for beta in 0..=3 {
            ensure(trace.matrix_at(beta) == &oracle[beta], || format!("seed {seed}: stage {beta} differs"))?;
        }
    }
    Ok(format!("100 complexes, {points} points, stages 0-3"))
}

fn c6_theorem_b() -> Outcome {
    let (m, w) = four_point();
    let eps = q(1, 4);
    let diam = m.diameter().unwrap();
    let n = m.len();
    let mut notes = Vec::new();
    for samples in [0, 1] {
        let b = build_theorem_b(&m, 2, &eps, &w, 5, samples).map_err(|e| e.to_string())?;
        let tuple = b.tuple.as_ref().ok_or("no admissible tuple")?;
        tuple.require_scale(3).map_err(|e| e.to_string())?;
        let idx = cf_index(&b.complex, 6).map_err(|e| e.to_string())?;
        ensure(idx == CfIndex::Finite(2), || format!("samples {samples}: index {idx:?}"))?;
        let trace = cf_iterate(cf_initial(&b.complex).map_err(|e| e.to_string())?, 3).map_err(|e| e.to_string())?;
        let top = trace.matrix_at(2);
        for a in 0..n {
            for c in a + 1..n {
                let d = m.d(a, c);
                let r = top.get(a, c);
                let k = scale_band(d, &diam);
                ensure(r >= d && r <= &(d * (Q::one() + &eps)), || format!("pair ({a},{c}) = {}", fmt_q(r)))?;
                if k < tuple.n_stages {
                    let ub = d * (Q::one() + pow2(-(k as i32)) * &eps);
                    ensure(r <= &ub, || format!("pair ({a},{c}) at scale {k} = {}", fmt_q(r)))?;
                }
            }
        }
        let ydiam = flatten(&b.complex).map_err(|e| e.to_string())?.space.diameter().unwrap();
        ensure(ydiam <= &diam * qi(3), || format!("diam(Y) = {}", fmt_q(&ydiam)))?;
        for beta in 0..=2 {
            let st = trace.state_at(beta);
            for (t, th) in b.complex.threads.iter().enumerate() {
                let dxy = m.d(th.anchors.0, th.anchors.1);
                let want = if beta >= b.thread_depths[t] { dxy.clone() } else { w.eval(dxy).unwrap() };
                ensure(st.anchor_values[t] == want, || {
                    format!("thread {t} stage {beta}: {} vs {}", fmt_q(&st.anchor_values[t]), fmt_q(&want))
                })?;
            }
        }
        notes.push(format!("samples {samples}: index 2, diam(Y) {}", fmt_q(&ydiam)));
    }
    Ok(notes.join("; "))
}

fn scale_bound_holds(m: &PseudometricSpace, w: &DistortionPL, eps: &Q, tag: &str) -> Result<usize, String> {
    let diam = m.diameter().unwrap();
    let n = m.len();
    let min_d = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| m.d(a, b).clone()).min().unwrap();
    let stages = scale_band(&min_d, &diam) + 1;
    let tuple = build_admissible(m, 1, eps, w, stages).map_err(|e| format!("{tag}: {e}"))?;
    ensure(tuple.report.holds(), || format!("{tag}: admissibility {:?}", tuple.report))?;
    let rho = full_bending(m, &tuple);
    let mut checked = 0;
    for a in 0..n {
        for b in a + 1..n {
            let d = m.d(a, b);
            let k = scale_band(d, &diam);
            if k >= tuple.n_stages {
                continue;
            }
            let r = rho.get(a, b);
            let ub = d * (Q::one() + pow2(-(k as i32)) * eps);
            ensure(r >= d && r <= &ub, || format!("{tag}: pair ({a},{b}) at scale {k}: {}", fmt_q(r)))?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn c7_scale_bound() -> Outcome {
    let (m, w) = four_point();
    let mut pairs = scale_bound_holds(&m, &w, &q(1, 4), "four-point")?;
    for seed in 0..60u64 {
        let mut g = Gen::new(70_000 + seed);
        let n = g.range(4, 9);
        let m = g.metric(n);
        let w = g.distortion(&m.diameter().unwrap());
        let eps = [q(1, 4), q(1, 2), qi(1)][seed as usize % 3].clone();
        pairs += scale_bound_holds(&m, &w, &eps, &format!("seed {seed}"))?;
    }
    Ok(format!("{pairs} certified pairs"))
}

fn c8_geodesic() -> Outcome {
    let family: Vec<(Q, Geometry)> = [2usize, 4, 8].iter().map(|&s| (q(1, s as i64), path_metric(s, &qi(1)))).collect();
    let rows = refine_geodesic_check(&family, &q(1, 4), 0).map_err(|e| e.to_string())?;
    for r in &rows {
        ensure(r.ratio <= r.bound, || format!("mesh {}: ratio {} > {}", fmt_q(&r.mesh), fmt_q(&r.ratio), fmt_q(&r.bound)))?;
    }
    for w in rows.windows(2) {
        ensure(w[1].ratio <= w[0].ratio, || "ratio increased under refinement".into())?;
    }
    Ok(rows.iter().map(|r| format!("r={}: {}", fmt_q(&r.mesh), fmt_q(&r.ratio))).join(", "))
}

fn c9_lipquot() -> Outcome {
    let params = SuiteParams {
        seed: 9,
        instances: 120,
        stages: 2,
        ..SuiteParams::default()
    };
    let rep = run_suite("lipquot", &params).map_err(|e| e.to_string())?;
    if let Some(f) = rep.failures().next() {
        return Err(format!("instance {} {}: {:?}", f.instance, f.property, f.detail));
    }
    let colip = rep.checks.iter().filter(|c| c.property.starts_with("colip")).count();
    ensure(colip == 120, || format!("only {colip} colip checks"))?;
    let (m, w) = four_point();
    let b = build_theorem_b(&m, 2, &q(1, 4), &w, 5, 0).map_err(|e| e.to_string())?;
    let map = class_map_onto_stage(&b.complex, 2).map_err(|e| e.to_string())?;
    let ineq = verify_preimage_inequality(&map, 2).map_err(|e| e.to_string())?;
    ensure(ineq.holds(), || format!("theorem-b quotient: {:?}", ineq.violations.first()))?;
    let idx = verify_index_monotonicity(&map, 6).map_err(|e| e.to_string())?;
    ensure(
        idx.source == CfIndex::Finite(2) && idx.target == CfIndex::Finite(0),
        || format!("indices {:?} / {:?}", idx.source, idx.target),
    )?;
    Ok(format!("{} checks, depth-2 quotient 2 >= 0", rep.passed + 2))
}

fn c10_idempotence() -> Outcome {
    for seed in 0..100u64 {
        let mut g = Gen::new(100_000 + seed);
        let n = g.range(3, 5);
        let threads = g.range(1, 3);
        let cx = g.depth2_complex(n, threads, 1);
        let cf = cf_oracle(&cx).map_err(|e| format!("seed {seed}: {e}"))?;
        let again = cf_oracle(&SegmentComplex::new(cf.clone())).map_err(|e| e.to_string())?;
        ensure(again.dist() == cf.dist(), || format!("seed {seed}: re-applied oracle moved"))?;
        let trace = cf_iterate(cf_initial(&cx).map_err(|e| e.to_string())?, 6).map_err(|e| e.to_string())?;
        let k = trace.fixed_point.ok_or_else(|| format!("seed {seed}: no fixed point"))?;
        let next = cf_step(trace.state_at(k)).map_err(|e| e.to_string())?;
        ensure(&next.materialized == trace.matrix_at(k), || format!("seed {seed}: step at fixed point moved"))?;
    }
    Ok("100 instances".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("gapped-segment collapse", Duration::from_secs(1), c1_gapped_segment),
        ("theorem A (finite)", Duration::from_secs(30), c2_theorem_a),
        ("bending coherence", Duration::from_secs(30), c3_bending),
        ("pair commutation", Duration::from_secs(60), c4_pair_commutation),
        ("attach/cf commutation", Duration::from_secs(300), c5_attach_cf),
        ("theorem B bounds", Duration::from_secs(300), c6_theorem_b),
        ("scale bound", Duration::from_secs(60), c7_scale_bound),
        ("geodesic-limit surrogate", Duration::from_secs(120), c8_geodesic),
        ("lipschitz quotient suite", Duration::from_secs(300), c9_lipquot),
        ("engine idempotence", Duration::from_secs(30), c10_idempotence),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let verdict = match (&outcome, took <= *limit) {
            (Ok(_), true) => "PASS",
            _ => "FAIL",
        };
        let detail = match outcome {
            Ok(s) if took <= *limit => s,
            Ok(s) => format!("{s}; over time limit"),
            Err(e) => e,
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "{verdict} criterion {:>2} {name}: {detail} [{:.2}s / limit {}s]",
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
