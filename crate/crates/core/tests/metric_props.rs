use cfq_core::metric::{check_axioms, Violation};
use cfq_core::random::Gen;
use cfq_core::rational::{q, qi, Q};
use cfq_core::{DistMatrix, DistortionPL, PseudometricSpace};
use num_traits::Zero;
use proptest::prelude::*;

fn raw_matrix(g: &mut Gen, n: usize) -> DistMatrix {
    let mut m = DistMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            m.set_sym(i, j, g.rational(0, 20, 4));
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn closure_yields_largest_pseudometric_below(seed in any::<u64>(), n in 1usize..9) {
        let mut g = Gen::new(seed);
        let raw = raw_matrix(&mut g, n);
        let mut c = raw.clone();
        c.close();
        prop_assert!(check_axioms(&c, false).is_valid());
        prop_assert!(c.le_entrywise(&raw));
        let mut again = c.clone();
        again.close();
        prop_assert_eq!(&again, &c);
        // a pseudometric below the input stays below the closure
        let half = DistMatrix::from_fn(n, |i, j| c.get(i, j) / qi(2));
        prop_assert!(half.le_entrywise(&c));
    }

    #[test]
    fn concave_distortion_keeps_metric(seed in any::<u64>(), n in 2usize..8) {
        let mut g = Gen::new(seed);
        let m = g.metric(n);
        let w = g.distortion(&m.diameter().unwrap());
        let wm = m.apply_distortion(&w);
        prop_assert!(wm.clone().with_metric_flag(true).validate().is_valid());
        for i in 0..n {
            for j in 0..n {
                prop_assert!(wm.d(i, j) >= m.d(i, j));
            }
        }
        prop_assert_eq!(wm.diameter().unwrap(), m.diameter().unwrap());
    }

    #[test]
    fn distortion_is_monotone_and_concave(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let w = g.distortion(&qi(3));
        let ts: Vec<Q> = (0..=24).map(|k| q(k, 8)).collect();
        let vals: Vec<Q> = ts.iter().map(|t| w.eval(t).unwrap()).collect();
        for k in 1..vals.len() {
            prop_assert!(vals[k] >= vals[k - 1]);
        }
        for k in 1..vals.len() - 1 {
            // equal spacing: midpoint concavity
            prop_assert!(&vals[k] * qi(2) >= &vals[k - 1] + &vals[k + 1]);
        }
        prop_assert!(w.eval(&qi(-1)).is_err());
    }

    #[test]
    fn zero_quotient_is_metric(seed in any::<u64>(), n in 1usize..10) {
        let mut g = Gen::new(seed);
        let p = g.pseudometric(n);
        let (quot, part) = p.quotient_by_zero();
        prop_assert!(quot.validate().is_valid());
        prop_assert!(quot.clone().with_metric_flag(true).validate().is_valid());
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(quot.d(part.block_of[i], part.block_of[j]), p.d(i, j));
                prop_assert_eq!(part.same_block(i, j), p.d(i, j).is_zero());
            }
        }
    }

    #[test]
    fn restriction_keeps_axioms(seed in any::<u64>(), n in 2usize..9) {
        let mut g = Gen::new(seed);
        let m = g.metric(n);
        let keep: Vec<usize> = (0..n).filter(|_| g.chance(0.6)).collect();
        let r = m.restrict(&keep);
        prop_assert!(r.validate().is_valid());
        prop_assert_eq!(r.len(), keep.len());
    }
}

#[test]
fn violations_are_reported() {
    let m = DistMatrix::from_rows(vec![
        vec![qi(0), qi(1), qi(5)],
        vec![qi(1), qi(0), qi(1)],
        vec![qi(5), qi(1), qi(0)],
    ])
    .unwrap();
    let r = check_axioms(&m, false);
    assert!(r.violations.iter().any(|v| matches!(v, Violation::Triangle { .. })));

    let z = DistMatrix::from_rows(vec![vec![qi(0), qi(0)], vec![qi(0), qi(0)]]).unwrap();
    assert!(check_axioms(&z, false).is_valid());
    assert!(check_axioms(&z, true)
        .violations
        .iter()
        .any(|v| matches!(v, Violation::Positivity { .. })));

    assert!(DistMatrix::from_rows(vec![vec![qi(0), qi(1)], vec![qi(2), qi(0)]])
        .map(|m| !check_axioms(&m, false).is_valid())
        .unwrap());
    assert!(PseudometricSpace::new(vec!["a".into()], DistMatrix::zeros(2)).is_err());
}

#[test]
fn distortion_rejects_bad_input() {
    assert!(DistortionPL::new(vec![(qi(0), qi(0))], qi(1)).is_err());
    assert!(DistortionPL::new(vec![(qi(1), qi(1)), (qi(2), qi(2))], qi(1)).is_err());
    // convex kink
    assert!(DistortionPL::new(vec![(qi(0), qi(0)), (qi(1), qi(1)), (qi(2), qi(3))], qi(1)).is_err());
    // first slope below the declared steepness
    assert!(DistortionPL::new(vec![(qi(0), qi(0)), (qi(1), qi(2)), (qi(2), qi(3))], qi(4)).is_err());
}
