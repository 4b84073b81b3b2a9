//! Seeded instance generators.
//!
//! Random metrics are symmetric matrices of positive rationals forced into a
//! metric by min-plus closure. Everything is driven by a ChaCha8 stream so a
//! seed fixes the instance on every platform.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{BendingTriple, FrameLink, GappedEdge, SegmentComplex, Thread};
use crate::distortion::DistortionPL;
use crate::metric::{DistMatrix, PseudometricSpace};
use crate::rational::{q, Q};

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    /// Uniform on `{lo/den, (lo+1)/den, ..., hi/den}`.
    pub fn rational(&mut self, lo: i64, hi: i64, den: i64) -> Q {
        q(self.rng.gen_range(lo..=hi), den)
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        v.shuffle(&mut self.rng);
    }

    /// Random metric on `n` points with entries in `[1/4, 3]` before closure.
    pub fn metric(&mut self, n: usize) -> PseudometricSpace {
        let mut m = DistMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = self.rational(1, 12, 4);
                m.set_sym(i, j, v);
            }
        }
        m.close();
        PseudometricSpace::from_matrix(m).with_metric_flag(true)
    }

    /// Random pseudometric: a metric on fewer classes, blown up.
    pub fn pseudometric(&mut self, n: usize) -> PseudometricSpace {
        let classes = self.range(1, n.max(1));
        let base = self.metric(classes);
        let class_of: Vec<usize> = (0..n).map(|i| if i < classes { i } else { self.below(classes) }).collect();
        PseudometricSpace::from_matrix(DistMatrix::from_fn(n, |i, j| base.d(class_of[i], class_of[j]).clone()))
    }

    /// `(0,0), (t1,v1), (D,D)` with `0 < t1 < v1 < D`; strictly above the
    /// identity on `(0, D)`.
    pub fn distortion(&mut self, diam: &Q) -> DistortionPL {
        let a = self.rational(1, 4, 16);
        let b = &a + self.rational(2, 8, 16);
        let t1 = diam * &a;
        let v1 = diam * &b;
        let s0 = &b / &a;
        DistortionPL::new(vec![(Q::zero(), Q::zero()), (t1, v1), (diam.clone(), diam.clone())], s0)
            .expect("concave by construction")
    }

    pub fn distinct_pair(&mut self, n: usize) -> (usize, usize) {
        let x = self.below(n);
        let mut y = self.below(n - 1);
        if y >= x {
            y += 1;
        }
        (x, y)
    }

    pub fn triples(&mut self, space: &PseudometricSpace, count: usize) -> Vec<BendingTriple> {
        (0..count)
            .map(|_| {
                let (x, y) = self.distinct_pair(space.len());
                let frac = self.rational(0, 4, 4);
                BendingTriple::new(x, y, space.d(x, y) * frac)
            })
            .collect()
    }

    fn gapped_edge(&mut self, length: &Q, samples: usize) -> GappedEdge {
        let gap = length * self.rational(0, 4, 4);
        GappedEdge::new(length.clone(), gap, samples).expect("gap within length")
    }

    /// p1u frame with gapped-edge threads on random pairs.
    pub fn depth1_complex(&mut self, frame_points: usize, threads: usize, max_samples: usize) -> SegmentComplex {
        let frame = self.metric(frame_points).with_metric_flag(false);
        let ts = (0..threads)
            .map(|_| {
                let (x, y) = self.distinct_pair(frame_points);
                let samples = self.range(0, max_samples);
                let e = self.gapped_edge(frame.d(x, y), samples);
                Thread::edge(x, y, e)
            })
            .collect();
        SegmentComplex::new(frame).with_threads(ts)
    }

    /// Inner body with boundary `(0, 1)` at distance `length`.
    fn inner_complex(&mut self, length: &Q, max_samples: usize) -> SegmentComplex {
        let n = self.range(2, 4);
        let raw = self.metric(n);
        let scale = length / raw.d(0, 1);
        let frame = PseudometricSpace::from_matrix(DistMatrix::from_fn(n, |i, j| raw.d(i, j) * &scale));
        let mut cx = SegmentComplex::new(frame);
        cx.p1u = self.chance(0.7);
        for i in 0..n {
            for j in i + 1..n {
                if self.chance(0.3) {
                    cx.links.push(FrameLink {
                        a: i,
                        b: j,
                        length: cx.frame.d(i, j).clone(),
                    });
                }
            }
        }
        cx.restore_stage = match self.below(4) {
            0 => None,
            k => Some(k - 1),
        };
        let inner_threads = self.range(0, 2);
        for _ in 0..inner_threads {
            let (x, y) = self.distinct_pair(n);
            let samples = self.range(0, max_samples);
            let e = self.gapped_edge(cx.frame.d(x, y), samples);
            cx.threads.push(Thread::edge(x, y, e));
        }
        cx
    }

    /// Frame with a mix of gapped edges, nested bodies, wedges and
    /// collapsed constraints.
    pub fn depth2_complex(&mut self, frame_points: usize, threads: usize, max_samples: usize) -> SegmentComplex {
        let frame = self.metric(frame_points).with_metric_flag(false);
        let mut cx = SegmentComplex::new(frame);
        for _ in 0..threads {
            let (x, y) = self.distinct_pair(frame_points);
            let l = cx.frame.d(x, y).clone();
            let t = match self.below(5) {
                0 | 1 => {
                    let samples = self.range(0, max_samples);
                    Thread::edge(x, y, self.gapped_edge(&l, samples))
                }
                2 | 3 => Thread::nested(x, y, self.inner_complex(&l, max_samples), (0, 1)),
                _ => Thread::wedge(x, self.inner_complex(&l, max_samples), 0),
            };
            cx.threads.push(t);
        }
        if self.chance(0.3) {
            let (x, y) = self.distinct_pair(frame_points);
            let a = cx.frame.d(x, y) * self.rational(1, 4, 4);
            cx.collapsed.push(BendingTriple::new(x, y, a));
        }
        cx
    }

    /// Random surjection of `0..n` onto `0..k` (`k ≤ n`).
    pub fn surjection(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..n).map(|i| if i < k { i } else { self.below(k) }).collect();
        self.shuffle(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::flatten;

    #[test]
    fn deterministic_and_valid() {
        let a = Gen::new(7).metric(6);
        let b = Gen::new(7).metric(6);
        assert_eq!(a, b);
        assert!(a.validate().is_valid());
        let p = Gen::new(3).pseudometric(6);
        assert!(p.validate().is_valid());
    }

    #[test]
    fn complexes_flatten() {
        for seed in 0..20 {
            let mut g = Gen::new(seed);
            let cx = g.depth2_complex(4, 3, 2);
            let f = flatten(&cx).unwrap();
            assert!(f.space.validate().is_valid(), "seed {seed}");
        }
    }
}
