//! Finite pseudometric spaces over exact rationals.

use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::distortion::DistortionPL;
use crate::rational::Q;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("distance matrix has {rows} rows for {points} points")]
    RowCount { rows: usize, points: usize },
    #[error("row {row} has {len} entries, expected {points}")]
    RowLength { row: usize, len: usize, points: usize },
    #[error("the space has no points")]
    Empty,
    #[error("invalid pseudometric: {0}")]
    Invalid(ValidationReport),
    #[error("point index {0} out of range")]
    Index(usize),
}

/// Dense square matrix of rationals, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DistMatrix {
    n: usize,
    data: Vec<Q>,
}

impl DistMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Q::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Q) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self, MetricError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::RowLength {
                    row,
                    len: r.len(),
                    points: n,
                });
            }
            data.extend(r);
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.n + j] = v;
    }

    /// Writes `v` at `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: Q) {
        self.data[j * self.n + i] = v.clone();
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<Q>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_entry(&self) -> Q {
        self.data.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    /// Submatrix on `idx`, in that order.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]).clone())
    }

    pub fn le_entrywise(&self, other: &Self) -> bool {
        self.n == other.n && self.data.iter().zip(&other.data).all(|(a, b)| a <= b)
    }

    /// Min-plus closure in place (Floyd–Warshall).
    pub fn close(&mut self) {
        let n = self.n;
        for k in 0..n {
            for i in 0..n {
                let dik = self.data[i * n + k].clone();
                for j in 0..n {
                    let via = &dik + &self.data[k * n + j];
                    if via < self.data[i * n + j] {
                        self.data[i * n + j] = via;
                    }
                }
            }
        }
    }

    /// First entry where the matrices differ.
    pub fn first_difference(&self, other: &Self) -> Option<(usize, usize)> {
        if self.n != other.n {
            return Some((0, 0));
        }
        self.data
            .iter()
            .zip(&other.data)
            .position(|(a, b)| a != b)
            .map(|k| (k / self.n, k % self.n))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NonzeroDiagonal { i: usize },
    Negative { i: usize, j: usize },
    Asymmetric { i: usize, j: usize },
    Triangle { i: usize, j: usize, k: usize },
    Positivity { i: usize, j: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal { i } => write!(f, "d({i},{i}) != 0"),
            Violation::Negative { i, j } => write!(f, "d({i},{j}) < 0"),
            Violation::Asymmetric { i, j } => write!(f, "d({i},{j}) != d({j},{i})"),
            Violation::Triangle { i, j, k } => {
                write!(f, "d({i},{k}) > d({i},{j}) + d({j},{k})")
            }
            Violation::Positivity { i, j } => write!(f, "d({i},{j}) = 0 in a metric"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let shown: Vec<String> = self.violations.iter().take(5).map(|v| v.to_string()).collect();
        write!(f, "{}", shown.join("; "))?;
        if self.violations.len() > 5 {
            write!(f, "; ... ({} total)", self.violations.len())?;
        }
        Ok(())
    }
}

/// Axiom check on a raw matrix. Triangle witnesses are reported as `(i, j, k)`
/// with `d(i,k) > d(i,j) + d(j,k)`, each unordered outer pair once.
pub fn check_axioms(d: &DistMatrix, metric: bool) -> ValidationReport {
    let n = d.len();
    let mut violations = Vec::new();
    for i in 0..n {
        if !d.get(i, i).is_zero() {
            violations.push(Violation::NonzeroDiagonal { i });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if d.get(i, j).is_negative() {
                violations.push(Violation::Negative { i, j });
            }
            if i < j {
                if d.get(i, j) != d.get(j, i) {
                    violations.push(Violation::Asymmetric { i, j });
                }
                if metric && d.get(i, j).is_zero() {
                    violations.push(Violation::Positivity { i, j });
                }
            }
        }
    }
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let dik = d.get(i, k);
            for j in 0..n {
                if j != i && j != k && dik > &(d.get(i, j) + d.get(j, k)) {
                    violations.push(Violation::Triangle { i, j, k });
                }
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudometricSpace {
    labels: Vec<String>,
    dist: DistMatrix,
    metric: bool,
}

impl PseudometricSpace {
    /// Structural checks only; call [`validate`](Self::validate) for the axioms.
    pub fn new(labels: Vec<String>, dist: DistMatrix) -> Result<Self, MetricError> {
        if dist.len() != labels.len() {
            return Err(MetricError::RowCount {
                rows: dist.len(),
                points: labels.len(),
            });
        }
        Ok(Self {
            labels,
            dist,
            metric: false,
        })
    }

    /// Builds and validates in one go.
    pub fn checked(labels: Vec<String>, dist: DistMatrix, metric: bool) -> Result<Self, MetricError> {
        let s = Self::new(labels, dist)?.with_metric_flag(metric);
        let report = s.validate();
        if report.is_valid() {
            Ok(s)
        } else {
            Err(MetricError::Invalid(report))
        }
    }

    /// Numeric labels `"0"`, `"1"`, ...
    pub fn from_matrix(dist: DistMatrix) -> Self {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self {
            labels,
            dist,
            metric: false,
        }
    }

    pub fn with_metric_flag(mut self, metric: bool) -> Self {
        self.metric = metric;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self) -> &DistMatrix {
        &self.dist
    }

    pub fn into_parts(self) -> (Vec<String>, DistMatrix) {
        (self.labels, self.dist)
    }

    pub fn is_metric_flagged(&self) -> bool {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> &Q {
        self.dist.get(i, j)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> ValidationReport {
        check_axioms(&self.dist, self.metric)
    }

    pub fn diameter(&self) -> Result<Q, MetricError> {
        if self.is_empty() {
            return Err(MetricError::Empty);
        }
        Ok(self.dist.max_entry())
    }

    /// Entrywise `ω ∘ d`.
    pub fn apply_distortion(&self, w: &DistortionPL) -> Self {
        Self {
            labels: self.labels.clone(),
            dist: DistMatrix::from_fn(self.len(), |i, j| w.at(self.d(i, j))),
            metric: self.metric,
        }
    }

    pub fn zero_classes(&self) -> ZeroClassPartition {
        let n = self.len();
        let mut block_of = vec![usize::MAX; n];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if block_of[i] != usize::MAX {
                continue;
            }
            let b = blocks.len();
            let members: Vec<usize> = (i..n)
                .filter(|&j| block_of[j] == usize::MAX && self.d(i, j).is_zero())
                .collect();
            for &j in &members {
                block_of[j] = b;
            }
            blocks.push(members);
        }
        ZeroClassPartition { blocks, block_of }
    }

    /// Metric quotient by zero-distance classes. Blocks are ordered by their
    /// smallest member and labelled by it.
    pub fn quotient_by_zero(&self) -> (Self, ZeroClassPartition) {
        let part = self.zero_classes();
        let reps: Vec<usize> = part.blocks.iter().map(|b| b[0]).collect();
        let q = Self {
            labels: reps.iter().map(|&r| self.labels[r].clone()).collect(),
            dist: self.dist.restrict(&reps),
            metric: true,
        };
        (q, part)
    }

    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self {
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            dist: self.dist.restrict(idx),
            metric: self.metric,
        }
    }
}

/// Partition of point indices into zero-distance classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroClassPartition {
    pub blocks: Vec<Vec<usize>>,
    pub block_of: Vec<usize>,
}

impl ZeroClassPartition {
    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
            block_of: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of[i] == self.block_of[j]
    }

    /// Rebuilds from a block id per point, renumbering blocks by first member.
    pub fn from_labels(ids: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = Vec::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let b = *remap.entry(*id).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
            block_of.push(b);
        }
        Self { blocks, block_of }
    }
}

pub fn validate(space: &PseudometricSpace) -> ValidationReport {
    space.validate()
}

pub fn apply_distortion(space: &PseudometricSpace, w: &DistortionPL) -> PseudometricSpace {
    space.apply_distortion(w)
}

pub fn quotient_by_zero(space: &PseudometricSpace) -> (PseudometricSpace, ZeroClassPartition) {
    space.quotient_by_zero()
}

pub fn diameter(space: &PseudometricSpace) -> Result<Q, MetricError> {
    space.diameter()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn space(rows: &[&[Q]]) -> PseudometricSpace {
        let m = DistMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        PseudometricSpace::from_matrix(m)
    }

    fn uniform(n: usize, v: Q) -> PseudometricSpace {
        PseudometricSpace::from_matrix(DistMatrix::from_fn(n, |i, j| {
            if i == j {
                Q::zero()
            } else {
                v.clone()
            }
        }))
    }

    #[test]
    fn uniform_is_valid_metric() {
        let s = uniform(3, qi(2)).with_metric_flag(true);
        assert!(s.validate().is_valid());
        assert_eq!(s.diameter().unwrap(), qi(2));
    }

    #[test]
    fn triangle_witness() {
        let s = space(&[
            &[qi(0), qi(1), qi(3)],
            &[qi(1), qi(0), qi(1)],
            &[qi(3), qi(1), qi(0)],
        ]);
        let r = s.validate();
        assert!(r.violations.contains(&Violation::Triangle { i: 0, j: 1, k: 2 }));
        assert!(r.violations.contains(&Violation::Triangle { i: 2, j: 1, k: 0 }));
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn zero_pair_metric_flag() {
        let s = space(&[
            &[qi(0), qi(0), qi(1)],
            &[qi(0), qi(0), qi(1)],
            &[qi(1), qi(1), qi(0)],
        ]);
        assert!(s.validate().is_valid());
        let m = s.clone().with_metric_flag(true);
        assert_eq!(m.validate().violations, vec![Violation::Positivity { i: 0, j: 1 }]);
        let (qs, part) = s.quotient_by_zero();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs.d(0, 1), &qi(1));
        assert_eq!(part.blocks, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn total_collapse_and_diameter_edge_cases() {
        let s = uniform(4, qi(0));
        let (qs, _) = s.quotient_by_zero();
        assert_eq!(qs.len(), 1);
        assert_eq!(uniform(1, qi(5)).diameter().unwrap(), qi(0));
        let empty = PseudometricSpace::from_matrix(DistMatrix::zeros(0));
        assert_eq!(empty.diameter(), Err(MetricError::Empty));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            DistMatrix::from_rows(vec![vec![qi(0), qi(1)], vec![qi(1)]]),
            Err(MetricError::RowLength { .. })
        ));
        assert!(matches!(
            PseudometricSpace::new(vec!["a".into()], DistMatrix::zeros(2)),
            Err(MetricError::RowCount { .. })
        ));
    }

    #[test]
    fn distortion_examples() {
        let w = DistortionPL::new(
            vec![(qi(0), qi(0)), (q(1, 2), q(3, 2)), (qi(2), qi(2))],
            qi(3),
        )
        .unwrap();
        let s = uniform(3, qi(2));
        assert_eq!(s.apply_distortion(&w), s);
        let pair = uniform(2, q(1, 2));
        assert_eq!(pair.apply_distortion(&w).d(0, 1), &q(3, 2));
        assert_eq!(s.apply_distortion(&DistortionPL::identity()), s);
    }

    #[test]
    fn closure_fixes_triangle() {
        let mut m = DistMatrix::from_rows(vec![
            vec![qi(0), qi(1), qi(3)],
            vec![qi(1), qi(0), qi(1)],
            vec![qi(3), qi(1), qi(0)],
        ])
        .unwrap();
        m.close();
        assert_eq!(m.get(0, 2), &qi(2));
        assert!(check_axioms(&m, true).is_valid());
    }
}
