//! Bending: the largest pseudometric below a given one with pairwise caps.

use num_traits::Signed;
use thiserror::Error;

use crate::metric::{DistMatrix, PseudometricSpace};
use crate::rational::{min_q, Q};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BendingTriple {
    pub x: usize,
    pub y: usize,
    pub a: Q,
}

impl BendingTriple {
    pub fn new(x: usize, y: usize, a: Q) -> Self {
        Self { x, y, a }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BendError {
    #[error("bending triple ({x}, {y}, {a}): target exceeds current distance {current}")]
    Exceeds {
        x: usize,
        y: usize,
        a: String,
        current: String,
    },
    #[error("bending triple index {0} out of range")]
    Index(usize),
    #[error("bending triple joins point {0} to itself")]
    Diagonal(usize),
    #[error("bending target for ({0}, {1}) is negative")]
    Negative(usize, usize),
}

fn check_shape(n: usize, t: &BendingTriple) -> Result<(), BendError> {
    for i in [t.x, t.y] {
        if i >= n {
            return Err(BendError::Index(i));
        }
    }
    if t.x == t.y {
        return Err(BendError::Diagonal(t.x));
    }
    if t.a.is_negative() {
        return Err(BendError::Negative(t.x, t.y));
    }
    Ok(())
}

fn check(d: &DistMatrix, t: &BendingTriple) -> Result<(), BendError> {
    check_shape(d.len(), t)?;
    let current = d.get(t.x, t.y);
    if &t.a > current {
        return Err(BendError::Exceeds {
            x: t.x,
            y: t.y,
            a: t.a.to_string(),
            current: current.to_string(),
        });
    }
    Ok(())
}

/// Shortcut closure: every cap becomes an edge, then all-pairs shortest paths.
/// Caps above the current distance are harmless here.
pub fn bend_matrix(d: &DistMatrix, triples: &[BendingTriple]) -> DistMatrix {
    let mut m = d.clone();
    for t in triples {
        if &t.a < m.get(t.x, t.y) {
            m.set_sym(t.x, t.y, t.a.clone());
        }
    }
    if !triples.is_empty() {
        m.close();
    }
    m
}

/// Closed form for one pair on a pseudometric matrix.
pub fn bend_single_matrix(d: &DistMatrix, x: usize, y: usize, a: &Q) -> DistMatrix {
    let a = min_q(a, d.get(x, y));
    if &a == d.get(x, y) {
        return d.clone();
    }
    let n = d.len();
    let mut out = d.clone();
    for p in 0..n {
        for q in p + 1..n {
            let v1 = d.get(p, x) + d.get(y, q) + &a;
            let v2 = d.get(p, y) + d.get(q, x) + &a;
            let v = min_q(&min_q(&v1, &v2), d.get(p, q));
            if &v != d.get(p, q) {
                out.set_sym(p, q, v);
            }
        }
    }
    out
}

/// Applies caps one at a time with the closed form; each cap is lowered to the
/// current distance when that is already smaller.
pub fn bend_sequential_matrix(d: &DistMatrix, triples: &[BendingTriple]) -> DistMatrix {
    let mut m = d.clone();
    for t in triples {
        m = bend_single_matrix(&m, t.x, t.y, &t.a);
    }
    m
}

fn wrap(space: &PseudometricSpace, m: DistMatrix) -> PseudometricSpace {
    PseudometricSpace::new(space.labels().to_vec(), m).expect("same point count")
}

/// Batch bending by shortest paths with one shortcut edge per triple.
pub fn bend(space: &PseudometricSpace, triples: &[BendingTriple]) -> Result<PseudometricSpace, BendError> {
    for t in triples {
        check(space.dist(), t)?;
    }
    Ok(wrap(space, bend_matrix(space.dist(), triples)))
}

/// Bending by one triple through the explicit three-term minimum.
pub fn bend_single_formula(space: &PseudometricSpace, t: &BendingTriple) -> Result<PseudometricSpace, BendError> {
    check(space.dist(), t)?;
    Ok(wrap(space, bend_single_matrix(space.dist(), t.x, t.y, &t.a)))
}

pub fn bend_sequential(space: &PseudometricSpace, triples: &[BendingTriple]) -> Result<PseudometricSpace, BendError> {
    for t in triples {
        check_shape(space.len(), t)?;
    }
    Ok(wrap(space, bend_sequential_matrix(space.dist(), triples)))
}
