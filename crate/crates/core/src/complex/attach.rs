//! Attachment of threads to a frame along one- or two-point anchors.

use thiserror::Error;

use crate::metric::{DistMatrix, PseudometricSpace};
use crate::rational::{min_q, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttachError {
    #[error("thread {thread}: anchors and boundary must both have one or two points")]
    AnchorShape { thread: usize },
    #[error("thread {thread}: index out of range")]
    Index { thread: usize },
    #[error("thread {thread}: body boundary distance {body} differs from frame anchor distance {frame}")]
    Mismatch {
        thread: usize,
        frame: String,
        body: String,
    },
}

/// A body to glue in: `body[boundary[i]]` is identified with `frame[anchors[i]]`.
#[derive(Clone, Debug)]
pub struct AttachThread {
    pub anchors: Vec<usize>,
    pub body: PseudometricSpace,
    pub boundary: Vec<usize>,
}

/// Result of an attachment; `maps[t][p]` is the global index of body point `p`.
#[derive(Clone, Debug)]
pub struct Attached {
    pub space: PseudometricSpace,
    pub maps: Vec<Vec<usize>>,
}

pub(crate) struct BodyRef<'a> {
    pub anchors: &'a [usize],
    pub body: &'a DistMatrix,
    pub boundary: &'a [usize],
}

fn check_body(frame: &DistMatrix, t: usize, b: &BodyRef<'_>) -> Result<(), AttachError> {
    let k = b.anchors.len();
    if k == 0 || k > 2 || b.boundary.len() != k {
        return Err(AttachError::AnchorShape { thread: t });
    }
    if b.anchors.iter().any(|&a| a >= frame.len()) || b.boundary.iter().any(|&p| p >= b.body.len()) {
        return Err(AttachError::Index { thread: t });
    }
    if k == 2 {
        let f = frame.get(b.anchors[0], b.anchors[1]);
        let s = b.body.get(b.boundary[0], b.boundary[1]);
        if f != s {
            return Err(AttachError::Mismatch {
                thread: t,
                frame: f.to_string(),
                body: s.to_string(),
            });
        }
    }
    Ok(())
}

/// Index maps for the glued space: frame first, then each body's free points
/// in body order.
pub(crate) fn layout(frame_len: usize, bodies: &[BodyRef<'_>]) -> (usize, Vec<Vec<usize>>) {
    let mut next = frame_len;
    let mut maps = Vec::with_capacity(bodies.len());
    for b in bodies {
        let mut map = vec![usize::MAX; b.body.len()];
        for (z, &p) in b.boundary.iter().enumerate() {
            map[p] = b.anchors[z];
        }
        for slot in map.iter_mut() {
            if *slot == usize::MAX {
                *slot = next;
                next += 1;
            }
        }
        maps.push(map);
    }
    (next, maps)
}

pub(crate) fn attach_matrix(frame: &DistMatrix, bodies: &[BodyRef<'_>]) -> Result<(DistMatrix, Vec<Vec<usize>>), AttachError> {
    for (t, b) in bodies.iter().enumerate() {
        check_body(frame, t, b)?;
    }
    let nf = frame.len();
    let (n, maps) = layout(nf, bodies);

    // owner[g] = (thread, local index) for free body points
    let mut owner = vec![(usize::MAX, 0usize); n];
    for (t, map) in maps.iter().enumerate() {
        for (p, &g) in map.iter().enumerate() {
            if g >= nf {
                owner[g] = (t, p);
            }
        }
    }

    let mut out = DistMatrix::zeros(n);
    for i in 0..nf {
        for j in 0..nf {
            out.set(i, j, frame.get(i, j).clone());
        }
    }

    // point-to-frame distances for every free body point
    let mut to_frame: Vec<Vec<Q>> = vec![Vec::new(); n];
    for g in nf..n {
        let (t, p) = owner[g];
        let b = &bodies[t];
        to_frame[g] = (0..nf)
            .map(|qf| {
                b.boundary
                    .iter()
                    .zip(b.anchors)
                    .map(|(&bz, &az)| b.body.get(p, bz) + frame.get(az, qf))
                    .reduce(|a, c| min_q(&a, &c))
                    .expect("nonempty anchor")
            })
            .collect();
        for qf in 0..nf {
            out.set_sym(g, qf, to_frame[g][qf].clone());
        }
    }

    for g in nf..n {
        let (t, p) = owner[g];
        for h in g + 1..n {
            let (s, r) = owner[h];
            let v = if s == t {
                bodies[t].body.get(p, r).clone()
            } else {
                // route through an anchor of the second body
                let b = &bodies[s];
                b.boundary
                    .iter()
                    .zip(b.anchors)
                    .map(|(&bw, &aw)| &to_frame[g][aw] + b.body.get(bw, r))
                    .reduce(|a, c| min_q(&a, &c))
                    .expect("nonempty anchor")
            };
            out.set_sym(g, h, v);
        }
    }
    Ok((out, maps))
}

/// Largest pseudometric on the glued set agreeing with the frame and with
/// every body.
pub fn attach(frame: &PseudometricSpace, threads: &[AttachThread]) -> Result<Attached, AttachError> {
    let refs: Vec<BodyRef<'_>> = threads
        .iter()
        .map(|t| BodyRef {
            anchors: &t.anchors,
            body: t.body.dist(),
            boundary: &t.boundary,
        })
        .collect();
    let (m, maps) = attach_matrix(frame.dist(), &refs)?;
    let mut labels = frame.labels().to_vec();
    labels.resize(m.len(), String::new());
    for (t, map) in maps.iter().enumerate() {
        for (p, &g) in map.iter().enumerate() {
            if g >= frame.len() {
                labels[g] = format!("t{t}/{}", threads[t].body.labels()[p]);
            }
        }
    }
    let space = PseudometricSpace::new(labels, m).expect("layout is consistent");
    Ok(Attached { space, maps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn line(points: &[Q]) -> PseudometricSpace {
        PseudometricSpace::from_matrix(DistMatrix::from_fn(points.len(), |i, j| {
            let d = &points[i] - &points[j];
            if d < Q::from_integer(0.into()) {
                -d
            } else {
                d
            }
        }))
    }

    #[test]
    fn no_threads_is_frame() {
        let f = line(&[qi(0), qi(2)]);
        let a = attach(&f, &[]).unwrap();
        assert_eq!(a.space.dist(), f.dist());
    }

    #[test]
    fn gapped_edge_sample_to_far_anchor() {
        // frame {x, y} at 3/2; body 0, 1/4, 1/2 | 1, 5/4, 3/2
        let f = line(&[qi(0), q(3, 2)]);
        let body = line(&[qi(0), q(1, 4), q(1, 2), qi(1), q(5, 4), q(3, 2)]);
        let a = attach(
            &f,
            &[AttachThread {
                anchors: vec![0, 1],
                body,
                boundary: vec![0, 5],
            }],
        )
        .unwrap();
        let s = a.maps[0][1];
        assert_eq!(a.space.d(s, 1), &q(5, 4));
        assert_eq!(a.space.d(s, 0), &q(1, 4));
    }

    #[test]
    fn mismatch_is_rejected() {
        let f = line(&[qi(0), qi(1)]);
        let body = line(&[qi(0), qi(2)]);
        let r = attach(
            &f,
            &[AttachThread {
                anchors: vec![0, 1],
                body,
                boundary: vec![0, 1],
            }],
        );
        assert!(matches!(r, Err(AttachError::Mismatch { .. })));
    }

    #[test]
    fn wedge_at_one_point() {
        let f = line(&[qi(0), qi(1)]);
        let body = line(&[qi(0), qi(3)]);
        let a = attach(
            &f,
            &[AttachThread {
                anchors: vec![1],
                body,
                boundary: vec![0],
            }],
        )
        .unwrap();
        assert_eq!(a.space.len(), 3);
        assert_eq!(a.space.d(0, 2), &qi(4));
    }
}
