//! Concave piecewise-linear distortions `ω` with `ω(0) = 0`.
//!
//! A local distortion has infinite slope at the origin, which no finite
//! object can carry. Here the first slope is only required to be at least a
//! declared steepness `s0`; everything downstream needs `ω(t) ≥ t` on the
//! distances actually realised, and the builders check that per pair.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{pow2, Q};

/// Default declared steepness of the first segment (2^16).
pub fn default_steepness() -> Q {
    pow2(16)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistortionError {
    #[error("a distortion needs at least two breakpoints")]
    TooFewBreakpoints,
    #[error("first breakpoint must be (0, 0)")]
    NotAnchoredAtZero,
    #[error("breakpoint abscissas must be strictly increasing (at index {0})")]
    NotIncreasing(usize),
    #[error("slope of segment {0} is not strictly positive")]
    NonPositiveSlope(usize),
    #[error("slope of segment {0} exceeds the previous one (not concave)")]
    NotConcave(usize),
    #[error("first slope {first} is below the declared steepness {s0}")]
    TooShallow { first: String, s0: String },
    #[error("declared steepness must be positive")]
    BadSteepness,
    #[error("cannot evaluate a distortion at a negative argument")]
    NegativeArgument,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistortionPL {
    breakpoints: Vec<(Q, Q)>,
    s0: Q,
}

impl DistortionPL {
    pub fn new(breakpoints: Vec<(Q, Q)>, s0: Q) -> Result<Self, DistortionError> {
        if breakpoints.len() < 2 {
            return Err(DistortionError::TooFewBreakpoints);
        }
        if !breakpoints[0].0.is_zero() || !breakpoints[0].1.is_zero() {
            return Err(DistortionError::NotAnchoredAtZero);
        }
        if !s0.is_positive() {
            return Err(DistortionError::BadSteepness);
        }
        let mut prev: Option<Q> = None;
        for i in 0..breakpoints.len() - 1 {
            let (t0, v0) = &breakpoints[i];
            let (t1, v1) = &breakpoints[i + 1];
            if t1 <= t0 {
                return Err(DistortionError::NotIncreasing(i + 1));
            }
            let slope = (v1 - v0) / (t1 - t0);
            if !slope.is_positive() {
                return Err(DistortionError::NonPositiveSlope(i));
            }
            if let Some(p) = &prev {
                if &slope > p {
                    return Err(DistortionError::NotConcave(i));
                }
            } else if slope < s0 {
                return Err(DistortionError::TooShallow {
                    first: slope.to_string(),
                    s0: s0.to_string(),
                });
            }
            prev = Some(slope);
        }
        Ok(Self { breakpoints, s0 })
    }

    pub fn identity() -> Self {
        Self {
            breakpoints: vec![(Q::zero(), Q::zero()), (Q::one(), Q::one())],
            s0: Q::one(),
        }
    }

    /// Three-piece distortion fixing `diam`: slope `s0` up to `diam/(2 s0)`,
    /// where it reaches `diam/2`, then linear up to `(diam, diam)`.
    pub fn steep(diam: &Q, s0: &Q) -> Result<Self, DistortionError> {
        let t1 = diam / (Q::from_integer(2.into()) * s0);
        let v1 = diam / Q::from_integer(2.into());
        Self::new(
            vec![(Q::zero(), Q::zero()), (t1, v1), (diam.clone(), diam.clone())],
            s0.clone(),
        )
    }

    pub fn breakpoints(&self) -> &[(Q, Q)] {
        &self.breakpoints
    }

    pub fn steepness(&self) -> &Q {
        &self.s0
    }

    /// Whether the declared steepness stands in for a local distortion.
    pub fn is_local_surrogate(&self) -> bool {
        self.s0 > Q::one()
    }

    pub fn eval(&self, t: &Q) -> Result<Q, DistortionError> {
        if t.is_negative() {
            return Err(DistortionError::NegativeArgument);
        }
        let bp = &self.breakpoints;
        let seg = bp
            .windows(2)
            .position(|w| t <= &w[1].0)
            .unwrap_or(bp.len() - 2);
        let (t0, v0) = &bp[seg];
        let (t1, v1) = &bp[seg + 1];
        let slope = (v1 - v0) / (t1 - t0);
        Ok(v0 + slope * (t - t0))
    }

    /// Evaluation on arguments known to be nonnegative.
    pub(crate) fn at(&self, t: &Q) -> Q {
        self.eval(t).expect("distance arguments are nonnegative")
    }

    /// `ω(t) ≥ t` on all of `[0, t]`; concavity makes the endpoint sufficient.
    pub fn dominates_identity_up_to(&self, t: &Q) -> bool {
        &self.at(t) >= t
    }

    /// `t ↦ f · ω(t / f)`: same shape on a space scaled by `f`.
    pub fn rescaled(&self, factor: &Q) -> Self {
        Self {
            breakpoints: self
                .breakpoints
                .iter()
                .map(|(t, v)| (t * factor, v * factor))
                .collect(),
            s0: self.s0.clone(),
        }
    }
}
