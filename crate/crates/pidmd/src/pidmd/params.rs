//! Parameter feature maps: an invertible per-coordinate affine scaling
//! followed by a list of registered scalar primitives. The scaled range
//! defaults to [0, 0.01], which keeps the lifted blocks small relative to
//! the state block and is stored with the model so raw parameters remain
//! the only external interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default range the training parameters are scaled onto.
pub const DEFAULT_SCALED_RANGE: (f64, f64) = (0.0, 0.01);

/// Registered scalar feature primitives. Each one reads a single coordinate
/// of the scaled parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamFn {
    /// `theta[index]`
    Coord { index: usize },
    /// `scale * theta[index] + offset`
    Affine { index: usize, scale: f64, offset: f64 },
    /// `sum_k coeffs[k] * theta[index]^k`
    Polynomial { index: usize, coeffs: Vec<f64> },
    /// `amplitude * sin(angular_freq * theta[index] + phase)`
    Sinusoid {
        index: usize,
        amplitude: f64,
        angular_freq: f64,
        phase: f64,
    },
}

impl ParamFn {
    fn index(&self) -> usize {
        match self {
            ParamFn::Coord { index }
            | ParamFn::Affine { index, .. }
            | ParamFn::Polynomial { index, .. }
            | ParamFn::Sinusoid { index, .. } => *index,
        }
    }

    fn constants_finite(&self) -> bool {
        match self {
            ParamFn::Coord { .. } => true,
            ParamFn::Affine { scale, offset, .. } => scale.is_finite() && offset.is_finite(),
            ParamFn::Polynomial { coeffs, .. } => coeffs.iter().all(|c| c.is_finite()),
            ParamFn::Sinusoid {
                amplitude,
                angular_freq,
                phase,
                ..
            } => amplitude.is_finite() && angular_freq.is_finite() && phase.is_finite(),
        }
    }

    fn eval(&self, scaled: &[f64]) -> f64 {
        match self {
            ParamFn::Coord { index } => scaled[*index],
            ParamFn::Affine { index, scale, offset } => scale * scaled[*index] + offset,
            ParamFn::Polynomial { index, coeffs } => {
                let x = scaled[*index];
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            ParamFn::Sinusoid {
                index,
                amplitude,
                angular_freq,
                phase,
            } => amplitude * (angular_freq * scaled[*index] + phase).sin(),
        }
    }
}

/// Invertible scalar map `x -> scale * x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordScaling {
    pub scale: f64,
    pub offset: f64,
}

impl CoordScaling {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }
}

/// Feature map `theta -> h(theta)`: scale each coordinate, then evaluate the
/// registered primitives. The number of features `m` may be zero, in which
/// case the lifted regression degenerates to a plain one-step regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamMap {
    /// Parameter dimension `p`.
    pub dim: usize,
    /// Feature primitives; `m = funcs.len()`.
    pub funcs: Vec<ParamFn>,
    /// Per-coordinate scaling applied before the primitives.
    pub scaling: Vec<CoordScaling>,
}

impl ParamMap {
    /// Map with identity scaling.
    pub fn new(dim: usize, funcs: Vec<ParamFn>) -> Result<Self> {
        Self::with_scaling(dim, funcs, vec![CoordScaling::identity(); dim])
    }

    pub fn with_scaling(
        dim: usize,
        funcs: Vec<ParamFn>,
        scaling: Vec<CoordScaling>,
    ) -> Result<Self> {
        if scaling.len() != dim {
            return Err(Error::InvalidInput(format!(
                "{} scaling entries for a {dim}-dim parameter",
                scaling.len()
            )));
        }
        for s in &scaling {
            if !(s.scale.is_finite() && s.offset.is_finite() && s.scale != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "scaling {s:?} is not an invertible affine map"
                )));
            }
        }
        for f in &funcs {
            if f.index() >= dim {
                return Err(Error::InvalidInput(format!(
                    "feature reads coordinate {} of a {dim}-dim parameter",
                    f.index()
                )));
            }
            if !f.constants_finite() {
                return Err(Error::InvalidInput(format!("feature {f:?} has non-finite constants")));
            }
        }
        Ok(Self { dim, funcs, scaling })
    }

    /// Number of features `m`.
    pub fn feature_count(&self) -> usize {
        self.funcs.len()
    }

    /// Fit the per-coordinate scaling so the given parameters span
    /// `[lo, hi]` in scaled space. A coordinate that is constant across the
    /// set maps to `lo`.
    pub fn fit_scaling(&mut self, thetas: &[Vec<f64>], lo: f64, hi: f64) -> Result<()> {
        if thetas.is_empty() {
            return Err(Error::DegenerateInput("no parameters to fit scaling to".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("scaled range [{lo}, {hi}]")));
        }
        for th in thetas {
            self.check_theta(th)?;
        }
        for c in 0..self.dim {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for th in thetas {
                min = min.min(th[c]);
                max = max.max(th[c]);
            }
            self.scaling[c] = if max > min {
                let scale = (hi - lo) / (max - min);
                CoordScaling {
                    scale,
                    offset: lo - min * scale,
                }
            } else {
                CoordScaling {
                    scale: 1.0,
                    offset: lo - min,
                }
            };
        }
        Ok(())
    }

    /// [`ParamMap::fit_scaling`] onto [`DEFAULT_SCALED_RANGE`].
    pub fn fit_scaling_default(&mut self, thetas: &[Vec<f64>]) -> Result<()> {
        self.fit_scaling(thetas, DEFAULT_SCALED_RANGE.0, DEFAULT_SCALED_RANGE.1)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "parameter has {} coordinates, map expects {}",
                theta.len(),
                self.dim
            )));
        }
        crate::linalg::ensure_finite_slice(theta, "parameter")
    }

    /// Scaled coordinates of a raw parameter.
    pub fn scale(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(theta
            .iter()
            .zip(&self.scaling)
            .map(|(&x, s)| s.apply(x))
            .collect())
    }

    /// Feature vector `h(theta)` of a raw parameter.
    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let scaled = self.scale(theta)?;
        let h: Vec<f64> = self.funcs.iter().map(|f| f.eval(&scaled)).collect();
        if let Some(i) = h.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "feature {i} is not finite at theta {theta:?}"
            )));
        }
        Ok(h)
    }
}
