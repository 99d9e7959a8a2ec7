//! Baseline parametric predictors: a single stacked DMD with mode
//! interpolation, and per-parameter reduced operators interpolated in a
//! shared basis. Both share the same knot-interpolation machinery.

use faer::complex_native::c64;
use serde::{Deserialize, Serialize};

use crate::dmd::{build_snapshot_pairs, discrete_to_continuous, SnapshotSet};
use crate::error::{Error, Result, Warning};
use crate::linalg::{
    self, hcat, to_complex, ComplexMat, Prediction, RealMat, EIG_RESIDUAL_GATE,
};
use crate::pidmd::ParamMap;

/// How values attached to training knots are carried to a query parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpScheme {
    /// One-dimensional parameters: piecewise linear over the sorted knots,
    /// linear continuation beyond the ends.
    PiecewiseLinear,
    /// Multi-dimensional parameters: least squares in `[1; h(theta)]`
    /// features (exactly interpolating when the knot count matches the
    /// feature count).
    FeatureLeastSquares,
}

/// Growth allowance for interpolated operators: eigenvalues above
/// `1 + GROWTH_MARGIN / steps` in magnitude are reported as divergence.
pub const GROWTH_MARGIN: f64 = 10.0;

/// Trajectory-norm overflow factor that flags a prediction as diverged.
pub const OVERFLOW_FACTOR: f64 = 1e6;

/// Per-knot blending weights for a query parameter, plus an extrapolation
/// flag when it lies outside the training range (1-D) or bounding box.
fn knot_weights(
    scheme: InterpScheme,
    map: &ParamMap,
    knots: &[Vec<f64>],
    theta: &[f64],
) -> Result<(Vec<f64>, bool)> {
    if knots.is_empty() {
        return Err(Error::DegenerateInput("no knots to interpolate".into()));
    }
    if theta.len() != knots[0].len() {
        return Err(Error::InvalidInput(format!(
            "query parameter has {} coordinates, knots have {}",
            theta.len(),
            knots[0].len()
        )));
    }
    linalg::ensure_finite_slice(theta, "query parameter")?;

    let mut outside = false;
    for c in 0..theta.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in knots {
            lo = lo.min(k[c]);
            hi = hi.max(k[c]);
        }
        if theta[c] < lo || theta[c] > hi {
            outside = true;
        }
    }

    let mut weights = vec![0.0; knots.len()];
    match scheme {
        InterpScheme::PiecewiseLinear => {
            let x = theta[0];
            // Exact knot hit first, so knot consistency is exact.
            if let Some(i) = knots.iter().position(|k| k[0] == x) {
                weights[i] = 1.0;
                return Ok((weights, outside));
            }
            let mut order: Vec<usize> = (0..knots.len()).collect();
            order.sort_by(|&a, &b| knots[a][0].total_cmp(&knots[b][0]));
            if knots.len() == 1 {
                weights[order[0]] = 1.0;
                return Ok((weights, outside));
            }
            // Segment index: clamp to the end segments for extrapolation.
            let mut seg = 0;
            while seg + 2 < order.len() && knots[order[seg + 1]][0] < x {
                seg += 1;
            }
            let (a, b) = (order[seg], order[seg + 1]);
            let (xa, xb) = (knots[a][0], knots[b][0]);
            if xb == xa {
                return Err(Error::InvalidInput(
                    "duplicate knot parameters for piecewise-linear interpolation".into(),
                ));
            }
            let w = (x - xa) / (xb - xa);
            weights[a] = 1.0 - w;
            weights[b] = w;
        }
        InterpScheme::FeatureLeastSquares => {
            let m = map.feature_count();
            let mut f = RealMat::zeros(m + 1, knots.len());
            for (l, k) in knots.iter().enumerate() {
                f[(0, l)] = 1.0;
                for (i, hi) in map.eval(k)?.iter().enumerate() {
                    f[(i + 1, l)] = *hi;
                }
            }
            let fq = {
                let mut v = vec![1.0];
                v.extend(map.eval(theta)?);
                v
            };
            // Least-squares coefficients are linear in the knot values, so
            // the blend weights are pinv(F)^T applied to the query features.
            let fp = linalg::pinv_real(f.as_ref(), None)?;
            for l in 0..knots.len() {
                let mut acc = 0.0;
                for i in 0..=m {
                    acc += fp[(l, i)] * fq[i];
                }
                weights[l] = acc;
            }
        }
    }
    Ok((weights, outside))
}

/// Scheme selected from the parameter dimension.
fn scheme_for(map: &ParamMap) -> InterpScheme {
    if map.dim == 1 {
        InterpScheme::PiecewiseLinear
    } else {
        InterpScheme::FeatureLeastSquares
    }
}

fn blend_complex(stack: &[ComplexMat], weights: &[f64]) -> ComplexMat {
    let (rows, cols) = (stack[0].nrows(), stack[0].ncols());
    let mut out = ComplexMat::zeros(rows, cols);
    for (m, &w) in stack.iter().zip(weights) {
        if w != 0.0 {
            for j in 0..cols {
                for i in 0..rows {
                    out[(i, j)] += m[(i, j)] * c64::new(w, 0.0);
                }
            }
        }
    }
    out
}

fn blend_real(stack: &[RealMat], weights: &[f64]) -> RealMat {
    let (rows, cols) = (stack[0].nrows(), stack[0].ncols());
    let mut out = RealMat::zeros(rows, cols);
    for (m, &w) in stack.iter().zip(weights) {
        if w != 0.0 {
            for j in 0..cols {
                for i in 0..rows {
                    out[(i, j)] += w * m[(i, j)];
                }
            }
        }
    }
    out
}

fn validate_training(sets: &[SnapshotSet], map: &ParamMap) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::DegenerateInput("no training trajectories".into()));
    }
    let n = sets[0].dim();
    let dt = sets[0].dt;
    for set in sets {
        if set.dim() != n || (set.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidInput(format!(
                "trajectory '{}' disagrees in dimension or time step",
                set.label
            )));
        }
        if set.theta.len() != map.dim {
            return Err(Error::InvalidInput(format!(
                "trajectory '{}' has a {}-dim parameter, map expects {}",
                set.label,
                set.theta.len(),
                map.dim
            )));
        }
    }
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if a.theta == b.theta {
                return Err(Error::InvalidInput(format!(
                    "duplicate training parameter {:?}",
                    a.theta
                )));
            }
        }
    }
    Ok(())
}

/// One global DMD over all trajectories; parameter dependence lives only in
/// per-trajectory mode sets that get interpolated at query time.
#[derive(Debug, Clone)]
pub struct StackedDmdModel {
    pub train_thetas: Vec<Vec<f64>>,
    pub param_map: ParamMap,
    /// Global POD basis of the pooled unshifted snapshots.
    pub u_r: RealMat,
    /// Global reduced operator.
    pub atilde: RealMat,
    /// Global eigenvalues / frequencies shared by every parameter.
    pub lambda: Vec<c64>,
    pub omega: Vec<c64>,
    /// Per-trajectory modes: trajectory data projected through the global
    /// basis and eigenvectors.
    pub modes: Vec<ComplexMat>,
    pub dt: f64,
    pub rank: usize,
    pub scheme: InterpScheme,
    pub warnings: Vec<Warning>,
}

/// Fit the stacked baseline: one DMD on horizontally pooled snapshots.
pub fn fit_stacked(sets: &[SnapshotSet], map: &ParamMap, rank: usize) -> Result<StackedDmdModel> {
    validate_training(sets, map)?;
    let dt = sets[0].dt;

    let pairs: Vec<(RealMat, RealMat)> = sets.iter().map(build_snapshot_pairs).collect();
    let x = hcat(&pairs.iter().map(|(x, _)| x.as_ref()).collect::<Vec<_>>())?;
    let xplus = hcat(&pairs.iter().map(|(_, xp)| xp.as_ref()).collect::<Vec<_>>())?;

    let svd = linalg::truncated_svd(x.as_ref(), rank)?;
    let r = svd.rank;
    let mut g = &xplus * &svd.v;
    for j in 0..r {
        let inv = 1.0 / svd.s[j];
        for i in 0..g.nrows() {
            g[(i, j)] *= inv;
        }
    }
    let atilde = svd.u.transpose() * &g;
    let eg = linalg::eig(atilde.as_ref())?;
    if eg.residual > EIG_RESIDUAL_GATE {
        return Err(Error::NumericalFailure(format!(
            "global reduced-operator eigendecomposition residual {:.3e}",
            eg.residual
        )));
    }
    let omega = eg
        .values
        .iter()
        .map(|&l| discrete_to_continuous(l, dt))
        .collect::<Result<Vec<_>>>()?;

    // Per-trajectory modes: Xplus_l pinv(U^T X_l) W. For a single
    // trajectory this is exactly the one-trajectory DMD mode formula.
    let mut modes = Vec::with_capacity(sets.len());
    for (xl, xpl) in &pairs {
        let z = svd.u.transpose() * xl;
        let zp = linalg::pinv_real(z.as_ref(), None)?;
        let m = xpl * &zp;
        modes.push(&to_complex(m.as_ref()) * &eg.vectors);
    }

    Ok(StackedDmdModel {
        train_thetas: sets.iter().map(|s| s.theta.clone()).collect(),
        param_map: map.clone(),
        u_r: svd.u,
        atilde,
        lambda: eg.values,
        omega,
        modes,
        dt,
        rank: r,
        scheme: scheme_for(map),
        warnings: svd.warnings,
    })
}

/// Modes at the query parameter (entrywise blend of the training mode sets).
pub fn interpolate_modes(
    model: &StackedDmdModel,
    theta: &[f64],
) -> Result<(ComplexMat, bool)> {
    let (w, outside) = knot_weights(model.scheme, &model.param_map, &model.train_thetas, theta)?;
    Ok((blend_complex(&model.modes, &w), outside))
}

/// Predict with interpolated modes and the global frequencies.
pub fn predict_stacked(
    model: &StackedDmdModel,
    theta: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<Prediction> {
    let (phi, outside) = interpolate_modes(model, theta)?;
    let mut pred = linalg::modal_predict(phi.as_ref(), &model.omega, model.dt, x0, steps)?;
    pred.extrapolated = outside;
    Ok(pred)
}

/// Per-parameter reduced operators in one shared basis, interpolated
/// entrywise at query time.
#[derive(Debug, Clone)]
pub struct ReducedOpInterpModel {
    pub train_thetas: Vec<Vec<f64>>,
    pub param_map: ParamMap,
    /// Shared POD basis of the pooled unshifted snapshots.
    pub u_r: RealMat,
    /// One reduced operator per training parameter.
    pub operators: Vec<RealMat>,
    pub dt: f64,
    pub rank: usize,
    pub scheme: InterpScheme,
    pub warnings: Vec<Warning>,
}

/// Fit per-parameter reduced operators in the pooled POD basis.
pub fn fit_rkoi(sets: &[SnapshotSet], map: &ParamMap, rank: usize) -> Result<ReducedOpInterpModel> {
    validate_training(sets, map)?;
    let pairs: Vec<(RealMat, RealMat)> = sets.iter().map(build_snapshot_pairs).collect();
    let x = hcat(&pairs.iter().map(|(x, _)| x.as_ref()).collect::<Vec<_>>())?;
    let svd = linalg::truncated_svd(x.as_ref(), rank)?;
    let r = svd.rank;

    let mut operators = Vec::with_capacity(sets.len());
    for (xl, xpl) in &pairs {
        let z = svd.u.transpose() * xl;
        let zp = svd.u.transpose() * xpl;
        // Least-squares one-step operator in reduced coordinates.
        operators.push(&zp * &linalg::pinv_real(z.as_ref(), None)?);
    }

    Ok(ReducedOpInterpModel {
        train_thetas: sets.iter().map(|s| s.theta.clone()).collect(),
        param_map: map.clone(),
        u_r: svd.u,
        operators,
        dt: sets[0].dt,
        rank: r,
        scheme: scheme_for(map),
        warnings: svd.warnings,
    })
}

/// Reduced operator at the query parameter.
pub fn interpolate_operator(
    model: &ReducedOpInterpModel,
    theta: &[f64],
) -> Result<(RealMat, bool)> {
    let (w, outside) = knot_weights(model.scheme, &model.param_map, &model.train_thetas, theta)?;
    Ok((blend_real(&model.operators, &w), outside))
}

/// Predict by decomposing the interpolated reduced operator. Unstable
/// interpolants (eigenvalues beyond the growth bound, unreliable
/// decompositions, trajectory overflow) are reported as
/// [`Error::DivergenceDetected`], not returned as trajectories.
pub fn predict_rkoi(
    model: &ReducedOpInterpModel,
    theta: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<Prediction> {
    if steps == 0 {
        return Err(Error::InvalidInput("zero prediction steps".into()));
    }
    let (k_r, outside) = interpolate_operator(model, theta)?;
    let eg = linalg::eig(k_r.as_ref())?;
    if eg.residual > EIG_RESIDUAL_GATE {
        return Err(Error::DivergenceDetected {
            theta: theta.to_vec(),
            reason: format!(
                "interpolated operator eigendecomposition residual {:.3e}",
                eg.residual
            ),
        });
    }
    let bound = 1.0 + GROWTH_MARGIN / steps as f64;
    for l in &eg.values {
        let mag = (l.re * l.re + l.im * l.im).sqrt();
        if mag > bound {
            return Err(Error::DivergenceDetected {
                theta: theta.to_vec(),
                reason: format!(
                    "interpolated eigenvalue magnitude {mag:.6} exceeds growth bound {bound:.6}"
                ),
            });
        }
    }
    let omega = eg
        .values
        .iter()
        .map(|&l| discrete_to_continuous(l, model.dt))
        .collect::<Result<Vec<_>>>()?;
    let phi = &to_complex(model.u_r.as_ref()) * &eg.vectors;
    let mut pred = linalg::modal_predict(phi.as_ref(), &omega, model.dt, x0, steps)?;
    pred.extrapolated = outside;

    let x0_norm: f64 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cap = OVERFLOW_FACTOR * x0_norm.max(1.0);
    for k in 0..=steps {
        let norm = linalg::col_norm(pred.states.as_ref(), k);
        if !norm.is_finite() || norm > cap {
            return Err(Error::DivergenceDetected {
                theta: theta.to_vec(),
                reason: format!("trajectory norm {norm:.3e} at step {k} exceeds {cap:.3e}"),
            });
        }
    }
    Ok(pred)
}
