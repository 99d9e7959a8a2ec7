//! Parameter-affine operator regression: one lifted least-squares problem
//! over trajectories at several parameter values yields a full-order
//! operator family `K(theta) = A + sum_i h_i(theta) B_i`, which is then
//! projected onto a shared POD basis to produce a reduced model, modes and
//! frequencies at any query parameter.

mod params;

pub use params::{CoordScaling, ParamFn, ParamMap, DEFAULT_SCALED_RANGE};

use faer::complex_native::c64;
use serde::{Deserialize, Serialize};

use crate::dmd::{build_snapshot_pairs, discrete_to_continuous, SnapshotSet};
use crate::error::{Error, Result, Warning};
use crate::linalg::{
    self, frob, to_complex, ComplexMat, Prediction, RealMat, EIG_RESIDUAL_GATE,
};

/// Fit statistics and provenance carried by a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Number of training trajectories `L`.
    pub trajectories: usize,
    /// Total transition columns pooled into the regression.
    pub columns: usize,
    /// State dimension `n`.
    pub state_dim: usize,
    pub requested_rank_tilde: usize,
    pub requested_rank_hat: usize,
    /// `||X+ - [A B] Psi||_F / ||X+||_F` over the pooled training data.
    pub train_residual: f64,
    pub discarded_energy_tilde: f64,
    pub discarded_energy_hat: f64,
    /// Seed of the data source, when the caller knows it.
    pub seed: Option<u64>,
    pub warnings: Vec<Warning>,
}

/// Parameter-affine operator family fitted by [`fit_pidmd`].
#[derive(Debug, Clone)]
pub struct PiDmdModel {
    /// Parameter-independent operator block, `n x n`.
    pub atilde: RealMat,
    /// One `n x n` block per feature; `K(theta) = atilde + sum h_i btilde[i]`.
    pub btilde: Vec<RealMat>,
    /// Shared projection basis from the shifted snapshots, `n x rank_hat`.
    pub u_hat: RealMat,
    pub dt: f64,
    pub param_map: ParamMap,
    /// Effective lifted regression rank.
    pub rank_tilde: usize,
    /// Effective projection rank.
    pub rank_hat: usize,
    pub meta: TrainingMeta,
}

/// Reduced operator, modes and frequencies at one query parameter.
#[derive(Debug, Clone)]
pub struct ParametricRom {
    pub theta: Vec<f64>,
    /// Projected operator, `rank_hat x rank_hat`.
    pub k_r: RealMat,
    /// Full-state modes `u_hat * W`, unit-norm columns.
    pub phi: ComplexMat,
    /// Discrete eigenvalues of `k_r`.
    pub lambda: Vec<c64>,
    /// Continuous frequencies `ln(lambda) / dt`.
    pub omega: Vec<c64>,
    pub dt: f64,
    /// Relative eigendecomposition residual of `k_r`.
    pub eig_residual: f64,
}

/// Lifted regressor `[x; h_1 x; ...; h_m x]`.
pub fn lift(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * (1 + h.len()));
    out.extend_from_slice(x);
    for &hi in h {
        out.extend(x.iter().map(|&xi| hi * xi));
    }
    out
}

/// Pool trajectories into the lifted regression pair `(Psi, X+)`:
/// `Psi` is `(n + m n) x sumـT`, `X+` is `n x sum_T`, columns aligned.
pub fn assemble_regression(
    sets: &[SnapshotSet],
    map: &ParamMap,
) -> Result<(RealMat, RealMat)> {
    if sets.is_empty() {
        return Err(Error::DegenerateInput("no training trajectories".into()));
    }
    let n = sets[0].dim();
    let dt = sets[0].dt;
    let m = map.feature_count();
    let mut total = 0usize;
    for set in sets {
        if set.dim() != n {
            return Err(Error::InvalidInput(format!(
                "trajectory '{}' has dimension {}, expected {n}",
                set.label,
                set.dim()
            )));
        }
        if (set.dt - dt).abs() > 1e-12 * dt.abs() {
            return Err(Error::InvalidInput(format!(
                "trajectory '{}' has dt {}, expected {dt}",
                set.label, set.dt
            )));
        }
        total += set.steps();
    }

    let mut psi = RealMat::zeros(n * (1 + m), total);
    let mut xplus = RealMat::zeros(n, total);
    let mut at = 0usize;
    for set in sets {
        let h = map.eval(&set.theta)?;
        let (x, xp) = build_snapshot_pairs(set);
        for k in 0..x.ncols() {
            for i in 0..n {
                let xi = x[(i, k)];
                psi[(i, at + k)] = xi;
                for (b, &hb) in h.iter().enumerate() {
                    psi[(n * (b + 1) + i, at + k)] = hb * xi;
                }
                xplus[(i, at + k)] = xp[(i, k)];
            }
        }
        at += x.ncols();
    }
    Ok((psi, xplus))
}

/// Rank of the `[1; h(theta_l)]` feature matrix over the training
/// parameters; when it falls short of `m + 1` the affine blocks are not
/// jointly identifiable.
fn feature_rank(sets: &[SnapshotSet], map: &ParamMap) -> Result<usize> {
    let m = map.feature_count();
    let mut f = RealMat::zeros(m + 1, sets.len());
    for (l, set) in sets.iter().enumerate() {
        f[(0, l)] = 1.0;
        let h = map.eval(&set.theta)?;
        for (i, &hi) in h.iter().enumerate() {
            f[(i + 1, l)] = hi;
        }
    }
    let svd = linalg::truncated_svd(f.as_ref(), m + 1)?;
    Ok(svd.rank)
}

/// Fit the parameter-affine operator family.
///
/// `rank_tilde` bounds the lifted regression, `rank_hat` the projection
/// basis taken from the shifted snapshots; both shrink to the numerical
/// rank of their data with a recorded warning.
pub fn fit_pidmd(
    sets: &[SnapshotSet],
    map: &ParamMap,
    rank_tilde: usize,
    rank_hat: usize,
) -> Result<PiDmdModel> {
    let (psi, xplus) = assemble_regression(sets, map)?;
    let n = xplus.nrows();
    let m = map.feature_count();

    let mut warnings = Vec::new();
    let frank = feature_rank(sets, map)?;
    if frank < m + 1 {
        warnings.push(Warning::IllConditioned {
            what: format!(
                "training parameters span {frank} of {} regression features; \
                 part of the parameter dependence is not identifiable",
                m + 1
            ),
        });
    }

    let svd = linalg::truncated_svd(psi.as_ref(), rank_tilde)?;
    warnings.extend(svd.warnings.iter().cloned());
    let r = svd.rank;

    // G = X+ V Sigma^{-1}; the operator blocks are G times the matching
    // row blocks of U^T.
    let mut g = &xplus * &svd.v;
    for j in 0..r {
        let inv = 1.0 / svd.s[j];
        for i in 0..n {
            g[(i, j)] *= inv;
        }
    }
    let u0 = svd.u.as_ref().subrows(0, n);
    let atilde = &g * u0.transpose();
    let mut btilde = Vec::with_capacity(m);
    for b in 0..m {
        let ub = svd.u.as_ref().subrows(n * (b + 1), n);
        btilde.push(&g * ub.transpose());
    }

    // Honest training residual: apply the fitted blocks to the regressors.
    let fitted = &g * (svd.u.transpose() * &psi);
    let mut diff = xplus.clone();
    for j in 0..diff.ncols() {
        for i in 0..n {
            diff[(i, j)] -= fitted[(i, j)];
        }
    }
    let denom = frob(xplus.as_ref());
    let train_residual = if denom > 0.0 {
        frob(diff.as_ref()) / denom
    } else {
        0.0
    };

    let hat = linalg::truncated_svd(xplus.as_ref(), rank_hat)?;
    warnings.extend(hat.warnings.iter().cloned());

    Ok(PiDmdModel {
        atilde,
        btilde,
        u_hat: hat.u,
        dt: sets[0].dt,
        param_map: map.clone(),
        rank_tilde: r,
        rank_hat: hat.rank,
        meta: TrainingMeta {
            trajectories: sets.len(),
            columns: psi.ncols(),
            state_dim: n,
            requested_rank_tilde: rank_tilde,
            requested_rank_hat: rank_hat,
            train_residual,
            discarded_energy_tilde: svd.discarded_energy,
            discarded_energy_hat: hat.discarded_energy,
            seed: None,
            warnings,
        },
    })
}

impl PiDmdModel {
    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.atilde.nrows()
    }

    /// Full-order operator from a raw feature vector; the affine combination
    /// `A + sum_i h[i] B_i`.
    pub fn operator_from_features(&self, h: &[f64]) -> Result<RealMat> {
        if h.len() != self.btilde.len() {
            return Err(Error::InvalidInput(format!(
                "{} features supplied, model has {}",
                h.len(),
                self.btilde.len()
            )));
        }
        linalg::ensure_finite_slice(h, "features")?;
        let n = self.dim();
        let mut k = self.atilde.clone();
        for (b, &hb) in self.btilde.iter().zip(h) {
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] += hb * b[(i, j)];
                }
            }
        }
        Ok(k)
    }

    /// Full-order operator at a raw parameter.
    pub fn evaluate_operator(&self, theta: &[f64]) -> Result<RealMat> {
        let h = self.param_map.eval(theta)?;
        self.operator_from_features(&h)
    }

    /// Reduced model at a raw parameter: project the full-order operator
    /// onto the shared basis and extract modes and frequencies.
    pub fn reduce(&self, theta: &[f64]) -> Result<ParametricRom> {
        let k = self.evaluate_operator(theta)?;
        let k_r = self.u_hat.transpose() * &k * &self.u_hat;
        let pairs = linalg::eig(k_r.as_ref())?;
        if pairs.residual > EIG_RESIDUAL_GATE {
            return Err(Error::NumericalFailure(format!(
                "reduced-operator eigendecomposition residual {:.3e} at theta {theta:?}",
                pairs.residual
            )));
        }
        let phi = &to_complex(self.u_hat.as_ref()) * &pairs.vectors;
        let omega = pairs
            .values
            .iter()
            .map(|&l| discrete_to_continuous(l, self.dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParametricRom {
            theta: theta.to_vec(),
            k_r,
            phi,
            lambda: pairs.values,
            omega,
            dt: self.dt,
            eig_residual: pairs.residual,
        })
    }
}

/// Predict `steps` transitions at a raw parameter via the reduced modal
/// form: project, decompose, superpose.
pub fn predict_pidmd(
    model: &PiDmdModel,
    theta: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<Prediction> {
    let rom = model.reduce(theta)?;
    linalg::modal_predict(rom.phi.as_ref(), &rom.omega, rom.dt, x0, steps)
}

/// Reference prediction path: iterate the full-order operator directly,
/// without any projection. Used to cross-check the modal path.
pub fn predict_full_operator(
    model: &PiDmdModel,
    theta: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<RealMat> {
    let k = model.evaluate_operator(theta)?;
    crate::dmd::iterate_operator(k.as_ref(), x0, steps)
}

/// Serializable view used by the model file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorStats {
    pub rank_tilde: usize,
    pub rank_hat: usize,
    pub train_residual: f64,
}
