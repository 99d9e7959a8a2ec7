//! Seeded synthetic data: random parameter-affine linear systems with known
//! ground truth, and a finite-difference advection-diffusion solver on a
//! periodic grid whose viscosity enters the step operator affinely.

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dmd::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{self, RealMat};
use crate::pidmd::ParamMap;

/// Specification of a random parameter-affine system
/// `x_{k+1} = (A + sum_i h_i(theta) B_i) x_k`.
#[derive(Debug, Clone)]
pub struct AffineSystemSpec {
    /// State dimension `n`.
    pub dim: usize,
    /// Feature map shared with the fit; its length fixes the block count.
    pub map: ParamMap,
    /// Largest spectral radius of the operator over the declared
    /// parameters, in (0, 1].
    pub spectral_radius: f64,
    /// Standard deviation of additive observation noise on the recorded
    /// snapshots (dynamics stay exact). Zero disables it.
    pub noise_std: f64,
    pub seed: u64,
}

/// The matrices the generator drew, for recovery checks.
#[derive(Debug, Clone)]
pub struct AffineGroundTruth {
    pub a: RealMat,
    pub b: Vec<RealMat>,
}

impl AffineGroundTruth {
    /// The exact operator at a raw parameter.
    pub fn operator(&self, map: &ParamMap, theta: &[f64]) -> Result<RealMat> {
        let h = map.eval(theta)?;
        let n = self.a.nrows();
        let mut k = self.a.clone();
        for (b, &hb) in self.b.iter().zip(&h) {
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] += hb * b[(i, j)];
                }
            }
        }
        Ok(k)
    }
}

fn spectral_radius(m: &RealMat) -> Result<f64> {
    let pairs = linalg::eig(m.as_ref())?;
    Ok(pairs
        .values
        .iter()
        .map(|z| (z.re * z.re + z.im * z.im).sqrt())
        .fold(0.0f64, f64::max))
}

/// Standard normal via Box-Muller on the chacha stream.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draw the system, rescale it so the worst declared parameter hits the
/// spectral-radius target, and march one trajectory per parameter.
///
/// `x0s` supplies initial conditions per parameter; `None` draws random unit
/// vectors. The draw order (A, then each B, then initial conditions, then
/// noise) is fixed, so a given seed always produces identical bytes.
pub fn gen_affine_trajectories(
    spec: &AffineSystemSpec,
    thetas: &[Vec<f64>],
    steps: usize,
    x0s: Option<&[Vec<f64>]>,
) -> Result<(Vec<SnapshotSet>, AffineGroundTruth)> {
    let n = spec.dim;
    if n == 0 {
        return Err(Error::SpecRejected("state dimension 0".into()));
    }
    if !(spec.spectral_radius > 0.0 && spec.spectral_radius <= 1.0) {
        return Err(Error::SpecRejected(format!(
            "spectral radius target {} outside (0, 1]",
            spec.spectral_radius
        )));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::SpecRejected(format!("noise std {}", spec.noise_std)));
    }
    if thetas.is_empty() {
        return Err(Error::DegenerateInput("no parameters declared".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("zero transitions requested".into()));
    }
    if let Some(ics) = x0s {
        if ics.len() != thetas.len() {
            return Err(Error::InvalidInput(format!(
                "{} initial conditions for {} parameters",
                ics.len(),
                thetas.len()
            )));
        }
        for ic in ics {
            if ic.len() != n {
                return Err(Error::InvalidInput(format!(
                    "initial condition has {} entries, state has {n}",
                    ic.len()
                )));
            }
            linalg::ensure_finite_slice(ic, "initial condition")?;
        }
    }

    let m = spec.map.feature_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale0 = 1.0 / (n as f64).sqrt();
    let a0 = RealMat::from_fn(n, n, |_, _| normal(&mut rng) * scale0);
    let b0: Vec<RealMat> = (0..m)
        .map(|_| RealMat::from_fn(n, n, |_, _| normal(&mut rng) * scale0))
        .collect();

    let raw = AffineGroundTruth { a: a0, b: b0 };
    let mut worst = 0.0f64;
    for theta in thetas {
        let k = raw.operator(&spec.map, theta)?;
        worst = worst.max(spectral_radius(&k)?);
    }
    if worst <= 0.0 {
        return Err(Error::DegenerateInput(
            "drawn system has zero spectral radius at every declared parameter".into(),
        ));
    }
    let s = spec.spectral_radius / worst;
    let truth = AffineGroundTruth {
        a: Mat::from_fn(n, n, |i, j| raw.a[(i, j)] * s),
        b: raw
            .b
            .iter()
            .map(|b| Mat::from_fn(n, n, |i, j| b[(i, j)] * s))
            .collect(),
    };
    for theta in thetas {
        let k = truth.operator(&spec.map, theta)?;
        let rho = spectral_radius(&k)?;
        if rho > 1.0 + 1e-6 {
            return Err(Error::SpecRejected(format!(
                "operator at theta {theta:?} has spectral radius {rho}"
            )));
        }
    }

    let mut sets = Vec::with_capacity(thetas.len());
    for (l, theta) in thetas.iter().enumerate() {
        let k = truth.operator(&spec.map, theta)?;
        let mut x0 = match x0s {
            Some(ics) => ics[l].clone(),
            None => {
                let v: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
                v
            }
        };
        if x0s.is_none() {
            let norm: f64 = x0.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::NumericalFailure("drew a zero initial condition".into()));
            }
            for x in &mut x0 {
                *x /= norm;
            }
        }

        let mut states = RealMat::zeros(n, steps + 1);
        let mut cur = x0;
        for i in 0..n {
            states[(i, 0)] = cur[i];
        }
        for step in 1..=steps {
            let mut next = vec![0.0; n];
            for j in 0..n {
                let xj = cur[j];
                for i in 0..n {
                    next[i] += k[(i, j)] * xj;
                }
            }
            for i in 0..n {
                states[(i, step)] = next[i];
            }
            cur = next;
        }
        if spec.noise_std > 0.0 {
            for j in 0..=steps {
                for i in 0..n {
                    states[(i, j)] += spec.noise_std * normal(&mut rng);
                }
            }
        }
        sets.push(SnapshotSet::new(
            states,
            1.0,
            theta.clone(),
            format!("affine_{l}"),
        )?);
    }
    Ok((sets, truth))
}

/// Initial profiles for the advection-diffusion solver, on `x in [0, length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `sin(2 pi mode x / length)`
    Sine { mode: usize },
    /// `exp(-((x - center*length)^2) / (2 (width*length)^2))`
    Gaussian { center: f64, width: f64 },
    /// Sum of sine components `(mode, amplitude, phase)`.
    SineMix { components: Vec<(usize, f64, f64)> },
}

impl InitialProfile {
    fn eval(&self, x: f64, length: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI / length;
        match self {
            InitialProfile::Sine { mode } => (tau * *mode as f64 * x).sin(),
            InitialProfile::Gaussian { center, width } => {
                let d = x - center * length;
                (-d * d / (2.0 * (width * length).powi(2))).exp()
            }
            InitialProfile::SineMix { components } => components
                .iter()
                .map(|&(mode, amp, phase)| amp * (tau * mode as f64 * x + phase).sin())
                .sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialProfile::Sine { mode } if *mode == 0 => {
                Err(Error::SpecRejected("sine profile with mode 0".into()))
            }
            InitialProfile::Gaussian { center, width } => {
                if !(center.is_finite() && width.is_finite() && *width > 0.0) {
                    Err(Error::SpecRejected(format!(
                        "gaussian profile center {center}, width {width}"
                    )))
                } else {
                    Ok(())
                }
            }
            InitialProfile::SineMix { components } => {
                if components.is_empty() {
                    return Err(Error::SpecRejected("empty sine mix".into()));
                }
                for &(mode, amp, phase) in components {
                    if mode == 0 || !amp.is_finite() || !phase.is_finite() {
                        return Err(Error::SpecRejected(format!(
                            "sine mix component ({mode}, {amp}, {phase})"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One-dimensional advection-diffusion `u_t = -c u_x + nu u_xx` on a
/// periodic grid, discretized with upwind advection and central diffusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvDiffSpec {
    /// Grid points `n`.
    pub grid: usize,
    /// Domain length.
    pub length: f64,
    /// Advection speed `c` (sign picks the upwind side).
    pub speed: f64,
    /// Time step.
    pub dt: f64,
    pub profile: InitialProfile,
}

impl AdvDiffSpec {
    fn validate(&self, max_nu: f64) -> Result<()> {
        if self.grid < 3 {
            return Err(Error::SpecRejected(format!("grid of {} points", self.grid)));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::SpecRejected(format!("domain length {}", self.length)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::SpecRejected(format!("time step {}", self.dt)));
        }
        if !self.speed.is_finite() {
            return Err(Error::SpecRejected(format!("advection speed {}", self.speed)));
        }
        self.profile.validate()?;
        let dx = self.length / self.grid as f64;
        let cfl = self.speed.abs() * self.dt / dx;
        if cfl > 1.0 {
            return Err(Error::SpecRejected(format!(
                "advective CFL number {cfl:.3} exceeds 1"
            )));
        }
        let dnum = max_nu * self.dt / (dx * dx);
        if dnum > 0.5 {
            return Err(Error::SpecRejected(format!(
                "diffusion number {dnum:.3} exceeds 0.5"
            )));
        }
        Ok(())
    }

    /// Grid spacing.
    pub fn dx(&self) -> f64 {
        self.length / self.grid as f64
    }
}

/// Dense one-step operator of the scheme at viscosity `nu`. The operator is
/// affine in `nu`: identity plus advection stencil plus `nu` times the
/// diffusion stencil.
pub fn advdiff_step_matrix(spec: &AdvDiffSpec, nu: f64) -> Result<RealMat> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::SpecRejected(format!("viscosity {nu}")));
    }
    spec.validate(nu)?;
    let n = spec.grid;
    let dx = spec.dx();
    let adv = spec.speed * spec.dt / dx;
    let dif = nu * spec.dt / (dx * dx);

    let mut k = RealMat::zeros(n, n);
    for i in 0..n {
        let left = (i + n - 1) % n;
        let right = (i + 1) % n;
        k[(i, i)] += 1.0 - 2.0 * dif;
        k[(i, left)] += dif;
        k[(i, right)] += dif;
        if spec.speed > 0.0 {
            // backward difference
            k[(i, i)] -= adv;
            k[(i, left)] += adv;
        } else if spec.speed < 0.0 {
            // forward difference
            k[(i, i)] += adv;
            k[(i, right)] -= adv;
        }
    }
    Ok(k)
}

/// March the scheme at each viscosity, drop `transient_skip` leading steps,
/// and record `steps + 1` snapshots per viscosity. `theta = [nu]`.
pub fn gen_advdiff(
    spec: &AdvDiffSpec,
    nus: &[f64],
    steps: usize,
    transient_skip: usize,
) -> Result<Vec<SnapshotSet>> {
    if nus.is_empty() {
        return Err(Error::DegenerateInput("no viscosities requested".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("zero transitions requested".into()));
    }
    let max_nu = nus.iter().fold(0.0f64, |a, &b| a.max(b));
    spec.validate(max_nu)?;

    let n = spec.grid;
    let dx = spec.dx();
    let mut sets = Vec::with_capacity(nus.len());
    for &nu in nus {
        let k = advdiff_step_matrix(spec, nu)?;
        let mut cur: Vec<f64> = (0..n)
            .map(|i| spec.profile.eval(i as f64 * dx, spec.length))
            .collect();
        for _ in 0..transient_skip {
            cur = step(&k, &cur);
        }
        let mut states = RealMat::zeros(n, steps + 1);
        for i in 0..n {
            states[(i, 0)] = cur[i];
        }
        for s in 1..=steps {
            cur = step(&k, &cur);
            for i in 0..n {
                states[(i, s)] = cur[i];
            }
        }
        sets.push(SnapshotSet::new(
            states,
            spec.dt,
            vec![nu],
            format!("advdiff_nu_{nu}"),
        )?);
    }
    Ok(sets)
}

fn step(k: &RealMat, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let uj = u[j];
        if uj != 0.0 {
            for i in 0..n {
                out[i] += k[(i, j)] * uj;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pidmd::ParamFn;

    fn unit_map() -> ParamMap {
        ParamMap::new(1, vec![ParamFn::Coord { index: 0 }]).unwrap()
    }

    #[test]
    fn affine_generator_is_deterministic_and_bounded() {
        let spec = AffineSystemSpec {
            dim: 5,
            map: unit_map(),
            spectral_radius: 0.8,
            noise_std: 0.0,
            seed: 42,
        };
        let thetas = vec![vec![0.0], vec![0.5], vec![1.0]];
        let (a_sets, a_truth) = gen_affine_trajectories(&spec, &thetas, 10, None).unwrap();
        let (b_sets, b_truth) = gen_affine_trajectories(&spec, &thetas, 10, None).unwrap();
        assert_eq!(
            linalg::frob((&a_truth.a - &b_truth.a).as_ref()),
            0.0,
            "same seed must redraw the same system"
        );
        for (a, b) in a_sets.iter().zip(&b_sets) {
            assert_eq!(linalg::frob((&a.states - &b.states).as_ref()), 0.0);
        }

        // The worst declared parameter sits exactly at the target.
        let mut worst = 0.0f64;
        for th in &thetas {
            let k = a_truth.operator(&spec.map, th).unwrap();
            worst = worst.max(spectral_radius(&k).unwrap());
        }
        assert!((worst - 0.8).abs() < 1e-10);
    }

    #[test]
    fn trajectories_follow_the_ground_truth_operator() {
        let spec = AffineSystemSpec {
            dim: 4,
            map: unit_map(),
            spectral_radius: 0.9,
            noise_std: 0.0,
            seed: 3,
        };
        let thetas = vec![vec![0.3]];
        let (sets, truth) = gen_affine_trajectories(&spec, &thetas, 8, None).unwrap();
        let k = truth.operator(&spec.map, &thetas[0]).unwrap();
        let s = &sets[0].states;
        for col in 0..8 {
            for i in 0..4 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += k[(i, j)] * s[(j, col)];
                }
                assert!((acc - s[(i, col + 1)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_affine_specs() {
        let mut spec = AffineSystemSpec {
            dim: 4,
            map: unit_map(),
            spectral_radius: 1.2,
            noise_std: 0.0,
            seed: 0,
        };
        assert!(matches!(
            gen_affine_trajectories(&spec, &[vec![0.0]], 5, None),
            Err(Error::SpecRejected(_))
        ));
        spec.spectral_radius = 0.9;
        assert!(gen_affine_trajectories(&spec, &[], 5, None).is_err());
        assert!(gen_affine_trajectories(&spec, &[vec![0.0]], 0, None).is_err());
    }

    fn advdiff_spec() -> AdvDiffSpec {
        AdvDiffSpec {
            grid: 64,
            length: 2.0 * std::f64::consts::PI,
            speed: 0.8,
            dt: 0.005,
            profile: InitialProfile::Sine { mode: 2 },
        }
    }

    #[test]
    fn pure_diffusion_damps_a_fourier_mode_by_the_stencil_symbol() {
        // c = 0, single mode k: one step multiplies the mode by
        // 1 + nu dt / dx^2 * (2 cos(2 pi k / n) - 2).
        let mut spec = advdiff_spec();
        spec.speed = 0.0;
        let nu = 0.05;
        let sets = gen_advdiff(&spec, &[nu], 3, 0).unwrap();
        let s = &sets[0].states;
        let n = spec.grid;
        let dx = spec.dx();
        let g = 1.0 + nu * spec.dt / (dx * dx)
            * (2.0 * (2.0 * std::f64::consts::PI * 2.0 / n as f64).cos() - 2.0);
        for col in 0..3 {
            for i in 0..n {
                assert!(
                    (s[(i, col + 1)] - g * s[(i, col)]).abs() < 1e-13,
                    "column {col}, row {i}"
                );
            }
        }
    }

    #[test]
    fn unit_cfl_advection_is_an_exact_shift() {
        // nu = 0 and c dt = dx: upwind becomes a cyclic one-cell shift.
        let mut spec = advdiff_spec();
        let dx = spec.dx();
        spec.speed = dx / spec.dt;
        let sets = gen_advdiff(&spec, &[0.0], 2, 0).unwrap();
        let s = &sets[0].states;
        let n = spec.grid;
        for i in 0..n {
            assert!((s[((i + 1) % n, 1)] - s[(i, 0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn step_matrix_is_affine_in_viscosity() {
        let spec = advdiff_spec();
        let k0 = advdiff_step_matrix(&spec, 0.0).unwrap();
        let k1 = advdiff_step_matrix(&spec, 0.02).unwrap();
        let k2 = advdiff_step_matrix(&spec, 0.04).unwrap();
        // K(0) - 2 K(0.02) + K(0.04) = 0 entrywise.
        for j in 0..spec.grid {
            for i in 0..spec.grid {
                let second = k0[(i, j)] - 2.0 * k1[(i, j)] + k2[(i, j)];
                assert!(second.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stability_limits_are_enforced() {
        let mut spec = advdiff_spec();
        spec.dt = 1.0;
        assert!(matches!(
            gen_advdiff(&spec, &[0.01], 5, 0),
            Err(Error::SpecRejected(_))
        ));
        let spec = advdiff_spec();
        assert!(matches!(
            gen_advdiff(&spec, &[10.0], 5, 0),
            Err(Error::SpecRejected(_))
        ));
        assert!(matches!(
            gen_advdiff(&spec, &[-0.1], 5, 0),
            Err(Error::SpecRejected(_))
        ));
    }

    #[test]
    fn transient_skip_drops_leading_steps()  {
        let spec = advdiff_spec();
        let full = gen_advdiff(&spec, &[0.01], 10, 0).unwrap();
        let skipped = gen_advdiff(&spec, &[0.01], 7, 3).unwrap();
        for col in 0..8 {
            for i in 0..spec.grid {
                assert_eq!(
                    skipped[0].states[(i, col)],
                    full[0].states[(i, col + 3)],
                );
            }
        }
    }
}
