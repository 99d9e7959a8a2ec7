//! End-to-end workflow on the advection-diffusion sweep: generate, fit all
//! three methods, evaluate at held-out viscosities, and compare. Also pins
//! the best-case property: a model fitted directly on the test trajectory
//! is never beaten by the parametric model by more than the noise floor.

mod common;

use common::*;
use pidmd::baselines::{fit_rkoi, fit_stacked, predict_rkoi, predict_stacked};
use pidmd::datagen::{
    gen_advdiff, gen_affine_trajectories, AdvDiffSpec, AffineSystemSpec, InitialProfile,
};
use pidmd::dmd::{fit_dmd_set, predict_dmd};
use pidmd::metrics::{compare_methods, time_averaged_error, EvalEntry, EvalReport};
use pidmd::pidmd::{fit_pidmd, predict_pidmd, ParamFn, ParamMap};

fn advdiff_sweep() -> (AdvDiffSpec, Vec<f64>, Vec<f64>) {
    let spec = AdvDiffSpec {
        grid: 64,
        length: std::f64::consts::TAU,
        speed: 0.8,
        dt: 0.02,
        profile: InitialProfile::SineMix {
            components: vec![(1, 1.0, 0.0), (2, 0.6, 0.4), (3, 0.3, 1.1)],
        },
    };
    let train = vec![0.010, 0.015, 0.020];
    let test = vec![0.011, 0.013, 0.017, 0.019];
    (spec, train, test)
}

/// Maps for a scalar viscosity: one linear feature of the scaled parameter.
fn nu_map(train: &[f64]) -> ParamMap {
    let mut map = ParamMap::new(1, vec![ParamFn::Coord { index: 0 }]).unwrap();
    let thetas: Vec<Vec<f64>> = train.iter().map(|&v| vec![v]).collect();
    map.fit_scaling_default(&thetas).unwrap();
    map
}

#[test]
fn advdiff_workflow_ranks_methods_and_stays_accurate() {
    let (spec, train_nus, test_nus) = advdiff_sweep();
    let train_sets = gen_advdiff(&spec, &train_nus, 160, 30).unwrap();
    let map = nu_map(&train_nus);

    let rank = 24;
    let pi = fit_pidmd(&train_sets, &map, rank, rank).unwrap();
    let stacked = fit_stacked(&train_sets, &map, rank).unwrap();
    let rkoi = fit_rkoi(&train_sets, &map, rank).unwrap();

    let horizon = 250;
    let mut pi_entries = Vec::new();
    let mut st_entries = Vec::new();
    let mut rk_entries = Vec::new();
    let mut dm_entries = Vec::new();

    for &nu in &test_nus {
        let truth_set = &gen_advdiff(&spec, &[nu], horizon, 30).unwrap()[0];
        let n = truth_set.dim();
        let x0: Vec<f64> = (0..n).map(|i| truth_set.states[(i, 0)]).collect();
        let theta = vec![nu];

        let p = predict_pidmd(&pi, &theta, &x0, horizon).unwrap();
        let series = time_averaged_error(truth_set.states.as_ref(), p.states.as_ref()).unwrap();
        pi_entries.push(EvalEntry::from_series(theta.clone(), series, None));

        let p = predict_stacked(&stacked, &theta, &x0, horizon).unwrap();
        let series = time_averaged_error(truth_set.states.as_ref(), p.states.as_ref()).unwrap();
        st_entries.push(EvalEntry::from_series(theta.clone(), series, None));

        match predict_rkoi(&rkoi, &theta, &x0, horizon) {
            Ok(p) => {
                let series =
                    time_averaged_error(truth_set.states.as_ref(), p.states.as_ref()).unwrap();
                rk_entries.push(EvalEntry::from_series(theta.clone(), series, None));
            }
            Err(pidmd::Error::DivergenceDetected { reason, .. }) => {
                rk_entries.push(EvalEntry::refused(theta.clone(), reason));
            }
            Err(e) => panic!("unexpected rkoi failure: {e}"),
        }

        // Best case: fit the same rank directly on the test trajectory.
        let dm = fit_dmd_set(truth_set, rank).unwrap();
        let p = predict_dmd(&dm, &x0, horizon).unwrap();
        let series = time_averaged_error(truth_set.states.as_ref(), p.states.as_ref()).unwrap();
        dm_entries.push(EvalEntry::from_series(theta.clone(), series, None));
    }

    let make_report = |method: &str, entries: Vec<EvalEntry>| EvalReport {
        method: method.into(),
        config_hash: "pipe".into(),
        horizon,
        entries,
    };
    let reports = vec![
        make_report("dmd", dm_entries),
        make_report("pidmd", pi_entries),
        make_report("stacked", st_entries),
        make_report("rkoi", rk_entries),
    ];

    // Per-parameter expectations on this affine-in-viscosity problem.
    for (i, nu) in test_nus.iter().enumerate() {
        let dm = reports[0].entries[i].time_averaged.unwrap();
        let pi = reports[1].entries[i].time_averaged.unwrap();
        assert!(
            dm <= pi + 1e-8,
            "direct fit should be the best case at nu {nu} (dmd {dm:.3e}, parametric {pi:.3e})",
        );
        assert!(
            pi < 0.05,
            "parametric model inaccurate at held-out nu {}: {pi:.3e}",
            test_nus[i]
        );
    }

    let cmp = compare_methods(&reports).unwrap();
    assert_eq!(cmp.rows.len(), 4);
    let by_name = |name: &str| {
        cmp.rows
            .iter()
            .find(|m| m.method == name)
            .unwrap_or_else(|| panic!("missing summary for {name}"))
    };
    let med_dmd = by_name("dmd").median.unwrap();
    let med_pi = by_name("pidmd").median.unwrap();
    let med_st = by_name("stacked").median.unwrap();
    assert!(
        med_dmd <= med_pi + 1e-8,
        "medians out of order: dmd {med_dmd:.3e} vs parametric {med_pi:.3e}"
    );
    assert!(
        med_pi < med_st,
        "parametric should beat stacked interpolation: {med_pi:.3e} vs {med_st:.3e}"
    );
}

/// Full-rank noiseless affine suite: training-parameter predictions match
/// the stored trajectories and the unseen-parameter operator matches the
/// generator.
#[test]
fn affine_workflow_recovers_dynamics_at_unseen_parameters() {
    let map = coord_map(1);
    let spec = AffineSystemSpec {
        dim: 6,
        map: map.clone(),
        spectral_radius: 0.99,
        noise_std: 0.0,
        seed: 4242,
    };
    let train: Vec<Vec<f64>> = vec![vec![0.2], vec![0.5], vec![0.8]];
    let steps = 20;
    let (sets, truth) = gen_affine_trajectories(&spec, &train, steps, None).unwrap();

    let lifted = 12;
    let model = fit_pidmd(&sets, &map, lifted, 6).unwrap();

    for (set, theta) in sets.iter().zip(&train) {
        let x0: Vec<f64> = (0..6).map(|i| set.states[(i, 0)]).collect();
        let pred = predict_pidmd(&model, theta, &x0, steps).unwrap();
        let series = time_averaged_error(set.states.as_ref(), pred.states.as_ref()).unwrap();
        assert!(
            series.time_averaged <= 1e-7,
            "training parameter {theta:?} replay error {:.3e}",
            series.time_averaged
        );
    }

    for theta in [vec![0.35], vec![0.65]] {
        let k_fit = model.evaluate_operator(&theta).unwrap();
        let k_true = truth.operator(&map, &theta).unwrap();
        let scale = pidmd::linalg::frob(k_true.as_ref());
        assert!(
            frob_diff(k_fit.as_ref(), k_true.as_ref()) <= 1e-7 * scale,
            "operator mismatch at unseen {theta:?}"
        );
    }
}

/// A training set whose parameters never move rejects nothing but warns
/// about unidentifiable features; prediction still works at the knot.
#[test]
fn redundant_parameters_warn_but_still_run() {
    let map = coord_map(1);
    let spec = AffineSystemSpec {
        dim: 4,
        map: map.clone(),
        spectral_radius: 0.95,
        noise_std: 0.0,
        seed: 9,
    };
    let train = vec![vec![0.5], vec![0.5]];
    let (sets, _) = gen_affine_trajectories(&spec, &train, 12, None).unwrap();
    let model = fit_pidmd(&sets, &map, 8, 4).unwrap();
    assert!(
        model
            .meta
            .warnings
            .iter()
            .any(|w| matches!(w, pidmd::Warning::IllConditioned { .. })),
        "expected an identifiability warning"
    );
    let x0: Vec<f64> = (0..4).map(|i| sets[0].states[(i, 0)]).collect();
    predict_pidmd(&model, &[0.5], &x0, 5).unwrap();
}
