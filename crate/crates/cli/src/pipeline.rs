//! The five pipeline stages behind the subcommands: generate data, train
//! models, predict one trajectory, evaluate every method at every test
//! parameter, and compare the resulting reports. Every stage revalidates
//! the configuration hash carried by the artifacts it consumes, so stale
//! or foreign files fail loudly instead of silently mixing runs.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use pidmd::baselines::{fit_rkoi, fit_stacked, predict_rkoi, predict_stacked};
use pidmd::datagen::{gen_advdiff, gen_affine_trajectories, AdvDiffSpec, AffineSystemSpec};
use pidmd::dmd::{fit_dmd_set, predict_dmd, DmdModel, SnapshotSet};
use pidmd::io::{self, read_model, MatData, ModelData, ModelFile};
use pidmd::linalg::Prediction;
use pidmd::metrics::{
    compare_methods, residual_error, time_averaged_error, Comparison, EvalEntry, EvalReport,
};
use pidmd::pidmd::{fit_pidmd, predict_pidmd};
use pidmd::{Error, RealMat, Result, Warning};

use crate::artifacts::{
    self, csv_field, fmt_f64, line_plot_svg, method_color, sha256_hex, write_atomic,
    GroundTruthFile, Manifest, ManifestEntry, PlotSeries, PredictionRecord, ReportFile,
};
use crate::config::{DataSpec, Method, RunConfig};

/// Environment variable overriding the evaluation worker count.
pub const WORKERS_ENV: &str = "PIDMD_WORKERS";

/// Layout of one run directory.
#[derive(Debug, Clone)]
pub struct OutPaths {
    pub root: PathBuf,
}

impl OutPaths {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            root: PathBuf::from(&cfg.out_dir),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("data").join("manifest.json")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("data").join("ground_truth.json")
    }

    fn data_file(&self, role: &str, index: usize) -> PathBuf {
        self.root.join("data").join(format!("{role}_{index:03}.pdmd"))
    }

    pub fn model(&self, method: Method) -> PathBuf {
        self.root.join("models").join(format!("{}.json", method.name()))
    }

    pub fn prediction(&self, method: Method, test_index: usize) -> PathBuf {
        self.root
            .join("predictions")
            .join(format!("{}_test_{test_index:03}.pdmd", method.name()))
    }

    pub fn prediction_record(&self, method: Method, test_index: usize) -> PathBuf {
        self.root
            .join("predictions")
            .join(format!("{}_test_{test_index:03}.json", method.name()))
    }

    pub fn report(&self, method: Method) -> PathBuf {
        self.root.join("reports").join(format!("{}.json", method.name()))
    }

    pub fn delta_csv(&self, method: Method) -> PathBuf {
        self.root
            .join("reports")
            .join(format!("{}_delta.csv", method.name()))
    }

    pub fn comparison_csv(&self) -> PathBuf {
        self.root.join("reports").join("comparison.csv")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("reports").join("summary.csv")
    }

    pub fn delta_plot(&self) -> PathBuf {
        self.root.join("plots").join("delta_vs_theta.svg")
    }

    pub fn box_plot(&self) -> PathBuf {
        self.root.join("plots").join("summary_box.svg")
    }
}

/// What `generate` wrote.
#[derive(Debug)]
pub struct GenerateSummary {
    pub config_hash: String,
    pub train_files: usize,
    pub test_files: usize,
    pub manifest_path: PathBuf,
    pub ground_truth_path: Option<PathBuf>,
}

/// Produce the train/test snapshot files, the hash manifest, and (for the
/// affine source) the exact generating operators.
pub fn run_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    let hash = cfg.config_hash();
    let paths = OutPaths::new(cfg);
    let map = cfg.build_map()?;

    let (train_sets, test_sets, truth) = match &cfg.data {
        DataSpec::Affine {
            dim,
            spectral_radius,
            noise_std,
        } => {
            let spec = AffineSystemSpec {
                dim: *dim,
                map: map.clone(),
                spectral_radius: *spectral_radius,
                noise_std: *noise_std,
                seed: cfg.seed,
            };
            // One draw covers both splits so they share the exact system;
            // the common trajectory length is trimmed per split below.
            let all_thetas: Vec<Vec<f64>> = cfg
                .train_thetas
                .iter()
                .chain(&cfg.test_thetas)
                .cloned()
                .collect();
            let steps = cfg.train_steps.max(cfg.horizon);
            let (sets, truth) = gen_affine_trajectories(&spec, &all_thetas, steps, None)?;
            let mut train = Vec::with_capacity(cfg.train_thetas.len());
            let mut test = Vec::with_capacity(cfg.test_thetas.len());
            for (i, set) in sets.into_iter().enumerate() {
                if i < cfg.train_thetas.len() {
                    train.push(set.window(0, cfg.train_steps + 1)?);
                } else {
                    test.push(set.window(0, cfg.horizon + 1)?);
                }
            }
            (train, test, Some(truth))
        }
        DataSpec::Advdiff {
            grid,
            length,
            speed,
            dt,
            profile,
        } => {
            let spec = AdvDiffSpec {
                grid: *grid,
                length: *length,
                speed: *speed,
                dt: *dt,
                profile: profile.clone(),
            };
            let train_nus: Vec<f64> = cfg.train_thetas.iter().map(|t| t[0]).collect();
            let test_nus: Vec<f64> = cfg.test_thetas.iter().map(|t| t[0]).collect();
            let train = gen_advdiff(&spec, &train_nus, cfg.train_steps, cfg.transient_skip)?;
            let test = gen_advdiff(&spec, &test_nus, cfg.horizon, cfg.transient_skip)?;
            (train, test, None)
        }
    };

    let mut files = Vec::with_capacity(train_sets.len() + test_sets.len());
    for (role, sets) in [("train", &train_sets), ("test", &test_sets)] {
        for (i, set) in sets.iter().enumerate() {
            let path = paths.data_file(role, i);
            let bytes = io::snapshot_to_bytes(set);
            write_atomic(&path, &bytes)?;
            files.push(ManifestEntry {
                path: format!("data/{role}_{i:03}.pdmd"),
                role: role.to_string(),
                label: set.label.clone(),
                theta: set.theta.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
    }
    artifacts::write_manifest(&paths.manifest(), &Manifest::new(hash.clone(), files))?;

    let ground_truth_path = match truth {
        Some(t) => {
            let file = GroundTruthFile::new(
                hash.clone(),
                MatData::from_mat(&t.a),
                t.b.iter().map(MatData::from_mat).collect(),
            );
            artifacts::write_ground_truth(&paths.ground_truth(), &file)?;
            Some(paths.ground_truth())
        }
        None => None,
    };

    Ok(GenerateSummary {
        config_hash: hash,
        train_files: train_sets.len(),
        test_files: test_sets.len(),
        manifest_path: paths.manifest(),
        ground_truth_path,
    })
}

fn read_manifest_checked(cfg: &RunConfig, paths: &OutPaths) -> Result<Manifest> {
    let path = paths.manifest();
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "no manifest at '{}'; run `generate` first",
            path.display()
        )));
    }
    let manifest = artifacts::read_manifest(&path)?;
    let hash = cfg.config_hash();
    if manifest.config_hash != hash {
        return Err(Error::InvalidInput(format!(
            "manifest was produced by configuration {}, current configuration is {}",
            manifest.config_hash, hash
        )));
    }
    Ok(manifest)
}

/// Load the snapshot files of one role, verifying each against its
/// manifest hash.
fn load_sets(manifest: &Manifest, paths: &OutPaths, role: &str) -> Result<Vec<SnapshotSet>> {
    let entries = manifest.entries(role);
    if entries.is_empty() {
        return Err(Error::InvalidInput(format!(
            "manifest lists no {role} files"
        )));
    }
    let mut sets = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = paths.root.join(&entry.path);
        let bytes = std::fs::read(&path)?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Format(format!(
                "'{}' does not match its manifest hash",
                path.display()
            )));
        }
        sets.push(io::snapshot_from_bytes(&bytes)?);
    }
    Ok(sets)
}

/// What `train` fitted, with any warnings the fits recorded.
#[derive(Debug)]
pub struct TrainSummary {
    pub config_hash: String,
    /// `(method name, model path)` for each fitted parametric model.
    pub trained: Vec<(String, PathBuf)>,
    /// `(method name, warning text)`, in fit order.
    pub warnings: Vec<(String, String)>,
    /// Methods that produce no stored model (fitted per test trajectory).
    pub deferred: Vec<String>,
}

/// Fit every parametric method in the configuration on the training files.
pub fn run_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let paths = OutPaths::new(cfg);
    let manifest = read_manifest_checked(cfg, &paths)?;
    let train_sets = load_sets(&manifest, &paths, "train")?;
    let map = cfg.build_map()?;
    let hash = cfg.config_hash();

    let mut trained = Vec::new();
    let mut warnings: Vec<(String, String)> = Vec::new();
    let mut deferred = Vec::new();
    for &method in &cfg.methods {
        if !method.is_parametric() {
            deferred.push(method.name().to_string());
            continue;
        }
        let (data, warns): (ModelData, Vec<Warning>) = match method {
            Method::Dmd => unreachable!("non-parametric methods deferred above"),
            Method::Pidmd => {
                let mut model = fit_pidmd(&train_sets, &map, cfg.ranks.tilde, cfg.ranks.hat)?;
                model.meta.seed = Some(cfg.seed);
                let warns = model.meta.warnings.clone();
                (ModelData::Pidmd((&model).into()), warns)
            }
            Method::Stacked => {
                let model = fit_stacked(&train_sets, &map, cfg.ranks.baseline)?;
                let warns = model.warnings.clone();
                (ModelData::Stacked((&model).into()), warns)
            }
            Method::Rkoi => {
                let model = fit_rkoi(&train_sets, &map, cfg.ranks.baseline)?;
                let warns = model.warnings.clone();
                (ModelData::Rkoi((&model).into()), warns)
            }
        };
        let path = paths.model(method);
        let file = ModelFile::new(data, hash.clone());
        write_atomic(&path, io::model_to_string(&file)?.as_bytes())?;
        for w in warns {
            warnings.push((method.name().to_string(), w.to_string()));
        }
        trained.push((method.name().to_string(), path));
    }

    Ok(TrainSummary {
        config_hash: hash,
        trained,
        warnings,
        deferred,
    })
}

fn read_model_checked(cfg: &RunConfig, paths: &OutPaths, method: Method) -> Result<ModelFile> {
    let path = paths.model(method);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "no model at '{}'; run `train` first",
            path.display()
        )));
    }
    let file = read_model(&path)?;
    let hash = cfg.config_hash();
    if file.config_hash != hash {
        return Err(Error::InvalidInput(format!(
            "model '{}' was trained under configuration {}, current configuration is {}",
            path.display(),
            file.config_hash,
            hash
        )));
    }
    if file.method_name() != method.name() {
        return Err(Error::Format(format!(
            "model '{}' holds a {} model, expected {}",
            path.display(),
            file.method_name(),
            method.name()
        )));
    }
    Ok(file)
}

/// Direct fit on the leading window of one test trajectory: the best-case
/// reference every parametric method is measured against.
fn fit_direct_dmd(cfg: &RunConfig, test_set: &SnapshotSet) -> Result<DmdModel> {
    let cols = cfg.train_steps.min(test_set.steps()) + 1;
    fit_dmd_set(&test_set.window(0, cols)?, cfg.ranks.baseline)
}

enum LoadedModel {
    Direct,
    Pidmd(pidmd::pidmd::PiDmdModel),
    Stacked(pidmd::baselines::StackedDmdModel),
    Rkoi(pidmd::baselines::ReducedOpInterpModel),
}

fn load_method(cfg: &RunConfig, paths: &OutPaths, method: Method) -> Result<LoadedModel> {
    Ok(match method {
        Method::Dmd => LoadedModel::Direct,
        Method::Pidmd => match read_model_checked(cfg, paths, method)?.model {
            ModelData::Pidmd(d) => LoadedModel::Pidmd(d.to_model()?),
            _ => unreachable!("method checked by read_model_checked"),
        },
        Method::Stacked => match read_model_checked(cfg, paths, method)?.model {
            ModelData::Stacked(d) => LoadedModel::Stacked(d.to_model()?),
            _ => unreachable!("method checked by read_model_checked"),
        },
        Method::Rkoi => match read_model_checked(cfg, paths, method)?.model {
            ModelData::Rkoi(d) => LoadedModel::Rkoi(d.to_model()?),
            _ => unreachable!("method checked by read_model_checked"),
        },
    })
}

fn first_column(set: &SnapshotSet) -> Vec<f64> {
    (0..set.dim()).map(|i| set.states[(i, 0)]).collect()
}

fn predict_with(
    model: &LoadedModel,
    cfg: &RunConfig,
    test_set: &SnapshotSet,
    steps: usize,
) -> Result<Prediction> {
    let x0 = first_column(test_set);
    let theta = &test_set.theta;
    match model {
        LoadedModel::Direct => predict_dmd(&fit_direct_dmd(cfg, test_set)?, &x0, steps),
        LoadedModel::Pidmd(m) => predict_pidmd(m, theta, &x0, steps),
        LoadedModel::Stacked(m) => predict_stacked(m, theta, &x0, steps),
        LoadedModel::Rkoi(m) => {
            // The interpolated-operator path refuses zero-step requests;
            // its stability guards do not depend on the horizon, so a
            // one-step prediction trimmed back yields the projected state.
            if steps == 0 {
                let pred = predict_rkoi(m, theta, &x0, 1)?;
                let states = RealMat::from_fn(pred.states.nrows(), 1, |i, _| pred.states[(i, 0)]);
                return Ok(Prediction { states, ..pred });
            }
            predict_rkoi(m, theta, &x0, steps)
        }
    }
}

fn extrapolation_note(pred: &Prediction) -> Option<String> {
    pred.extrapolated
        .then(|| "query parameter outside the training range".to_string())
}

/// How a single requested prediction ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictOutcome {
    Written,
    /// The model refused: divergence detected; a record was written.
    Diverged,
    /// A numerical failure was recorded instead of a trajectory.
    Failed,
}

/// What `predict` produced for one method at one test parameter.
#[derive(Debug)]
pub struct PredictSummary {
    pub outcome: PredictOutcome,
    pub trajectory_path: Option<PathBuf>,
    pub record_path: PathBuf,
    pub note: Option<String>,
}

/// Predict one test trajectory and leave both the trajectory and a
/// structured record (errors against truth, or the refusal reason) behind.
pub fn run_predict(
    cfg: &RunConfig,
    method: Method,
    test_index: usize,
    steps: usize,
) -> Result<PredictSummary> {
    if !cfg.methods.contains(&method) {
        return Err(Error::InvalidInput(format!(
            "method '{}' is not listed in the configuration",
            method.name()
        )));
    }
    if test_index >= cfg.test_thetas.len() {
        return Err(Error::InvalidInput(format!(
            "test index {test_index} out of range; configuration has {} test parameters",
            cfg.test_thetas.len()
        )));
    }
    let paths = OutPaths::new(cfg);
    let manifest = read_manifest_checked(cfg, &paths)?;
    let test_sets = load_sets(&manifest, &paths, "test")?;
    let test_set = &test_sets[test_index];
    let hash = cfg.config_hash();
    let model = load_method(cfg, &paths, method)?;
    let record_path = paths.prediction_record(method, test_index);

    let pred = match predict_with(&model, cfg, test_set, steps) {
        Ok(p) => p,
        Err(e @ Error::DivergenceDetected { .. }) => {
            let entry = EvalEntry::refused(test_set.theta.clone(), e.to_string());
            let record = PredictionRecord::new(
                hash,
                method.name().into(),
                steps,
                Some("divergence".into()),
                entry,
            );
            artifacts::write_record(&record_path, &record)?;
            return Ok(PredictSummary {
                outcome: PredictOutcome::Diverged,
                trajectory_path: None,
                record_path,
                note: Some(e.to_string()),
            });
        }
        Err(e @ (Error::SingularEigenvalue(_) | Error::NumericalFailure(_))) => {
            let entry = EvalEntry::refused(test_set.theta.clone(), e.to_string());
            let record = PredictionRecord::new(
                hash,
                method.name().into(),
                steps,
                Some("numerical".into()),
                entry,
            );
            artifacts::write_record(&record_path, &record)?;
            return Ok(PredictSummary {
                outcome: PredictOutcome::Failed,
                trajectory_path: None,
                record_path,
                note: Some(e.to_string()),
            });
        }
        Err(e) => return Err(e),
    };

    let out_set = SnapshotSet::new(
        pred.states.clone(),
        test_set.dt,
        test_set.theta.clone(),
        format!("pred_{}_{}", method.name(), test_set.label),
    )?;
    let traj_path = paths.prediction(method, test_index);
    write_atomic(&traj_path, &io::snapshot_to_bytes(&out_set))?;

    // Score against the overlapping truth columns.
    let overlap = (test_set.steps().min(steps)) + 1;
    let truth = test_set.states.as_ref().subcols(0, overlap);
    let pred_window = out_set.states.as_ref().subcols(0, overlap);
    let series = time_averaged_error(truth, pred_window)?;
    let mut note = extrapolation_note(&pred);
    if overlap < steps + 1 {
        let msg = format!("scored on the first {overlap} of {} columns", steps + 1);
        note = Some(match note {
            Some(n) => format!("{n}; {msg}"),
            None => msg,
        });
    }
    let entry = EvalEntry::from_series(test_set.theta.clone(), series, note.clone());
    let record = PredictionRecord::new(hash, method.name().into(), steps, None, entry);
    artifacts::write_record(&record_path, &record)?;

    Ok(PredictSummary {
        outcome: PredictOutcome::Written,
        trajectory_path: Some(traj_path),
        record_path,
        note,
    })
}

/// Worker count from an override value (`None` means unset), capped by the
/// job count.
fn parse_workers(raw: Option<&str>, jobs: usize) -> Result<usize> {
    let n = match raw {
        Some(v) => {
            let parsed: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{WORKERS_ENV}='{v}' is not a positive integer")))?;
            if parsed == 0 {
                return Err(Error::InvalidInput(format!("{WORKERS_ENV}=0 requests no workers")));
            }
            parsed
        }
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok(n.min(jobs).max(1))
}

/// [`parse_workers`] on the override variable.
fn worker_count(jobs: usize) -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => parse_workers(Some(&v), jobs),
        Err(std::env::VarError::NotPresent) => parse_workers(None, jobs),
        Err(e) => Err(Error::InvalidInput(format!("{WORKERS_ENV}: {e}"))),
    }
}

/// Run `jobs` closures over a fixed-size pool. Results land in slots
/// indexed by job, so the output order never depends on scheduling.
pub fn run_jobs<T, F>(workers: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send + Sync,
    F: Fn(usize) -> Result<T> + Sync,
{
    let slots: Vec<OnceLock<Result<T>>> = (0..jobs).map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = f(i);
                let _ = slots[i].set(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("every job slot is filled"))
        .collect()
}

/// Outcome of one (method, test parameter) evaluation job.
struct JobResult {
    entry: EvalEntry,
    /// Per-column errors aligned with the truth columns; `None` marks a
    /// weak-norm column (or everything, for a refused prediction).
    column_errors: Vec<Option<f64>>,
}

fn evaluate_one(
    model: &LoadedModel,
    cfg: &RunConfig,
    test_set: &SnapshotSet,
) -> Result<JobResult> {
    let horizon = cfg.horizon;
    if test_set.steps() < horizon {
        return Err(Error::InvalidInput(format!(
            "test trajectory '{}' has {} transitions, horizon needs {horizon}",
            test_set.label,
            test_set.steps()
        )));
    }
    let pred = match predict_with(model, cfg, test_set, horizon) {
        Ok(p) => p,
        Err(Error::DivergenceDetected { theta, reason }) => {
            return Ok(JobResult {
                entry: EvalEntry::refused(theta, reason),
                column_errors: vec![None; horizon + 1],
            });
        }
        Err(e) => return Err(e),
    };
    let truth = test_set.states.as_ref().subcols(0, horizon + 1);
    let series = time_averaged_error(truth, pred.states.as_ref())?;
    let entry = EvalEntry::from_series(test_set.theta.clone(), series, extrapolation_note(&pred));

    let n = test_set.dim();
    let mut column_errors = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let t: Vec<f64> = (0..n).map(|i| truth[(i, k)]).collect();
        let p: Vec<f64> = (0..n).map(|i| pred.states[(i, k)]).collect();
        column_errors.push(match residual_error(&t, &p) {
            Ok(d) => Some(d),
            Err(Error::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        });
    }
    Ok(JobResult { entry, column_errors })
}

/// What `evaluate` wrote.
#[derive(Debug)]
pub struct EvaluateSummary {
    pub config_hash: String,
    /// `(method name, report path, diverged entries)`.
    pub reports: Vec<(String, PathBuf, usize)>,
    pub workers: usize,
    pub had_divergence: bool,
}

/// Score every configured method at every test parameter and write one
/// report and one per-column error table per method.
pub fn run_evaluate(cfg: &RunConfig) -> Result<EvaluateSummary> {
    let paths = OutPaths::new(cfg);
    let manifest = read_manifest_checked(cfg, &paths)?;
    let test_sets = load_sets(&manifest, &paths, "test")?;
    let hash = cfg.config_hash();

    let models: Vec<(Method, LoadedModel)> = cfg
        .methods
        .iter()
        .map(|&m| Ok((m, load_method(cfg, &paths, m)?)))
        .collect::<Result<_>>()?;

    let jobs = models.len() * test_sets.len();
    let workers = worker_count(jobs)?;
    let per_method = test_sets.len();
    let results: Vec<JobResult> = run_jobs(workers, jobs, |i| {
        let (_, model) = &models[i / per_method];
        evaluate_one(model, cfg, &test_sets[i % per_method])
    })?;

    let mut reports = Vec::with_capacity(models.len());
    let mut had_divergence = false;
    for (mi, (method, _)) in models.iter().enumerate() {
        let chunk = &results[mi * per_method..(mi + 1) * per_method];
        let report = EvalReport {
            method: method.name().into(),
            config_hash: hash.clone(),
            horizon: cfg.horizon,
            entries: chunk.iter().map(|r| r.entry.clone()).collect(),
        };
        let diverged = report.entries.iter().filter(|e| e.diverged).count();
        had_divergence |= diverged > 0;
        let report_path = paths.report(*method);
        artifacts::write_report(&report_path, &ReportFile::new(report))?;

        let mut csv = format!("# config_hash={hash}\n");
        csv.push_str("step");
        for set in &test_sets {
            csv.push(',');
            csv.push_str(&csv_field(&set.label));
        }
        csv.push('\n');
        for k in 0..=cfg.horizon {
            csv.push_str(&k.to_string());
            for r in chunk {
                csv.push(',');
                if let Some(d) = r.column_errors[k] {
                    csv.push_str(&fmt_f64(d));
                }
            }
            csv.push('\n');
        }
        write_atomic(&paths.delta_csv(*method), csv.as_bytes())?;

        reports.push((method.name().to_string(), report_path, diverged));
    }

    Ok(EvaluateSummary {
        config_hash: hash,
        reports,
        workers,
        had_divergence,
    })
}

/// What `compare` wrote.
#[derive(Debug)]
pub struct CompareSummary {
    pub config_hash: String,
    pub comparison: Comparison,
    pub comparison_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Merge the per-method reports into comparison tables and plots.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareSummary> {
    let paths = OutPaths::new(cfg);
    let hash = cfg.config_hash();

    let mut reports = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let path = paths.report(method);
        if !path.exists() {
            return Err(Error::InvalidInput(format!(
                "no report at '{}'; run `evaluate` first",
                path.display()
            )));
        }
        let file = artifacts::read_report(&path)?;
        if file.report.config_hash != hash {
            return Err(Error::InvalidInput(format!(
                "report '{}' belongs to configuration {}, current configuration is {}",
                path.display(),
                file.report.config_hash,
                hash
            )));
        }
        reports.push(file.report);
    }
    let comparison = compare_methods(&reports)?;

    let mut rows_csv = format!("# config_hash={hash}\n");
    rows_csv.push_str("method,test_index,theta,time_averaged_delta,diverged,excluded_columns,note\n");
    for report in &reports {
        for (i, entry) in report.entries.iter().enumerate() {
            let theta = entry
                .theta
                .iter()
                .map(|&v| fmt_f64(v))
                .collect::<Vec<_>>()
                .join(";");
            rows_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&report.method),
                i,
                csv_field(&theta),
                opt_f64(entry.time_averaged),
                entry.diverged,
                entry.excluded_columns,
                csv_field(entry.note.as_deref().unwrap_or("")),
            ));
        }
    }
    write_atomic(&paths.comparison_csv(), rows_csv.as_bytes())?;

    let mut summary_csv = format!("# config_hash={hash}\n");
    summary_csv.push_str("method,count,diverged,min,q1,median,q3,max\n");
    for row in &comparison.rows {
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&row.method),
            row.count,
            row.diverged,
            opt_f64(row.min),
            opt_f64(row.q1),
            opt_f64(row.median),
            opt_f64(row.q3),
            opt_f64(row.max),
        ));
    }
    write_atomic(&paths.summary_csv(), summary_csv.as_bytes())?;

    // Scalar parameters plot against their value; higher-dimensional ones
    // against the test index.
    let scalar = cfg.test_thetas.iter().all(|t| t.len() == 1);
    let series: Vec<PlotSeries> = reports
        .iter()
        .map(|report| PlotSeries {
            name: report.method.clone(),
            color: method_color(&report.method).into(),
            points: report
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let x = if scalar { e.theta[0] } else { i as f64 };
                    (x, if e.diverged { None } else { e.time_averaged })
                })
                .collect(),
        })
        .collect();
    let x_label = if scalar { "parameter" } else { "test index" };
    let line = line_plot_svg(
        &format!("{}: time-averaged relative error", cfg.name),
        x_label,
        "relative error",
        &series,
        &hash,
    );
    write_atomic(&paths.delta_plot(), line.as_bytes())?;
    let boxes = artifacts::box_plot_svg(
        &format!("{}: error distribution per method", cfg.name),
        "relative error",
        &comparison.rows,
        &hash,
    );
    write_atomic(&paths.box_plot(), boxes.as_bytes())?;

    Ok(CompareSummary {
        config_hash: hash,
        comparison,
        comparison_csv: paths.comparison_csv(),
        summary_csv: paths.summary_csv(),
        plots: vec![paths.delta_plot(), paths.box_plot()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MapSpec, Normalization, Ranks};
    use pidmd::pidmd::ParamFn;
    use std::path::Path;

    fn tiny_affine_config(root: &Path) -> RunConfig {
        RunConfig {
            name: "tiny".into(),
            seed: 11,
            out_dir: root.to_string_lossy().into_owned(),
            data: DataSpec::Affine {
                dim: 5,
                spectral_radius: 0.9,
                noise_std: 0.0,
            },
            param_map: MapSpec {
                dim: 1,
                funcs: vec![ParamFn::Coord { index: 0 }],
            },
            normalization: Normalization::FitDefault,
            train_thetas: vec![vec![0.2], vec![0.5], vec![0.8]],
            test_thetas: vec![vec![0.35], vec![0.65]],
            train_steps: 25,
            transient_skip: 0,
            horizon: 15,
            ranks: Ranks {
                tilde: 10,
                hat: 5,
                baseline: 5,
            },
            methods: vec![Method::Dmd, Method::Pidmd, Method::Stacked, Method::Rkoi],
        }
    }

    #[test]
    fn generate_train_evaluate_compare_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_affine_config(dir.path());

        let gen = run_generate(&cfg).unwrap();
        assert_eq!(gen.train_files, 3);
        assert_eq!(gen.test_files, 2);
        assert!(gen.manifest_path.exists());
        assert!(gen.ground_truth_path.as_ref().unwrap().exists());

        let train = run_train(&cfg).unwrap();
        assert_eq!(train.trained.len(), 3, "dmd defers, the rest store models");
        assert_eq!(train.deferred, vec!["dmd"]);

        let eval = run_evaluate(&cfg).unwrap();
        assert_eq!(eval.reports.len(), 4);
        assert!(!eval.had_divergence);

        let cmp = run_compare(&cfg).unwrap();
        assert_eq!(cmp.comparison.rows.len(), 4);
        assert!(cmp.comparison_csv.exists());
        assert!(cmp.summary_csv.exists());
        for p in &cmp.plots {
            assert!(p.exists());
        }
        // Noiseless linear data at full state rank: the direct fit, the
        // parametric fit and operator interpolation all recover the family.
        // Mode blending keeps one global spectrum, so it is merely bounded.
        for row in &cmp.comparison.rows {
            assert_eq!(row.diverged, 0);
            let median = row.median.unwrap();
            if row.method == "stacked" {
                assert!(median.is_finite(), "{row:?}");
            } else {
                assert!(median < 1e-4, "{row:?}");
            }
        }
    }

    #[test]
    fn stale_artifacts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_affine_config(dir.path());
        run_generate(&cfg).unwrap();

        let mut changed = cfg.clone();
        changed.seed = 12;
        let err = run_train(&changed).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
        assert!(err.to_string().contains("configuration"));

        // Corrupting a data file breaks its manifest hash.
        run_train(&cfg).unwrap();
        let victim = dir.path().join("data").join("train_000.pdmd");
        let mut bytes = std::fs::read(&victim).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&victim, &bytes).unwrap();
        assert!(matches!(run_train(&cfg), Err(Error::Format(_))));
    }

    #[test]
    fn predict_writes_trajectory_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_affine_config(dir.path());
        run_generate(&cfg).unwrap();
        run_train(&cfg).unwrap();

        let out = run_predict(&cfg, Method::Pidmd, 1, cfg.horizon).unwrap();
        assert_eq!(out.outcome, PredictOutcome::Written);
        let traj = io::read_snapshot(out.trajectory_path.as_ref().unwrap()).unwrap();
        assert_eq!(traj.states.ncols(), cfg.horizon + 1);
        let record = artifacts::read_record(&out.record_path).unwrap();
        assert!(record.error.is_none());
        assert!(record.entry.time_averaged.unwrap() < 1e-4);

        // Zero steps produce the single projected column, for every method.
        for method in cfg.methods.clone() {
            let out = run_predict(&cfg, method, 0, 0).unwrap();
            assert_eq!(out.outcome, PredictOutcome::Written, "{}", method.name());
            let one = io::read_snapshot(out.trajectory_path.as_ref().unwrap()).unwrap();
            assert_eq!(one.states.ncols(), 1);
        }

        assert!(matches!(
            run_predict(&cfg, Method::Pidmd, 99, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn job_pool_keeps_slot_order_and_propagates_errors() {
        let out = run_jobs(4, 9, |i| Ok::<usize, Error>(i * i)).unwrap();
        assert_eq!(out, vec![0, 1, 4, 9, 16, 25, 36, 49, 64]);

        let err = run_jobs(3, 5, |i| {
            if i == 2 {
                Err(Error::NumericalFailure("job 2".into()))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(err.to_string().contains("job 2"));
    }

    #[test]
    fn worker_override_is_validated() {
        assert_eq!(parse_workers(Some("3"), 8).unwrap(), 3);
        assert_eq!(parse_workers(Some("3"), 2).unwrap(), 2, "capped by job count");
        assert!(parse_workers(None, 8).unwrap() >= 1);
        assert!(parse_workers(Some("zero"), 8).is_err());
        assert!(parse_workers(Some("0"), 8).is_err());
    }
}
