//! Experiment configuration and the pipeline steps behind the command-line
//! verbs: dataset generation, initialization, (paired) training, evaluation,
//! feature rendering, model verification and the full multi-seed repro run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{self, Manifest, PageSet, PatchSampler, Split, CLASS_NAMES};
use crate::error::{Error, Result};
use crate::eval::{evaluate, feature_sheet, render_features, render_overlay, Metrics};
use crate::init::{init_lda, init_random, InitMethod, InitReport};
use crate::lda::{CovarianceMode, FitOptions};
use crate::linalg::DEFAULT_RIDGE;
use crate::network::{
    document_architecture, receptive_field, train_from, LayerSpec, Model, Network, Provenance, TrainConfig,
    TrainingState,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub pages: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            pages: 8,
            width: 240,
            height: 320,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub method: InitMethod,
    /// Patches drawn for the LDA fits.
    pub k: usize,
    pub ridge: f64,
    pub covariance: CovarianceMode,
    /// Class-balanced patch sampling for initialization and training.
    pub balanced: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            method: InitMethod::Lda,
            k: 16_000,
            ridge: DEFAULT_RIDGE,
            covariance: CovarianceMode::PerClass,
            balanced: true,
        }
    }
}

impl InitConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            ridge: self.ridge,
            covariance: self.covariance,
        }
    }
}

/// Everything an experiment needs; stored as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Existing dataset; when absent a synthetic one is generated.
    pub manifest: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub architecture: Vec<LayerSpec>,
    pub init: InitConfig,
    pub train: TrainConfig,
    /// Stride of the test-split evaluations.
    pub eval_stride: usize,
    /// Stride of the per-epoch validation curve; 0 disables the curve.
    pub curve_stride: usize,
    pub output_dir: PathBuf,
    /// One paired run per seed.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            dataset: DatasetConfig::default(),
            architecture: document_architecture(),
            init: InitConfig::default(),
            train: TrainConfig::default(),
            eval_stride: 1,
            curve_stride: 4,
            output_dir: PathBuf::from("out"),
            seeds: run_seeds(0, 10),
        }
    }
}

/// Seeds of `runs` paired runs derived from one master seed.
pub fn run_seeds(master: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|r| derive_seed(master, r)).collect()
}

impl ExperimentConfig {
    /// The desk-scale experiment: 10 paired runs of 10 epochs × 10k patches
    /// on small synthetic pages, with mini-batches of 64 and the shared
    /// pooled covariance in the discriminant functions.
    pub fn desk(master_seed: u64) -> Self {
        Self {
            init: InitConfig {
                covariance: CovarianceMode::Shared,
                ..InitConfig::default()
            },
            train: TrainConfig {
                learning_rate: 0.01,
                batch_size: 64,
                epochs: 10,
                samples_per_epoch: 10_000,
                seed: 0,
            },
            seeds: run_seeds(master_seed, 10),
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(3, data::CLASS_COUNT, &self.architecture)
    }

    /// Checks every precondition that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.architecture.is_empty() {
            return Err(Error::InvalidInput("architecture has no layers".into()));
        }
        let net = self.network()?;
        if self.manifest.is_none() {
            let d = &self.dataset;
            if d.pages < 2 {
                return Err(Error::InvalidInput(
                    "a generated dataset needs at least 2 pages".into(),
                ));
            }
            if d.width < data::MIN_PAGE_SIZE || d.height < data::MIN_PAGE_SIZE {
                return Err(Error::InvalidInput(format!(
                    "pages must be at least {0}x{0}",
                    data::MIN_PAGE_SIZE
                )));
            }
            let (rf_h, rf_w) = receptive_field(&self.architecture);
            if (d.height as usize) < rf_h || (d.width as usize) < rf_w {
                return Err(Error::InvalidInput(format!(
                    "pages are smaller than the {rf_w}x{rf_h} receptive field"
                )));
            }
        }
        if self.init.method == InitMethod::Lda {
            check_k(&net, self.init.k)?;
        }
        if !(self.init.ridge >= 0.0 && self.init.ridge.is_finite()) {
            return Err(Error::InvalidInput("ridge must be non-negative".into()));
        }
        self.train.validate()?;
        if self.eval_stride == 0 {
            return Err(Error::InvalidInput("evaluation stride must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("no seeds given".into()));
        }
        Ok(())
    }
}

fn check_k(net: &Network, k: usize) -> Result<()> {
    for (i, g) in net.grids().iter().enumerate() {
        if k * g.positions() <= net.class_count() {
            return Err(Error::InvalidInput(format!(
                "k = {k} is too small for layer {}",
                i + 1
            )));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates a synthetic dataset and returns its manifest path.
pub fn cmd_gen(seed: u64, pages: usize, width: u32, height: u32, out_dir: &Path) -> Result<PathBuf> {
    data::write_synthetic_dataset(out_dir, seed, pages, width, height)
}

/// Dataset splits used by an experiment.
pub struct Dataset {
    pub manifest: Manifest,
    pub train: PageSet,
    pub validation: Option<PageSet>,
    pub test: PageSet,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let (manifest, root) = Manifest::load(manifest_path)?;
        let train = manifest.load_split(&root, Split::Train)?;
        let test = manifest.load_split(&root, Split::Test)?;
        let validation = if manifest.validation.is_empty() {
            None
        } else {
            Some(manifest.load_split(&root, Split::Validation)?)
        };
        Ok(Self {
            manifest,
            train,
            validation,
            test,
        })
    }

    pub fn split(&self, split: Split) -> Result<&PageSet> {
        match split {
            Split::Train => Ok(&self.train),
            Split::Test => Ok(&self.test),
            Split::Validation => self
                .validation
                .as_ref()
                .ok_or_else(|| Error::Data("dataset has no validation pages".into())),
        }
    }

    /// Validation pages, or the test pages when there are none.
    pub fn curve_split(&self) -> &PageSet {
        self.validation.as_ref().unwrap_or(&self.test)
    }

    pub fn sampler(&self, net: &Network, balanced: bool) -> Result<PatchSampler<'_>> {
        let (h, w) = net.receptive_field();
        PatchSampler::new(&self.train, h, w, balanced)
    }
}

/// Initializes a network with `method` and `seed`.
pub fn initialize(
    net: &Network,
    sampler: &PatchSampler<'_>,
    init: &InitConfig,
    method: InitMethod,
    seed: u64,
) -> Result<(Model, InitReport)> {
    match method {
        InitMethod::Lda => {
            let (net, report) = init_lda(net, sampler, seed, init.k, &init.fit_options())?;
            let provenance = Provenance {
                init_method: InitMethod::Lda,
                seed,
                lda_sample_count: Some(init.k),
            };
            Ok((Model::new(net, provenance), report))
        }
        InitMethod::Random => {
            let started = Instant::now();
            let net = init_random(net, seed);
            let provenance = Provenance {
                init_method: InitMethod::Random,
                seed,
                lda_sample_count: None,
            };
            let mut report = crate::init::random_report();
            report.duration_secs = started.elapsed().as_secs_f64();
            Ok((Model::new(net, provenance), report))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitOutcome {
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    pub metrics: Metrics,
    pub report: InitReport,
}

/// Initializes one model, evaluates it untrained on the test split and
/// writes `<name>.json`, `<name>_init_report.json` and
/// `<name>_untrained_metrics.{json,csv}` into the output directory.
pub fn cmd_init(config: &ExperimentConfig, manifest: &Path, seed: u64, name: &str) -> Result<InitOutcome> {
    config.validate()?;
    let dataset = Dataset::load(manifest)?;
    let net = config.network()?;
    let sampler = dataset.sampler(&net, config.init.balanced)?;
    let (model, report) = initialize(&net, &sampler, &config.init, config.init.method, seed)?;
    let metrics = evaluate(&model.network, &dataset.test, config.eval_stride)?.metrics();

    let dir = &config.output_dir;
    create_dir(dir)?;
    let model_path = dir.join(format!("{name}.json"));
    model.save(&model_path)?;
    let report_path = dir.join(format!("{name}_init_report.json"));
    write(&report_path, &serde_json::to_string_pretty(&report)?)?;
    metrics.save(
        &dir.join(format!("{name}_untrained_metrics.json")),
        &dir.join(format!("{name}_untrained_metrics.csv")),
        &dataset.manifest.class_names,
    )?;
    Ok(InitOutcome {
        model_path,
        report_path,
        metrics,
        report,
    })
}

/// One row of a training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub loss: Option<f64>,
    pub mean_iu: f64,
    pub accuracy: f64,
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("epoch,loss,mean_iu,accuracy\n");
    for p in points {
        let loss = p.loss.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{loss},{},{}\n", p.epoch, p.mean_iu, p.accuracy));
    }
    out
}

/// Trains `model` up to `target_epochs` epochs in total. A model that
/// already carries training state continues its own schedule, which replays
/// the trajectory of an uninterrupted run.
pub fn train_model(
    model: Model,
    sampler: &PatchSampler<'_>,
    schedule: &TrainConfig,
    target_epochs: usize,
    curve: Option<(&PageSet, usize)>,
) -> Result<(Model, Vec<CurvePoint>)> {
    let (config, start) = match &model.training {
        Some(state) => {
            let resumed = TrainConfig {
                learning_rate: state.learning_rate,
                batch_size: state.batch_size,
                epochs: target_epochs,
                samples_per_epoch: state.samples_per_epoch,
                seed: state.seed,
            };
            let requested = TrainConfig {
                epochs: target_epochs,
                ..schedule.clone()
            };
            if resumed != requested {
                log::warn!("continuing the schedule stored in the model; training flags are ignored");
            }
            (resumed, state.epochs_completed)
        }
        None => (
            TrainConfig {
                epochs: target_epochs,
                ..schedule.clone()
            },
            0,
        ),
    };
    if target_epochs < start {
        return Err(Error::InvalidInput(format!(
            "model already completed {start} epochs, more than the requested {target_epochs}"
        )));
    }
    let mut points = Vec::with_capacity(target_epochs - start + 1);
    let net = train_from(model.network, sampler, &config, start, |report| {
        if let Some((pages, stride)) = curve {
            let e = evaluate(report.network, pages, stride)?;
            points.push(CurvePoint {
                epoch: report.epoch,
                loss: report.mean_loss,
                mean_iu: e.mean_iu(),
                accuracy: e.accuracy(),
            });
        }
        Ok(())
    })?;
    let trained = Model {
        network: net,
        provenance: model.provenance,
        training: Some(TrainingState {
            seed: config.seed,
            epochs_completed: target_epochs,
            learning_rate: config.learning_rate,
            batch_size: config.batch_size,
            samples_per_epoch: config.samples_per_epoch,
        }),
    };
    Ok((trained, points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub curve_path: PathBuf,
    pub curve: Vec<CurvePoint>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

/// Trains each model on the identical patch stream (same seed) and writes
/// `<stem>_trained.json` plus `<stem>_curve.csv` for each.
pub fn cmd_train(
    config: &ExperimentConfig,
    manifest: &Path,
    models: &[PathBuf],
    curve_stride: usize,
) -> Result<Vec<TrainOutcome>> {
    config.train.validate()?;
    if curve_stride == 0 {
        return Err(Error::InvalidInput("curve stride must be at least 1".into()));
    }
    let dataset = Dataset::load(manifest)?;
    let loaded = models.iter().map(|p| Model::load(p)).collect::<Result<Vec<_>>>()?;
    create_dir(&config.output_dir)?;
    let mut outcomes = Vec::with_capacity(models.len());
    for (path, model) in models.iter().zip(loaded) {
        let sampler = dataset.sampler(&model.network, config.init.balanced)?;
        let (trained, curve) = train_model(
            model,
            &sampler,
            &config.train,
            config.train.epochs,
            Some((dataset.curve_split(), curve_stride)),
        )?;
        let name = stem(path);
        let model_path = config.output_dir.join(format!("{name}_trained.json"));
        trained.save(&model_path)?;
        let curve_path = config.output_dir.join(format!("{name}_curve.csv"));
        write(&curve_path, &curve_csv(&curve))?;
        outcomes.push(TrainOutcome {
            model_path,
            curve_path,
            curve,
        });
    }
    Ok(outcomes)
}

/// Evaluates a model on one split; writes `metrics.json`, `metrics.csv` and
/// per-page overlay and prediction PNGs.
pub fn cmd_eval(model: &Path, manifest: &Path, split: Split, stride: usize, out_dir: &Path) -> Result<Metrics> {
    let model = Model::load(model)?;
    let dataset = Dataset::load(manifest)?;
    let pages = dataset.split(split)?;
    let evaluation = evaluate(&model.network, pages, stride)?;
    let metrics = evaluation.metrics();
    create_dir(out_dir)?;
    metrics.save(
        &out_dir.join("metrics.json"),
        &out_dir.join("metrics.csv"),
        &dataset.manifest.class_names,
    )?;
    for (i, page) in evaluation.pages.iter().enumerate() {
        let overlay = render_overlay(&page.truth, &page.pred, data::BACKGROUND)?;
        let path = out_dir.join(format!("overlay_{i:03}.png"));
        overlay.save(&path).map_err(|e| Error::image(&path, e))?;
        let path = out_dir.join(format!("prediction_{i:03}.png"));
        page.pred.to_color().save(&path).map_err(|e| Error::image(&path, e))?;
    }
    Ok(metrics)
}

/// Renders the first-layer filters of a model into `features.png`.
pub fn cmd_features(model: &Path, out_dir: &Path, scale: u32) -> Result<PathBuf> {
    let model = Model::load(model)?;
    let layer = &model.network.layers()[0];
    let tiles = render_features(layer, model.network.input_channels())?;
    let sheet = feature_sheet(&tiles, 8, scale.max(1));
    create_dir(out_dir)?;
    let path = out_dir.join("features.png");
    sheet.save(&path).map_err(|e| Error::image(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Consistency checks on a model file.
pub fn verify_model(model: &Model) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };
    let net = &model.network;
    let finite = net
        .layers()
        .iter()
        .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()));
    push("finite", finite, "all weights and biases are finite".into());
    push(
        "receptive_field",
        true,
        format!("{:?} with hidden grids {:?}", net.receptive_field(), net.hidden_shapes()),
    );
    let untrained = model.training.is_none();
    match model.provenance.init_method {
        InitMethod::Random if untrained => {
            let worst = net
                .layers()
                .iter()
                .map(|l| {
                    let bound = 1.0 / (l.fan_in() as f64).sqrt();
                    l.weights.max_abs() / bound
                })
                .fold(0.0, f64::max);
            push(
                "random_bound",
                worst <= 1.0,
                format!("largest |w|·√fan_in = {worst:.6}"),
            );
            let zero = net.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0));
            push("zero_bias", zero, "biases are zero".into());
        }
        InitMethod::Lda if untrained => {
            let zero = net.hidden().iter().all(|l| l.bias.iter().all(|&b| b == 0.0));
            push("zero_hidden_bias", zero, "hidden biases are zero".into());
            let worst = net
                .hidden()
                .iter()
                .flat_map(|l| (0..l.neurons()).map(move |j| l.weights.row(j)))
                .map(|row| (row.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
                .fold(0.0, f64::max);
            push(
                "unit_rows",
                worst < 1e-9,
                format!("largest deviation of a hidden row norm from 1: {worst:.3e}"),
            );
        }
        _ => push(
            "trained",
            true,
            format!(
                "{} epochs completed",
                model.training.as_ref().map_or(0, |t| t.epochs_completed)
            ),
        ),
    }
    checks
}

/// Metrics of one network in one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub untrained: Metrics,
    pub trained: Metrics,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub lda: RunMetrics,
    pub random: RunMetrics,
    pub lda_spectra: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub lda_untrained_mean_iu: f64,
    pub random_untrained_mean_iu: f64,
    pub lda_untrained_std: f64,
    pub random_untrained_std: f64,
    pub lda_trained_mean_iu: f64,
    pub random_trained_mean_iu: f64,
    pub lda_trained_std: f64,
    pub random_trained_std: f64,
    /// Runs in which the trained LDA network is at least as good.
    pub lda_wins: usize,
    pub runs: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Summary {
    pub fn from_runs(runs: &[RunResult]) -> Self {
        let pick = |f: &dyn Fn(&RunResult) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let (lu, lus) = pick(&|r| r.lda.untrained.mean_iu);
        let (ru, rus) = pick(&|r| r.random.untrained.mean_iu);
        let (lt, lts) = pick(&|r| r.lda.trained.mean_iu);
        let (rt, rts) = pick(&|r| r.random.trained.mean_iu);
        Self {
            lda_untrained_mean_iu: lu,
            random_untrained_mean_iu: ru,
            lda_untrained_std: lus,
            random_untrained_std: rus,
            lda_trained_mean_iu: lt,
            random_trained_mean_iu: rt,
            lda_trained_std: lts,
            random_trained_std: rts,
            lda_wins: runs
                .iter()
                .filter(|r| r.lda.trained.mean_iu >= r.random.trained.mean_iu)
                .count(),
            runs: runs.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    pub dataset_secs: f64,
    /// Initialization of both networks plus their untrained evaluation.
    pub init_and_untrained_eval_secs: f64,
    pub lda_init_secs: Vec<f64>,
    pub training_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub config: ExperimentConfig,
    pub manifest: PathBuf,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
    pub durations: Durations,
}

const METRICS_FILE: &str = "metrics.csv";
const CURVES_FILE: &str = "curves.csv";
const SUMMARY_FILE: &str = "summary.csv";
const REPORT_FILE: &str = "report.json";

fn metrics_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("run,seed,init,stage,mean_iu,accuracy");
    for name in CLASS_NAMES {
        out.push_str(&format!(",iu_{name}"));
    }
    out.push('\n');
    for r in runs {
        for (init, m) in [("lda", &r.lda), ("random", &r.random)] {
            for (stage, metrics) in [("untrained", &m.untrained), ("trained", &m.trained)] {
                out.push_str(&format!(
                    "{},{},{init},{stage},{},{}",
                    r.run, r.seed, metrics.mean_iu, metrics.accuracy
                ));
                for iu in &metrics.per_class_iu {
                    out.push(',');
                    if let Some(v) = iu {
                        out.push_str(&v.to_string());
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

fn curves_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("run,seed,init,epoch,loss,mean_iu,accuracy\n");
    for r in runs {
        for (init, m) in [("lda", &r.lda), ("random", &r.random)] {
            for p in &m.curve {
                let loss = p.loss.map(|l| l.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{init},{},{loss},{},{}\n",
                    r.run, r.seed, p.epoch, p.mean_iu, p.accuracy
                ));
            }
        }
    }
    out
}

fn summary_csv(s: &Summary) -> String {
    format!(
        "init,stage,mean_iu,std_mean_iu\n\
         lda,untrained,{},{}\n\
         random,untrained,{},{}\n\
         lda,trained,{},{}\n\
         random,trained,{},{}\n",
        s.lda_untrained_mean_iu,
        s.lda_untrained_std,
        s.random_untrained_mean_iu,
        s.random_untrained_std,
        s.lda_trained_mean_iu,
        s.lda_trained_std,
        s.random_trained_mean_iu,
        s.random_trained_std,
    )
}

/// The full paired experiment: for every seed, an LDA and a random network
/// are initialized, evaluated untrained on the test split, trained on the
/// same patch stream and evaluated again.
///
/// Writes `metrics.csv`, `curves.csv`, `summary.csv` and `report.json` to
/// the output directory. Only `report.json` contains timings.
pub fn run_repro(config: &ExperimentConfig) -> Result<ReproReport> {
    config.validate()?;
    let started = Instant::now();
    let out = &config.output_dir;
    create_dir(out)?;
    let manifest = match &config.manifest {
        Some(m) => m.clone(),
        None => {
            let d = &config.dataset;
            cmd_gen(d.seed, d.pages, d.width, d.height, &out.join("data"))?
        }
    };
    let dataset = Dataset::load(&manifest)?;
    let mut durations = Durations {
        dataset_secs: started.elapsed().as_secs_f64(),
        ..Durations::default()
    };
    write(&out.join("config.json"), &config.to_json()?)?;

    let net = config.network()?;
    let sampler = dataset.sampler(&net, config.init.balanced)?;
    let curve = (config.curve_stride > 0).then(|| (dataset.curve_split(), config.curve_stride));
    let mut runs = Vec::with_capacity(config.seeds.len());
    for (run, &seed) in config.seeds.iter().enumerate() {
        let phase = Instant::now();
        let (lda, report) = initialize(&net, &sampler, &config.init, InitMethod::Lda, derive_seed(seed, 0))?;
        durations.lda_init_secs.push(report.duration_secs);
        let (random, _) = initialize(&net, &sampler, &config.init, InitMethod::Random, derive_seed(seed, 1))?;
        let lda_untrained = evaluate(&lda.network, &dataset.test, config.eval_stride)?.metrics();
        let random_untrained = evaluate(&random.network, &dataset.test, config.eval_stride)?.metrics();
        durations.init_and_untrained_eval_secs += phase.elapsed().as_secs_f64();
        log::info!(
            "run {run}: untrained mean IU lda {:.4} random {:.4}",
            lda_untrained.mean_iu,
            random_untrained.mean_iu
        );

        let phase = Instant::now();
        let schedule = TrainConfig {
            seed: derive_seed(seed, 2),
            ..config.train.clone()
        };
        let mut trained = Vec::with_capacity(2);
        for model in [lda, random] {
            let (model, points) = train_model(model, &sampler, &schedule, schedule.epochs, curve)?;
            let metrics = evaluate(&model.network, &dataset.test, config.eval_stride)?.metrics();
            trained.push((metrics, points));
        }
        durations.training_secs += phase.elapsed().as_secs_f64();
        let (random_trained, random_curve) = trained.pop().expect("two models");
        let (lda_trained, lda_curve) = trained.pop().expect("two models");
        log::info!(
            "run {run}: trained mean IU lda {:.4} random {:.4}",
            lda_trained.mean_iu,
            random_trained.mean_iu
        );
        runs.push(RunResult {
            run,
            seed,
            lda: RunMetrics {
                untrained: lda_untrained,
                trained: lda_trained,
                curve: lda_curve,
            },
            random: RunMetrics {
                untrained: random_untrained,
                trained: random_trained,
                curve: random_curve,
            },
            lda_spectra: report.spectra,
        });
    }

    let summary = Summary::from_runs(&runs);
    write(&out.join(METRICS_FILE), &metrics_csv(&runs))?;
    write(&out.join(CURVES_FILE), &curves_csv(&runs))?;
    write(&out.join(SUMMARY_FILE), &summary_csv(&summary))?;
    durations.total_secs = started.elapsed().as_secs_f64();
    let report = ReproReport {
        config: config.clone(),
        manifest,
        runs,
        summary,
        durations,
    };
    write(&out.join(REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
