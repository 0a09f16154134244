//! Experiment orchestration: source training, transfer, label-free
//! fine-tuning, the cross-class matrix and inverse parameter fitting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{self, loss_gradient_mlp, mlp_init, Mlp};
use crate::circuit::{ode_for_class, preset, CircuitClass, CircuitParams, LinearOde, PhysParam, PresetKind, SourceWaveform};
use crate::error::{Error, Result};
use crate::fourier::{self, CheckpointMeta, FourierNet};
use crate::loss::{
    epoch_log_csv, loss_gradient_fourier, loss_gradient_fourier_inverse, uniform_grid, DataBlock, DerivativeModel,
    EpochRecord, InitialConditions, LossBreakdown, LossConfig, LossWeights,
};
use crate::optimizer::{schedule_for, AdamState, Schedule, TrainingRole};
use crate::simulator::{generate, split_dataset, Dataset, SplitMode, Start, DEFAULT_DT};
use crate::stats::mse;

pub const FINE_TUNE_POINTS: usize = 1000;
pub const FINE_TUNE_END: f64 = 0.5;
pub const TEST_START: f64 = 0.5;
pub const TEST_END: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Fourier,
    Baseline,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" | "pifnn" => Ok(Family::Fourier),
            "baseline" | "pinn" | "mlp" => Ok(Family::Baseline),
            other => Err(Error::InvalidArgument(format!("unknown model family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Fourier => "fourier",
            Family::Baseline => "baseline",
        })
    }
}

/// Architecture: neuron count for the Fourier network, hidden layers for the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub family: Family,
    pub size: usize,
}

impl Architecture {
    pub fn init(&self, seed: u64) -> Result<Model> {
        match self.family {
            Family::Fourier => Ok(Model::Fourier(FourierNet::init(self.size, seed)?)),
            Family::Baseline => Ok(Model::Baseline(mlp_init(self.size, seed)?)),
        }
    }

    fn role(&self, fine_tune: bool) -> TrainingRole {
        match (self.family, fine_tune) {
            (Family::Fourier, false) => TrainingRole::SourceFourier,
            (Family::Fourier, true) => TrainingRole::FineTuneFourier,
            (Family::Baseline, false) => TrainingRole::SourceBaseline,
            (Family::Baseline, true) => TrainingRole::FineTuneBaseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Fourier(FourierNet),
    Baseline(Mlp),
}

impl Model {
    pub fn architecture(&self) -> Architecture {
        match self {
            Model::Fourier(n) => Architecture { family: Family::Fourier, size: n.neurons() },
            Model::Baseline(m) => Architecture { family: Family::Baseline, size: m.hidden_layers() },
        }
    }

    pub fn count_params(&self) -> usize {
        match self {
            Model::Fourier(n) => n.count_params(),
            Model::Baseline(m) => m.count_params(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Model::Fourier(n) => n.to_flat(),
            Model::Baseline(m) => m.to_flat(),
        }
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            Model::Fourier(n) => {
                if flat.len() != n.count_params() {
                    return Err(Error::InvalidArgument("parameter count mismatch".into()));
                }
                n.set_flat(flat);
                Ok(())
            }
            Model::Baseline(m) => m.set_flat(flat),
        }
    }

    pub fn loss_and_gradient(
        &self,
        config: &LossConfig,
        ode: &LinearOde,
        source: &SourceWaveform,
    ) -> Result<(LossBreakdown, Vec<f64>)> {
        match self {
            Model::Fourier(n) => loss_gradient_fourier(n, config, ode, source),
            Model::Baseline(m) => loss_gradient_mlp(m, config, ode, source),
        }
    }

    pub fn save(&self, meta: &CheckpointMeta, path: &Path) -> Result<()> {
        match self {
            Model::Fourier(n) => fourier::save_checkpoint(n, meta, path),
            Model::Baseline(m) => baseline::save_checkpoint(m, meta, path),
        }
    }

    /// Loads either checkpoint kind, told apart by their keys.
    pub fn load(path: &Path) -> Result<(Model, CheckpointMeta)> {
        let text = fs::read_to_string(path).map_err(|e| Error::Missing(format!("{}: {e}", path.display())))?;
        let raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("corrupt file {}: {e}", path.display())))?;
        if raw.get("layer_sizes").is_some() {
            let (m, meta) = baseline::load_checkpoint(path)?;
            Ok((Model::Baseline(m), meta))
        } else {
            let (n, meta) = fourier::load_checkpoint(path)?;
            Ok((Model::Fourier(n), meta))
        }
    }
}

impl DerivativeModel for Model {
    fn max_derivative(&self) -> usize {
        match self {
            Model::Fourier(n) => n.max_derivative(),
            Model::Baseline(m) => m.max_derivative(),
        }
    }

    fn derivative_stack(&self, order: usize, t: f64) -> Result<Vec<f64>> {
        match self {
            Model::Fourier(n) => DerivativeModel::derivative_stack(n, order, t),
            Model::Baseline(m) => m.derivative_stack(order, t),
        }
    }

    fn derivative_stacks(&self, order: usize, ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Fourier(n) => n.derivative_stacks(order, ts),
            Model::Baseline(m) => m.derivative_stacks(order, ts),
        }
    }

    fn predict(&self, ts: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Fourier(n) => n.predict(ts),
            Model::Baseline(m) => m.predict(ts),
        }
    }
}

/// Outcome of one optimisation run.
#[derive(Debug, Clone)]
pub struct Trained {
    /// Parameters with the lowest total training loss seen.
    pub best: Model,
    pub best_loss: LossBreakdown,
    pub best_epoch: usize,
    pub last: Model,
    pub log: Vec<EpochRecord>,
    pub duration_s: f64,
}

/// ADAM over the schedule, keeping the best parameters by training loss.
///
/// Every epoch is logged; the entry for epoch `k` holds the loss of the
/// parameters before the `k`-th update, and one trailing entry holds the
/// loss after the final update.
pub fn train(mut model: Model, config: &LossConfig, ode: &LinearOde, source: &SourceWaveform, schedule: &Schedule) -> Result<Trained> {
    let start = Instant::now();
    let mut params = model.to_flat();
    let mut adam = AdamState::new(params.len());
    let mut log = Vec::with_capacity(schedule.total_epochs() + 1);
    let mut best = (f64::INFINITY, LossBreakdown::default(), params.clone(), 0);
    for (epoch, lr) in schedule.iter().enumerate() {
        let (loss, grad) = model.loss_and_gradient(config, ode, source)?;
        check_finite(&loss, epoch)?;
        log.push(EpochRecord { epoch, lr, loss });
        if loss.total < best.0 {
            best = (loss.total, loss, params.clone(), epoch);
        }
        adam.step(&mut params, &grad, lr)?;
        model.set_flat(&params)?;
    }
    let epochs = schedule.total_epochs();
    let (loss, _) = model.loss_and_gradient(config, ode, source)?;
    check_finite(&loss, epochs)?;
    log.push(EpochRecord { epoch: epochs, lr: 0.0, loss });
    if loss.total < best.0 {
        best = (loss.total, loss, params.clone(), epochs);
    }
    let last = model.clone();
    model.set_flat(&best.2)?;
    Ok(Trained { best: model, best_loss: best.1, best_epoch: best.3, last, log, duration_s: start.elapsed().as_secs_f64() })
}

fn check_finite(loss: &LossBreakdown, epoch: usize) -> Result<()> {
    if loss.total.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("loss {} at epoch {epoch}", loss.total)))
    }
}

/// One row of an experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub family: Family,
    pub size: usize,
    pub source_class: Option<CircuitClass>,
    pub target_class: CircuitClass,
    pub tl: Option<bool>,
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub final_loss: LossBreakdown,
    pub duration_s: f64,
    pub epoch_log: Option<String>,
    pub checkpoint: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
}

pub const REPORT_CSV_HEADER: &str = "family,size,source_class,target_class,tl,seed,train_mse,test_mse,\
l_total,l_data,l_pde,l_ic,duration_s,epoch_log,checkpoint,note";

impl ExperimentReport {
    pub fn push(&mut self, r: RunRecord) {
        self.records.push(r);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_CSV_HEADER);
        s.push('\n');
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.family,
                r.size,
                r.source_class.map(|c| c.to_string()).unwrap_or_default(),
                r.target_class,
                r.tl.map(|b| if b { "on" } else { "off" }).unwrap_or(""),
                r.seed,
                r.train_mse,
                r.test_mse,
                r.final_loss.total,
                r.final_loss.data,
                r.final_loss.pde,
                r.final_loss.ic,
                r.duration_s,
                opt(&r.epoch_log),
                opt(&r.checkpoint),
                opt(&r.note).replace(',', ";"),
            );
        }
        s
    }

    /// 3x3 target-by-source test MSE table for the cross-class runs. The
    /// diagonal belongs to the intra-class experiment.
    pub fn matrix_csv(&self) -> String {
        let mut s = String::from("target\\source,class1,class2,class3\n");
        for t in CircuitClass::ALL {
            s.push_str(&t.to_string());
            for src in CircuitClass::ALL {
                s.push(',');
                if src == t {
                    s.push_str("reported in intra-class run");
                    continue;
                }
                if let Some(r) = self
                    .records
                    .iter()
                    .find(|r| r.source_class == Some(src) && r.target_class == t && r.tl == Some(true))
                {
                    let _ = write!(s, "{}", r.test_mse);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, json: &Path, csv: &Path) -> Result<()> {
        fs::write(json, self.to_json()?)?;
        fs::write(csv, self.to_csv())?;
        Ok(())
    }
}

/// Where run artefacts (checkpoint, epoch log) go, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub dir: Option<PathBuf>,
    pub stem: String,
    /// Explicit checkpoint and log paths; override `dir`/`stem`.
    pub files: Option<(PathBuf, PathBuf)>,
}

impl Artifacts {
    /// `<dir>/<stem>.ckpt.json` and `<dir>/<stem>.log.csv`.
    pub fn new(dir: impl Into<PathBuf>, stem: impl Into<String>) -> Self {
        Self { dir: Some(dir.into()), stem: stem.into(), files: None }
    }

    pub fn files(checkpoint: impl Into<PathBuf>, log: impl Into<PathBuf>) -> Self {
        Self { dir: None, stem: String::new(), files: Some((checkpoint.into(), log.into())) }
    }

    fn write(&self, model: &Model, meta: &CheckpointMeta, log: &[EpochRecord]) -> Result<(Option<String>, Option<String>)> {
        let (ck, lg) = match (&self.files, &self.dir) {
            (Some((c, l)), _) => (c.clone(), l.clone()),
            (None, Some(dir)) => (dir.join(format!("{}.ckpt.json", self.stem)), dir.join(format!("{}.log.csv", self.stem))),
            (None, None) => return Ok((None, None)),
        };
        for p in [&ck, &lg] {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
        }
        model.save(meta, &ck)?;
        fs::write(&lg, epoch_log_csv(log))?;
        Ok((Some(ck.display().to_string()), Some(lg.display().to_string())))
    }
}

#[derive(Debug, Clone)]
pub struct SourceOptions {
    pub arch: Architecture,
    pub seed: u64,
    /// Defaults to the family's source schedule.
    pub schedule: Option<Schedule>,
    pub weights: LossWeights,
    pub split_fraction: f64,
    pub split_mode: SplitMode,
    /// Uniform collocation grid instead of the training timestamps.
    pub collocation_points: Option<usize>,
    /// Seeded subsample of the training split used for the loss.
    pub max_points: Option<usize>,
    pub artifacts: Artifacts,
}

impl SourceOptions {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        Self {
            arch,
            seed,
            schedule: None,
            weights: LossWeights::default(),
            split_fraction: 0.5,
            split_mode: SplitMode::Random,
            collocation_points: None,
            max_points: None,
            artifacts: Artifacts::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourceRun {
    pub model: Model,
    pub record: RunRecord,
    pub trained: Trained,
    pub test: Dataset,
}

/// Hex SHA-256 of the JSON form of a run configuration.
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&json).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn class_and_phi(ds: &Dataset) -> Result<(CircuitClass, CircuitParams)> {
    let class = ds.meta.class.ok_or_else(|| Error::Dataset("dataset metadata lacks the circuit class".into()))?;
    let phi = ds.meta.phi.ok_or_else(|| Error::Dataset("dataset metadata lacks circuit parameters".into()))?;
    Ok((class, phi))
}

fn initial_conditions(ds: &Dataset, order: usize) -> InitialConditions {
    let t0 = ds.times().first().copied().unwrap_or(ds.meta.t0);
    match &ds.meta.initial_state {
        Some(v) if v.len() == order => InitialConditions { t0, values: v.clone() },
        _ => InitialConditions::at_rest(t0, order),
    }
}

fn subsample(ds: &Dataset, max: usize, seed: u64) -> Result<Dataset> {
    if ds.len() <= max {
        return Ok(ds.clone());
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed));
    idx.truncate(max);
    idx.sort_unstable();
    Dataset::new(
        idx.iter().map(|&i| ds.times()[i]).collect(),
        idx.iter().map(|&i| ds.values()[i]).collect(),
        ds.meta.clone(),
    )
}

/// Supervised training on a simulated dataset carrying class and parameters
/// in its metadata.
pub fn train_source(dataset: &Dataset, opts: &SourceOptions) -> Result<SourceRun> {
    let (class, phi) = class_and_phi(dataset)?;
    let ode = ode_for_class(class, &phi);
    let source = phi.source();
    let (train_split, test) = split_dataset(dataset, opts.split_fraction, opts.seed, opts.split_mode)?;
    let fit = match opts.max_points {
        Some(m) => subsample(&train_split, m, opts.seed)?,
        None => train_split.clone(),
    };
    let collocation = match opts.collocation_points {
        Some(n) => uniform_grid(fit.times()[0], *fit.times().last().unwrap(), n),
        None => fit.times().to_vec(),
    };
    let data = DataBlock { times: fit.times().to_vec(), targets: fit.values().to_vec() };
    let config = LossConfig::source(collocation, data, initial_conditions(dataset, ode.order()))?.with_weights(opts.weights)?;
    let schedule = opts.schedule.clone().unwrap_or_else(|| schedule_for(opts.arch.role(false)));

    let model = opts.arch.init(opts.seed)?;
    let trained = train(model, &config, &ode, &source, &schedule)?;
    let best = trained.best.clone();
    let train_mse = mse(&best.predict(train_split.times())?, train_split.values())?;
    let test_mse = mse(&best.predict(test.times())?, test.values())?;
    let config_digest = digest(&(&config, &schedule, opts.seed))?;
    let meta = CheckpointMeta { class: Some(class), phi: Some(phi), seed: opts.seed, schedule: Some(schedule), config_digest };
    let (checkpoint, epoch_log) = opts.artifacts.write(&best, &meta, &trained.log)?;
    let record = RunRecord {
        family: opts.arch.family,
        size: opts.arch.size,
        source_class: None,
        target_class: class,
        tl: None,
        seed: opts.seed,
        train_mse,
        test_mse,
        final_loss: trained.best_loss,
        duration_s: trained.duration_s,
        epoch_log,
        checkpoint,
        note: None,
    };
    Ok(SourceRun { model: best, record, trained, test })
}

/// Parameter-based transfer: the target starts from a verbatim copy.
pub fn transfer(source: &Model, target: Architecture) -> Result<Model> {
    let have = source.architecture();
    if have != target {
        return Err(Error::ArchitectureMismatch(format!(
            "source is {} size {}, target expects {} size {}",
            have.family, have.size, target.family, target.size
        )));
    }
    Ok(source.clone())
}

#[derive(Debug, Clone)]
pub enum FineTuneStart {
    /// Transferred source parameters (TL on).
    Transfer { model: Model, source_class: Option<CircuitClass> },
    /// Fresh initialisation (TL off).
    Fresh { arch: Architecture },
}

#[derive(Debug, Clone)]
pub struct FineTuneOptions {
    pub seed: u64,
    /// Defaults to the family's fine-tuning schedule.
    pub schedule: Option<Schedule>,
    pub weights: LossWeights,
    pub collocation_points: usize,
    pub dt: f64,
    pub artifacts: Artifacts,
}

impl FineTuneOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            schedule: None,
            weights: LossWeights::default(),
            collocation_points: FINE_TUNE_POINTS,
            dt: DEFAULT_DT,
            artifacts: Artifacts::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FineTuneRun {
    pub model: Model,
    pub record: RunRecord,
    pub trained: Trained,
    pub config: LossConfig,
    pub test: Dataset,
}

/// Ground truth on `[0, 1]` for a class and parameter set.
pub fn reference_dataset(class: CircuitClass, phi: &CircuitParams, dt: f64) -> Result<Dataset> {
    let ode = ode_for_class(class, phi);
    Ok(generate(Some(class), phi, &ode, 0.0, TEST_END, dt, Start::Auto)?.dataset)
}

fn after(ds: &Dataset, t: f64) -> Result<Dataset> {
    let (times, values): (Vec<f64>, Vec<f64>) =
        ds.times().iter().zip(ds.values()).filter(|(x, _)| **x > t).map(|(a, b)| (*a, *b)).unzip();
    Dataset::new(times, values, ds.meta.clone())
}

/// Label-free fine-tuning on the target circuit: physics and initial
/// conditions on `[0, 0.5]`, evaluated against simulated labels on `(0.5, 1]`.
pub fn fine_tune(start: FineTuneStart, target: CircuitClass, phi: &CircuitParams, opts: &FineTuneOptions) -> Result<FineTuneRun> {
    let ode = ode_for_class(target, phi);
    let source = phi.source();
    let truth = reference_dataset(target, phi, opts.dt)?;
    let ic = initial_conditions(&truth, ode.order());
    let config = LossConfig::target(uniform_grid(0.0, FINE_TUNE_END, opts.collocation_points), ic)?.with_weights(opts.weights)?;

    let (model, tl, source_class) = match start {
        FineTuneStart::Transfer { model, source_class } => (model, true, source_class),
        FineTuneStart::Fresh { arch } => (arch.init(opts.seed)?, false, None),
    };
    let arch = model.architecture();
    let schedule = opts.schedule.clone().unwrap_or_else(|| schedule_for(arch.role(true)));
    let trained = train(model, &config, &ode, &source, &schedule)?;
    let best = trained.best.clone();

    let fit_window = truth.window(0.0, FINE_TUNE_END);
    let test = after(&truth, TEST_START)?;
    let train_mse = mse(&best.predict(fit_window.times())?, fit_window.values())?;
    let test_mse = mse(&best.predict(test.times())?, test.values())?;
    let config_digest = digest(&(&config, &schedule, opts.seed))?;
    let meta = CheckpointMeta { class: Some(target), phi: Some(*phi), seed: opts.seed, schedule: Some(schedule), config_digest };
    let (checkpoint, epoch_log) = opts.artifacts.write(&best, &meta, &trained.log)?;
    let record = RunRecord {
        family: arch.family,
        size: arch.size,
        source_class,
        target_class: target,
        tl: Some(tl),
        seed: opts.seed,
        train_mse,
        test_mse,
        final_loss: trained.best_loss,
        duration_s: trained.duration_s,
        epoch_log,
        checkpoint,
        note: None,
    };
    Ok(FineTuneRun { model: best, record, trained, config, test })
}

/// Every ordered pair of distinct classes: transfer the source model and
/// fine-tune on the target with its analysis parameters.
pub fn run_generalization_matrix(sources: &[(CircuitClass, Model)], opts: &FineTuneOptions) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for src in CircuitClass::ALL {
        let model = sources
            .iter()
            .find(|(c, _)| *c == src)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::Missing(format!("no source model for {src}")))?;
        for tgt in CircuitClass::ALL {
            if tgt == src {
                continue;
            }
            let init = transfer(&model, model.architecture())?;
            let mut o = opts.clone();
            if let Some(dir) = &opts.artifacts.dir {
                o.artifacts = Artifacts::new(dir, format!("{}_T{}_S{}", opts.artifacts.stem, tgt.index(), src.index()));
            }
            let phi = preset(tgt, PresetKind::Analysis);
            let run = fine_tune(FineTuneStart::Transfer { model: init, source_class: Some(src) }, tgt, &phi, &o)?;
            report.push(run.record);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct InverseOptions {
    pub neurons: usize,
    pub seed: u64,
    /// Network schedule; defaults to the Fourier source schedule.
    pub schedule: Option<Schedule>,
    /// ADAM learning rate on the relative parameter scale `phi / phi_init`.
    pub phi_lr: f64,
    /// Epoch at which the physical parameters start moving.
    pub phi_start: usize,
    pub weights: LossWeights,
    pub split_fraction: f64,
}

impl InverseOptions {
    pub fn new(neurons: usize, seed: u64) -> Self {
        Self {
            neurons,
            seed,
            schedule: None,
            phi_lr: 0.01,
            phi_start: 0,
            weights: LossWeights::default(),
            split_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InverseResult {
    pub phi: CircuitParams,
    pub net: FourierNet,
    /// Free parameter values after every epoch.
    pub trajectory: Vec<Vec<f64>>,
    pub final_loss: LossBreakdown,
}

fn positive_estimate(p: PhysParam, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveParameter { name: p.name(), value: v })
    }
}

/// Joint ADAM over network weights and the free physical parameters.
pub fn inverse_fit(dataset: &Dataset, class: CircuitClass, init: &CircuitParams, free: &[PhysParam], opts: &InverseOptions) -> Result<InverseResult> {
    init.validate()?;
    let (train_split, _) = split_dataset(dataset, opts.split_fraction, opts.seed, SplitMode::Random)?;
    let order = class.ode_order();
    let data = DataBlock { times: train_split.times().to_vec(), targets: train_split.values().to_vec() };
    let config = LossConfig::source(train_split.times().to_vec(), data, initial_conditions(dataset, order))?.with_weights(opts.weights)?;
    let schedule = opts.schedule.clone().unwrap_or_else(|| schedule_for(TrainingRole::SourceFourier));

    let mut net = FourierNet::init(opts.neurons, opts.seed)?;
    let mut theta = net.to_flat();
    let mut adam = AdamState::new(theta.len());
    let base: Vec<f64> = free.iter().map(|p| init.get(*p)).collect();
    let mut scale = vec![1.0; free.len()];
    let mut adam_phi = AdamState::new(free.len());
    let mut phi = *init;
    let mut trajectory = Vec::with_capacity(schedule.total_epochs());
    let mut last = LossBreakdown::default();

    for (epoch, lr) in schedule.iter().enumerate() {
        let (loss, g_theta, g_phi) = loss_gradient_fourier_inverse(&net, &config, class, &phi, free)?;
        check_finite(&loss, epoch)?;
        last = loss;
        adam.step(&mut theta, &g_theta, lr)?;
        net.set_flat(&theta);
        if !free.is_empty() && epoch >= opts.phi_start {
            let g_scale: Vec<f64> = g_phi.iter().zip(&base).map(|(g, b)| g * b).collect();
            adam_phi.step(&mut scale, &g_scale, opts.phi_lr)?;
            for ((p, s), b) in free.iter().zip(&scale).zip(&base) {
                phi.set(*p, positive_estimate(*p, s * b)?);
            }
        }
        trajectory.push(free.iter().map(|p| phi.get(*p)).collect());
    }
    Ok(InverseResult { phi, net, trajectory, final_loss: last })
}
