//! Ground-truth generation: companion-form RK4 integration of a circuit ODE,
//! plus the CSV dataset format and train/test splitting.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitClass, CircuitParams, LinearOde, SourceWaveform};
use crate::error::{Error, Result};

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 1e-4;

/// First-order form of an n-th order ODE with states `(I, I', ..., I^(n-1))`.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    ode: LinearOde,
    source: SourceWaveform,
}

pub fn to_companion(ode: &LinearOde, source: SourceWaveform) -> Result<CompanionSystem> {
    if ode.leading() == 0.0 {
        return Err(Error::InvalidOde("zero leading coefficient".into()));
    }
    Ok(CompanionSystem { ode: ode.clone(), source })
}

impl CompanionSystem {
    pub fn dim(&self) -> usize {
        self.ode.order()
    }

    pub fn ode(&self) -> &LinearOde {
        &self.ode
    }

    pub fn source(&self) -> &SourceWaveform {
        &self.source
    }

    /// Input `u(t) = sum_k g_k V^(k)(t)`, before division by the leading coefficient.
    pub fn input(&self, t: f64) -> f64 {
        self.ode.forcing_at(&self.source, t)
    }

    /// Dense companion matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let lead = self.ode.leading();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate().take(n - 1) {
            row[i + 1] = 1.0;
        }
        for k in 0..n {
            a[n - 1][k] = -self.ode.lhs()[k] / lead;
        }
        a
    }

    pub fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.dim();
        dx[..n - 1].copy_from_slice(&x[1..n]);
        let lhs = self.ode.lhs();
        let acc: f64 = lhs[..n].iter().zip(x).map(|(a, v)| a * v).sum();
        dx[n - 1] = (self.input(t) - acc) / self.ode.leading();
    }
}

/// Raw integration output: the full state at every sample time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }

    /// Load current (first state) at each sample.
    pub fn output(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[0]).collect()
    }
}

/// Sample times `t0, t0+dt, ...`, with a shortened last step landing on `t1`.
pub fn sample_times(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let ratio = (t1 - t0) / dt;
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) { nearest } else { ratio.ceil() } as usize;
    let mut times: Vec<f64> = (0..steps).map(|i| t0 + i as f64 * dt).collect();
    times.push(t1);
    Ok(times)
}

/// Classical fixed-step RK4.
pub fn integrate_rk4(sys: &CompanionSystem, x0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("initial state has {} entries, system has {n}", x0.len())));
    }
    let times = sample_times(t0, t1, dt)?;
    let mut states = Vec::with_capacity(times.len());
    let mut x = x0.to_vec();
    states.push(x.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        sys.rhs(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        sys.rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite state at t = {}", w[1])));
        }
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// How the ground-truth run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Start {
    /// All states zero at `t0` (circuit at rest), RK4 integration.
    AtRest,
    /// Explicit state at `t0`, RK4 integration.
    State(Vec<f64>),
    /// Closed-form periodic particular solution; no integration.
    SteadyState,
    /// `AtRest` when the ODE is Hurwitz-stable, otherwise `SteadyState`.
    Auto,
}

/// Ground truth for one circuit over `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub dataset: Dataset,
    /// Derivatives `(I, I', ..., I^(n-1))` at `t0`.
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
}

pub fn generate(
    class: Option<CircuitClass>,
    phi: &CircuitParams,
    ode: &LinearOde,
    t0: f64,
    t1: f64,
    dt: f64,
    start: Start,
) -> Result<GroundTruth> {
    let source = phi.source();
    let n = ode.order();
    let start = match start {
        Start::Auto if ode.is_hurwitz_stable() => Start::AtRest,
        Start::Auto => Start::SteadyState,
        s => s,
    };
    let meta = |generator: &str, x0: &[f64]| DatasetMeta {
        class,
        phi: Some(*phi),
        t0,
        t1,
        dt,
        seed: None,
        generator: generator.to_string(),
        initial_state: Some(x0.to_vec()),
    };
    match start {
        Start::SteadyState => {
            let times = sample_times(t0, t1, dt)?;
            let values = times.iter().map(|&t| ode.steady_state_derivative(&source, 0, t)).collect();
            let state_at = |t: f64| (0..n).map(|k| ode.steady_state_derivative(&source, k, t)).collect::<Vec<_>>();
            let x0 = state_at(t0);
            Ok(GroundTruth {
                dataset: Dataset::new(times, values, meta("steady-state", &x0))?,
                initial_state: x0,
                final_state: state_at(t1),
            })
        }
        Start::AtRest | Start::State(_) => {
            let x0 = match start {
                Start::State(x) => x,
                _ => vec![0.0; n],
            };
            let sys = to_companion(ode, source)?;
            let traj = integrate_rk4(&sys, &x0, t0, t1, dt)?;
            let values = traj.output();
            let final_state = traj.final_state().to_vec();
            Ok(GroundTruth {
                dataset: Dataset::new(traj.times, values, meta("rk4", &x0))?,
                initial_state: x0,
                final_state,
            })
        }
        Start::Auto => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub class: Option<CircuitClass>,
    pub phi: Option<CircuitParams>,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub seed: Option<u64>,
    pub generator: String,
    /// `(I, I', ..., I^(n-1))` at `t0`.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self { class: None, phi: None, t0: 0.0, t1: 0.0, dt: 0.0, seed: None, generator: "unknown".into(), initial_state: None }
    }
}

/// Timestamped load-current samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    times: Vec<f64>,
    values: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dataset(format!("{} times but {} values", times.len(), values.len())));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Dataset(format!("times not strictly increasing at row {}", i + 2)));
        }
        Ok(Self { times, values, meta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Dataset {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| (*t, *v))
            .unzip();
        Dataset { times, values, meta: self.meta.clone() }
    }

    fn subset(&self, mut idx: Vec<usize>) -> Dataset {
        idx.sort_unstable();
        Dataset {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Seeded uniform shuffle, first `fraction` of the shuffled indices go to training.
    Random,
    /// Training gets `t <= t_cut`, test gets the rest.
    Temporal(f64),
}

/// Partition a dataset into `(train, test)`; both halves stay sorted by time.
pub fn split_dataset(ds: &Dataset, fraction: f64, seed: u64, mode: SplitMode) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = ds.len();
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = match mode {
        SplitMode::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_train = (fraction * n as f64).round() as usize;
            let test = idx.split_off(n_train.min(n));
            (idx, test)
        }
        SplitMode::Temporal(cut) => (0..n).partition(|&i| ds.times[i] <= cut),
    };
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Dataset(format!(
            "empty partition (train {}, test {})",
            train_idx.len(),
            test_idx.len()
        )));
    }
    let mut train = ds.subset(train_idx);
    let mut test = ds.subset(test_idx);
    train.meta.seed = Some(seed);
    test.meta.seed = Some(seed);
    Ok((train, test))
}

pub const CSV_HEADER: [&str; 2] = ["t", "i_load"];

/// Sidecar metadata path: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write `t,i_load` rows plus the metadata sidecar. Floats use the shortest
/// decimal form that round-trips exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(ds.len() * 40);
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for (t, v) in ds.times.iter().zip(&ds.values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&ds.meta)?)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Dataset(format!("expected header 't,i_load', found '{}'", header.join(","))));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Dataset(format!("malformed row {}", i + 2)))
        };
        if rec.len() != 2 {
            return Err(Error::Dataset(format!("row {} has {} fields", i + 2, rec.len())));
        }
        times.push(parse(0)?);
        values.push(parse(1)?);
    }
    let side = sidecar_path(path);
    let meta = if side.exists() { serde_json::from_str(&fs::read_to_string(side)?)? } else { DatasetMeta::default() };
    Dataset::new(times, values, meta)
}
