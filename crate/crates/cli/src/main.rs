//! `fpinn`: simulate circuits, derive their ODEs from bond graphs, train
//! Fourier and baseline networks, fine-tune, compare and plot.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fourier_pinn::bondgraph::{derive_ode, projective_mismatch};
use fourier_pinn::circuit::{ode_for_class, preset, CircuitClass, CircuitParams, PhysParam, PresetKind};
use fourier_pinn::loss::{DerivativeModel, LossWeights};
use fourier_pinn::optimizer::{Schedule, Segment};
use fourier_pinn::simulator::{generate, read_csv, write_csv, Dataset, SplitMode, Start, DEFAULT_DT};
use fourier_pinn::stats::{mse, squared_errors, wilcoxon_rank_sum};
use fourier_pinn::workflows::{
    fine_tune, inverse_fit, run_generalization_matrix, train_source, Architecture, Artifacts, ExperimentReport, Family,
    FineTuneOptions, FineTuneStart, InverseOptions, Model, RunRecord, SourceOptions,
};
use fourier_pinn::Error;

use config::Context;

/// Largest projective coefficient error accepted as a match.
const CHECK_TOLERANCE: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "fpinn", version, about = "Physics-informed Fourier networks for RLC circuits")]
struct Cli {
    /// Base directory for relative paths; runs are logged to its manifest.json.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// JSON object of flag values; flags on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a circuit class and write a t,i_load CSV plus metadata.
    Simulate(SimulateArgs),
    /// Derive the output ODE of a bond-graph netlist.
    DeriveOde(DeriveArgs),
    /// Supervised source training on a simulated dataset.
    Train(TrainArgs),
    /// Label-free fine-tuning on a target circuit.
    Finetune(FinetuneArgs),
    /// Test MSE of a checkpoint against a dataset.
    Evaluate(EvaluateArgs),
    /// Wilcoxon rank-sum test on two squared-error files.
    Compare(CompareArgs),
    /// Cross-class transfer matrix from three source checkpoints.
    Matrix(MatrixArgs),
    /// Estimate circuit parameters from data.
    Inverse(InverseArgs),
    /// SVG and CSV of ground truth against prediction.
    Plot(PlotArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct SimulateArgs {
    /// Circuit class (1, 2 or 3).
    #[arg(long)]
    class: Option<u8>,
    /// Parameter preset: initial or analysis.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with R, L, C, Vmax, f (overrides the preset).
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// auto, rest or steady.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct DeriveArgs {
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Write the ODE JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare against the class ODE built from --preset/--phi.
    #[arg(long)]
    check_class: Option<u8>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    phi: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct TrainArgs {
    /// fourier or baseline.
    #[arg(long)]
    family: Option<String>,
    /// Defaults to the class stored with the dataset.
    #[arg(long)]
    class: Option<u8>,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Epoch log path (default: next to the checkpoint).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Segments as `epochs@lr`, comma separated, e.g. `300@10,300@1e-3`.
    #[arg(long)]
    schedule: Option<String>,
    /// Training fraction of the split.
    #[arg(long)]
    split: Option<f64>,
    /// random, or temporal (train on the first `split` of the time span).
    #[arg(long)]
    split_mode: Option<String>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    collocation_points: Option<usize>,
    #[arg(long)]
    w_data: Option<f64>,
    #[arg(long)]
    w_pde: Option<f64>,
    #[arg(long)]
    w_ic: Option<f64>,
    /// Used only when the dataset carries no circuit parameters.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    phi: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct FinetuneArgs {
    /// Source checkpoint; without it the target network starts fresh.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    target_class: Option<u8>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    phi: Option<PathBuf>,
    /// Fine-tuning never uses labels; accepted for explicit scripts.
    #[arg(long)]
    no_data: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    collocation_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    w_pde: Option<f64>,
    #[arg(long)]
    w_ic: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Write per-point squared errors (input for `compare`).
    #[arg(long)]
    errors_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct CompareArgs {
    #[arg(long)]
    errors_a: Option<PathBuf>,
    #[arg(long)]
    errors_b: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct MatrixArgs {
    #[arg(long)]
    ckpt_1: Option<PathBuf>,
    #[arg(long)]
    ckpt_2: Option<PathBuf>,
    #[arg(long)]
    ckpt_3: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    collocation_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Directory for the fine-tuned checkpoints and logs.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct InverseArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    class: Option<u8>,
    /// Free parameters, comma separated (R, L, C).
    #[arg(long)]
    free: Option<String>,
    /// Initial guesses; unset values come from the dataset or preset.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    phi_lr: Option<f64>,
    /// Per-epoch parameter estimates as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct PlotArgs {
    /// Ground-truth dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Prediction as a dataset CSV instead of a checkpoint.
    #[arg(long)]
    prediction: Option<PathBuf>,
    /// SVG path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV path (default: the SVG path with a .plot.csv extension).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    csv_only: bool,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    title: Option<String>,
}

pub enum Failure {
    Usage(String),
    Core(Error),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Out = Result<Vec<PathBuf>, Failure>;

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing required flag --{flag}")))
}

fn class_of(i: u8) -> Result<CircuitClass, Failure> {
    CircuitClass::from_index(i).map_err(|e| Failure::Usage(e.to_string()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn resolve_phi(ctx: &Context, class: CircuitClass, preset_name: Option<&str>, file: Option<&PathBuf>, default: PresetKind) -> Result<CircuitParams, Failure> {
    if let Some(f) = file {
        let text = fs::read_to_string(ctx.path(f))?;
        let phi: CircuitParams = serde_json::from_str(&text).map_err(Error::from)?;
        phi.validate()?;
        return Ok(phi);
    }
    let kind = match preset_name {
        Some(p) => parse::<PresetKind>(p)?,
        None => default,
    };
    Ok(preset(class, kind))
}

fn parse_schedule(s: Option<&str>) -> Result<Option<Schedule>, Failure> {
    let Some(s) = s else { return Ok(None) };
    let mut segs = vec![];
    for part in s.split(',') {
        let (e, lr) = part
            .trim()
            .split_once('@')
            .ok_or_else(|| Failure::Usage(format!("schedule segment '{part}' is not epochs@lr")))?;
        let epochs = e.trim().parse().map_err(|_| Failure::Usage(format!("bad epoch count '{e}'")))?;
        let lr = lr.trim().parse().map_err(|_| Failure::Usage(format!("bad learning rate '{lr}'")))?;
        segs.push(Segment { epochs, lr });
    }
    Ok(Some(Schedule::new(segs)?))
}

fn architecture(family: Option<&str>, neurons: Option<usize>, hidden: Option<usize>) -> Result<Architecture, Failure> {
    let family: Family = match family {
        Some(f) => parse(f)?,
        None => Family::Fourier,
    };
    let size = match family {
        Family::Fourier => neurons.unwrap_or(10),
        Family::Baseline => hidden.unwrap_or(5),
    };
    Ok(Architecture { family, size })
}

fn log_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("log.csv")
}

fn append_report(path: Option<PathBuf>, record: RunRecord) -> Out {
    let Some(path) = path else { return Ok(vec![]) };
    let mut report = match fs::read_to_string(&path) {
        Ok(text) => ExperimentReport::from_json(&text)?,
        Err(_) => ExperimentReport::default(),
    };
    report.push(record);
    let csv = path.with_extension("csv");
    report.write(&path, &csv)?;
    Ok(vec![path, csv])
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Out {
    let class = class_of(need(a.class, "class")?)?;
    let phi = resolve_phi(ctx, class, a.preset.as_deref(), a.phi.as_ref(), PresetKind::Initial)?;
    let out = ctx.path(need(a.out.as_ref(), "out")?);
    let start = match a.start.as_deref().unwrap_or("auto") {
        "auto" => Start::Auto,
        "rest" => Start::AtRest,
        "steady" => Start::SteadyState,
        other => return Err(Failure::Usage(format!("unknown start '{other}' (auto, rest, steady)"))),
    };
    let (t0, t1, dt) = (a.t0.unwrap_or(0.0), a.t1.unwrap_or(1.0), a.dt.unwrap_or(DEFAULT_DT));
    let gt = generate(Some(class), &phi, &ode_for_class(class, &phi), t0, t1, dt, start)?;
    write_csv(&gt.dataset, &out)?;
    println!(
        "{}: {} points on [{t0}, {t1}] with dt {dt} ({}) -> {}",
        class,
        gt.dataset.len(),
        gt.dataset.meta.generator,
        out.display()
    );
    Ok(vec![out.clone(), fourier_pinn::simulator::sidecar_path(&out)])
}

fn derive(ctx: &Context, a: &DeriveArgs) -> Out {
    let netlist = ctx.path(need(a.netlist.as_ref(), "netlist")?);
    let text = fs::read_to_string(&netlist).map_err(|e| Error::Missing(format!("{}: {e}", netlist.display())))?;
    let ode = derive_ode(&text)?;
    let json = serde_json::to_string_pretty(&ode).map_err(Error::from)?;
    let mut outputs = vec![];
    match &a.out {
        Some(p) => {
            let p = ctx.path(p);
            fs::write(&p, format!("{json}\n"))?;
            outputs.push(p);
        }
        None => println!("{json}"),
    }
    if let Some(c) = a.check_class {
        let class = class_of(c)?;
        let phi = resolve_phi(ctx, class, a.preset.as_deref(), a.phi.as_ref(), PresetKind::Initial)?;
        let err = projective_mismatch(&ode, &ode_for_class(class, &phi));
        if err < CHECK_TOLERANCE {
            println!("MATCH {class} (max relative coefficient error {err:e})");
        } else {
            return Err(Failure::Mismatch(format!("MISMATCH {class} (max relative coefficient error {err:e})")));
        }
    }
    Ok(outputs)
}

fn train(ctx: &Context, a: &TrainArgs) -> Out {
    let data_path = ctx.path(need(a.data.as_ref(), "data")?);
    let out = ctx.path(need(a.out.as_ref(), "out")?);
    let mut ds = read_csv(&data_path)?;
    if let Some(c) = a.class {
        let class = class_of(c)?;
        match ds.meta.class {
            Some(have) if have != class => {
                return Err(Failure::Usage(format!("--class {class} but {} holds {have}", data_path.display())));
            }
            _ => ds.meta.class = Some(class),
        }
    }
    let class = ds
        .meta
        .class
        .ok_or_else(|| Failure::Usage("dataset has no class metadata; pass --class".into()))?;
    if ds.meta.phi.is_none() {
        ds.meta.phi = Some(resolve_phi(ctx, class, a.preset.as_deref(), a.phi.as_ref(), PresetKind::Initial)?);
    }
    let arch = architecture(a.family.as_deref(), a.neurons, a.hidden)?;
    let seed = a.seed.unwrap_or(0);
    let mut o = SourceOptions::new(arch, seed);
    o.schedule = parse_schedule(a.schedule.as_deref())?;
    o.split_fraction = a.split.unwrap_or(0.5);
    o.split_mode = match a.split_mode.as_deref().unwrap_or("random") {
        "random" => SplitMode::Random,
        "temporal" => {
            let (t0, t1) = (ds.times()[0], *ds.times().last().unwrap());
            SplitMode::Temporal(t0 + o.split_fraction * (t1 - t0))
        }
        other => return Err(Failure::Usage(format!("unknown split mode '{other}'"))),
    };
    o.max_points = a.max_points;
    o.collocation_points = a.collocation_points;
    let d = LossWeights::default();
    o.weights = LossWeights { data: a.w_data.unwrap_or(d.data), pde: a.w_pde.unwrap_or(d.pde), ic: a.w_ic.unwrap_or(d.ic) };
    let log = a.log.as_ref().map(|p| ctx.path(p)).unwrap_or_else(|| log_path(&out));
    o.artifacts = Artifacts::files(&out, &log);

    let run = train_source(&ds, &o)?;
    let r = &run.record;
    println!(
        "{} {} size {} seed {seed}: train MSE {:e}, test MSE {:e}, best loss {:e} at epoch {} ({:.1} s)",
        class, arch.family, arch.size, r.train_mse, r.test_mse, r.final_loss.total, run.trained.best_epoch, r.duration_s
    );
    let mut outputs = vec![out, log];
    outputs.extend(append_report(ctx.report(a.report.as_ref()), run.record)?);
    Ok(outputs)
}

fn finetune(ctx: &Context, a: &FinetuneArgs) -> Out {
    let target = class_of(need(a.target_class, "target-class")?)?;
    let phi = resolve_phi(ctx, target, a.preset.as_deref(), a.phi.as_ref(), PresetKind::Analysis)?;
    let out = ctx.path(need(a.out.as_ref(), "out")?);
    let start = match &a.ckpt {
        Some(p) => {
            let (model, meta) = Model::load(&ctx.path(p))?;
            FineTuneStart::Transfer { model, source_class: meta.class }
        }
        None => FineTuneStart::Fresh { arch: architecture(a.family.as_deref(), a.neurons, a.hidden)? },
    };
    let mut o = FineTuneOptions::new(a.seed.unwrap_or(0));
    o.schedule = parse_schedule(a.schedule.as_deref())?;
    if let Some(n) = a.collocation_points {
        o.collocation_points = n;
    }
    if let Some(dt) = a.dt {
        o.dt = dt;
    }
    let d = LossWeights::default();
    o.weights = LossWeights { data: 0.0, pde: a.w_pde.unwrap_or(d.pde), ic: a.w_ic.unwrap_or(d.ic) };
    let log = a.log.as_ref().map(|p| ctx.path(p)).unwrap_or_else(|| log_path(&out));
    o.artifacts = Artifacts::files(&out, &log);

    let run = fine_tune(start, target, &phi, &o)?;
    let r = &run.record;
    println!(
        "{} <- {} (transfer {}): fit-window MSE {:e}, test MSE {:e}, best loss {:e} ({:.1} s)",
        target,
        r.source_class.map_or("fresh".to_string(), |c| c.to_string()),
        if r.tl == Some(true) { "on" } else { "off" },
        r.train_mse,
        r.test_mse,
        r.final_loss.total,
        r.duration_s
    );
    let mut outputs = vec![out, log];
    outputs.extend(append_report(ctx.report(a.report.as_ref()), run.record)?);
    Ok(outputs)
}

fn windowed(ds: Dataset, lo: Option<f64>, hi: Option<f64>) -> Result<Dataset, Failure> {
    let w = ds.window(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
    if w.is_empty() {
        return Err(Failure::Usage("no samples in the requested time window".into()));
    }
    Ok(w)
}

fn evaluate(ctx: &Context, a: &EvaluateArgs) -> Out {
    let (model, _) = Model::load(&ctx.path(need(a.ckpt.as_ref(), "ckpt")?))?;
    let ds = windowed(read_csv(&ctx.path(need(a.data.as_ref(), "data")?))?, a.t_min, a.t_max)?;
    let pred = model.predict(ds.times())?;
    let m = mse(&pred, ds.values())?;
    println!("{}", json!({ "mse": m, "points": ds.len() }));
    let mut outputs = vec![];
    if let Some(p) = &a.errors_out {
        let p = ctx.path(p);
        let mut s = String::from("t,squared_error\n");
        for (t, e) in ds.times().iter().zip(squared_errors(&pred, ds.values())?) {
            s.push_str(&format!("{t},{e}\n"));
        }
        fs::write(&p, s)?;
        outputs.push(p);
    }
    Ok(outputs)
}

/// Numbers from a `squared_error` column, or the last column otherwise.
fn read_errors(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::Missing(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').map(str::trim).collect();
    let col = header.iter().position(|h| *h == "squared_error").unwrap_or(header.len().saturating_sub(1));
    lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::Core(Error::Dataset(format!("{} row {}: not a number", path.display(), i + 2))))
        })
        .collect()
}

fn compare(ctx: &Context, a: &CompareArgs) -> Out {
    let x = read_errors(&ctx.path(need(a.errors_a.as_ref(), "errors-a")?))?;
    let y = read_errors(&ctx.path(need(a.errors_b.as_ref(), "errors-b")?))?;
    let r = wilcoxon_rank_sum(&x, &y)?;
    let text = serde_json::to_string_pretty(&r.to_json()).map_err(Error::from)?;
    println!("{text}");
    match &a.out {
        Some(p) => {
            let p = ctx.path(p);
            fs::write(&p, format!("{text}\n"))?;
            Ok(vec![p])
        }
        None => Ok(vec![]),
    }
}

fn matrix(ctx: &Context, a: &MatrixArgs) -> Out {
    let mut sources = vec![];
    for (class, path) in CircuitClass::ALL.iter().zip([&a.ckpt_1, &a.ckpt_2, &a.ckpt_3]) {
        if let Some(p) = path {
            sources.push((*class, Model::load(&ctx.path(p))?.0));
        }
    }
    let dir = ctx.path(a.dir.as_deref().unwrap_or(Path::new("matrix")));
    let mut o = FineTuneOptions::new(a.seed.unwrap_or(0));
    o.schedule = parse_schedule(a.schedule.as_deref())?;
    if let Some(n) = a.collocation_points {
        o.collocation_points = n;
    }
    if let Some(dt) = a.dt {
        o.dt = dt;
    }
    o.artifacts = Artifacts::new(&dir, "matrix");
    let report = run_generalization_matrix(&sources, &o)?;
    let json_path = a.report.as_ref().map(|p| ctx.path(p)).unwrap_or_else(|| dir.join("matrix.json"));
    let csv_path = json_path.with_extension("csv");
    let table_path = json_path.with_file_name(format!(
        "{}_table.csv",
        json_path.file_stem().and_then(|s| s.to_str()).unwrap_or("matrix")
    ));
    if let Some(parent) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    report.write(&json_path, &csv_path)?;
    let table = report.matrix_csv();
    fs::write(&table_path, &table)?;
    print!("{table}");
    let mut outputs = vec![json_path, csv_path, table_path];
    outputs.extend(report.records.iter().filter_map(|r| r.checkpoint.as_ref().map(PathBuf::from)));
    Ok(outputs)
}

fn inverse(ctx: &Context, a: &InverseArgs) -> Out {
    let ds = read_csv(&ctx.path(need(a.data.as_ref(), "data")?))?;
    let class = match a.class {
        Some(c) => class_of(c)?,
        None => ds.meta.class.ok_or_else(|| Failure::Usage("dataset has no class metadata; pass --class".into()))?,
    };
    let mut init = ds.meta.phi.unwrap_or_else(|| preset(class, PresetKind::Initial));
    for (p, v) in [(PhysParam::R, a.r), (PhysParam::L, a.l), (PhysParam::C, a.c)] {
        if let Some(v) = v {
            init.set(p, v);
        }
    }
    let free: Vec<PhysParam> = match a.free.as_deref() {
        Some(s) if !s.trim().is_empty() => s.split(',').map(parse::<PhysParam>).collect::<Result<_, _>>()?,
        _ => vec![],
    };
    let mut o = InverseOptions::new(a.neurons.unwrap_or(10), a.seed.unwrap_or(0));
    o.schedule = parse_schedule(a.schedule.as_deref())?;
    if let Some(lr) = a.phi_lr {
        o.phi_lr = lr;
    }
    let res = inverse_fit(&ds, class, &init, &free, &o)?;
    let estimates: serde_json::Map<String, Value> = free.iter().map(|p| (p.name().to_string(), json!(res.phi.get(*p)))).collect();
    let summary = json!({ "class": class.to_string(), "estimates": estimates, "final_loss": res.final_loss.total });
    let text = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
    println!("{text}");
    let mut outputs = vec![];
    if let Some(p) = &a.out {
        let p = ctx.path(p);
        fs::write(&p, format!("{text}\n"))?;
        outputs.push(p);
    }
    if let Some(p) = &a.trajectory {
        let p = ctx.path(p);
        let names: Vec<&str> = free.iter().map(|f| f.name()).collect();
        let mut s = format!("epoch,{}\n", names.join(","));
        for (i, row) in res.trajectory.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{i},{}\n", vals.join(",")));
        }
        fs::write(&p, s)?;
        outputs.push(p);
    }
    Ok(outputs)
}

fn plot_cmd(ctx: &Context, a: &PlotArgs) -> Out {
    let (lo, hi) = (a.t_min.unwrap_or(0.5), a.t_max.unwrap_or(1.0));
    let truth = windowed(read_csv(&ctx.path(need(a.data.as_ref(), "data")?))?, Some(lo), Some(hi))?;
    let pred = match (&a.ckpt, &a.prediction) {
        (Some(c), None) => Model::load(&ctx.path(c))?.0.predict(truth.times())?,
        (None, Some(p)) => {
            let p = windowed(read_csv(&ctx.path(p))?, Some(lo), Some(hi))?;
            if p.times() != truth.times() {
                return Err(Failure::Usage("prediction and ground truth have different time stamps".into()));
            }
            p.values().to_vec()
        }
        _ => return Err(Failure::Usage("pass exactly one of --ckpt or --prediction".into())),
    };
    let svg_path = a.out.as_ref().map(|p| ctx.path(p));
    let csv_path = match (&a.csv, &svg_path) {
        (Some(c), _) => ctx.path(c),
        (None, Some(s)) => s.with_extension("plot.csv"),
        (None, None) => return Err(Failure::Usage("missing required flag --out (or --csv)".into())),
    };
    let mut outputs = vec![];
    fs::write(&csv_path, plot::csv(truth.times(), truth.values(), &pred))?;
    outputs.push(csv_path);
    if !a.csv_only {
        let svg_path = need(svg_path, "out")?;
        let title = a.title.clone().unwrap_or_else(|| {
            truth.meta.class.map_or("ground truth vs prediction".to_string(), |c| format!("{c}: ground truth vs prediction"))
        });
        fs::write(&svg_path, plot::svg(truth.times(), truth.values(), &pred, &title))?;
        outputs.push(svg_path);
    }
    Ok(outputs)
}

fn dispatch<A: Serialize + serde::de::DeserializeOwned>(
    name: &str,
    args: A,
    file: Option<&serde_json::Map<String, Value>>,
    ctx: &Context,
    run: fn(&Context, &A) -> Out,
) -> Result<(), Failure> {
    let (args, effective) = config::merge(args, file)?;
    let outputs = run(ctx, &args)?;
    ctx.record(name, &effective, &outputs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let ctx = Context::new(cli.workdir.clone())?;
        let file = match &cli.config {
            Some(p) => Some(config::load(p)?),
            None => None,
        };
        let f = file.as_ref();
        match cli.command {
            Command::Simulate(a) => dispatch("simulate", a, f, &ctx, simulate),
            Command::DeriveOde(a) => dispatch("derive-ode", a, f, &ctx, derive),
            Command::Train(a) => dispatch("train", a, f, &ctx, train),
            Command::Finetune(a) => dispatch("finetune", a, f, &ctx, finetune),
            Command::Evaluate(a) => dispatch("evaluate", a, f, &ctx, evaluate),
            Command::Compare(a) => dispatch("compare", a, f, &ctx, compare),
            Command::Matrix(a) => dispatch("matrix", a, f, &ctx, matrix),
            Command::Inverse(a) => dispatch("inverse", a, f, &ctx, inverse),
            Command::Plot(a) => dispatch("plot", a, f, &ctx, plot_cmd),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Mismatch(msg)) => {
            println!("{msg}");
            ExitCode::from(5)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
