use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mimeforge::dataset::{
    build_dataset, plan_motor_units, read_dataset, split, write_conditions_csv, write_dataset, ConditionVector, Dataset,
    Split,
};
use mimeforge::emg::{
    check_spikes, generate_spike_trains, illustrative_path, synthesize_dynamic, synthesize_static, write_emg,
    write_emg_csv, EmgRecord, SpikeTrainSet, Timing,
};
use mimeforge::eval::{informativeness, nrmse, throughput_bench, write_bench_csv, write_bench_summary};
use mimeforge::generate::{
    extrapolation_set, morph, prior_latent, sample, sweep, sweep_conditions, to_records, traversal_experiment,
    traversal_plans, write_curve_csv, write_steps_csv, ConditionPath, Origin, StepMeta,
};
use mimeforge::model::{cond_array, gradient_suite, load_checkpoint, Model};
use mimeforge::train::{fit, Trainer};
use mimeforge::{Error, Float, Result, Tensor4};
use serde::Serialize;

use crate::config::{Precision, RunConfig, SynthMode, TrainOn};
use crate::manifest::{write_json, OutDir};
use crate::{Cli, Command};

/// Worst relative error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    GradCheck(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::GradCheck(m) => f.write_str(m),
        }
    }
}

impl Failure {
    pub fn category(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.category(),
            Failure::Usage(_) => "usage",
            Failure::GradCheck(_) => "gradcheck",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "config" => 2,
            "input" => 3,
            "shape" => 4,
            "range" => 5,
            "numeric" => 6,
            "corrupt" => 7,
            "hash-mismatch" => 8,
            "io" => 9,
            "gradcheck" => 10,
            "usage" => 64,
            _ => 1,
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

pub fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        mimeforge::par::set_threads(n)?;
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let c = RunConfig::default();
            c.validate()?;
            c
        }
    };
    let mut inputs: Vec<PathBuf> = cli.config.iter().cloned().collect();
    match cli.command {
        Command::TeacherGen { out } => teacher_gen(&cfg, &out.out, &inputs)?,
        Command::Train { data, out } => {
            let d = need(data.dataset, &cfg.paths.dataset, "dataset")?;
            inputs.push(d.clone());
            by_precision!(cfg.precision, train(&cfg, &d, &out.out, &inputs))?
        }
        Command::Morph { model, data, index, conditions, out } => {
            let ck = need(model.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
            let d = need(data.dataset, &cfg.paths.dataset, "dataset")?;
            inputs.extend([ck.clone(), d.clone()]);
            let c = conditions.as_deref().map(parse_conditions).transpose()?;
            by_precision!(cfg.precision, morph_cmd(&cfg, &ck, &d, index, c, &out.out, &inputs))?
        }
        Command::Sample { model, conditions, count, extrapolate, out } => {
            let ck = need(model.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
            inputs.push(ck.clone());
            let c = parse_conditions(&conditions)?;
            by_precision!(cfg.precision, sample_cmd(&cfg, &ck, c, count, extrapolate, &out.out, &inputs))?
        }
        Command::Sweep { model, data, index, from, to, steps, out } => {
            let ck = need(model.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
            inputs.push(ck.clone());
            let path = match (from, to, &cfg.paths.condition_path) {
                (Some(a), Some(b), _) => ConditionPath::linear(parse_conditions(&a)?, parse_conditions(&b)?),
                (None, None, Some(p)) => {
                    inputs.push(p.clone());
                    read_json(p)?
                }
                _ => {
                    return Err(Failure::Usage(
                        "sweep needs --from and --to, or paths.condition_path in the config".into(),
                    ))
                }
            };
            let d = match index {
                Some(_) => {
                    let d = need(data.dataset, &cfg.paths.dataset, "dataset")?;
                    inputs.push(d.clone());
                    Some(d)
                }
                None => None,
            };
            let steps = steps.unwrap_or(cfg.generate.steps);
            by_precision!(cfg.precision, sweep_cmd(&cfg, &ck, d.as_deref(), index, &path, steps, &out.out, &inputs))?
        }
        Command::Traverse { model, data, out } => {
            let ck = need(model.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
            let d = need(data.dataset, &cfg.paths.dataset, "dataset")?;
            inputs.extend([ck.clone(), d.clone()]);
            by_precision!(cfg.precision, traverse_cmd(&cfg, &ck, &d, &out.out, &inputs))?
        }
        Command::Synth { model, data, csv, out } => {
            let ck = model.checkpoint.or_else(|| cfg.paths.checkpoint.clone());
            let d = data.dataset.or_else(|| cfg.paths.dataset.clone());
            inputs.extend(ck.iter().cloned());
            inputs.extend(d.iter().cloned());
            by_precision!(cfg.precision, synth_cmd(&cfg, ck.as_deref(), d.as_deref(), csv, &out.out, &mut inputs))?
        }
        Command::Eval { model, data, out } => {
            let ck = need(model.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
            let d = need(data.dataset, &cfg.paths.dataset, "dataset")?;
            inputs.extend([ck.clone(), d.clone()]);
            by_precision!(cfg.precision, eval_cmd(&cfg, &ck, &d, &out.out, &inputs))?
        }
        Command::Bench { model, out } => {
            let ck = model.checkpoint.or_else(|| cfg.paths.checkpoint.clone());
            inputs.extend(ck.iter().cloned());
            by_precision!(cfg.precision, bench_cmd(&cfg, ck.as_deref(), &out.out, &inputs))?
        }
        Command::Gradcheck { seed, out } => gradcheck(&cfg, seed, out.as_deref(), &inputs)?,
    }
    Ok(())
}

macro_rules! by_precision {
    ($p:expr, $f:ident ( $($a:expr),* )) => {
        match $p {
            Precision::F32 => $f::<f32>($($a),*),
            Precision::F64 => $f::<f64>($($a),*),
        }
    };
}
use by_precision;

fn need(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> std::result::Result<PathBuf, Failure> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::Usage(format!("no {what} given: pass --{what} or set paths.{what} in the config")))
}

fn parse_conditions(s: &str) -> Result<ConditionVector> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("not a number in conditions: {x:?}"))))
        .collect::<Result<_>>()?;
    let arr: [f64; 6] =
        v.try_into().map_err(|v: Vec<f64>| Error::InvalidInput(format!("expected 6 conditions, got {}", v.len())))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("conditions must be finite".into()));
    }
    Ok(ConditionVector(arr))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?))
}

fn paths(v: &[PathBuf]) -> Vec<&Path> {
    v.iter().map(PathBuf::as_path).collect()
}

fn load_data(cfg: &RunConfig, path: &Path) -> Result<Dataset> {
    let d = read_dataset(path)?;
    if (d.rows, d.cols, d.samples) != (cfg.model.rows, cfg.model.cols, cfg.model.samples) {
        return Err(Error::Shape(format!(
            "dataset grid {}x{}x{} does not match the model's {}x{}x{}",
            d.rows, d.cols, d.samples, cfg.model.rows, cfg.model.cols, cfg.model.samples
        )));
    }
    Ok(d)
}

fn load_model<F: Float>(cfg: &RunConfig, path: &Path) -> Result<Model<F>> {
    let (m, it) = load_checkpoint::<F>(path, &cfg.model)?;
    log::info!("loaded {} (iteration {it})", path.display());
    Ok(m)
}

fn data_split(cfg: &RunConfig, d: &Dataset) -> Result<Split> {
    split(d, cfg.dataset.train_frac, cfg.dataset.split_seed)
}

/// Units to train on and units held out, per `train_on`.
fn training_units(cfg: &RunConfig, d: &Dataset) -> Result<Split> {
    match cfg.train_on {
        TrainOn::Split => data_split(cfg, d),
        TrainOn::All => {
            let mut train = d.mu_ids();
            train.sort_unstable();
            Ok(Split { train, test: Vec::new() })
        }
    }
}

fn teacher_gen(cfg: &RunConfig, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let mus = plan_motor_units(&cfg.dataset);
    let d = build_dataset(&cfg.cylinder, &cfg.dataset, &mus, cfg.exec)?;
    log::info!("{} motor units, {} records", d.mu_count, d.records.len());
    write_dataset(&o.file("dataset.bmds"), &d)?;
    write_conditions_csv(create(&o.file("conditions.csv"))?, &d)?;
    write_json(&o.file("motor_units.json"), &mus)?;
    if d.mu_count >= 2 {
        write_json(&o.file("split.json"), &data_split(cfg, &d)?)?;
    }
    o.finish("teacher-gen", cfg, &paths(inputs))
}

#[derive(Serialize)]
struct TrainReport {
    iterations: u64,
    epochs: usize,
    train_units: Vec<u32>,
    final_losses: Option<FinalLosses>,
}

#[derive(Serialize)]
struct FinalLosses {
    d: f64,
    gan: f64,
    kl: f64,
    cyclic: f64,
    total: f64,
    lambda2: f64,
}

fn train<F: Float>(cfg: &RunConfig, data: &Path, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let d = load_data(cfg, data)?;
    let sp = training_units(cfg, &d)?;
    let idx = d.indices_of(&sp.train);
    let model = Model::<F>::new(cfg.model.clone(), cfg.train.seed)?;
    let mut t = Trainer::new(model, &d, idx, cfg.train.clone(), cfg.exec)?;
    log::info!("training on {} units, {} iterations", sp.train.len(), t.total_iterations());
    let s = fit(&mut t, Some(&o.dir), |e, _| {
        log::info!("epoch {e} done");
        Ok(())
    })?;
    o.file(mimeforge::train::METRICS_FILE);
    o.file(mimeforge::train::FINAL_CHECKPOINT);
    for c in &s.checkpoints {
        o.file(&c.file_name().expect("checkpoint file").to_string_lossy());
    }
    let report = TrainReport {
        iterations: s.iterations,
        epochs: s.epochs,
        train_units: sp.train,
        final_losses: s.last.map(|l| FinalLosses {
            d: l.d,
            gan: l.g.gan,
            kl: l.g.kl,
            cyclic: l.g.cyclic,
            total: l.g.total,
            lambda2: l.lambda2,
        }),
    };
    write_json(&o.file("train.json"), &report)?;
    o.finish("train", cfg, &paths(inputs))
}

/// Ground-truth record of `mu` at exactly `c`, if the dataset has one.
fn ground_truth(d: &Dataset, mu: u32, c: &ConditionVector) -> Option<usize> {
    d.records.iter().position(|r| r.mu_id == mu && r.conditions.distance(c) < 1e-9)
}

fn morph_cmd<F: Float>(
    cfg: &RunConfig,
    ck: &Path,
    data: &Path,
    index: usize,
    conditions: Option<ConditionVector>,
    out: &Path,
    inputs: &[PathBuf],
) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let m = load_model::<F>(cfg, ck)?;
    let d = load_data(cfg, data)?;
    let rec = d
        .records
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("record {index} out of range (dataset has {})", d.records.len())))?;
    let c = conditions.unwrap_or(rec.conditions);
    let y = morph(&m, &d.tensor(index).cast::<F>(), &c)?;
    let err = ground_truth(&d, rec.mu_id, &c).map(|g| nrmse(&d.records[g].data, y.data())).transpose()?;
    if let Some(e) = err {
        log::info!("nRMSE against teacher: {e:.3}%");
    }
    let recs = to_records(&d, rec.mu_id, &[y], &[c])?;
    write_dataset(&o.file("morph.bmds"), &recs)?;
    let meta = [StepMeta { step: 0, conditions: c, distance: rec.conditions.distance(&c), nrmse: err }];
    write_steps_csv(create(&o.file("steps.csv"))?, &meta)?;
    o.finish("morph", cfg, &paths(inputs))
}

fn empty_like(cfg: &RunConfig) -> Dataset {
    Dataset::empty(cfg.model.rows, cfg.model.cols, cfg.model.samples, cfg.dataset.ranges)
}

fn sample_cmd<F: Float>(
    cfg: &RunConfig,
    ck: &Path,
    c: ConditionVector,
    count: usize,
    extrapolate: Option<f64>,
    out: &Path,
    inputs: &[PathBuf],
) -> Result<()> {
    if count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    let mut o = OutDir::create(out)?;
    let m = load_model::<F>(cfg, ck)?;
    let seed = cfg.generate.seed;
    let (tensors, meta): (Vec<Tensor4<F>>, Vec<StepMeta>) = match extrapolate {
        Some(dist) => extrapolation_set(&m, &Origin::Prior(seed), &c, dist, count, cfg.exec)?
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.tensor, StepMeta { step: i, conditions: s.conditions, distance: s.distance, nrmse: None }))
            .unzip(),
        None => (0..count)
            .map(|i| {
                let y = sample(&m, &c, seed.wrapping_add(i as u64))?;
                Ok((y, StepMeta { step: i, conditions: c, distance: 0.0, nrmse: None }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };
    let conds: Vec<ConditionVector> = meta.iter().map(|s| s.conditions).collect();
    write_dataset(&o.file("samples.bmds"), &to_records(&empty_like(cfg), 0, &tensors, &conds)?)?;
    write_steps_csv(create(&o.file("steps.csv"))?, &meta)?;
    o.finish("sample", cfg, &paths(inputs))
}

#[allow(clippy::too_many_arguments)]
fn sweep_cmd<F: Float>(
    cfg: &RunConfig,
    ck: &Path,
    data: Option<&Path>,
    index: Option<usize>,
    path: &ConditionPath,
    steps: usize,
    out: &Path,
    inputs: &[PathBuf],
) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let m = load_model::<F>(cfg, ck)?;
    let d = data.map(|p| load_data(cfg, p)).transpose()?;
    let (origin, mu) = match (index, &d) {
        (Some(i), Some(d)) => {
            if i >= d.records.len() {
                return Err(Error::InvalidInput(format!("record {i} out of range (dataset has {})", d.records.len())));
            }
            (Origin::Encoded(d.tensor(i).cast::<F>()), Some(d.records[i].mu_id))
        }
        _ => (Origin::Prior(cfg.generate.seed), None),
    };
    let ys = sweep(&m, &origin, path, steps, cfg.exec)?;
    let conds = sweep_conditions(path, steps)?;
    let start = conds[0];
    let meta = ys
        .iter()
        .zip(&conds)
        .enumerate()
        .map(|(i, (y, c))| {
            let err = match (&d, mu) {
                (Some(d), Some(mu)) => ground_truth(d, mu, c).map(|g| nrmse(&d.records[g].data, y.data())).transpose()?,
                _ => None,
            };
            Ok(StepMeta { step: i, conditions: *c, distance: start.distance(c), nrmse: err })
        })
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&o.file("sweep.bmds"), &to_records(&empty_like(cfg), mu.unwrap_or(0), &ys, &conds)?)?;
    write_steps_csv(create(&o.file("steps.csv"))?, &meta)?;
    o.finish("sweep", cfg, &paths(inputs))
}

fn split_units(cfg: &RunConfig, d: &Dataset) -> Result<Vec<u32>> {
    Ok(match cfg.generate.split.as_str() {
        "all" => d.mu_ids(),
        which => {
            let sp = data_split(cfg, d)?;
            if which == "train" {
                sp.train
            } else {
                sp.test
            }
        }
    })
}

fn traverse_cmd<F: Float>(cfg: &RunConfig, ck: &Path, data: &Path, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let m = load_model::<F>(cfg, ck)?;
    let d = load_data(cfg, data)?;
    let units = split_units(cfg, &d)?;
    let plans = traversal_plans(&d, &units, cfg.generate.axis)?;
    let r = traversal_experiment(&m, &d, &plans, cfg.generate.legs, cfg.exec)?;
    for (mu, rows) in &r.per_unit {
        write_steps_csv(create(&o.file(&format!("unit_{mu:04}.csv")))?, rows)?;
    }
    write_curve_csv(create(&o.file("curve.csv"))?, &r.mean_curve)?;
    o.finish("traverse", cfg, &paths(inputs))
}

fn to_f32<F: Float>(r: EmgRecord<F>) -> EmgRecord<f32> {
    EmgRecord {
        rows: r.rows,
        cols: r.cols,
        samples: r.samples,
        rate_hz: r.rate_hz,
        noise_variance: r.noise_variance,
        data: r.data.iter().map(|v| v.as_f64() as f32).collect(),
    }
}

/// First record of each unit, by ascending unit id.
fn unit_records(d: &Dataset) -> Vec<usize> {
    let mut ids = d.mu_ids();
    ids.sort_unstable();
    ids.iter().map(|id| d.records.iter().position(|r| r.mu_id == *id).expect("id taken from records")).collect()
}

fn synth_cmd<F: Float>(
    cfg: &RunConfig,
    ck: Option<&Path>,
    data: Option<&Path>,
    csv: bool,
    out: &Path,
    inputs: &mut Vec<PathBuf>,
) -> Result<()> {
    let s = &cfg.synth;
    let mut o = OutDir::create(out)?;
    let spikes: SpikeTrainSet = match &cfg.paths.spikes {
        Some(p) => {
            inputs.push(p.clone());
            let sp = read_json(p)?;
            check_spikes(&sp)?;
            sp
        }
        None => generate_spike_trains(&s.pool, &s.excitation, cfg.exec)?,
    };
    s.excitation.validate()?;
    let timing = Timing { samples: s.excitation.samples(), rate_hz: s.excitation.rate_hz };
    let d = data.map(|p| load_data(cfg, p)).transpose()?;
    let firsts = d.as_ref().map(unit_records);
    let units = spikes.0.len();
    let rec = match s.mode {
        SynthMode::Static => {
            let (d, firsts) = match (&d, &firsts) {
                (Some(d), Some(f)) if !f.is_empty() => (d, f),
                _ => return Err(Error::InvalidInput("static synthesis needs a dataset with MUAPs".into())),
            };
            let lib: Vec<Tensor4<F>> = (0..units).map(|u| d.tensor(firsts[u % firsts.len()]).cast::<F>()).collect();
            synthesize_static(&lib, &spikes, timing, s.noise, cfg.exec)?
        }
        SynthMode::Dynamic => {
            let ck = ck.ok_or_else(|| Error::InvalidInput("dynamic synthesis needs a checkpoint".into()))?;
            let m = load_model::<F>(cfg, ck)?;
            let path = match &cfg.paths.condition_path {
                Some(p) => {
                    inputs.push(p.clone());
                    read_json(p)?
                }
                None => illustrative_path(&s.base_conditions),
            };
            let latents = (0..units)
                .map(|u| match (&d, &firsts) {
                    (Some(d), Some(f)) if !f.is_empty() => Ok(m.encode(&d.tensor(f[u % f.len()]).cast::<F>())?.mu),
                    _ => Ok(prior_latent(m.config.latent, s.latent_seed.wrapping_add(u as u64))),
                })
                .collect::<Result<Vec<_>>>()?;
            let (rec, stats) =
                synthesize_dynamic(&m, &latents, &path, &spikes, timing, s.noise, Some(s.levels), cfg.exec)?;
            write_json(&o.file("decodes.json"), &stats.decodes_per_unit)?;
            write_json(&o.file("path.json"), &path)?;
            rec
        }
    };
    let rec = to_f32(rec);
    write_emg(&o.file("emg.bmeg"), &rec)?;
    if csv {
        write_emg_csv(create(&o.file("emg.csv"))?, &rec)?;
    }
    write_json(&o.file("spikes.json"), &spikes)?;
    o.finish("synth", cfg, &paths(inputs))
}

#[derive(Serialize)]
struct EvalReport {
    train_units: Vec<u32>,
    test_units: Vec<u32>,
    train_nrmse: f64,
    test_nrmse: Option<f64>,
    informativeness: Option<mimeforge::eval::Informativeness>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn eval_cmd<F: Float>(cfg: &RunConfig, ck: &Path, data: &Path, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let m = load_model::<F>(cfg, ck)?;
    let d = load_data(cfg, data)?;
    let sp = training_units(cfg, &d)?;
    let per = mimeforge::par::try_map(cfg.exec, d.records.len(), |i| {
        let st = m.encode(&d.tensor(i).cast::<F>())?;
        let y = m.decode(&st.mu, &cond_array::<F>(&d.records[i].conditions))?;
        Ok((nrmse(&d.records[i].data, y.data())?, st.mu.iter().map(|v| v.as_f64()).collect::<Vec<f64>>()))
    })?;
    let mut w = create(&o.file("per_record.csv"))?;
    writeln!(w, "index,mu_id,split,nrmse")?;
    let (mut tr, mut te) = (Vec::new(), Vec::new());
    for (i, (e, _)) in per.iter().enumerate() {
        let mu = d.records[i].mu_id;
        let is_train = sp.train.contains(&mu);
        writeln!(w, "{i},{mu},{},{e}", if is_train { "train" } else { "test" })?;
        if is_train { &mut tr } else { &mut te }.push(*e);
    }
    w.flush()?;
    let info = if cfg.eval.informativeness {
        let z: Vec<Vec<f64>> = per.iter().map(|(_, z)| z.clone()).collect();
        let c: Vec<[f64; 6]> = d.records.iter().map(|r| r.conditions.0).collect();
        match informativeness(&z, &c, &cfg.eval.regressor, true, cfg.exec) {
            Ok(r) => Some(r),
            Err(e @ Error::InvalidInput(_)) => {
                log::warn!("informativeness skipped: {e}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let report = EvalReport {
        train_units: sp.train,
        test_units: sp.test,
        train_nrmse: mean(&tr).unwrap_or(f64::NAN),
        test_nrmse: mean(&te),
        informativeness: info,
    };
    let mut t = create(&o.file("eval.txt"))?;
    writeln!(t, "train morph nRMSE: {:.3}%", report.train_nrmse)?;
    if let Some(e) = report.test_nrmse {
        writeln!(t, "test morph nRMSE: {e:.3}%")?;
    }
    if let Some(i) = &report.informativeness {
        writeln!(t, "informativeness per condition: {:?}", i.scores)?;
        writeln!(t, "informativeness median: {:.4}", i.median)?;
        if let Some(c) = i.chance {
            writeln!(t, "permutation baseline per condition: {c:?}")?;
        }
    }
    t.flush()?;
    write_json(&o.file("eval.json"), &report)?;
    o.finish("eval", cfg, &paths(inputs))
}

fn bench_cmd<F: Float>(cfg: &RunConfig, ck: Option<&Path>, out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut o = OutDir::create(out)?;
    let m = match ck {
        Some(p) => load_model::<F>(cfg, p)?,
        None => Model::<F>::new(cfg.model.clone(), cfg.train.seed)?,
    };
    let r = throughput_bench(&m, &cfg.cylinder, &cfg.dataset.ranges, &cfg.bench)?;
    write_bench_csv(create(&o.file("bench.csv"))?, &r)?;
    let mut t = create(&o.file("bench.txt"))?;
    write_bench_summary(&mut t, &r)?;
    t.flush()?;
    write_json(&o.file("bench.json"), &r)?;
    write_bench_summary(std::io::stdout().lock(), &r)?;
    o.finish("bench", cfg, &paths(inputs))
}

fn gradcheck(cfg: &RunConfig, seed: u64, out: Option<&Path>, inputs: &[PathBuf]) -> CliResult {
    let suite = gradient_suite(seed)?;
    let mut lines = vec!["family,max_rel_error,worst_param,coordinates".to_string()];
    for (name, r) in &suite {
        println!("{name:<18} {:.3e}  ({} coordinates, worst {})", r.max_rel_error, r.coordinates, r.worst_param);
        lines.push(format!("{name},{:e},{},{}", r.max_rel_error, r.worst_param, r.coordinates));
    }
    if let Some(dir) = out {
        let mut o = OutDir::create(dir)?;
        std::fs::write(o.file("gradcheck.csv"), lines.join("\n") + "\n").map_err(Error::Stream)?;
        o.finish("gradcheck", cfg, &paths(inputs))?;
    }
    let bad: Vec<String> = suite
        .iter()
        .filter(|(_, r)| r.max_rel_error.is_nan() || r.max_rel_error >= GRADCHECK_TOLERANCE)
        .map(|(n, r)| format!("{n} ({:.3e})", r.max_rel_error))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::GradCheck(format!("relative error at or above {GRADCHECK_TOLERANCE}: {}", bad.join(", "))))
    }
}
