use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gridsentry::data::{
    drop_incomplete_rows, load_csv, load_labeled, minmax_apply, minmax_fit, stratified_split, table_to_csv,
    CsvOptions, DatasetPreset, FitScope, FlowTable, NormalizationSpec, Preprocessing, Provenance, SynthConfig,
};
use gridsentry::eval::{crossval_with, evaluate, probabilities, write_report};
use gridsentry::gradcheck::{run_all, CheckSummary};
use gridsentry::model::{model_from_bytes, save_model, stored_scalar};
use gridsentry::optim::{fit, AdamConfig, EarlyStopping, EpochRecord, Monitor, TrainConfig};
use gridsentry::{generate_synthetic, ArchitectureConfig, Error, HybridModel, Report, Result, Scalar};
use serde::Serialize;

use crate::settings::{ConfigFile, List, Settings};
use crate::{known_keys, ArchArgs, Command, Common, DataArgs, Precision, Subset, TrainArgs};

const DEFAULT_SEED: u64 = 42;
const DEFAULT_TRAIN_RATIO: f64 = 0.7;

/// Runs one subcommand; the value is the process exit code.
pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Preprocess { common, data, out } => preprocess(&common, &data, out),
        Command::Train {
            common,
            data,
            arch,
            train,
            model,
            out,
        } => train_cmd(&common, &data, &arch, &train, model, out),
        Command::Evaluate {
            common,
            data,
            model,
            subset,
            train_ratio,
            threshold,
            out,
        } => evaluate_cmd(&common, &data, model, subset, train_ratio, threshold, out),
        Command::Crossval {
            common,
            data,
            arch,
            train,
            folds,
            out,
        } => crossval_cmd(&common, &data, &arch, &train, folds, out),
        Command::Predict {
            common,
            data,
            model,
            threshold,
            out,
        } => predict(&common, data, model, threshold, out),
        Command::Gradcheck {
            common,
            cases,
            tolerance,
            out,
        } => gradcheck(&common, cases, tolerance, out),
        Command::Synth {
            common,
            normal_rows,
            attack_rows,
            features,
            separation,
            out,
        } => synth(&common, normal_rows, attack_rows, features, separation, out),
    }
}

fn open_settings(common: &Common) -> Result<(Settings, u64)> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path, &known_keys())?,
        None => ConfigFile::default(),
    };
    let mut s = Settings::new(file);
    let seed = s.value("seed", common.seed, DEFAULT_SEED)?;
    Ok((s, seed))
}

struct Dataset {
    path: PathBuf,
    label_column: String,
    normal_label: String,
    drop_columns: Vec<String>,
}

impl Dataset {
    fn resolve(s: &mut Settings, args: &DataArgs) -> Result<Self> {
        let path = s.required("data", args.data.clone())?;
        let preset = s.value("preset", args.preset, DatasetPreset::Generic)?;
        let label_column = s.value("label_column", args.label_column.clone(), "label".to_string())?;
        let normal_label = s.value("normal_label", args.normal_label.clone(), preset.normal_label().to_string())?;
        let extra = s.value("drop", args.drop.clone(), List(Vec::new()))?;
        let mut drop_columns = preset.drop_columns();
        drop_columns.extend(extra.0);
        Ok(Self {
            path,
            label_column,
            normal_label,
            drop_columns,
        })
    }

    fn csv_options(&self) -> CsvOptions {
        CsvOptions::new(self.label_column.clone()).drop(self.drop_columns.clone())
    }

    /// Cleaned (incomplete rows and constant columns removed) and binarized.
    fn load(&self) -> Result<FlowTable> {
        progress(format_args!("loading {}", self.path.display()));
        let table = load_labeled(&self.path, &self.csv_options(), &self.normal_label)?;
        let [normal, attack] = table.class_counts()?;
        progress(format_args!(
            "{} rows ({normal} normal, {attack} attack), {} features",
            table.len(),
            table.n_features()
        ));
        Ok(table)
    }

    fn preprocessing(&self, table: &FlowTable, normalization: NormalizationSpec) -> Preprocessing {
        Preprocessing {
            label_column: self.label_column.clone(),
            normal_label: self.normal_label.clone(),
            drop_columns: self.drop_columns.clone(),
            encodings: table.provenance.encodings.clone(),
            normalization,
        }
    }
}

/// Architecture with a placeholder width; the real one comes from the data.
fn resolve_arch(s: &mut Settings, a: &ArchArgs) -> Result<ArchitectureConfig> {
    let d = ArchitectureConfig::new(1);
    let filters = s.value("filters", a.filters, d.conv_blocks[0].filters)?;
    let kernel = s.value("kernel_size", a.kernel_size, d.conv_blocks[0].kernel_size)?;
    let mut cfg = d
        .clone()
        .with_conv(filters, kernel)
        .with_lstm_units(s.value("lstm_units", a.lstm_units.clone(), List(d.lstm_units.clone()))?.0)
        .with_dense_units(s.value("dense_units", a.dense_units, d.dense_units)?)
        .with_dropout(s.value("dropout", a.dropout, d.dropout_rate)?);
    cfg.pool = s.value("pool", a.pool, d.pool)?;
    // Every field but the width is checked before any data is read.
    let mut probe = cfg.clone();
    probe.input_features = 1 << 16;
    probe.validate()?;
    Ok(cfg)
}

fn with_width(mut arch: ArchitectureConfig, features: usize) -> Result<ArchitectureConfig> {
    arch.input_features = features;
    arch.validate()?;
    Ok(arch)
}

struct TrainSettings {
    cfg: TrainConfig,
    train_ratio: f64,
    precision: Precision,
}

fn resolve_train(s: &mut Settings, t: &TrainArgs, seed: u64) -> Result<TrainSettings> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: s.value("lr", t.lr, d.learning_rate)?,
        max_epochs: s.value("epochs", t.epochs, d.max_epochs)?,
        batch_size: s.value("batch_size", t.batch_size, d.batch_size)?,
        adam: AdamConfig {
            beta1: s.value("beta1", t.beta1, d.adam.beta1)?,
            beta2: s.value("beta2", t.beta2, d.adam.beta2)?,
            epsilon: s.value("epsilon", t.epsilon, d.adam.epsilon)?,
        },
        early_stopping: EarlyStopping {
            monitor: s.value("monitor", t.monitor, d.early_stopping.monitor)?,
            patience: s.value("patience", t.patience, d.early_stopping.patience)?,
            restore_best: s.value("restore_best", t.restore_best, d.early_stopping.restore_best)?,
        },
        validation_fraction: s.value("validation_fraction", t.validation_fraction, d.validation_fraction)?,
        shuffle_seed: seed,
        pos_weight: s.optional("pos_weight", t.pos_weight)?,
        threshold: s.value("threshold", t.threshold, d.threshold)?,
    };
    cfg.validate()?;
    cfg.adam.validate()?;
    let train_ratio = check_ratio(s.value("train_ratio", t.train_ratio, DEFAULT_TRAIN_RATIO)?)?;
    let precision = s.value("precision", t.precision, Precision::F64)?;
    Ok(TrainSettings {
        cfg,
        train_ratio,
        precision,
    })
}

fn check_ratio(r: f64) -> Result<f64> {
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(Error::Config(format!("train_ratio must lie in (0, 1), got {r}")))
    }
}

fn check_threshold(t: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(Error::Config(format!("threshold must lie in [0, 1], got {t}")))
    }
}

fn progress(msg: std::fmt::Arguments) {
    eprintln!("{msg}");
}

fn epoch_line(r: &EpochRecord) {
    progress(format_args!(
        "epoch {:>3}  train loss {:.6}  monitor loss {:.6}  accuracy {:.2}%",
        r.epoch, r.train_loss, r.monitor_loss, r.monitor_metrics.accuracy
    ));
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn emit_report(report: &mut Report, s: &Settings, out: Option<&Path>, started: Instant) -> Result<()> {
    report.config = s.effective().clone();
    report.duration_seconds = started.elapsed().as_secs_f64();
    match out {
        Some(path) => {
            write_report(report, path)?;
            progress(format_args!("report written to {}", path.display()));
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn split_step(prov: &mut Provenance, ratio: f64, seed: u64, train: usize, test: usize) {
    prov.steps
        .push(format!("stratified split {ratio} (seed {seed}): {train} train rows, {test} test rows"));
}

fn preprocess(common: &Common, data: &DataArgs, out: Option<PathBuf>) -> Result<u8> {
    let (mut s, _) = open_settings(common)?;
    let dataset = Dataset::resolve(&mut s, data)?;
    let out = s.required("out", out)?;
    let table = dataset.load()?;
    let spec = minmax_fit(&table, FitScope::WholeDataset)?;
    let scaled = minmax_apply(&spec, table)?;
    write_text(&out, &table_to_csv(&scaled))?;

    #[derive(Serialize)]
    struct Sidecar<'a> {
        command: &'static str,
        config: &'a std::collections::BTreeMap<String, serde_json::Value>,
        rows: usize,
        features: usize,
        preprocessing: Preprocessing,
        provenance: &'a Provenance,
    }
    let sidecar = Sidecar {
        command: "preprocess",
        config: s.effective(),
        rows: scaled.len(),
        features: scaled.n_features(),
        preprocessing: dataset.preprocessing(&scaled, spec),
        provenance: &scaled.provenance,
    };
    let side_path = sidecar_path(&out);
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    write_text(&side_path, &text)?;
    progress(format_args!(
        "wrote {} rows to {} and provenance to {}",
        scaled.len(),
        out.display(),
        side_path.display()
    ));
    Ok(0)
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn train_cmd(
    common: &Common,
    data: &DataArgs,
    arch: &ArchArgs,
    targs: &TrainArgs,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let started = Instant::now();
    let (mut s, seed) = open_settings(common)?;
    let dataset = Dataset::resolve(&mut s, data)?;
    let arch = resolve_arch(&mut s, arch)?;
    let ts = resolve_train(&mut s, targs, seed)?;
    let model_path = s.required("model", model)?;
    let out = s.optional("out", out)?;

    let table = dataset.load()?;
    let arch = with_width(arch, table.n_features())?;
    s.value("input_features", None, arch.input_features)?;
    let mut report = match ts.precision {
        Precision::F64 => train_with::<f64>(&dataset, table, arch, &ts, seed, &model_path)?,
        Precision::F32 => train_with::<f32>(&dataset, table, arch, &ts, seed, &model_path)?,
    };
    emit_report(&mut report, &s, out.as_deref(), started)?;
    Ok(0)
}

fn train_with<T: Scalar>(
    dataset: &Dataset,
    table: FlowTable,
    arch: ArchitectureConfig,
    ts: &TrainSettings,
    seed: u64,
    model_path: &Path,
) -> Result<Report> {
    let plan = stratified_split(&table, ts.train_ratio, seed)?;
    let train_raw = table.subset(&plan.train);
    let spec = minmax_fit(&train_raw, FitScope::TrainOnly)?;
    let train_t = minmax_apply(&spec, train_raw)?;
    let mut test_t = minmax_apply(&spec, table.subset(&plan.test))?;
    split_step(&mut test_t.provenance, ts.train_ratio, seed, plan.train.len(), plan.test.len());

    let model = HybridModel::<T>::build(arch, seed)?;
    progress(format_args!(
        "training {} parameters ({}) on {} rows",
        model.params.count(),
        T::NAME,
        train_t.len()
    ));
    let monitor = match ts.cfg.early_stopping.monitor {
        Monitor::Test => Some(&test_t),
        Monitor::Validation => None,
    };
    let run = fit(model, &train_t, monitor, &ts.cfg, &mut epoch_line)?;
    progress(format_args!(
        "stopped after epoch {} (best epoch {})",
        run.stopped_epoch, run.best_epoch
    ));
    let (cm, m) = evaluate(&run.model, &test_t, ts.cfg.threshold)?;
    progress(format_args!(
        "test accuracy {:.2}%  precision {:.2}%  recall {:.2}%  F1 {:.2}%",
        m.accuracy, m.precision, m.recall, m.f1
    ));
    save_model(&run.model, Some(&dataset.preprocessing(&table, spec)), model_path)?;
    progress(format_args!("model written to {}", model_path.display()));

    let mut report = Report::new("train", seed).with_evaluation(cm, &m);
    report.provenance = Some(test_t.provenance.clone());
    report.history = run.history;
    report.best_epoch = Some(run.best_epoch);
    report.stopped_epoch = Some(run.stopped_epoch);
    Ok(report)
}

fn read_model_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cmd(
    common: &Common,
    data: &DataArgs,
    model: Option<PathBuf>,
    subset: Option<Subset>,
    train_ratio: Option<f64>,
    threshold: Option<f64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let started = Instant::now();
    let (mut s, seed) = open_settings(common)?;
    let dataset = Dataset::resolve(&mut s, data)?;
    let model_path = s.required("model", model)?;
    let subset = s.value("subset", subset, Subset::All)?;
    let ratio = check_ratio(s.value("train_ratio", train_ratio, DEFAULT_TRAIN_RATIO)?)?;
    let threshold = check_threshold(s.value("threshold", threshold, 0.5)?)?;
    let out = s.optional("out", out)?;

    let bytes = read_model_bytes(&model_path)?;
    let scalar = stored_scalar(&bytes)?;
    s.value("precision", None, scalar.clone())?;
    let mut report = if scalar == "f32" {
        evaluate_with::<f32>(&bytes, &dataset, subset, ratio, seed, threshold)?
    } else {
        evaluate_with::<f64>(&bytes, &dataset, subset, ratio, seed, threshold)?
    };
    emit_report(&mut report, &s, out.as_deref(), started)?;
    Ok(0)
}

fn evaluate_with<T: Scalar>(
    bytes: &[u8],
    dataset: &Dataset,
    subset: Subset,
    ratio: f64,
    seed: u64,
    threshold: f64,
) -> Result<Report> {
    let file = model_from_bytes::<T>(bytes)?;
    let (opts, normal_label) = match &file.preprocessing {
        Some(p) => (p.csv_options(false), p.normal_label.clone()),
        None => (dataset.csv_options(), dataset.normal_label.clone()),
    };
    let table = match subset {
        Subset::All => {
            let raw = drop_incomplete_rows(load_csv(&dataset.path, &opts)?)?;
            gridsentry::binarize_labels(raw, &normal_label)?
        }
        Subset::Train | Subset::Test => {
            let table = load_labeled(&dataset.path, &opts, &normal_label)?;
            let plan = stratified_split(&table, ratio, seed)?;
            let idx = if subset == Subset::Train { &plan.train } else { &plan.test };
            let mut part = table.subset(idx);
            split_step(&mut part.provenance, ratio, seed, plan.train.len(), plan.test.len());
            part
        }
    };
    let table = match &file.preprocessing {
        Some(p) => p.apply(table)?,
        None => table,
    };
    progress(format_args!("scoring {} rows", table.len()));
    let (cm, m) = evaluate(&file.model, &table, threshold)?;
    progress(format_args!(
        "accuracy {:.2}%  precision {:.2}%  recall {:.2}%  F1 {:.2}%",
        m.accuracy, m.precision, m.recall, m.f1
    ));
    let mut report = Report::new("evaluate", seed).with_evaluation(cm, &m);
    report.provenance = Some(table.provenance.clone());
    Ok(report)
}

fn crossval_cmd(
    common: &Common,
    data: &DataArgs,
    arch: &ArchArgs,
    targs: &TrainArgs,
    folds: Option<usize>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let started = Instant::now();
    let (mut s, seed) = open_settings(common)?;
    let dataset = Dataset::resolve(&mut s, data)?;
    let arch = resolve_arch(&mut s, arch)?;
    let ts = resolve_train(&mut s, targs, seed)?;
    let k = s.value("folds", folds, 5usize)?;
    if k < 2 {
        return Err(Error::Config(format!("folds must be at least 2, got {k}")));
    }
    let out = s.optional("out", out)?;

    let table = dataset.load()?;
    let arch = with_width(arch, table.n_features())?;
    s.value("input_features", None, arch.input_features)?;
    let mut on_fold = |i: usize, f: &gridsentry::eval::FoldResult| {
        progress(format_args!(
            "fold {}/{k}: accuracy {:.2}%  recall {:.2}%  (stopped at epoch {})",
            i + 1,
            f.metrics.accuracy,
            f.metrics.recall,
            f.stopped_epoch
        ))
    };
    let cv = match ts.precision {
        Precision::F64 => crossval_with::<f64>(&table, &arch, &ts.cfg, k, seed, &mut on_fold)?,
        Precision::F32 => crossval_with::<f32>(&table, &arch, &ts.cfg, k, seed, &mut on_fold)?,
    };
    let m = &cv.means;
    progress(format_args!(
        "mean accuracy {:.2}%  precision {:.2}%  recall {:.2}%  F1 {:.2}%",
        m.accuracy, m.precision, m.recall, m.f1
    ));
    let mut report = Report::new("crossval", seed).with_crossval(&cv);
    report.provenance = Some(table.provenance.clone());
    emit_report(&mut report, &s, out.as_deref(), started)?;
    Ok(0)
}

fn predict(
    common: &Common,
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    threshold: Option<f64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let (mut s, _) = open_settings(common)?;
    let data = s.required("data", data)?;
    let model_path = s.required("model", model)?;
    let threshold = check_threshold(s.value("threshold", threshold, 0.5)?)?;
    let out = s.optional("out", out)?;

    let bytes = read_model_bytes(&model_path)?;
    let text = if stored_scalar(&bytes)? == "f32" {
        predict_with::<f32>(&bytes, &data, threshold)?
    } else {
        predict_with::<f64>(&bytes, &data, threshold)?
    };
    match out {
        Some(path) => {
            write_text(&path, &text)?;
            progress(format_args!("predictions written to {}", path.display()));
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    Ok(0)
}

/// One output line per input row; rows with missing or non-finite cells get
/// blank probability and prediction fields.
fn predict_with<T: Scalar>(bytes: &[u8], data: &Path, threshold: f64) -> Result<String> {
    let file = model_from_bytes::<T>(bytes)?;
    let table = match &file.preprocessing {
        Some(p) => p.apply(load_csv(data, &p.csv_options(true))?)?,
        None => {
            let mut opts = CsvOptions::new("label");
            opts.label_optional = true;
            load_csv(data, &opts)?
        }
    };
    let valid: Vec<usize> = (0..table.len())
        .filter(|&i| table.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let skipped = table.len() - valid.len();
    if skipped > 0 {
        progress(format_args!("{skipped} rows have missing or non-finite values; left blank"));
    }
    let probs = if valid.is_empty() {
        Vec::new()
    } else {
        probabilities(&file.model, &table.subset(&valid))?
    };
    let mut text = String::from("row,probability,prediction\n");
    let mut next = valid.iter().zip(&probs).peekable();
    for i in 0..table.len() {
        match next.peek() {
            Some((&j, &p)) if j == i => {
                let p = p.as_f64();
                text.push_str(&format!("{i},{p},{}\n", u8::from(p >= threshold)));
                next.next();
            }
            _ => text.push_str(&format!("{i},,\n")),
        }
    }
    Ok(text)
}

fn gradcheck(common: &Common, cases: Option<usize>, tolerance: Option<f64>, out: Option<PathBuf>) -> Result<u8> {
    let started = Instant::now();
    let (mut s, seed) = open_settings(common)?;
    let cases = s.value("cases", cases, 50usize)?;
    if cases == 0 {
        return Err(Error::Config("cases must be at least 1".into()));
    }
    let tolerance = s.value("tolerance", tolerance, gridsentry::gradcheck::DEFAULT_TOLERANCE)?;
    let out = s.optional("out", out)?;

    let summaries = run_all(cases, seed, tolerance)?;
    print!("{}", gradcheck_table(&summaries, tolerance));
    let failed = summaries.iter().filter(|c| !c.passed).count();
    if let Some(path) = out {
        #[derive(Serialize)]
        struct GradReport<'a> {
            command: &'static str,
            seed: u64,
            config: &'a std::collections::BTreeMap<String, serde_json::Value>,
            checks: &'a [CheckSummary],
            passed: bool,
            duration_seconds: f64,
        }
        let r = GradReport {
            command: "gradcheck",
            seed,
            config: s.effective(),
            checks: &summaries,
            passed: failed == 0,
            duration_seconds: started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&r).expect("report serializes");
        text.push('\n');
        write_text(&path, &text)?;
    }
    if failed > 0 {
        eprintln!("error: {failed} gradient check(s) exceeded tolerance {tolerance:e}");
        return Ok(3);
    }
    Ok(0)
}

fn gradcheck_table(summaries: &[CheckSummary], tolerance: f64) -> String {
    let mut t = format!(
        "{:<16} {:>6} {:>14} {:>12}  result (tolerance {tolerance:e})\n",
        "kind", "cases", "max rel err", "worst seed"
    );
    for c in summaries {
        t.push_str(&format!(
            "{:<16} {:>6} {:>14.3e} {:>12}  {}\n",
            c.name,
            c.cases,
            c.max_rel_error,
            c.worst_seed,
            if c.passed { "pass" } else { "FAIL" }
        ));
    }
    t
}

fn synth(
    common: &Common,
    normal_rows: Option<usize>,
    attack_rows: Option<usize>,
    features: Option<usize>,
    separation: Option<f64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let (mut s, seed) = open_settings(common)?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_normal: s.value("normal_rows", normal_rows, d.n_normal)?,
        n_attack: s.value("attack_rows", attack_rows, d.n_attack)?,
        features: s.value("features", features, d.features)?,
        separation: s.value("separation", separation, d.separation)?,
        seed,
    };
    let out = s.required("out", out)?;
    let table = generate_synthetic(&cfg)?;
    write_text(&out, &table_to_csv(&table))?;
    progress(format_args!(
        "wrote {} rows of {} features to {}",
        table.len(),
        table.n_features(),
        out.display()
    ));
    Ok(0)
}
