mod commands;
mod settings;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use gridsentry::data::DatasetPreset;
use gridsentry::optim::Monitor;
use gridsentry::{Error, ErrorClass};

use settings::List;

/// CNN-LSTM intrusion detection for SCADA flow statistics.
///
/// Every setting can also come from a `--config` file of `key = value`
/// lines, where the key is the flag name. Flags override the file, which
/// overrides built-in defaults.
#[derive(Parser, Debug)]
#[command(name = "gridsentry", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean, binarize and min-max scale a labeled CSV (scaling fitted on the whole file).
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Normalized CSV to write; a JSON sidecar goes to `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split 70:30, train on the training part and evaluate on the rest.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        arch: ArchArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Where to write the trained model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// JSON report path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on a labeled CSV.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Rows to score: `all`, or the `test`/`train` side of the split that
        /// `train` makes with the same `--seed` and `--train-ratio` [default: all].
        #[arg(long)]
        subset: Option<Subset>,
        /// Training share of the split used by `--subset` [default: 0.7].
        #[arg(long)]
        train_ratio: Option<f64>,
        /// Decision threshold on the attack probability [default: 0.5].
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        arch: ArchArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Number of folds [default: 5].
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-row attack probabilities for an (optionally unlabeled) CSV.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Input CSV; the label column may be absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Decision threshold on the attack probability [default: 0.5].
        #[arg(long)]
        threshold: Option<f64>,
        /// Output CSV `row,probability,prediction` (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Random cases per layer kind [default: 50].
        #[arg(long)]
        cases: Option<usize>,
        /// Largest accepted relative error [default: 1e-4].
        #[arg(long)]
        tolerance: Option<f64>,
        /// JSON report path (table only when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic labeled flow table.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Normal (label 0) rows [default: 666].
        #[arg(long)]
        normal_rows: Option<usize>,
        /// Attack (label 1) rows [default: 6660].
        #[arg(long)]
        attack_rows: Option<usize>,
        /// Feature columns [default: 60].
        #[arg(long)]
        features: Option<usize>,
        /// Shift applied to a quarter of the attack features [default: 2].
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Settings file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for splits, initialization, shuffling and dropout [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Labeled flow CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column drop-list and normal label of a known dataset: dnp3, iec104, generic [default: generic].
    #[arg(long)]
    pub preset: Option<DatasetPreset>,
    /// Label column name [default: label].
    #[arg(long)]
    pub label_column: Option<String>,
    /// Label value of benign rows; every other value counts as attack [default: NORMAL].
    #[arg(long)]
    pub normal_label: Option<String>,
    /// Extra comma-separated columns to drop, on top of the preset's.
    #[arg(long)]
    pub drop: Option<List<String>>,
}

#[derive(Args, Debug, Clone)]
pub struct ArchArgs {
    /// Filters in each of the three conv blocks [default: 64].
    #[arg(long)]
    pub filters: Option<usize>,
    /// Conv kernel width [default: 3].
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Max-pool width and stride [default: 2].
    #[arg(long)]
    pub pool: Option<usize>,
    /// Stacked LSTM widths, comma-separated [default: 64,128].
    #[arg(long)]
    pub lstm_units: Option<List<usize>>,
    /// Hidden dense width [default: 128].
    #[arg(long)]
    pub dense_units: Option<usize>,
    /// Dropout rate in [0, 1) [default: 0.4].
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum epochs [default: 150].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 16].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs without improvement before stopping [default: 10].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Early-stopping table: `validation` (carved from the training split) or `test` [default: validation].
    #[arg(long)]
    pub monitor: Option<Monitor>,
    /// Restore the best epoch's weights when stopping [default: true].
    #[arg(long)]
    pub restore_best: Option<bool>,
    /// Share of the training split carved for validation [default: 0.1].
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Loss weight of attack rows (unweighted when absent).
    #[arg(long)]
    pub pos_weight: Option<f64>,
    /// Adam beta1 [default: 0.9].
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam beta2 [default: 0.999].
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Adam epsilon [default: 1e-8].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Decision threshold on the attack probability [default: 0.5].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Training share of the train/test split [default: 0.7].
    #[arg(long)]
    pub train_ratio: Option<f64>,
    /// Parameter precision: f64 or f32 [default: f64].
    #[arg(long)]
    pub precision: Option<Precision>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

macro_rules! value_enum_from_str {
    ($t:ty) => {
        impl std::str::FromStr for $t {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                <$t as clap::ValueEnum>::from_str(s, true)
            }
        }
    };
}
value_enum_from_str!(Subset);
value_enum_from_str!(Precision);

/// Config-file keys: every long flag except `--config` itself.
pub fn known_keys() -> BTreeSet<String> {
    let mut keys = BTreeSet::new();
    for sub in Cli::command().get_subcommands() {
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                if long != "config" && long != "help" {
                    keys.insert(settings::canonical_key(long));
                }
            }
        }
    }
    keys
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
