use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stresslab::classifiers::{ClassifierSpec, Family, MaxFeatures, ModelDocument};
use stresslab::dataset::{
    filter_by_validity, load_dataset, write_dataset, write_predictions, Dataset, Schema,
};
use stresslab::eval::pipeline::{
    fit_document, predict_windows, prepare_training, select_features, sweep_table, BalanceMode,
    SelectorKind, TOOL_VERSION,
};
use stresslab::eval::{cross_validate, run_pipeline, run_sweep, CvScheme, F1Mode, PipelineConfig};
use stresslab::features::{extract_matrix, FeatureMatrix};
use stresslab::selection::{ridge_screen, Direction, FeatureSubset};
use stresslab::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(
    name = "stresslab",
    version,
    about = "Stress classification from minute-level wearable summaries"
)]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true, env = "STRESSLAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL window file with a planted stress signal
    Synth(SynthArgs),
    /// Prepare windows and write the 16-feature CSV
    Extract(ExtractArgs),
    /// Ridge correlation screen of a feature CSV
    Screen(ScreenArgs),
    /// Wrapper feature selection on a feature CSV
    Select(SelectArgs),
    /// Fit a classifier on a feature CSV and write the model JSON
    Train(TrainArgs),
    /// Predict labels for a window file and write answer.txt
    Predict(PredictArgs),
    /// Cross-validate a classifier on a feature CSV
    Evaluate(EvaluateArgs),
    /// Full workflow: filter, discretize, balance, extract, select, fit, predict
    Pipeline(PipelineArgs),
    /// Run the training-side workflow across several filter ratios
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    #[arg(long, default_value_t = 0.5)]
    stress_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    effect: f64,
    #[arg(long, default_value_t = 0.1)]
    invalid_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit raw_label (test-schema file)
    #[arg(long)]
    unlabeled: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum BalanceArg {
    BeforeSplit,
    WithinFolds,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    LinearSvc,
    Knn,
    GaussianNb,
    DecisionTree,
    RandomForest,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    Sfs,
    Rfecv,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Clone, Copy, ValueEnum)]
enum F1Arg {
    Positive,
    Macro,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaxFeaturesArg {
    Sqrt,
    All,
}

/// Data preparation flags. Unset flags fall back to the config file, then defaults.
#[derive(Args, Default)]
struct PrepArgs {
    /// Minimum frame validity kept (inclusive)
    #[arg(long)]
    p: Option<f64>,
    /// raw_label >= threshold is class 1
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    balance: Option<BalanceArg>,
    /// Floor for the HF denominator of LF/HF
    #[arg(long)]
    eps: Option<f64>,
}

impl PrepArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.balance {
            cfg.balance = match b {
                BalanceArg::BeforeSplit => BalanceMode::BeforeSplit,
                BalanceArg::WithinFolds => BalanceMode::WithinFolds,
                BalanceArg::Off => BalanceMode::Off,
            };
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
    }
}

#[derive(Args, Default)]
struct ClassifierArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Linear-SVC penalty
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Neighbours for knn
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    var_floor: Option<f64>,
    #[arg(long)]
    min_samples_split: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, value_enum)]
    max_features: Option<MaxFeaturesArg>,
}

impl ClassifierArgs {
    fn apply(&self, base: Family) -> Family {
        let mut family = match self.family {
            None => base,
            Some(FamilyArg::LinearSvc) if matches!(base, Family::LinearSvc { .. }) => base,
            Some(FamilyArg::Knn) if matches!(base, Family::Knn { .. }) => base,
            Some(FamilyArg::GaussianNb) if matches!(base, Family::GaussianNb { .. }) => base,
            Some(FamilyArg::DecisionTree) if matches!(base, Family::DecisionTree { .. }) => base,
            Some(FamilyArg::RandomForest) if matches!(base, Family::RandomForest { .. }) => base,
            Some(FamilyArg::LinearSvc) => Family::linear_svc(),
            Some(FamilyArg::Knn) => Family::knn(5),
            Some(FamilyArg::GaussianNb) => Family::gaussian_nb(),
            Some(FamilyArg::DecisionTree) => Family::decision_tree(),
            Some(FamilyArg::RandomForest) => Family::random_forest(),
        };
        match &mut family {
            Family::LinearSvc { c, max_iter } => {
                set(c, self.c);
                set(max_iter, self.max_iter);
            }
            Family::Knn { k } => set(k, self.k),
            Family::GaussianNb { var_floor } => set(var_floor, self.var_floor),
            Family::DecisionTree {
                min_samples_split,
                max_depth,
            } => {
                set(min_samples_split, self.min_samples_split);
                if self.max_depth.is_some() {
                    *max_depth = self.max_depth;
                }
            }
            Family::RandomForest {
                n_trees,
                min_samples_split,
                max_depth,
                bootstrap,
                max_features,
            } => {
                set(n_trees, self.trees);
                set(min_samples_split, self.min_samples_split);
                if self.max_depth.is_some() {
                    *max_depth = self.max_depth;
                }
                if self.no_bootstrap {
                    *bootstrap = false;
                }
                if let Some(m) = self.max_features {
                    *max_features = match m {
                        MaxFeaturesArg::Sqrt => MaxFeatures::Sqrt,
                        MaxFeaturesArg::All => MaxFeatures::All,
                    };
                }
            }
        }
        family
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args, Default)]
struct SelectorArgs {
    #[arg(long, value_enum)]
    selector: Option<SelectorArg>,
    /// Subset size for sfs, minimum size for rfecv
    #[arg(long)]
    k_target: Option<usize>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long)]
    folds: Option<usize>,
}

impl SelectorArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(s) = self.selector {
            cfg.selector = match s {
                SelectorArg::Sfs => SelectorKind::Sfs,
                SelectorArg::Rfecv => SelectorKind::Rfecv,
                SelectorArg::None => SelectorKind::None,
            };
        }
        set(&mut cfg.k_target, self.k_target);
        if let Some(d) = self.direction {
            cfg.direction = match d {
                DirectionArg::Forward => Direction::Forward,
                DirectionArg::Backward => Direction::Backward,
            };
        }
        set(&mut cfg.folds, self.folds);
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    schema: SchemaArg,
    #[command(flatten)]
    prep: PrepArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    lower: f64,
    #[arg(long, default_value_t = 2.0)]
    upper: f64,
    /// Report path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// Subset JSON from `select` (default: all columns)
    #[arg(long)]
    subset: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value = "answer.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    subset: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_enum)]
    f1_mode: Option<F1Arg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, value_enum)]
    f1_mode: Option<F1Arg>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    prep: PrepArgs,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Report JSON path (default: stdout)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Prediction file (default: answer.txt when --test is given)
    #[arg(long)]
    answer: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated filter ratios
    #[arg(long = "p", value_delimiter = ',', default_value = "0.3,0.4,0.5,0.6,0.7")]
    ratios: Vec<f64>,
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    balance: Option<BalanceArg>,
    #[arg(long)]
    eps: Option<f64>,
    /// Rows as JSON (the table always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, prep: &PrepArgs) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(train) = &self.train {
            cfg.train = train.clone();
        }
        prep.apply(&mut cfg);
        cfg.classifier = self.classifier.apply(cfg.classifier.clone());
        self.selector.apply(&mut cfg);
        if let Some(m) = self.f1_mode {
            cfg.f1_mode = f1_mode(m);
        }
        set(&mut cfg.ridge_lambda, self.lambda);
        if cfg.train.as_os_str().is_empty() {
            bail!(UsageError("--train (or `train` in the config file) is required".into()));
        }
        Ok(cfg)
    }
}

fn f1_mode(arg: F1Arg) -> F1Mode {
    match arg {
        F1Arg::Positive => F1Mode::Positive,
        F1Arg::Macro => F1Mode::Macro,
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    tool_version: &'static str,
    config: serde_json::Value,
    #[serde(flatten)]
    body: &'a T,
}

fn emit(json: String, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn load_subset(path: Option<&Path>, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let subset = FeatureSubset::from_json(&text)?;
            // Resolve by name so the subset stays valid for any column order.
            subset
                .names
                .iter()
                .map(|name| {
                    matrix
                        .names
                        .iter()
                        .position(|n| n == name)
                        .with_context(|| format!("feature `{name}` is not in the CSV"))
                })
                .collect()
        }
        None => Ok((0..matrix.n_cols()).collect()),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut ds = generate(&SynthConfig {
        n_windows: args.n,
        frames_per_window: args.frames,
        stress_fraction: args.stress_fraction,
        effect_size: args.effect,
        invalid_frame_rate: args.invalid_rate,
        seed: args.seed,
    })?;
    if args.unlabeled {
        ds.windows.iter_mut().for_each(|w| w.raw_label = None);
        ds.has_labels = false;
    }
    write_dataset(&ds, &args.out)?;
    eprintln!("wrote {} windows to {}", ds.len(), args.out.display());
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let mut cfg = PipelineConfig::default();
    args.prep.apply(&mut cfg);
    let matrix = match args.schema {
        SchemaArg::Train => {
            let raw = load_dataset(&args.input, Schema::Train)?;
            let (prepared, summary) = prepare_training(&raw, cfg.p, cfg.threshold, cfg.balance, cfg.seed)?;
            eprintln!(
                "{} windows loaded, {} after filtering, {} used (class counts {:?})",
                summary.windows_loaded, summary.windows_after_filter, summary.windows_used, summary.class_counts_used
            );
            extract_matrix(&prepared, cfg.eps)?
        }
        SchemaArg::Test => {
            let raw = load_dataset(&args.input, Schema::Test)?;
            let kept: Dataset = filter_by_validity(&raw, cfg.p)?.retain_min_frames(2);
            eprintln!("{} of {} windows featurized", kept.len(), raw.len());
            extract_matrix(&kept, cfg.eps)?
        }
    };
    matrix.save_csv(&args.out)?;
    Ok(())
}

fn cmd_screen(args: &ScreenArgs) -> Result<()> {
    let matrix = FeatureMatrix::load_csv(&args.features)?;
    let report = ridge_screen(&matrix, args.lambda, args.lower, args.upper)?;
    let tagged = Tagged {
        tool_version: TOOL_VERSION,
        config: serde_json::json!({ "features": args.features }),
        body: &report,
    };
    emit(serde_json::to_string_pretty(&tagged)?, args.out.as_deref())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let matrix = FeatureMatrix::load_csv(&args.features)?;
    let mut cfg = PipelineConfig::default();
    args.selector.apply(&mut cfg);
    set(&mut cfg.seed, args.seed);
    let spec = ClassifierSpec::new(args.classifier.apply(Family::linear_svc()), cfg.seed);
    let subset = select_features(
        &matrix,
        &spec,
        cfg.selector,
        cfg.k_target,
        cfg.direction,
        &CvScheme::ordered(cfg.folds),
    )?;
    let tagged = Tagged {
        tool_version: TOOL_VERSION,
        config: serde_json::json!({
            "features": args.features,
            "classifier": spec,
            "selector": cfg.selector,
            "k_target": cfg.k_target,
            "direction": cfg.direction,
            "folds": cfg.folds,
        }),
        body: &subset,
    };
    emit(serde_json::to_string_pretty(&tagged)?, args.out.as_deref())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let matrix = FeatureMatrix::load_csv(&args.features)?;
    let columns = load_subset(args.subset.as_deref(), &matrix)?;
    let seed = args.seed.unwrap_or(PipelineConfig::default().seed);
    let spec = ClassifierSpec::new(args.classifier.apply(Family::linear_svc()), seed);
    let doc = fit_document(&matrix, &columns, &spec)?;
    std::fs::write(&args.out, doc.to_json()? + "\n").with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let defaults = PipelineConfig::default();
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let doc = ModelDocument::from_json(&text)?;
    let windows = load_dataset(&args.input, Schema::Test)?;
    let out = predict_windows(&doc, &windows, args.p.unwrap_or(defaults.p), args.eps.unwrap_or(defaults.eps))?;
    write_predictions(&out.labels, &args.out)?;
    eprintln!(
        "wrote {} predictions ({} fallback) to {}",
        out.labels.len(),
        out.fallback,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let matrix = FeatureMatrix::load_csv(&args.features)?;
    let columns = load_subset(args.subset.as_deref(), &matrix)?;
    let defaults = PipelineConfig::default();
    let spec = ClassifierSpec::new(
        args.classifier.apply(Family::linear_svc()),
        args.seed.unwrap_or(defaults.seed),
    );
    let folds = args.folds.unwrap_or(defaults.folds);
    let mode = args.f1_mode.map(f1_mode).unwrap_or_default();
    let view = matrix.select_columns(&columns)?;
    let cv = cross_validate(&spec, &view, &CvScheme::ordered(folds))?;
    let tagged = Tagged {
        tool_version: TOOL_VERSION,
        config: serde_json::json!({
            "features": args.features,
            "columns": view.names,
            "classifier": spec,
            "folds": folds,
            "f1_mode": mode,
        }),
        body: &cv,
    };
    eprintln!(
        "mean accuracy {:.3}, mean F1 ({}) {:.3}",
        cv.mean_accuracy,
        if mode == F1Mode::Macro { "macro" } else { "positive" },
        if mode == F1Mode::Macro { cv.mean_f1_macro } else { cv.mean_f1 }
    );
    emit(serde_json::to_string_pretty(&tagged)?, args.out.as_deref())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let mut cfg = args.run.config(&args.prep)?;
    if let Some(test) = &args.test {
        cfg.test = Some(test.clone());
    }
    if args.report.is_some() {
        cfg.report = args.report.clone();
    }
    if args.answer.is_some() {
        cfg.answer = args.answer.clone();
    }
    if cfg.test.is_some() && cfg.answer.is_none() {
        cfg.answer = Some(PathBuf::from("answer.txt"));
    }
    let out = run_pipeline(&cfg)?;
    eprint!("{}", out.report.summary_table());
    if cfg.report.is_none() {
        println!("{}", out.report.to_json()?);
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let prep = PrepArgs {
        p: None,
        threshold: args.threshold,
        seed: args.seed,
        balance: args.balance,
        eps: args.eps,
    };
    let cfg = args.run.config(&prep)?;
    let rows = run_sweep(&cfg, &args.ratios)?;
    print!("{}", sweep_table(&rows));
    if let Some(out) = &args.out {
        let tagged = Tagged {
            tool_version: TOOL_VERSION,
            config: serde_json::to_value(&cfg)?,
            body: &serde_json::json!({ "rows": rows }),
        };
        emit(serde_json::to_string_pretty(&tagged)?, Some(out))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Screen(a) => cmd_screen(a),
        Command::Select(a) => cmd_select(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// 1 for usage and parameter errors, 2 for data errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<stresslab::Error>().map(stresslab::Error::root) {
        Some(stresslab::Error::InvalidParameter(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
