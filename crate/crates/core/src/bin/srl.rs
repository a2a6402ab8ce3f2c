use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use partitive_srl::corpus::write_conll;
use partitive_srl::embeddings::{load_vectors, VectorStore};
use partitive_srl::encoding::EncodingMode;
use partitive_srl::ensemble::{
    combine, decode, fit_weights, read_scores, write_scores, DecodeMode, EnsembleWeights,
    ScoreTable,
};
use partitive_srl::eval::{ablation_report, prf, render_csv, render_table, AblationMask};
use partitive_srl::features::{FeatureGroup, Task};
use partitive_srl::model::{feature_importances, BoostParams, GridSpec};
use partitive_srl::pipeline::{
    fit_profile, grid_search_model, train, Corpus, FeatureConfig, Featurizer, SrlModel, TrainOptions,
};
use partitive_srl::synth::{generate, random_vectors, SynthConfig};

/// A problem with how the tool was invoked rather than with its inputs.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Parser)]
#[command(name = "srl", version, about = "ARG1 identification for partitive and percent nouns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a CONLL file (and optional trees) and print a summary.
    Validate {
        #[arg(long)]
        conll: PathBuf,
        #[arg(long)]
        trees: Option<PathBuf>,
    },
    /// Dump feature records as name=value lines.
    Featurize(FeaturizeArgs),
    /// Train a boosted scorer.
    Train(TrainArgs),
    /// Score every token of a CONLL file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick hyperparameters by dev F1.
    Gridsearch(GridArgs),
    /// Fit convex weights for two score files on a dev set.
    EnsembleFit {
        #[arg(long)]
        scores_a: PathBuf,
        #[arg(long)]
        scores_b: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine two score files with fitted weights.
    EnsembleApply {
        #[arg(long)]
        scores_a: PathBuf,
        #[arg(long)]
        scores_b: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision, recall and F1 of a score file against gold annotation.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        decoding: DecodeArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train and score one model per feature-group mask.
    Ablate(AblateArgs),
    /// Rank encoded features by their share of boosting gain.
    Importances {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 15)]
        top: usize,
    },
    /// Write a seeded synthetic corpus with trees and vectors.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    conll: PathBuf,
    #[arg(long)]
    trees: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct FeatureArgs {
    /// percent or partitive
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated groups; defaults to every group the inputs support.
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct BoostArgs {
    /// onehot or ordinal
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long)]
    balanced: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    features: FeatureArgs,
    /// Use the feature settings and embedding averages of a trained model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    train_trees: Option<PathBuf>,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    dev_trees: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    boost: BoostArgs,
    /// Comma-separated candidates.
    #[arg(long)]
    grid_rounds: Option<String>,
    #[arg(long)]
    grid_depths: Option<String>,
    #[arg(long)]
    grid_shrinkages: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    boost: BoostArgs,
    /// `LABEL=all`, `LABEL=only:g1,g2` or `LABEL=without:g1,g2`; repeatable.
    /// Defaults to the six standard rows.
    #[arg(long = "mask")]
    masks: Vec<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    task: Option<String>,
    #[arg(long, default_value_t = 600)]
    train: usize,
    #[arg(long, default_value_t = 100)]
    dev: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 16)]
    dim: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Threshold,
    Argmax,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

/// Defaults read from the TOML file named by SRL_CONFIG. Flags override it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    task: Option<String>,
    encoding: Option<String>,
    groups: Option<Vec<String>>,
    rounds: Option<usize>,
    depth: Option<usize>,
    shrinkage: Option<f64>,
    balanced: Option<bool>,
    seed: Option<u64>,
    mode: Option<String>,
    tau: Option<f64>,
    grid_rounds: Option<Vec<usize>>,
    grid_depths: Option<Vec<usize>>,
    grid_shrinkages: Option<Vec<f64>>,
}

fn file_config() -> Result<FileConfig> {
    let Some(path) = std::env::var_os("SRL_CONFIG") else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading SRL_CONFIG {}", Path::new(&path).display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("SRL_CONFIG {}: {e}", Path::new(&path).display())))
}

fn parse_task(text: &str) -> Result<Task> {
    text.parse().map_err(|e| usage(format!("{e}")))
}

fn task(flag: &Option<String>, config: &FileConfig) -> Result<Task> {
    parse_task(flag.as_deref().or(config.task.as_deref()).unwrap_or("percent"))
}

fn read_vectors(path: &Option<PathBuf>) -> Result<Option<VectorStore>> {
    path.as_ref()
        .map(|p| {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            load_vectors(BufReader::new(file)).with_context(|| format!("reading {}", p.display()))
        })
        .transpose()
}

fn load_corpus(conll: &Path, trees: Option<&Path>) -> Result<Corpus> {
    Corpus::load(conll, trees).with_context(|| match trees {
        Some(t) => format!("loading {} with trees {}", conll.display(), t.display()),
        None => format!("loading {}", conll.display()),
    })
}

fn feature_config(
    args: &FeatureArgs,
    config: &FileConfig,
    has_vectors: bool,
    has_trees: bool,
) -> Result<FeatureConfig> {
    let task = task(&args.task, config)?;
    let mut features = FeatureConfig::available(task, has_vectors, has_trees);
    let names: Option<Vec<String>> = match &args.groups {
        Some(list) => Some(list.split(',').map(str::to_owned).collect()),
        None => config.groups.clone(),
    };
    if let Some(names) = names {
        let mut groups = BTreeSet::new();
        for name in names.iter().filter(|n| !n.trim().is_empty()) {
            groups.extend(FeatureGroup::parse_name(name).map_err(|e| usage(e.to_string()))?);
        }
        if groups.is_empty() {
            return Err(usage("--groups names no feature group"));
        }
        features.groups = groups;
    }
    Ok(features)
}

fn boost_params(args: &BoostArgs, config: &FileConfig) -> BoostParams {
    let defaults = BoostParams::default();
    BoostParams {
        rounds: args.rounds.or(config.rounds).unwrap_or(defaults.rounds),
        depth: args.depth.or(config.depth).unwrap_or(defaults.depth),
        shrinkage: args.shrinkage.or(config.shrinkage).unwrap_or(defaults.shrinkage),
        balanced: args.balanced || config.balanced.unwrap_or(defaults.balanced),
        seed: args.seed.or(config.seed).unwrap_or(defaults.seed),
    }
}

fn encoding(args: &BoostArgs, config: &FileConfig) -> Result<EncodingMode> {
    args.encoding
        .as_deref()
        .or(config.encoding.as_deref())
        .unwrap_or("onehot")
        .parse()
        .map_err(|e| usage(format!("{e}")))
}

fn train_options(
    features: &FeatureArgs,
    boost: &BoostArgs,
    config: &FileConfig,
    has_vectors: bool,
    has_trees: bool,
) -> Result<TrainOptions> {
    Ok(TrainOptions {
        features: feature_config(features, config, has_vectors, has_trees)?,
        encoding: encoding(boost, config)?,
        params: boost_params(boost, config),
    })
}

fn decode_mode(args: &DecodeArgs, config: &FileConfig) -> Result<DecodeMode> {
    let tau = args.tau.or(config.tau).unwrap_or(0.5);
    if !(0.0..=1.0).contains(&tau) {
        return Err(usage(format!("--tau {tau} outside [0, 1]")));
    }
    let mode = match (args.mode, config.mode.as_deref()) {
        (Some(m), _) => m,
        (None, Some("threshold")) => ModeArg::Threshold,
        (None, Some("argmax")) | (None, None) => ModeArg::Argmax,
        (None, Some(other)) => return Err(usage(format!("unknown mode {other:?}"))),
    };
    Ok(match mode {
        ModeArg::Threshold => DecodeMode::Threshold(tau),
        ModeArg::Argmax => DecodeMode::Argmax,
    })
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| usage(format!("--{flag}: cannot parse {x:?}")))
        })
        .collect()
}

fn grid_spec(args: &GridArgs, config: &FileConfig) -> Result<GridSpec> {
    let defaults = GridSpec::default();
    let rounds = match &args.grid_rounds {
        Some(t) => parse_list("grid-rounds", t)?,
        None => config.grid_rounds.clone().unwrap_or(defaults.rounds),
    };
    let depths = match &args.grid_depths {
        Some(t) => parse_list("grid-depths", t)?,
        None => config.grid_depths.clone().unwrap_or(defaults.depths),
    };
    let shrinkages = match &args.grid_shrinkages {
        Some(t) => parse_list("grid-shrinkages", t)?,
        None => config.grid_shrinkages.clone().unwrap_or(defaults.shrinkages),
    };
    Ok(GridSpec {
        rounds,
        depths,
        shrinkages,
        balanced: args.boost.balanced || config.balanced.unwrap_or(false),
    })
}

fn read_table(path: &Path, source: &str) -> Result<ScoreTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_scores(BufReader::new(file), source).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: &Option<PathBuf>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

fn read_model(path: &Path) -> Result<SrlModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SrlModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let config = file_config()?;
    match cli.command {
        Command::Validate { conll, trees } => {
            let corpus = load_corpus(&conll, trees.as_deref())?;
            let labeled = corpus.instances.iter().filter(|i| i.arg1_index.is_some()).count();
            println!(
                "{}: {} sentences, {} tokens, {} with ARG1{}",
                conll.display(),
                corpus.len(),
                corpus.token_count(),
                labeled,
                if corpus.trees.is_some() { ", trees aligned" } else { "" }
            );
        }
        Command::Featurize(args) => {
            let corpus = load_corpus(&args.input.conll, args.input.trees.as_deref())?;
            let store = read_vectors(&args.features.vectors)?;
            let trained = args.model.as_deref().map(read_model).transpose()?;
            let fitted;
            let (features, profile) = match &trained {
                Some(m) => (m.features.clone(), m.profile.as_ref()),
                None => {
                    let options = TrainOptions {
                        features: feature_config(
                            &args.features,
                            &config,
                            store.is_some(),
                            corpus.trees.is_some(),
                        )?,
                        encoding: EncodingMode::Onehot,
                        params: BoostParams::default(),
                    };
                    fitted = fit_profile(&options.features, &corpus, store.as_ref())?;
                    (options.features, fitted.as_ref())
                }
            };
            let featurizer = Featurizer {
                config: &features,
                profile,
                store: store.as_ref(),
            };
            let records = featurizer.corpus_records(&corpus)?;
            let labels = corpus.labels();
            let mut out = String::new();
            let keys = corpus
                .sentences
                .iter()
                .flat_map(|s| (0..s.len()).map(move |t| (s.sentence_id, t)));
            for (((s, t), record), label) in keys.zip(&records).zip(labels) {
                out.push_str(&format!("# sentence {s} token {t} arg1 {}\n", label as u8));
                out.push_str(&record.dump());
                out.push('\n');
            }
            emit(&args.out, &out)?;
        }
        Command::Train(args) => {
            let corpus = load_corpus(&args.input.conll, args.input.trees.as_deref())?;
            let store = read_vectors(&args.features.vectors)?;
            let options = train_options(
                &args.features,
                &args.boost,
                &config,
                store.is_some(),
                corpus.trees.is_some(),
            )?;
            let model = train(&options, &corpus, store.as_ref())?;
            write_file(&args.out, &model.to_json())?;
            eprintln!(
                "trained {} rounds over {} columns",
                model.boost.rounds.len(),
                model.boost.width
            );
        }
        Command::Predict {
            model,
            input,
            vectors,
            out,
        } => {
            let model = read_model(&model)?;
            let corpus = load_corpus(&input.conll, input.trees.as_deref())?;
            let store = read_vectors(&vectors)?;
            let table = model.predict(&corpus, store.as_ref())?;
            write_file(&out, &write_scores(&table))?;
        }
        Command::Gridsearch(args) => {
            let spec = grid_spec(&args, &config)?;
            let train_set = load_corpus(&args.split.train, args.split.train_trees.as_deref())?;
            let dev = load_corpus(&args.split.dev, args.split.dev_trees.as_deref())?;
            let store = read_vectors(&args.features.vectors)?;
            let options = train_options(
                &args.features,
                &args.boost,
                &config,
                store.is_some(),
                train_set.trees.is_some() && dev.trees.is_some(),
            )?;
            let (model, report) =
                grid_search_model(&spec, &options, &train_set, &dev, store.as_ref())?;
            write_file(&args.out, &model.to_json())?;
            emit(&args.report, &report.to_table())?;
        }
        Command::EnsembleFit {
            scores_a,
            scores_b,
            dev,
            out,
        } => {
            let a = read_table(&scores_a, "A")?;
            let b = read_table(&scores_b, "B")?;
            let dev = load_corpus(&dev, None)?;
            let weights = fit_weights(&a, &b, &dev.sentences)?;
            let json = serde_json::to_string_pretty(&weights)?;
            write_file(&out, &format!("{json}\n"))?;
            eprintln!("w_A = {:.2}, w_B = {:.2}", weights.w_a, weights.w_b);
        }
        Command::EnsembleApply {
            scores_a,
            scores_b,
            weights,
            out,
        } => {
            let a = read_table(&scores_a, "A")?;
            let b = read_table(&scores_b, "B")?;
            let text = fs::read_to_string(&weights)
                .with_context(|| format!("reading {}", weights.display()))?;
            let weights: EnsembleWeights = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", weights.display()))?;
            let table = combine(&a, &b, weights)?;
            write_file(&out, &write_scores(&table))?;
        }
        Command::Evaluate {
            gold,
            scores,
            decoding,
            format,
            report,
        } => {
            let mode = decode_mode(&decoding, &config)?;
            let gold = load_corpus(&gold, None)?;
            let table = read_table(&scores, "scores")?;
            let predictions = decode(&table, mode);
            let result = prf(&predictions, &gold.instances, &gold.sentences);
            let label = table.source.as_str();
            let text = match format {
                ReportFormat::Table => render_table([(label, &result)]),
                ReportFormat::Csv => render_csv([(label, &result)]),
            };
            emit(&report, &text)?;
        }
        Command::Ablate(args) => {
            let masks = if args.masks.is_empty() {
                AblationMask::standard()
            } else {
                args.masks
                    .iter()
                    .map(|m| m.parse().map_err(|e| usage(format!("--mask {m:?}: {e}"))))
                    .collect::<Result<Vec<AblationMask>>>()?
            };
            let train_set = load_corpus(&args.split.train, args.split.train_trees.as_deref())?;
            let dev = load_corpus(&args.split.dev, args.split.dev_trees.as_deref())?;
            let store = read_vectors(&args.features.vectors)?;
            let options = train_options(
                &args.features,
                &args.boost,
                &config,
                store.is_some(),
                train_set.trees.is_some() && dev.trees.is_some(),
            )?;
            let rows = ablation_report(&masks, &options, &train_set, &dev, store.as_ref())?;
            let pairs = rows.iter().map(|r| (r.label.as_str(), &r.scores));
            let text = match args.format {
                ReportFormat::Table => render_table(pairs),
                ReportFormat::Csv => render_csv(pairs),
            };
            emit(&args.out, &text)?;
        }
        Command::Importances { model, top } => {
            let model = read_model(&model)?;
            let ranked = feature_importances(&model.boost, &model.column_names());
            for (name, value) in ranked.into_iter().take(top) {
                println!("{value:.4}\t{name}");
            }
        }
        Command::Synth(args) => {
            let task = task(&args.task, &config)?;
            let seed = args.seed.or(config.seed).unwrap_or(0);
            if args.dim == 0 {
                return Err(usage("--dim must be positive"));
            }
            fs::create_dir_all(&args.out_dir)
                .with_context(|| format!("creating {}", args.out_dir.display()))?;
            let mut words = Vec::new();
            for (i, (name, size)) in [("train", args.train), ("dev", args.dev), ("test", args.test)]
                .into_iter()
                .enumerate()
            {
                let corpus = generate(&SynthConfig {
                    task,
                    sentences: size,
                    seed: seed.wrapping_add(i as u64),
                    ..SynthConfig::default()
                });
                write_file(
                    &args.out_dir.join(format!("{name}.conll")),
                    &write_conll(&corpus.sentences),
                )?;
                write_file(&args.out_dir.join(format!("{name}.trees")), &corpus.trees_text())?;
                words.extend(corpus.words().map(str::to_owned));
            }
            let store = random_vectors(words.iter().map(String::as_str), args.dim, seed);
            write_file(&args.out_dir.join("vectors.txt"), &store.to_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
