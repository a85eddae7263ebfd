use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use attntopo::features::{
    extract_batch, head_diagrams, read_feature_csv, write_diagrams_csv, write_feature_csv, FeatureOptions,
    FeatureVector, DEFAULT_WASSERSTEIN_P,
};
use attntopo::persistence::{PersistenceOptions, DEFAULT_CAP, DEFAULT_SIMPLEX_BUDGET, MAX_HOMOLOGY_DIM};
use attntopo::pipeline::{
    evaluate_scores, read_scores_csv, run_pipeline, score_vectors, synth_split, write_run_output,
    write_scores_csv, EvalReport, FeatureSource, PipelineConfig, SynthSettings,
};
use attntopo::record_io::{
    read_attention_records, read_embedding_records, sniff_magic, write_records, Split, ATTENTION_MAGIC,
    EMBEDDING_MAGIC,
};
use attntopo::scoring::{FitOptions, OodModel, Scorer, DEFAULT_K, DEFAULT_RIDGE, DEFAULT_TARGET_TPR};
use attntopo::{Error, Result};

#[derive(Parser)]
#[command(name = "attntopo", version, about = "Topological OOD detection from attention maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic attention records.
    Synth(SynthArgs),
    /// Turn attention records into topological feature vectors.
    Features(FeaturesArgs),
    /// Fit standardiser, Mahalanobis and kNN scorers on ID validation vectors.
    Fit(FitArgs),
    /// Score vectors with a fitted model.
    Score(ScoreArgs),
    /// Compute AUROC / FPR95 from score files.
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 16)]
    n_tokens: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 0.8)]
    locality: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// train, validation, test or ood.
    #[arg(long, default_value = "validation")]
    split: Split,
    /// Global index of the first record; keeps seeds of different splits disjoint.
    #[arg(long, default_value_t = 0)]
    first_index: u64,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long, default_value_t = MAX_HOMOLOGY_DIM)]
    max_hom_dim: usize,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: f64,
    #[arg(long, default_value_t = DEFAULT_WASSERSTEIN_P)]
    wasserstein_p: f64,
    /// 0 keeps every token.
    #[arg(long, default_value_t = 64)]
    max_tokens: usize,
    #[arg(long, default_value_t = DEFAULT_SIMPLEX_BUDGET)]
    simplex_budget: u64,
}

impl FeatureArgs {
    fn options(&self) -> FeatureOptions {
        FeatureOptions {
            persistence: PersistenceOptions {
                max_hom_dim: self.max_hom_dim,
                cap: self.cap,
                simplex_budget: self.simplex_budget,
            },
            wasserstein_p: self.wasserstein_p,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Args)]
struct FeaturesArgs {
    /// ATNR record file.
    #[arg(long)]
    input: PathBuf,
    /// Output path; `.embr` writes the binary format, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also dump every persistence pair as CSV.
    #[arg(long)]
    diagrams: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Feature CSV or EMBR file of ID validation vectors.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, default_value_t = DEFAULT_TARGET_TPR)]
    target_tpr: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// tda or cls.
    #[arg(long, default_value = "tda")]
    source: String,
    /// Dataset name recorded with each row; defaults to the input file stem.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "knn,maha")]
    scorers: Vec<Scorer>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Score CSV files written by `score`.
    #[arg(required = true)]
    scores: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn read_vectors(path: &Path) -> Result<Vec<FeatureVector>> {
    match sniff_magic(path)? {
        Some(magic) if magic == EMBEDDING_MAGIC => Ok(read_embedding_records(path)?
            .into_iter()
            .map(FeatureVector::from_embedding)
            .collect()),
        Some(magic) if magic == ATTENTION_MAGIC => Err(Error::invalid(format!(
            "{} holds attention records; run `features` first",
            path.display()
        ))),
        _ => read_feature_csv(BufReader::new(File::open(path)?)),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let settings = SynthSettings {
        count: args.count,
        n_tokens: args.n_tokens,
        layers: args.layers,
        heads: args.heads,
        ..SynthSettings::default()
    };
    let records = synth_split(args.seed, args.first_index, args.count, &settings, args.split, args.locality)?;
    write_records(&records, &args.out)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<()> {
    let options = args.features.options();
    let records = read_attention_records(&args.input)?;
    let vectors = extract_batch(&records, &options)?;
    if args.out.extension().is_some_and(|e| e == "embr") {
        let embeddings: Vec<_> = vectors.iter().map(FeatureVector::to_embedding).collect();
        write_records(&embeddings, &args.out)?;
    } else {
        write_feature_csv(&vectors, BufWriter::new(File::create(&args.out)?))?;
    }
    if let Some(path) = &args.diagrams {
        let mut all = Vec::with_capacity(records.len());
        for record in &records {
            all.push((record.sample_id.clone(), head_diagrams(record, &options)?));
        }
        write_diagrams_csv(&all, BufWriter::new(File::create(path)?))?;
    }
    eprintln!(
        "wrote {} vectors of length {} to {}",
        vectors.len(),
        vectors.first().map_or(0, |v| v.values.len()),
        args.out.display()
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let vectors = read_vectors(&args.input)?;
    let options = FitOptions { k: args.k, ridge: args.ridge, target_tpr: args.target_tpr };
    let model = OodModel::fit(&vectors, &options)?;
    model.save(&args.out)?;
    eprintln!(
        "fitted on {} vectors ({} classes); λ maha = {}, λ knn = {}",
        vectors.len(),
        model.gaussian.labels.len(),
        model.lambda_maha,
        model.lambda_knn
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let vectors = read_vectors(&args.input)?;
    let model = OodModel::load(&args.model)?;
    let source = FeatureSource::parse(&args.source)?;
    let dataset = args.dataset.unwrap_or_else(|| {
        args.input
            .file_stem()
            .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned())
    });
    let rows = score_vectors(&model, &vectors, source, &dataset, &args.scorers)?;
    write_scores_csv(&rows, BufWriter::new(File::create(&args.out)?))?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.scores {
        rows.extend(read_scores_csv(BufReader::new(File::open(path)?))?);
    }
    let report = EvalReport { rows: evaluate_scores(&rows)?, config: Vec::new(), seed: 0 };
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_csv())?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = args.out_dir {
        config.output_dir = Some(dir);
    }
    let output = run_pipeline(&config)?;
    if let Some(dir) = &config.output_dir {
        write_run_output(&output, dir)?;
    }
    print!("{}", output.report.to_table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth(args),
        Command::Features(args) => features(args),
        Command::Fit(args) => fit(args),
        Command::Score(args) => score(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
