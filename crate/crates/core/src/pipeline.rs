//! End-to-end runs: load or synthesise records, extract features, fit the
//! scorers on ID validation vectors, score ID test and OOD sets, and report
//! AUROC / FPR95 for every (feature source, scorer, OOD set) combination.
//!
//! # Configuration file
//!
//! One `key = value` pair per line; `#` starts a comment. Relative paths are
//! resolved against the directory of the config file.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `input` | `files` | `files` or `synth` |
//! | `sources` | `tda` | comma list of `tda`, `cls` |
//! | `scorers` | `knn,maha` | comma list of `knn`, `maha` |
//! | `id_train` | unset | ATNR file of ID training records (class names only) |
//! | `id_validation` | required for files | ATNR file, fitting and calibration set |
//! | `id_test` | required for files | ATNR file, ID side of the metrics |
//! | `ood.<name>` | at least one for files | ATNR file of one OOD set |
//! | `cls.id_validation`, `cls.id_test`, `cls.ood.<name>` | required with `cls` | EMBR files |
//! | `max_hom_dim` | `3` | highest homology dimension, 0..=3 |
//! | `cap` | `1.0` | filtration ceiling |
//! | `k` | `5` | neighbour rank for the kNN scorer |
//! | `ridge` | `0.001` | covariance ridge, relative to the mean variance |
//! | `wasserstein_p` | `2` | Wasserstein amplitude order, at least 1 |
//! | `target_tpr` | `0.95` | ID acceptance rate used to calibrate λ |
//! | `max_tokens` | `64` | token truncation limit, 0 disables |
//! | `simplex_budget` | `50000000` | per-head simplex limit |
//! | `seed` | `0` | seed for synthetic input |
//! | `synth.count` | `200` | records per split in synthetic mode |
//! | `synth.n_tokens` | `16` | |
//! | `synth.layers` | `2` | |
//! | `synth.heads` | `2` | |
//! | `synth.id_locality` | `0.8` | |
//! | `synth.ood_locality` | `0.1` | |
//! | `synth.ood_name` | `synthetic` | OOD set name in the report |
//! | `output_dir` | unset | where `run` writes features and reports |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{extract_batch, write_feature_csv, FeatureOptions, FeatureVector, DEFAULT_WASSERSTEIN_P};
use crate::metrics::{auroc, fpr_at_95_tpr};
use crate::persistence::{PersistenceOptions, DEFAULT_CAP, DEFAULT_SIMPLEX_BUDGET, MAX_HOMOLOGY_DIM};
use crate::record_io::{
    read_attention_records, read_embedding_records, sample_seed, synth_attention, AttentionRecord, Split,
};
use crate::scoring::{FitOptions, OodModel, Scorer, DEFAULT_K, DEFAULT_RIDGE, DEFAULT_TARGET_TPR, OOD_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureSource {
    Tda,
    Cls,
}

impl FeatureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::Tda => "tda",
            FeatureSource::Cls => "cls",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tda" => Ok(FeatureSource::Tda),
            "cls" => Ok(FeatureSource::Cls),
            other => Err(Error::Config(format!("unknown feature source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub count: usize,
    pub n_tokens: usize,
    pub layers: usize,
    pub heads: usize,
    pub id_locality: f64,
    pub ood_locality: f64,
    pub ood_name: String,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            count: 200,
            n_tokens: 16,
            layers: 2,
            heads: 2,
            id_locality: 0.8,
            ood_locality: 0.1,
            ood_name: "synthetic".to_owned(),
        }
    }
}

/// Record files for one feature source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceFiles {
    pub id_train: Option<PathBuf>,
    pub id_validation: Option<PathBuf>,
    pub id_test: Option<PathBuf>,
    /// OOD set name to file, ordered by name.
    pub ood: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub synthetic: bool,
    pub sources: Vec<FeatureSource>,
    pub scorers: Vec<Scorer>,
    pub tda_files: SourceFiles,
    pub cls_files: SourceFiles,
    pub max_hom_dim: usize,
    pub cap: f64,
    pub k: usize,
    pub ridge: f64,
    pub wasserstein_p: f64,
    pub target_tpr: f64,
    pub max_tokens: usize,
    pub simplex_budget: u64,
    pub seed: u64,
    pub synth: SynthSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            synthetic: false,
            sources: vec![FeatureSource::Tda],
            scorers: vec![Scorer::Knn, Scorer::Maha],
            tda_files: SourceFiles::default(),
            cls_files: SourceFiles::default(),
            max_hom_dim: MAX_HOMOLOGY_DIM,
            cap: DEFAULT_CAP,
            k: DEFAULT_K,
            ridge: DEFAULT_RIDGE,
            wasserstein_p: DEFAULT_WASSERSTEIN_P,
            target_tpr: DEFAULT_TARGET_TPR,
            max_tokens: 64,
            simplex_budget: DEFAULT_SIMPLEX_BUDGET,
            seed: 0,
            synth: SynthSettings::default(),
            output_dir: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl PipelineConfig {
    /// Parses `key = value` text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", line_no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "input" => {
                    config.synthetic = match value {
                        "synth" => true,
                        "files" => false,
                        other => return Err(Error::Config(format!("`input`: unknown mode `{other}`"))),
                    }
                }
                "sources" => {
                    config.sources = split_list(value).map(FeatureSource::parse).collect::<Result<_>>()?;
                }
                "scorers" => {
                    config.scorers = split_list(value)
                        .map(|s| s.parse().map_err(|_| Error::Config(format!("unknown scorer `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                "max_hom_dim" => config.max_hom_dim = parse_num(key, value)?,
                "cap" => config.cap = parse_num(key, value)?,
                "k" => config.k = parse_num(key, value)?,
                "ridge" => config.ridge = parse_num(key, value)?,
                "wasserstein_p" => config.wasserstein_p = parse_num(key, value)?,
                "target_tpr" => config.target_tpr = parse_num(key, value)?,
                "max_tokens" => config.max_tokens = parse_num(key, value)?,
                "simplex_budget" => config.simplex_budget = parse_num::<f64>(key, value)? as u64,
                "seed" => config.seed = parse_num(key, value)?,
                "output_dir" => config.output_dir = Some(path(value)),
                "synth.count" => config.synth.count = parse_num(key, value)?,
                "synth.n_tokens" => config.synth.n_tokens = parse_num(key, value)?,
                "synth.layers" => config.synth.layers = parse_num(key, value)?,
                "synth.heads" => config.synth.heads = parse_num(key, value)?,
                "synth.id_locality" => config.synth.id_locality = parse_num(key, value)?,
                "synth.ood_locality" => config.synth.ood_locality = parse_num(key, value)?,
                "synth.ood_name" => config.synth.ood_name = value.to_owned(),
                _ => {
                    let (files, rest) = match key.strip_prefix("cls.") {
                        Some(rest) => (&mut config.cls_files, rest),
                        None => (&mut config.tda_files, key),
                    };
                    match rest {
                        "id_train" => files.id_train = Some(path(value)),
                        "id_validation" => files.id_validation = Some(path(value)),
                        "id_test" => files.id_test = Some(path(value)),
                        _ => match rest.strip_prefix("ood.") {
                            Some(name) if !name.is_empty() => {
                                files.ood.insert(name.to_owned(), path(value));
                            }
                            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                        },
                    }
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() || self.scorers.is_empty() {
            return Err(Error::Config("at least one source and one scorer are required".into()));
        }
        if self.max_hom_dim > MAX_HOMOLOGY_DIM {
            return Err(Error::Config(format!("max_hom_dim must be at most {MAX_HOMOLOGY_DIM}")));
        }
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::Config("cap must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config("ridge must be positive".into()));
        }
        if !(self.wasserstein_p >= 1.0 && self.wasserstein_p.is_finite()) {
            return Err(Error::Config("wasserstein_p must be at least 1".into()));
        }
        if !(self.target_tpr > 0.0 && self.target_tpr <= 1.0) {
            return Err(Error::Config("target_tpr must lie in (0, 1]".into()));
        }
        if self.synthetic {
            if self.sources != [FeatureSource::Tda] {
                return Err(Error::Config("synthetic input only provides tda features".into()));
            }
            let s = &self.synth;
            if s.n_tokens < 2 || s.layers == 0 || s.heads == 0 || s.count < 2 {
                return Err(Error::Config("synthetic shape out of range".into()));
            }
            for loc in [s.id_locality, s.ood_locality] {
                if !(0.0..=1.0).contains(&loc) {
                    return Err(Error::Config("synthetic locality must lie in [0, 1]".into()));
                }
            }
            return Ok(());
        }
        for &source in &self.sources {
            let files = self.files(source);
            let prefix = if source == FeatureSource::Cls { "cls." } else { "" };
            let required = [("id_validation", &files.id_validation), ("id_test", &files.id_test)];
            for (key, value) in required {
                match value {
                    None => return Err(Error::Config(format!("`{prefix}{key}` is required"))),
                    Some(p) if !p.is_file() => {
                        return Err(Error::Config(format!("`{prefix}{key}`: {} does not exist", p.display())))
                    }
                    Some(_) => {}
                }
            }
            if files.ood.is_empty() {
                return Err(Error::Config(format!("no `{prefix}ood.<name>` file configured")));
            }
            let optional = files.id_train.iter().map(|p| ("id_train".to_owned(), p));
            for (key, p) in files.ood.iter().map(|(n, p)| (format!("ood.{n}"), p)).chain(optional) {
                if !p.is_file() {
                    return Err(Error::Config(format!("`{prefix}{key}`: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn files(&self, source: FeatureSource) -> &SourceFiles {
        match source {
            FeatureSource::Tda => &self.tda_files,
            FeatureSource::Cls => &self.cls_files,
        }
    }

    pub fn feature_options(&self) -> FeatureOptions {
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

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { k: self.k, ridge: self.ridge, target_tpr: self.target_tpr }
    }

    /// Effective numeric settings, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("input".to_owned(), if self.synthetic { "synth" } else { "files" }.to_owned()),
            ("sources".to_owned(), self.sources.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")),
            ("scorers".to_owned(), self.scorers.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")),
            ("max_hom_dim".to_owned(), self.max_hom_dim.to_string()),
            ("cap".to_owned(), self.cap.to_string()),
            ("k".to_owned(), self.k.to_string()),
            ("ridge".to_owned(), self.ridge.to_string()),
            ("wasserstein_p".to_owned(), self.wasserstein_p.to_string()),
            ("target_tpr".to_owned(), self.target_tpr.to_string()),
            ("max_tokens".to_owned(), self.max_tokens.to_string()),
            ("simplex_budget".to_owned(), self.simplex_budget.to_string()),
            ("seed".to_owned(), self.seed.to_string()),
        ];
        if self.synthetic {
            let s = &self.synth;
            out.extend([
                ("synth.count".to_owned(), s.count.to_string()),
                ("synth.n_tokens".to_owned(), s.n_tokens.to_string()),
                ("synth.layers".to_owned(), s.layers.to_string()),
                ("synth.heads".to_owned(), s.heads.to_string()),
                ("synth.id_locality".to_owned(), s.id_locality.to_string()),
                ("synth.ood_locality".to_owned(), s.ood_locality.to_string()),
                ("synth.ood_name".to_owned(), s.ood_name.clone()),
            ]);
        }
        out
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Synthetic batch: `count` records with labels alternating between two ID
/// classes (or `OOD` for the OOD split), seeds derived from `seed` and the
/// record's global index.
pub fn synth_split(
    seed: u64,
    first_index: u64,
    count: usize,
    settings: &SynthSettings,
    split: Split,
    locality: f64,
) -> Result<Vec<AttentionRecord>> {
    (0..count)
        .map(|i| {
            let index = first_index + i as u64;
            let mut record = synth_attention(
                sample_seed(seed, index),
                settings.n_tokens,
                settings.layers,
                settings.heads,
                locality,
            )?;
            record.sample_id = format!("{}-{index:06}", split.as_str());
            record.label = match split {
                Split::Ood => OOD_LABEL.to_owned(),
                _ if i % 2 == 0 => "class_a".to_owned(),
                _ => "class_b".to_owned(),
            };
            record.split = split;
            Ok(record)
        })
        .collect()
}

/// One score line: which vectors, which scorer, what came out.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub label: String,
    pub split: Split,
    pub source: FeatureSource,
    /// OOD set name for OOD rows, `id` for in-distribution rows.
    pub dataset: String,
    pub scorer: Scorer,
    pub score: f64,
    pub in_distribution: bool,
}

pub fn score_vectors(
    model: &OodModel,
    vectors: &[FeatureVector],
    source: FeatureSource,
    dataset: &str,
    scorers: &[Scorer],
) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::with_capacity(vectors.len() * scorers.len());
    for &scorer in scorers {
        for v in vectors {
            let scored = model.score(v, scorer)?;
            rows.push(ScoreRow {
                sample_id: scored.sample_id,
                label: scored.label,
                split: v.split,
                source,
                dataset: dataset.to_owned(),
                scorer,
                score: scored.score,
                in_distribution: scored.decision == Some(crate::scoring::Decision::In),
            });
        }
    }
    Ok(rows)
}

const SCORE_HEADER: [&str; 8] = ["sample_id", "label", "split", "source", "dataset", "scorer", "score", "decision"];

pub fn write_scores_csv<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SCORE_HEADER)?;
    for r in rows {
        writer.write_record([
            r.sample_id.as_str(),
            r.label.as_str(),
            r.split.as_str(),
            r.source.as_str(),
            r.dataset.as_str(),
            r.scorer.as_str(),
            &r.score.to_string(),
            if r.in_distribution { "in" } else { "out" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(SCORE_HEADER) {
        return Err(Error::invalid(format!("score CSV header must be {}", SCORE_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let score: f64 = record[6]
            .parse()
            .map_err(|_| Error::record(&record[0], format!("bad score `{}`", &record[6])))?;
        rows.push(ScoreRow {
            sample_id: record[0].to_owned(),
            label: record[1].to_owned(),
            split: record[2].parse()?,
            source: FeatureSource::parse(&record[3])?,
            dataset: record[4].to_owned(),
            scorer: record[5].parse()?,
            score,
            in_distribution: record[7].parse::<crate::scoring::Decision>()? == crate::scoring::Decision::In,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub source: FeatureSource,
    pub scorer: Scorer,
    pub ood_dataset: String,
    pub auroc: f64,
    pub fpr95: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub config: Vec<(String, String)>,
    pub seed: u64,
}

/// Metrics for every (source, scorer, OOD set) present in `rows`. ID rows are
/// those whose split is not `ood`; OOD rows are grouped by dataset name.
pub fn evaluate_scores(rows: &[ScoreRow]) -> Result<Vec<ReportRow>> {
    let mut id: BTreeMap<(FeatureSource, Scorer), Vec<f64>> = BTreeMap::new();
    let mut ood: BTreeMap<(FeatureSource, Scorer), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if r.split == Split::Ood {
            ood.entry((r.source, r.scorer)).or_default().entry(&r.dataset).or_default().push(r.score);
        } else {
            id.entry((r.source, r.scorer)).or_default().push(r.score);
        }
    }
    let mut report = Vec::new();
    for (&(source, scorer), sets) in &ood {
        let id_scores = id.get(&(source, scorer)).ok_or_else(|| {
            Error::invalid(format!("no ID scores for source {} scorer {scorer}", source.as_str()))
        })?;
        for (name, ood_scores) in sets {
            report.push(ReportRow {
                source,
                scorer,
                ood_dataset: (*name).to_owned(),
                auroc: auroc(id_scores, ood_scores)?,
                fpr95: fpr_at_95_tpr(id_scores, ood_scores)?,
                n_id: id_scores.len(),
                n_ood: ood_scores.len(),
            });
        }
    }
    if report.is_empty() {
        return Err(Error::invalid("no OOD scores to evaluate"));
    }
    Ok(report)
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_source,scorer,ood_dataset,auroc,fpr95,n_id,n_ood\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{}",
                r.source.as_str(),
                r.scorer,
                r.ood_dataset,
                r.auroc,
                r.fpr95,
                r.n_id,
                r.n_ood
            );
        }
        out
    }

    /// Table with one row per (source, scorer) and an AUROC / FPR95 column pair per OOD set.
    pub fn to_table(&self) -> String {
        let datasets: Vec<&str> = {
            let mut names: Vec<&str> = self.rows.iter().map(|r| r.ood_dataset.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            names
        };
        let mut out = String::new();
        let _ = write!(out, "{:<8} {:<6}", "features", "scorer");
        for name in &datasets {
            let _ = write!(out, " | {:^19}", name);
        }
        out.push('\n');
        let _ = write!(out, "{:<8} {:<6}", "", "");
        for _ in &datasets {
            let _ = write!(out, " | {:>9} {:>9}", "AUROC↑", "FPR95↓");
        }
        out.push('\n');
        let mut keys: Vec<(FeatureSource, Scorer)> = self.rows.iter().map(|r| (r.source, r.scorer)).collect();
        keys.dedup();
        for (source, scorer) in keys {
            let _ = write!(out, "{:<8} {:<6}", source.as_str(), scorer.as_str());
            for name in &datasets {
                match self
                    .rows
                    .iter()
                    .find(|r| r.source == source && r.scorer == scorer && r.ood_dataset == *name)
                {
                    Some(r) => {
                        let _ = write!(out, " | {:>9.3} {:>9.3}", r.auroc, r.fpr95);
                    }
                    None => {
                        let _ = write!(out, " | {:>9} {:>9}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
        for (key, value) in &self.config {
            let _ = writeln!(out, "# {key} = {value}");
        }
        out
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EvalReport,
    pub scores: Vec<ScoreRow>,
    /// Feature vectors per source: (source, split name, vectors).
    pub features: Vec<(FeatureSource, String, Vec<FeatureVector>)>,
}

fn load_vectors(config: &PipelineConfig, source: FeatureSource, path: &Path) -> Result<Vec<FeatureVector>> {
    match source {
        FeatureSource::Tda => {
            let records = read_attention_records(path)?;
            extract_batch(&records, &config.feature_options())
        }
        FeatureSource::Cls => Ok(read_embedding_records(path)?
            .into_iter()
            .map(FeatureVector::from_embedding)
            .collect()),
    }
}

/// Runs the configured pipeline. Nothing is written unless every stage succeeds.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut features = Vec::new();
    let mut scores = Vec::new();
    for &source in &config.sources {
        let (validation, test, ood_sets) = if config.synthetic {
            let s = &config.synth;
            let count = s.count as u64;
            let options = config.feature_options();
            let validation = synth_split(config.seed, 0, s.count, s, Split::Validation, s.id_locality)?;
            let test = synth_split(config.seed, count, s.count, s, Split::Test, s.id_locality)?;
            let ood = synth_split(config.seed, 2 * count, s.count, s, Split::Ood, s.ood_locality)?;
            (
                extract_batch(&validation, &options)?,
                extract_batch(&test, &options)?,
                vec![(s.ood_name.clone(), extract_batch(&ood, &options)?)],
            )
        } else {
            let files = config.files(source);
            let validation = load_vectors(config, source, files.id_validation.as_ref().unwrap())?;
            let test = load_vectors(config, source, files.id_test.as_ref().unwrap())?;
            let ood = files
                .ood
                .iter()
                .map(|(name, path)| Ok((name.clone(), load_vectors(config, source, path)?)))
                .collect::<Result<Vec<_>>>()?;
            (validation, test, ood)
        };
        let model = OodModel::fit(&validation, &config.fit_options())?;
        scores.extend(score_vectors(&model, &test, source, "id", &config.scorers)?);
        for (name, vectors) in &ood_sets {
            scores.extend(score_vectors(&model, vectors, source, name, &config.scorers)?);
        }
        features.push((source, "validation".to_owned(), validation));
        features.push((source, "test".to_owned(), test));
        for (name, vectors) in ood_sets {
            features.push((source, format!("ood_{name}"), vectors));
        }
    }
    let rows = evaluate_scores(&scores)?;
    let report = EvalReport { rows, config: config.echo(), seed: config.seed };
    Ok(RunOutput { report, scores, features })
}

/// Writes `report.csv`, `report.txt`, `scores.csv` and one feature CSV per split into `dir`.
pub fn write_run_output(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), output.report.to_csv())?;
    std::fs::write(dir.join("report.txt"), output.report.to_table())?;
    let mut scores = Vec::new();
    write_scores_csv(&output.scores, &mut scores)?;
    std::fs::write(dir.join("scores.csv"), scores)?;
    for (source, split, vectors) in &output.features {
        if source == &FeatureSource::Tda {
            let file = std::fs::File::create(dir.join(format!("features_{split}.csv")))?;
            write_feature_csv(vectors, std::io::BufWriter::new(file))?;
        }
    }
    Ok(())
}
