//! Distance-based OOD scorers over standardised vectors.
//!
//! Both scorers return negated distances, so a larger score means "more
//! in-distribution" and the gate accepts a sample when `score >= λ`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::metrics::calibrate_lambda;

/// Label reserved for out-of-distribution samples.
pub const OOD_LABEL: &str = "OOD";
pub const DEFAULT_K: usize = 5;
/// Ridge added to the covariance diagonal, relative to its mean diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-3;
pub const DEFAULT_TARGET_TPR: f64 = 0.95;

/// Per-feature mean and population standard deviation of the fitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on at least two equal-length vectors. Zero deviations become 1.
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::invalid(format!(
                "standardizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let d = vectors[0].as_ref().len();
        if d == 0 {
            return Err(Error::invalid("vectors are empty"));
        }
        let count = vectors.len() as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            let v = v.as_ref();
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.len() });
            }
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; d];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / count).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

/// Class centroids plus the inverse of the regularised pooled covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScorer {
    pub labels: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    pub precision: DMatrix<f64>,
}

impl GaussianScorer {
    /// Fits class means and the within-class covariance pooled over all
    /// classes, then inverts `Σ + ridge · mean(diag Σ) · I`.
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V], labels: &[String], ridge: f64) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: vectors.len(), found: labels.len() });
        }
        if vectors.is_empty() {
            return Err(Error::invalid("no vectors to fit"));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge must be positive, got {ridge}")));
        }
        let d = vectors[0].as_ref().len();
        let mut classes: Vec<String> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            if label == OOD_LABEL {
                return Err(Error::invalid("OOD samples cannot be used to fit the in-distribution model"));
            }
            if vectors[i].as_ref().len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: vectors[i].as_ref().len() });
            }
            match classes.iter().position(|c| c == label) {
                Some(c) => members[c].push(i),
                None => {
                    classes.push(label.clone());
                    members.push(vec![i]);
                }
            }
        }
        // stable class order regardless of input order
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| classes[a].cmp(&classes[b]));

        let mut centroids = Vec::with_capacity(classes.len());
        let mut sorted_labels = Vec::with_capacity(classes.len());
        let mut covariance = DMatrix::<f64>::zeros(d, d);
        for &c in &order {
            if members[c].len() < 2 {
                return Err(Error::invalid(format!(
                    "class `{}` has {} vector(s); at least 2 are needed",
                    classes[c],
                    members[c].len()
                )));
            }
            let mut centroid = vec![0.0; d];
            for &i in &members[c] {
                centroid.iter_mut().zip(vectors[i].as_ref()).for_each(|(m, x)| *m += x);
            }
            let size = members[c].len() as f64;
            centroid.iter_mut().for_each(|m| *m /= size);
            for &i in &members[c] {
                let centred = DVector::from_iterator(d, vectors[i].as_ref().iter().zip(&centroid).map(|(x, m)| x - m));
                covariance.ger(1.0, &centred, &centred, 1.0);
            }
            centroids.push(centroid);
            sorted_labels.push(classes[c].clone());
        }
        covariance /= vectors.len() as f64;
        let mean_diag = covariance.diagonal().mean();
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        for i in 0..d {
            covariance[(i, i)] += ridge * scale;
        }
        let precision = covariance
            .cholesky()
            .ok_or_else(|| Error::invalid("regularised covariance is not positive definite"))?
            .inverse();
        Ok(GaussianScorer { labels: sorted_labels, centroids, precision })
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    /// Quadratic form `(z − μ)ᵀ P (z − μ)` against one centroid.
    pub fn quadratic_form(&self, z: &[f64], class: usize) -> f64 {
        let diff = DVector::from_iterator(z.len(), z.iter().zip(&self.centroids[class]).map(|(a, b)| a - b));
        diff.dot(&(&self.precision * &diff))
    }

    /// Negated minimum quadratic form over classes.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        let nearest = (0..self.centroids.len())
            .map(|c| self.quadratic_form(z, c))
            .fold(f64::INFINITY, f64::min);
        Ok(-nearest)
    }
}

pub fn maha_score(z: &[f64], model: &GaussianScorer) -> Result<f64> {
    model.score(z)
}

/// Reference vectors for the k-th-nearest-neighbour scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborBank {
    vectors: Vec<Vec<f64>>,
    k: usize,
}

impl NeighborBank {
    pub fn new(vectors: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if vectors.len() < k {
            return Err(Error::invalid(format!(
                "neighbour bank has {} vectors, fewer than k = {k}",
                vectors.len()
            )));
        }
        let d = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
        Ok(NeighborBank { vectors, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Negated Euclidean distance to the k-th nearest bank vector.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        let mut squared: Vec<f64> = self
            .vectors
            .iter()
            .map(|v| v.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let (_, kth, _) = squared.select_nth_unstable_by(self.k - 1, f64::total_cmp);
        Ok(-kth.sqrt())
    }
}

pub fn knn_score(z: &[f64], bank: &NeighborBank) -> Result<f64> {
    bank.score(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scorer {
    Maha,
    Knn,
}

impl Scorer {
    pub const ALL: [Scorer; 2] = [Scorer::Knn, Scorer::Maha];

    pub fn as_str(self) -> &'static str {
        match self {
            Scorer::Maha => "maha",
            Scorer::Knn => "knn",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maha" => Ok(Scorer::Maha),
            "knn" => Ok(Scorer::Knn),
            other => Err(Error::invalid(format!("unknown scorer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    In,
    Out,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::In => "in",
            Decision::Out => "out",
        }
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(Decision::In),
            "out" => Ok(Decision::Out),
            other => Err(Error::invalid(format!("unknown decision `{other}`"))),
        }
    }
}

/// In-distribution exactly when `score >= lambda`.
pub fn gate(score: f64, lambda: f64) -> Decision {
    if score >= lambda {
        Decision::In
    } else {
        Decision::Out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub sample_id: String,
    pub label: String,
    pub scorer: Scorer,
    pub score: f64,
    pub decision: Option<Decision>,
}

impl ScoredSample {
    pub fn with_threshold(mut self, lambda: f64) -> Self {
        self.decision = Some(gate(self.score, lambda));
        self
    }
}

/// Everything needed to score new vectors: the fitted standardiser, both
/// scorers and the thresholds calibrated on the fitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct OodModel {
    pub standardizer: Standardizer,
    pub gaussian: GaussianScorer,
    pub bank: NeighborBank,
    pub ridge: f64,
    pub lambda_maha: f64,
    pub lambda_knn: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub k: usize,
    pub ridge: f64,
    pub target_tpr: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { k: DEFAULT_K, ridge: DEFAULT_RIDGE, target_tpr: DEFAULT_TARGET_TPR }
    }
}

impl OodModel {
    /// Fits on in-distribution validation vectors.
    pub fn fit(vectors: &[FeatureVector], options: &FitOptions) -> Result<Self> {
        let raw: Vec<Vec<f64>> = vectors.iter().map(FeatureVector::values_f64).collect();
        let labels: Vec<String> = vectors.iter().map(|v| v.label.clone()).collect();
        let standardizer = Standardizer::fit(&raw)?;
        let z = raw
            .iter()
            .map(|x| standardizer.transform(x))
            .collect::<Result<Vec<_>>>()?;
        let gaussian = GaussianScorer::fit(&z, &labels, options.ridge)?;
        let bank = NeighborBank::new(z, options.k)?;
        let maha: Vec<f64> = bank.vectors().iter().map(|z| gaussian.score(z)).collect::<Result<_>>()?;
        let knn: Vec<f64> = bank.vectors().iter().map(|z| bank.score(z)).collect::<Result<_>>()?;
        Ok(OodModel {
            lambda_maha: calibrate_lambda(&maha, options.target_tpr)?,
            lambda_knn: calibrate_lambda(&knn, options.target_tpr)?,
            standardizer,
            gaussian,
            bank,
            ridge: options.ridge,
        })
    }

    pub fn lambda(&self, scorer: Scorer) -> f64 {
        match scorer {
            Scorer::Maha => self.lambda_maha,
            Scorer::Knn => self.lambda_knn,
        }
    }

    pub fn score_raw(&self, x: &[f64], scorer: Scorer) -> Result<f64> {
        let z = self.standardizer.transform(x)?;
        match scorer {
            Scorer::Maha => self.gaussian.score(&z),
            Scorer::Knn => self.bank.score(&z),
        }
    }

    pub fn score(&self, vector: &FeatureVector, scorer: Scorer) -> Result<ScoredSample> {
        let score = self
            .score_raw(&vector.values_f64(), scorer)
            .map_err(|e| e.in_stage("scoring", &vector.sample_id))?;
        Ok(ScoredSample {
            sample_id: vector.sample_id.clone(),
            label: vector.label.clone(),
            scorer,
            score,
            decision: None,
        }
        .with_threshold(self.lambda(scorer)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.standardizer.dim();
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.push(MODEL_VERSION);
        put_u32(&mut out, d as u32);
        put_f64s(&mut out, &self.standardizer.mean);
        put_f64s(&mut out, &self.standardizer.std);
        put_u32(&mut out, self.gaussian.labels.len() as u32);
        for (label, centroid) in self.gaussian.labels.iter().zip(&self.gaussian.centroids) {
            put_u32(&mut out, label.len() as u32);
            out.extend_from_slice(label.as_bytes());
            put_f64s(&mut out, centroid);
        }
        // column-major, as nalgebra stores it
        put_f64s(&mut out, self.gaussian.precision.as_slice());
        put_f64s(&mut out, &[self.ridge]);
        put_u32(&mut out, self.bank.k as u32);
        put_u32(&mut out, self.bank.vectors.len() as u32);
        for v in &self.bank.vectors {
            put_f64s(&mut out, v);
        }
        put_f64s(&mut out, &[self.lambda_maha, self.lambda_knn]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = r.take(1)?[0];
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let d = r.u32()? as usize;
        let mean = r.f64s(d)?;
        let std = r.f64s(d)?;
        let classes = r.u32()? as usize;
        let mut labels = Vec::with_capacity(classes);
        let mut centroids = Vec::with_capacity(classes);
        for _ in 0..classes {
            let len = r.u32()? as usize;
            let label = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::invalid("class label is not UTF-8"))?;
            labels.push(label);
            centroids.push(r.f64s(d)?);
        }
        let precision = DMatrix::from_vec(d, d, r.f64s(d * d)?);
        let ridge = r.f64s(1)?[0];
        let k = r.u32()? as usize;
        let bank_len = r.u32()? as usize;
        let mut bank = Vec::with_capacity(bank_len);
        for _ in 0..bank_len {
            bank.push(r.f64s(d)?);
        }
        let lambdas = r.f64s(2)?;
        if r.pos != bytes.len() {
            return Err(Error::invalid("trailing bytes after model"));
        }
        Ok(OodModel {
            standardizer: Standardizer { mean, std },
            gaussian: GaussianScorer { labels, centroids, precision },
            bank: NeighborBank::new(bank, k)?,
            ridge,
            lambda_maha: lambdas[0],
            lambda_knn: lambdas[1],
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

const MODEL_MAGIC: [u8; 4] = *b"OODM";
const MODEL_VERSION: u8 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len().saturating_sub(self.pos) < len {
            return Err(Error::Truncated { offset: self.pos as u64 });
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count.checked_mul(8).ok_or_else(|| Error::invalid("length overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
