//! Binary record files exchanged with the attention exporter.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset 0  magic      b"ATNR" (attention) or b"EMBR" (embedding)
//! offset 4  version    u8 = 1
//! offset 5  endianness u8 = 0x01 (little-endian)
//! then, repeated until EOF:
//!   u32 body length in bytes (excluding these four bytes)
//!   u16 sample_id length, UTF-8 sample_id
//!   u16 label length, UTF-8 label
//!   u8  split tag (0 train, 1 validation, 2 test, 3 ood)
//!   ATNR: u32 n_tokens, u16 layers, u16 heads, layers*heads*n*n f32
//!   EMBR: u32 dim, dim f32
//! ```
//!
//! Attention maps are stored layer-major, then head, then row, then column.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

pub const ATTENTION_MAGIC: [u8; 4] = *b"ATNR";
pub const EMBEDDING_MAGIC: [u8; 4] = *b"EMBR";
pub const FORMAT_VERSION: u8 = 1;
pub const LITTLE_ENDIAN_FLAG: u8 = 0x01;

/// Allowed deviation of an attention row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
    Ood,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
            Split::Ood => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Validation),
            2 => Some(Split::Test),
            3 => Some(Split::Ood),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::Ood => "ood",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            "ood" => Ok(Split::Ood),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// One sample's stack of attention maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub sample_id: String,
    pub label: String,
    pub split: Split,
    pub n_tokens: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// `n_layers * n_heads * n_tokens * n_tokens` weights.
    pub maps: Vec<f32>,
}

impl AttentionRecord {
    /// The `n × n` map of one head, row-major.
    pub fn map(&self, layer: usize, head: usize) -> &[f32] {
        let size = self.n_tokens * self.n_tokens;
        let start = (layer * self.n_heads + head) * size;
        &self.maps[start..start + size]
    }

    /// Checks every invariant the reader enforces.
    pub fn validate(&self) -> Result<()> {
        let id = &self.sample_id;
        if self.n_tokens < 2 {
            return Err(Error::record(id, format!("n_tokens = {} (need at least 2)", self.n_tokens)));
        }
        if self.n_layers == 0 || self.n_heads == 0 {
            return Err(Error::record(id, "layer and head counts must be positive"));
        }
        let n = self.n_tokens;
        let expected = self.n_layers * self.n_heads * n * n;
        if self.maps.len() != expected {
            return Err(Error::record(
                id,
                format!("expected {expected} weights, found {}", self.maps.len()),
            ));
        }
        for (row_index, row) in self.maps.chunks_exact(n).enumerate() {
            let mut sum = 0.0f64;
            for &w in row {
                if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                    return Err(Error::record(id, format!("attention weight {w} outside [0, 1]")));
                }
                sum += f64::from(w);
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                let head_index = row_index / n;
                return Err(Error::record(
                    id,
                    format!(
                        "row {} of layer {} head {} sums to {sum}",
                        row_index % n,
                        head_index / self.n_heads,
                        head_index % self.n_heads
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Keeps the leading `max_tokens` tokens of every map, renormalising rows.
    /// Returns the record unchanged when it is already short enough.
    pub fn truncated(&self, max_tokens: usize) -> AttentionRecord {
        if max_tokens == 0 || self.n_tokens <= max_tokens {
            return self.clone();
        }
        let n = self.n_tokens;
        let m = max_tokens;
        let mut maps = Vec::with_capacity(self.n_layers * self.n_heads * m * m);
        for layer in 0..self.n_layers {
            for head in 0..self.n_heads {
                let map = self.map(layer, head);
                for i in 0..m {
                    let row = &map[i * n..i * n + m];
                    maps.extend(normalize_row(row.iter().map(|&w| f64::from(w))));
                }
            }
        }
        AttentionRecord {
            n_tokens: m,
            maps,
            ..self.clone()
        }
    }
}

/// A fixed-length vector attached to one sample (CLS embeddings, feature vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub sample_id: String,
    pub label: String,
    pub split: Split,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn validate(&self) -> Result<()> {
        if self.vector.is_empty() {
            return Err(Error::record(&self.sample_id, "empty vector"));
        }
        if let Some(v) = self.vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::record(&self.sample_id, format!("non-finite entry {v}")));
        }
        Ok(())
    }
}

/// A record type that can live in a record file.
pub trait Record: Sized {
    const MAGIC: [u8; 4];

    fn sample_id(&self) -> &str;

    fn label(&self) -> &str;

    fn split(&self) -> Split;

    /// Shape that must agree across all records of one file.
    fn shape(&self) -> Vec<usize>;

    /// Checks the write-side precondition (finite values, consistent lengths).
    fn check_writable(&self) -> Result<()>;

    fn validate(&self) -> Result<()>;

    fn encode_payload(&self, out: &mut Vec<u8>);

    fn decode_payload(header: RecordHeader, payload: &mut Cursor<'_>) -> Result<Self>;
}

/// Identification fields shared by both record types.
#[derive(Debug, Clone)]
pub struct RecordHeader {
    pub sample_id: String,
    pub label: String,
    pub split: Split,
}

impl Record for AttentionRecord {
    const MAGIC: [u8; 4] = ATTENTION_MAGIC;

    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn split(&self) -> Split {
        self.split
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.n_layers, self.n_heads]
    }

    fn check_writable(&self) -> Result<()> {
        let n = self.n_tokens;
        if self.maps.len() != self.n_layers * self.n_heads * n * n {
            return Err(Error::record(&self.sample_id, "map buffer length does not match shape"));
        }
        if u32::try_from(n).is_err()
            || u16::try_from(self.n_layers).is_err()
            || u16::try_from(self.n_heads).is_err()
        {
            return Err(Error::record(&self.sample_id, "shape does not fit the record format"));
        }
        if let Some(w) = self.maps.iter().find(|w| !w.is_finite()) {
            return Err(Error::record(&self.sample_id, format!("non-finite weight {w}")));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        AttentionRecord::validate(self)
    }

    fn encode_payload(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.n_tokens as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_layers as u16).to_le_bytes());
        out.extend_from_slice(&(self.n_heads as u16).to_le_bytes());
        for w in &self.maps {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }

    fn decode_payload(header: RecordHeader, payload: &mut Cursor<'_>) -> Result<Self> {
        let n_tokens = payload.u32()? as usize;
        let n_layers = payload.u16()? as usize;
        let n_heads = payload.u16()? as usize;
        let count = n_layers
            .checked_mul(n_heads)
            .and_then(|c| c.checked_mul(n_tokens))
            .and_then(|c| c.checked_mul(n_tokens))
            .ok_or_else(|| Error::record(&header.sample_id, "shape overflows"))?;
        let maps = payload.f32s(count)?;
        Ok(AttentionRecord {
            sample_id: header.sample_id,
            label: header.label,
            split: header.split,
            n_tokens,
            n_layers,
            n_heads,
            maps,
        })
    }
}

impl Record for EmbeddingRecord {
    const MAGIC: [u8; 4] = EMBEDDING_MAGIC;

    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn split(&self) -> Split {
        self.split
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.vector.len()]
    }

    fn check_writable(&self) -> Result<()> {
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        EmbeddingRecord::validate(self)
    }

    fn encode_payload(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.vector.len() as u32).to_le_bytes());
        for v in &self.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn decode_payload(header: RecordHeader, payload: &mut Cursor<'_>) -> Result<Self> {
        let dim = payload.u32()? as usize;
        let vector = payload.f32s(dim)?;
        Ok(EmbeddingRecord {
            sample_id: header.sample_id,
            label: header.label,
            split: header.split,
            vector,
        })
    }
}

/// Little-endian reader over one record body.
pub struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    sample_id: Option<String>,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0, sample_id: None }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            let id = self.sample_id.clone().unwrap_or_else(|| "<unknown>".to_owned());
            return Err(Error::record(&id, "record body shorter than its declared contents"));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| {
            let id = self.sample_id.clone().unwrap_or_else(|| "<unknown>".to_owned());
            Error::record(&id, "string field is not valid UTF-8")
        })
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::invalid("float count overflows"))?;
        let bytes = self.take(len)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn push_string(out: &mut Vec<u8>, s: &str, sample_id: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::record(sample_id, "string field longer than 65535 bytes"))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Serialises a homogeneous, nonempty batch of records.
pub fn encode_records<R: Record>(records: &[R]) -> Result<Vec<u8>> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("cannot write an empty record sequence"))?;
    let shape = first.shape();
    let mut out = Vec::new();
    out.extend_from_slice(&R::MAGIC);
    out.push(FORMAT_VERSION);
    out.push(LITTLE_ENDIAN_FLAG);
    let mut body = Vec::new();
    for record in records {
        record.check_writable()?;
        if record.shape() != shape {
            return Err(Error::record(
                record.sample_id(),
                format!("shape {:?} differs from first record's {:?}", record.shape(), shape),
            ));
        }
        body.clear();
        push_string(&mut body, record.sample_id(), record.sample_id())?;
        push_string(&mut body, record.label(), record.sample_id())?;
        body.push(record.split().tag());
        record.encode_payload(&mut body);
        let len = u32::try_from(body.len())
            .map_err(|_| Error::record(record.sample_id(), "record larger than 4 GiB"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// Streams records out of a record file, validating each one.
pub struct RecordReader<R: Record, T: Read> {
    inner: T,
    offset: u64,
    shape: Option<Vec<usize>>,
    done: bool,
    _marker: std::marker::PhantomData<R>,
}

impl<R: Record, T: Read> RecordReader<R, T> {
    pub fn new(mut inner: T) -> Result<Self> {
        let mut header = [0u8; 6];
        read_exact_or_truncated(&mut inner, &mut header, 0)?;
        let magic: [u8; 4] = header[..4].try_into().unwrap();
        if magic != R::MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        if header[4] != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(header[4]));
        }
        if header[5] != LITTLE_ENDIAN_FLAG {
            return Err(Error::UnsupportedEndianness(header[5]));
        }
        Ok(RecordReader {
            inner,
            offset: 6,
            shape: None,
            done: false,
            _marker: std::marker::PhantomData,
        })
    }

    fn next_record(&mut self) -> Result<Option<R>> {
        let mut len_bytes = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            let read = self.inner.read(&mut len_bytes[filled..])?;
            if read == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(Error::Truncated { offset: self.offset });
            }
            filled += read;
        }
        let len = u32::from_le_bytes(len_bytes) as usize;
        let mut body = vec![0u8; len];
        read_exact_or_truncated(&mut self.inner, &mut body, self.offset)?;
        self.offset += 4 + len as u64;

        let mut cursor = Cursor::new(&body);
        let sample_id = cursor.string()?;
        cursor.sample_id = Some(sample_id.clone());
        let label = cursor.string()?;
        let tag = cursor.u8()?;
        let split = Split::from_tag(tag)
            .ok_or_else(|| Error::record(&sample_id, format!("unknown split tag {tag}")))?;
        let record = R::decode_payload(RecordHeader { sample_id: sample_id.clone(), label, split }, &mut cursor)?;
        if cursor.pos != body.len() {
            return Err(Error::record(
                &sample_id,
                format!("{} trailing bytes after record contents", body.len() - cursor.pos),
            ));
        }
        record.validate()?;
        let shape = record.shape();
        match &self.shape {
            None => self.shape = Some(shape),
            Some(expected) if *expected != shape => {
                return Err(Error::record(
                    &sample_id,
                    format!("shape {shape:?} differs from earlier records' {expected:?}"),
                ));
            }
            Some(_) => {}
        }
        Ok(Some(record))
    }
}

impl<R: Record, T: Read> Iterator for RecordReader<R, T> {
    type Item = Result<R>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(record)) => Some(Ok(record)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_exact_or_truncated(reader: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::Truncated { offset }
        } else {
            Error::Io(e)
        }
    })
}

/// Decodes a complete in-memory record file.
pub fn decode_records<R: Record>(bytes: &[u8]) -> Result<Vec<R>> {
    RecordReader::<R, _>::new(bytes)?.collect()
}

/// Writes a homogeneous, nonempty batch of records to `path`.
pub fn write_records<R: Record>(records: &[R], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_records(records)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_attention_records(path: impl AsRef<Path>) -> Result<Vec<AttentionRecord>> {
    read_records(path)
}

pub fn read_embedding_records(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    read_records(path)
}

pub fn read_records<R: Record>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let file = BufReader::new(File::open(path)?);
    RecordReader::<R, _>::new(file)?.collect()
}

/// Returns the magic bytes at the start of a file, if it has at least four bytes.
pub fn sniff_magic(path: impl AsRef<Path>) -> Result<Option<[u8; 4]>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    match file.read_exact(&mut magic) {
        Ok(()) => Ok(Some(magic)),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Gamma shape of the per-token attention mass. Below 1 so rows are peaked.
const SYNTH_CONCENTRATION: f64 = 0.5;
/// Decay rate of attention with token distance at `locality = 1`.
const SYNTH_SHARPNESS: f64 = 4.0;

/// Deterministic synthetic attention tensor.
///
/// Each row draws independent `Gamma(0.5)` masses per key token and damps
/// them by `exp(-4 · locality · |i - j|)`, then renormalises. At
/// `locality = 0` every row is a symmetric Dirichlet draw, exchangeable
/// across positions; larger values pull mass towards the diagonal band.
pub fn synth_attention(
    seed: u64,
    n_tokens: usize,
    n_layers: usize,
    n_heads: usize,
    locality: f64,
) -> Result<AttentionRecord> {
    if n_tokens < 2 {
        return Err(Error::invalid(format!("n_tokens = {n_tokens} (need at least 2)")));
    }
    if n_layers == 0 || n_heads == 0 {
        return Err(Error::invalid("layer and head counts must be positive"));
    }
    if !(0.0..=1.0).contains(&locality) {
        return Err(Error::invalid(format!("locality {locality} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(SYNTH_CONCENTRATION, 1.0).expect("valid gamma parameters");
    let n = n_tokens;
    let mut maps = Vec::with_capacity(n_layers * n_heads * n * n);
    let mut raw = vec![0.0f64; n];
    for _ in 0..n_layers * n_heads {
        for i in 0..n {
            for (j, slot) in raw.iter_mut().enumerate() {
                let damping = (-SYNTH_SHARPNESS * locality * i.abs_diff(j) as f64).exp();
                *slot = gamma.sample(&mut rng) * damping;
            }
            maps.extend(normalize_row(raw.iter().copied()));
        }
    }
    Ok(AttentionRecord {
        sample_id: format!("synth-{seed}"),
        label: "synthetic".to_owned(),
        split: Split::Train,
        n_tokens,
        n_layers,
        n_heads,
        maps,
    })
}

/// Mixes a batch seed with a sample index into an independent per-sample seed.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Normalises nonnegative weights into an f32 row whose f64 sum is 1 to within
/// one f32 rounding step. Falls back to uniform when the total mass is zero.
fn normalize_row(weights: impl Iterator<Item = f64>) -> Vec<f32> {
    let weights: Vec<f64> = weights.collect();
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    let mut row: Vec<f32> = if total > 0.0 && total.is_finite() {
        weights.iter().map(|w| (w / total) as f32).collect()
    } else {
        vec![1.0 / n as f32; n]
    };
    // absorb the rounding error into the largest entry
    let largest = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != largest)
        .map(|(_, &w)| f64::from(w))
        .sum();
    row[largest] = ((1.0 - rest).max(0.0) as f32).min(1.0);
    row
}
