//! Persistence diagrams to fixed-length topological feature vectors.
//!
//! For every head and every homology dimension three numbers are kept, in this
//! order: persistence entropy, bottleneck amplitude, Wasserstein amplitude.
//! The vector is laid out layer-major, then head, then dimension, then feature,
//! giving `layers · heads · (max_hom_dim + 1) · 3` entries (1728 for 12 × 12
//! heads and dimensions 0..=3).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{to_distance_matrix, AttentionMap};
use crate::persistence::{compute_persistence_with, PersistenceDiagram, PersistenceOptions};
use crate::record_io::{AttentionRecord, EmbeddingRecord, Split};

pub const FEATURES_PER_DIM: usize = 3;
/// Entropy reported for a dimension with no points.
pub const EMPTY_ENTROPY: f64 = -1.0;
pub const DEFAULT_WASSERSTEIN_P: f64 = 2.0;

/// Shannon entropy (base 2) of the normalised lifetimes in `dim`, or −1 when
/// the dimension is empty.
pub fn persistence_entropy(diagram: &PersistenceDiagram, dim: usize) -> f64 {
    let total: f64 = diagram.in_dim(dim).map(|p| p.lifetime()).sum();
    if total <= 0.0 {
        return EMPTY_ENTROPY;
    }
    let entropy: f64 = diagram
        .in_dim(dim)
        .map(|p| {
            let share = p.lifetime() / total;
            if share > 0.0 {
                -share * share.log2()
            } else {
                0.0
            }
        })
        .sum();
    // a lone bar gives -1·log2(1) = -0.0
    entropy.max(0.0)
}

/// Bottleneck distance from the `dim` points to the empty diagram: the
/// largest half-lifetime, 0 when empty.
pub fn amplitude_bottleneck(diagram: &PersistenceDiagram, dim: usize) -> f64 {
    diagram
        .in_dim(dim)
        .map(|p| p.lifetime() / 2.0)
        .fold(0.0, f64::max)
}

/// `p`-Wasserstein distance from the `dim` points to the empty diagram, each
/// point matched to the diagonal at L∞ cost `(death − birth) / 2`.
///
/// Panics if `p < 1`.
pub fn amplitude_wasserstein(diagram: &PersistenceDiagram, dim: usize, p: f64) -> f64 {
    assert!(p >= 1.0, "Wasserstein order must be at least 1, got {p}");
    let largest = amplitude_bottleneck(diagram, dim);
    if largest == 0.0 {
        return 0.0;
    }
    // scaled by the largest term so the inner sum is >= 1 and the result never
    // rounds below the bottleneck amplitude
    let sum: f64 = diagram
        .in_dim(dim)
        .map(|pt| (pt.lifetime() / 2.0 / largest).powf(p))
        .sum();
    largest * sum.powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub sample_id: String,
    pub label: String,
    pub split: Split,
    pub values: Vec<f32>,
}

impl FeatureVector {
    pub fn to_embedding(&self) -> EmbeddingRecord {
        EmbeddingRecord {
            sample_id: self.sample_id.clone(),
            label: self.label.clone(),
            split: self.split,
            vector: self.values.clone(),
        }
    }

    pub fn from_embedding(record: EmbeddingRecord) -> Self {
        FeatureVector {
            sample_id: record.sample_id,
            label: record.label,
            split: record.split,
            values: record.vector,
        }
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Shape of a topological feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureLayout {
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_hom_dim: usize,
    pub wasserstein_p: f64,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.n_layers * self.n_heads * (self.max_hom_dim + 1) * FEATURES_PER_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of the first feature of `(layer, head, dim)`.
    pub fn offset(&self, layer: usize, head: usize, dim: usize) -> usize {
        ((layer * self.n_heads + head) * (self.max_hom_dim + 1) + dim) * FEATURES_PER_DIM
    }
}

/// The diagram computed for one attention head.
#[derive(Debug, Clone)]
pub struct HeadDiagram {
    pub layer: usize,
    pub head: usize,
    pub diagram: PersistenceDiagram,
}

/// Concatenates per-head features. Placement follows `(layer, head)`, so the
/// order in which diagrams arrive does not matter; every head must appear once.
pub fn assemble_feature_vector(
    sample_id: &str,
    label: &str,
    split: Split,
    layout: &FeatureLayout,
    diagrams: impl IntoIterator<Item = HeadDiagram>,
) -> Result<FeatureVector> {
    let mut values = vec![0.0f32; layout.len()];
    let mut seen = vec![false; layout.n_layers * layout.n_heads];
    for HeadDiagram { layer, head, diagram } in diagrams {
        if layer >= layout.n_layers || head >= layout.n_heads {
            return Err(Error::record(sample_id, format!("head ({layer}, {head}) outside layout")));
        }
        let slot = layer * layout.n_heads + head;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::record(sample_id, format!("duplicate head ({layer}, {head})")));
        }
        for dim in 0..=layout.max_hom_dim {
            let at = layout.offset(layer, head, dim);
            values[at] = persistence_entropy(&diagram, dim) as f32;
            values[at + 1] = amplitude_bottleneck(&diagram, dim) as f32;
            values[at + 2] = amplitude_wasserstein(&diagram, dim, layout.wasserstein_p) as f32;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::record(
            sample_id,
            format!("missing head ({}, {})", missing / layout.n_heads, missing % layout.n_heads),
        ));
    }
    Ok(FeatureVector {
        sample_id: sample_id.to_owned(),
        label: label.to_owned(),
        split,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    pub persistence: PersistenceOptions,
    pub wasserstein_p: f64,
    /// Token truncation limit; 0 keeps every token.
    pub max_tokens: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            persistence: PersistenceOptions::default(),
            wasserstein_p: DEFAULT_WASSERSTEIN_P,
            max_tokens: 0,
        }
    }
}

/// Diagrams of every head of one record, after truncation.
pub fn head_diagrams(record: &AttentionRecord, options: &FeatureOptions) -> Result<Vec<HeadDiagram>> {
    let record = record.truncated(options.max_tokens);
    let mut out = Vec::with_capacity(record.n_layers * record.n_heads);
    for layer in 0..record.n_layers {
        for head in 0..record.n_heads {
            let map = AttentionMap::from_f32(record.n_tokens, record.map(layer, head))
                .map_err(|e| e.in_stage("attention map", &record.sample_id))?;
            let diagram = compute_persistence_with(&to_distance_matrix(&map), &options.persistence)
                .map_err(|e| e.in_stage("persistence", &record.sample_id))?;
            out.push(HeadDiagram { layer, head, diagram });
        }
    }
    Ok(out)
}

pub fn extract_features(record: &AttentionRecord, options: &FeatureOptions) -> Result<FeatureVector> {
    if options.wasserstein_p < 1.0 {
        return Err(Error::invalid(format!("Wasserstein order {} below 1", options.wasserstein_p)));
    }
    let layout = FeatureLayout {
        n_layers: record.n_layers,
        n_heads: record.n_heads,
        max_hom_dim: options.persistence.max_hom_dim,
        wasserstein_p: options.wasserstein_p,
    };
    let diagrams = head_diagrams(record, options)?;
    assemble_feature_vector(&record.sample_id, &record.label, record.split, &layout, diagrams)
}

/// Extracts features for a batch, in input order. Fails on the first error.
pub fn extract_batch(records: &[AttentionRecord], options: &FeatureOptions) -> Result<Vec<FeatureVector>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records.par_iter().map(|r| extract_features(r, options)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        records.iter().map(|r| extract_features(r, options)).collect()
    }
}

fn column_name(index: usize) -> String {
    format!("f{index:04}")
}

/// Writes vectors as CSV with header `sample_id,label,split,f0000,...`.
/// Values use the shortest decimal form that parses back to the same f32.
pub fn write_feature_csv<W: Write>(vectors: &[FeatureVector], out: W) -> Result<()> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::invalid("cannot write an empty feature batch"))?;
    let dim = first.values.len();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["sample_id".to_owned(), "label".to_owned(), "split".to_owned()];
    header.extend((0..dim).map(column_name));
    writer.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(dim + 3);
    for v in vectors {
        if v.values.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.values.len() });
        }
        row.clear();
        row.push(v.sample_id.clone());
        row.push(v.label.clone());
        row.push(v.split.to_string());
        row.extend(v.values.iter().map(|x| x.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() < 4 || &header[0] != "sample_id" || &header[1] != "label" || &header[2] != "split" {
        return Err(Error::invalid("feature CSV header must start with sample_id,label,split"));
    }
    for (i, name) in header.iter().skip(3).enumerate() {
        if name != column_name(i) {
            return Err(Error::invalid(format!("unexpected feature column `{name}`")));
        }
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let sample_id = row[0].to_owned();
        let values = row
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f32>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::record(&sample_id, format!("bad feature value `{s}`")))
            })
            .collect::<Result<Vec<f32>>>()?;
        out.push(FeatureVector {
            label: row[1].to_owned(),
            split: row[2].parse()?,
            sample_id,
            values,
        });
    }
    Ok(out)
}

/// Debug dump of persistence pairs: `sample_id,layer,head,dim,birth,death`.
pub fn write_diagrams_csv<W: Write>(samples: &[(String, Vec<HeadDiagram>)], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["sample_id", "layer", "head", "dim", "birth", "death"])?;
    for (sample_id, heads) in samples {
        for h in heads {
            for p in h.diagram.points() {
                writer.write_record([
                    sample_id.clone(),
                    h.layer.to_string(),
                    h.head.to_string(),
                    p.dim.to_string(),
                    p.birth.to_string(),
                    p.death.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistencePair;
    use proptest::prelude::*;

    fn diagram(points: &[(f64, f64, usize)]) -> PersistenceDiagram {
        PersistenceDiagram::new(
            points.iter().map(|&(birth, death, dim)| PersistencePair { birth, death, dim }),
            1.0,
            3,
        )
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(persistence_entropy(&diagram(&[(0.0, 0.4, 0)]), 0), 0.0);
        let two = diagram(&[(0.0, 0.3, 1), (0.1, 0.4, 1)]);
        assert!((persistence_entropy(&two, 1) - 1.0).abs() < 1e-12);
        assert_eq!(persistence_entropy(&two, 2), -1.0);
        assert_eq!(persistence_entropy(&PersistenceDiagram::empty(1.0, 3), 0), -1.0);
    }

    #[test]
    fn bottleneck_examples() {
        assert_eq!(amplitude_bottleneck(&diagram(&[(0.0, 0.5, 0)]), 0), 0.25);
        let d = diagram(&[(0.1, 0.4, 0), (0.0, 0.2, 0)]);
        assert!((amplitude_bottleneck(&d, 0) - 0.15).abs() < 1e-15);
        assert_eq!(amplitude_bottleneck(&d, 1), 0.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(amplitude_wasserstein(&diagram(&[(0.0, 0.5, 0)]), 0, 2.0), 0.25);
        let d = diagram(&[(0.0, 0.2, 0), (0.0, 0.2, 0)]);
        assert!((amplitude_wasserstein(&d, 0, 2.0) - 0.141_421_356_237_309_5).abs() < 1e-12);
        assert_eq!(amplitude_wasserstein(&d, 3, 2.0), 0.0);
    }

    #[test]
    #[should_panic]
    fn wasserstein_rejects_order_below_one() {
        amplitude_wasserstein(&PersistenceDiagram::empty(1.0, 0), 0, 0.5);
    }

    fn layout(layers: usize, heads: usize, max_hom_dim: usize) -> FeatureLayout {
        FeatureLayout { n_layers: layers, n_heads: heads, max_hom_dim, wasserstein_p: 2.0 }
    }

    #[test]
    fn single_head_vector_by_hand() {
        // H0: lifetimes 0.2, 0.6 ; H1: one bar of lifetime 0.5
        let d = PersistenceDiagram::new(
            [
                PersistencePair { birth: 0.0, death: 0.2, dim: 0 },
                PersistencePair { birth: 0.0, death: 0.6, dim: 0 },
                PersistencePair { birth: 0.3, death: 0.8, dim: 1 },
            ],
            1.0,
            1,
        );
        let v = assemble_feature_vector(
            "s",
            "Politics",
            Split::Test,
            &layout(1, 1, 1),
            [HeadDiagram { layer: 0, head: 0, diagram: d }],
        )
        .unwrap();
        let h0_entropy = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        let expected = [
            h0_entropy,
            0.3,
            (0.1f64 * 0.1 + 0.3 * 0.3).sqrt(),
            0.0,
            0.25,
            0.25,
        ];
        assert_eq!(v.values.len(), 6);
        for (got, want) in v.values.iter().zip(expected) {
            assert!((f64::from(*got) - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn empty_diagrams_give_sentinels() {
        let lay = layout(2, 3, 3);
        let heads = (0..2).flat_map(|l| {
            (0..3).map(move |h| HeadDiagram { layer: l, head: h, diagram: PersistenceDiagram::empty(1.0, 3) })
        });
        let v = assemble_feature_vector("e", "x", Split::Ood, &lay, heads).unwrap();
        assert_eq!(v.values.len(), 2 * 3 * 4 * 3);
        for chunk in v.values.chunks_exact(3) {
            assert_eq!(chunk, &[-1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn bert_base_layout_has_1728_features() {
        assert_eq!(layout(12, 12, 3).len(), 1728);
        assert_eq!(layout(12, 12, 3).offset(11, 11, 3), 1725);
    }

    #[test]
    fn head_order_does_not_matter() {
        let lay = layout(2, 2, 1);
        let make = |l: usize, h: usize| HeadDiagram {
            layer: l,
            head: h,
            diagram: diagram(&[(0.0, 0.1 * (1 + l * 2 + h) as f64, 0), (0.2, 0.9, 1)]),
        };
        let forward: Vec<_> = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&(l, h)| make(l, h)).collect();
        let backward: Vec<_> = forward.iter().rev().cloned().collect();
        let a = assemble_feature_vector("s", "x", Split::Test, &lay, forward).unwrap();
        let b = assemble_feature_vector("s", "x", Split::Test, &lay, backward).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_or_duplicate_heads_are_errors() {
        let lay = layout(1, 2, 0);
        let h = |head| HeadDiagram { layer: 0, head, diagram: PersistenceDiagram::empty(1.0, 0) };
        assert!(assemble_feature_vector("s", "x", Split::Test, &lay, [h(0)]).is_err());
        assert!(assemble_feature_vector("s", "x", Split::Test, &lay, [h(0), h(0)]).is_err());
        assert!(assemble_feature_vector("s", "x", Split::Test, &lay, [h(0), h(2)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let vectors = vec![
            FeatureVector {
                sample_id: "a,1".into(),
                label: "Politics".into(),
                split: Split::Validation,
                values: vec![-1.0, 0.1, 1.0 / 3.0, 1e-30],
            },
            FeatureVector {
                sample_id: "b".into(),
                label: "OOD".into(),
                split: Split::Ood,
                values: vec![0.0, 2.5, f32::MAX, f32::MIN_POSITIVE],
            },
        ];
        let mut buf = Vec::new();
        write_feature_csv(&vectors, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_id,label,split,f0000,f0001,f0002,f0003\n"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), vectors);
    }

    fn random_diagram() -> impl Strategy<Value = PersistenceDiagram> {
        prop::collection::vec((0.0f64..0.5, 0.001f64..0.5), 0..20).prop_map(|bars| {
            PersistenceDiagram::new(
                bars.into_iter().map(|(b, l)| PersistencePair { birth: b, death: b + l, dim: 1 }),
                1.0,
                1,
            )
        })
    }

    proptest! {
        #[test]
        fn entropy_is_scale_invariant(d in random_diagram(), c in 0.1f64..1.9) {
            let scaled = PersistenceDiagram::new(
                d.points().iter().map(|p| PersistencePair { birth: p.birth * c, death: p.death * c, dim: p.dim }),
                2.0,
                1,
            );
            prop_assert!((persistence_entropy(&d, 1) - persistence_entropy(&scaled, 1)).abs() < 1e-9);
            let b = amplitude_bottleneck(&d, 1);
            let w = amplitude_wasserstein(&d, 1, 2.0);
            prop_assert!((amplitude_bottleneck(&scaled, 1) - c * b).abs() < 1e-9);
            prop_assert!((amplitude_wasserstein(&scaled, 1, 2.0) - c * w).abs() < 1e-9);
        }

        #[test]
        fn bottleneck_never_exceeds_wasserstein(d in random_diagram(), p in 1.0f64..6.0) {
            prop_assert!(amplitude_bottleneck(&d, 1) <= amplitude_wasserstein(&d, 1, p));
        }
    }
}
