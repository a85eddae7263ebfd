//! Topological out-of-distribution detection for transformer language models.
//!
//! Every attention head of a transformer produces a row-stochastic `n × n`
//! attention map. This crate turns each map into an undirected distance
//! graph, computes Vietoris-Rips persistence diagrams of that graph, reduces
//! the diagrams to a fixed-length vector of persistence-entropy and amplitude
//! features, and scores vectors against an in-distribution reference set with
//! a Mahalanobis or k-nearest-neighbour scorer.
//!
//! The stages, in pipeline order:
//!
//! * [`record_io`] - binary record files for attention tensors and embeddings,
//!   plus a seeded synthetic attention generator.
//! * [`graph`] - attention map to distance matrix.
//! * [`persistence`] - Vietoris-Rips filtration and ℤ₂ persistent homology.
//! * [`features`] - persistence diagrams to feature vectors.
//! * [`scoring`] - standardisation, Mahalanobis and kNN scorers, threshold gate.
//! * [`metrics`] - AUROC, FPR at 95% TPR and threshold calibration.
//! * [`pipeline`] - configuration, end-to-end runs and evaluation reports.
//!
//! ```
//! use attntopo::graph::{AttentionMap, to_distance_matrix};
//! use attntopo::persistence::compute_persistence;
//! use attntopo::features::persistence_entropy;
//!
//! let map = AttentionMap::new(3, vec![
//!     0.8, 0.1, 0.1,
//!     0.2, 0.7, 0.1,
//!     0.3, 0.3, 0.4,
//! ]).unwrap();
//! let dist = to_distance_matrix(&map);
//! let diagram = compute_persistence(&dist, 1, 1.0).unwrap();
//! assert_eq!(diagram.in_dim(0).count(), 3);
//! assert!(persistence_entropy(&diagram, 0) > 0.0);
//! ```

pub mod error;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod persistence;
pub mod pipeline;
pub mod record_io;
pub mod scoring;

pub use error::{Error, Result};
