//! Browser bindings for the attention-topology pipeline.
//!
//! The page in `www/` drives three operations on one synthetic attention head:
//! building the head and its distance graph, computing its persistence
//! diagram, and reading off the topological features and Betti curve.

use wasm_bindgen::prelude::*;

use attntopo::features::{amplitude_bottleneck, amplitude_wasserstein, persistence_entropy};
use attntopo::graph::{to_distance_matrix, AttentionMap, DistanceMatrix};
use attntopo::persistence::{betti_at, compute_persistence, PersistenceDiagram};
use attntopo::record_io::synth_attention;

/// One synthetic attention head with its distance matrix and diagram.
#[wasm_bindgen]
pub struct Head {
    n: usize,
    attention: Vec<f64>,
    distances: DistanceMatrix,
    diagram: Option<PersistenceDiagram>,
}

#[wasm_bindgen]
impl Head {
    /// Generates a head from `seed`; `locality` in `[0, 1]` pulls attention
    /// towards neighbouring tokens.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n_tokens: usize, locality: f64) -> Result<Head, JsError> {
        let record = synth_attention(u64::from(seed), n_tokens, 1, 1, locality)?;
        let map = AttentionMap::from_f32(n_tokens, record.map(0, 0))?;
        let attention = (0..n_tokens * n_tokens)
            .map(|i| map.get(i / n_tokens, i % n_tokens))
            .collect();
        Ok(Head {
            n: n_tokens,
            attention,
            distances: to_distance_matrix(&map),
            diagram: None,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major attention weights.
    pub fn attention(&self) -> Vec<f64> {
        self.attention.clone()
    }

    /// Row-major distances `1 − max(w_ij, w_ji)`.
    pub fn distances(&self) -> Vec<f64> {
        self.distances.as_slice().to_vec()
    }

    /// Computes the diagram and returns it flattened as `[dim, birth, death, ...]`.
    pub fn persistence(&mut self, max_hom_dim: usize) -> Result<Vec<f64>, JsError> {
        let diagram = compute_persistence(&self.distances, max_hom_dim, 1.0)?;
        let flat = diagram
            .points()
            .iter()
            .flat_map(|p| [p.dim as f64, p.birth, p.death])
            .collect();
        self.diagram = Some(diagram);
        Ok(flat)
    }

    /// `[entropy, bottleneck, wasserstein]` per dimension of the last diagram.
    pub fn features(&self, wasserstein_p: f64) -> Result<Vec<f64>, JsError> {
        let diagram = self.computed()?;
        if wasserstein_p < 1.0 {
            return Err(JsError::new("Wasserstein order must be at least 1"));
        }
        Ok((0..=diagram.max_dim())
            .flat_map(|dim| {
                [
                    persistence_entropy(diagram, dim),
                    amplitude_bottleneck(diagram, dim),
                    amplitude_wasserstein(diagram, dim, wasserstein_p),
                ]
            })
            .collect())
    }

    /// Betti numbers of `dim` at `steps` evenly spaced values in `[0, 1]`.
    pub fn betti_curve(&self, dim: usize, steps: usize) -> Result<Vec<u32>, JsError> {
        let diagram = self.computed()?;
        let steps = steps.max(2);
        Ok((0..steps)
            .map(|i| betti_at(diagram, dim, i as f64 / (steps - 1) as f64) as u32)
            .collect())
    }
}

impl Head {
    fn computed(&self) -> Result<&PersistenceDiagram, JsError> {
        self.diagram
            .as_ref()
            .ok_or_else(|| JsError::new("call persistence() first"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // JsError only exists on wasm targets, so exercise the native paths directly.
    #[test]
    fn head_shapes() {
        let record = synth_attention(3, 8, 1, 1, 0.5).unwrap();
        let map = AttentionMap::from_f32(8, record.map(0, 0)).unwrap();
        let diagram = compute_persistence(&to_distance_matrix(&map), 1, 1.0).unwrap();
        assert_eq!(betti_at(&diagram, 0, 0.0), 8);
        assert_eq!(betti_at(&diagram, 0, 1.0 - 1e-12), 1);
    }
}
