//! Vietoris-Rips persistent homology over ℤ₂.
//!
//! [`compute_persistence`] runs persistent cohomology with clearing over an
//! implicit enumeration of the Rips complex: simplices are never materialised
//! beyond the columns being reduced, and coboundaries are generated on the fly
//! from the distance matrix. Dimension 0 is handled by union-find.
//!
//! [`vr_filtration`] materialises the filtration explicitly. It is meant for
//! inspection and small inputs, not for the reduction itself.

mod combinatorics;
mod reduction;

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::DistanceMatrix;

pub use combinatorics::Binomials;

/// Filtration ceiling used for attention distances, which lie in `[0, 1]`.
pub const DEFAULT_CAP: f64 = 1.0;
/// Highest homology dimension computed.
pub const MAX_HOMOLOGY_DIM: usize = 3;
pub const DEFAULT_SIMPLEX_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceOptions {
    pub max_hom_dim: usize,
    pub cap: f64,
    pub simplex_budget: u64,
}

impl Default for PersistenceOptions {
    fn default() -> Self {
        PersistenceOptions {
            max_hom_dim: MAX_HOMOLOGY_DIM,
            cap: DEFAULT_CAP,
            simplex_budget: DEFAULT_SIMPLEX_BUDGET,
        }
    }
}

impl PersistenceOptions {
    fn check(&self) -> Result<()> {
        if self.max_hom_dim > MAX_HOMOLOGY_DIM {
            return Err(Error::invalid(format!(
                "max_hom_dim {} exceeds {MAX_HOMOLOGY_DIM}",
                self.max_hom_dim
            )));
        }
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::invalid(format!("cap must be positive and finite, got {}", self.cap)));
        }
        Ok(())
    }
}

/// A simplex of the Rips filtration with its entry value.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSimplex {
    /// Strictly increasing vertex indices.
    pub vertices: Vec<usize>,
    /// Largest pairwise distance among the vertices, 0 for a vertex.
    pub value: f64,
}

impl FilteredSimplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// One point of a persistence diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
    pub dim: usize,
}

impl PersistencePair {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }
}

/// Persistence pairs of every computed dimension. Pairs with zero lifetime
/// are dropped on construction; classes still alive at the ceiling die at `cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    points: Vec<PersistencePair>,
    cap: f64,
    max_dim: usize,
}

impl PersistenceDiagram {
    pub fn new(points: impl IntoIterator<Item = PersistencePair>, cap: f64, max_dim: usize) -> Self {
        let mut points: Vec<_> = points.into_iter().filter(|p| p.death > p.birth).collect();
        points.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
        });
        PersistenceDiagram { points, cap, max_dim }
    }

    pub fn empty(cap: f64, max_dim: usize) -> Self {
        PersistenceDiagram { points: Vec::new(), cap, max_dim }
    }

    pub fn points(&self) -> &[PersistencePair] {
        &self.points
    }

    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.points.iter().filter(move |p| p.dim == dim)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Highest homology dimension the diagram was computed for.
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Betti number of dimension `dim` at filtration value `eps`: the number of
/// pairs with `birth <= eps < death`.
pub fn betti_at(diagram: &PersistenceDiagram, dim: usize, eps: f64) -> usize {
    diagram
        .in_dim(dim)
        .filter(|p| p.birth <= eps && eps < p.death)
        .count()
}

/// Persistence diagram of the Rips filtration of `dist` up to `cap`, for
/// homology dimensions `0..=max_hom_dim`, with the default simplex budget.
pub fn compute_persistence(dist: &DistanceMatrix, max_hom_dim: usize, cap: f64) -> Result<PersistenceDiagram> {
    compute_persistence_with(
        dist,
        &PersistenceOptions {
            max_hom_dim,
            cap,
            ..PersistenceOptions::default()
        },
    )
}

pub fn compute_persistence_with(dist: &DistanceMatrix, options: &PersistenceOptions) -> Result<PersistenceDiagram> {
    options.check()?;
    check_budget(dist.n(), options.max_hom_dim + 1, options.simplex_budget)?;
    let pairs = reduction::persistence_pairs(dist, options.max_hom_dim, options.cap);
    Ok(PersistenceDiagram::new(pairs, options.cap, options.max_hom_dim))
}

/// Every simplex of dimension `<= max_dim` with value `<= cap`, sorted by
/// `(value, dim, vertices)`. Faces always precede their cofaces.
pub fn vr_filtration(dist: &DistanceMatrix, max_dim: usize, cap: f64) -> Result<Vec<FilteredSimplex>> {
    vr_filtration_with_budget(dist, max_dim, cap, DEFAULT_SIMPLEX_BUDGET)
}

pub fn vr_filtration_with_budget(
    dist: &DistanceMatrix,
    max_dim: usize,
    cap: f64,
    budget: u64,
) -> Result<Vec<FilteredSimplex>> {
    if !(cap > 0.0) {
        return Err(Error::invalid(format!("cap must be positive, got {cap}")));
    }
    let n = dist.n();
    check_budget(n, max_dim, budget)?;
    let mut simplices = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(max_dim + 1);
    // depth-first over increasing vertex tuples, pruning once the value exceeds cap
    fn extend(
        dist: &DistanceMatrix,
        max_dim: usize,
        cap: f64,
        stack: &mut Vec<usize>,
        value: f64,
        out: &mut Vec<FilteredSimplex>,
    ) {
        let start = stack.last().map_or(0, |&v| v + 1);
        for v in start..dist.n() {
            let entry = stack.iter().fold(value, |acc, &u| acc.max(dist.get(u, v)));
            if entry > cap {
                continue;
            }
            stack.push(v);
            out.push(FilteredSimplex { vertices: stack.clone(), value: entry });
            if stack.len() <= max_dim {
                extend(dist, max_dim, cap, stack, entry, out);
            }
            stack.pop();
        }
    }
    extend(dist, max_dim, cap, &mut stack, 0.0, &mut simplices);
    simplices.sort_by(filtration_order);
    debug_assert!(faces_precede_cofaces(&simplices));
    Ok(simplices)
}

fn filtration_order(a: &FilteredSimplex, b: &FilteredSimplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

/// Checks that every face of every simplex appears earlier in `simplices`.
pub fn faces_precede_cofaces(simplices: &[FilteredSimplex]) -> bool {
    use std::collections::HashMap;
    let position: HashMap<&[usize], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.as_slice(), i))
        .collect();
    simplices.iter().enumerate().all(|(i, s)| {
        if s.vertices.len() < 2 {
            return true;
        }
        (0..s.vertices.len()).all(|skip| {
            let face: Vec<usize> = s
                .vertices
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &v)| v)
                .collect();
            position.get(face.as_slice()).is_some_and(|&j| j < i)
        })
    })
}

/// Number of simplices of dimension `0..=top_dim` in the full simplex on `n` vertices.
pub fn simplex_count_bound(n: usize, top_dim: usize) -> u64 {
    (1..=top_dim as u64 + 1)
        .map(|k| combinatorics::binomial_u128(n as u64, k))
        .fold(0u128, |acc, c| acc.saturating_add(c))
        .min(u128::from(u64::MAX)) as u64
}

fn check_budget(n: usize, top_dim: usize, budget: u64) -> Result<()> {
    let required = simplex_count_bound(n, top_dim);
    if required > budget {
        return Err(Error::CapacityExceeded { required, budget });
    }
    Ok(())
}
