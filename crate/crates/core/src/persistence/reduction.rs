//! Persistent cohomology with clearing over an implicit Rips complex.
//!
//! Simplices of one dimension are totally ordered by `(value, reverse index)`.
//! Cohomology columns are reduced in reverse of that order; a column's pivot
//! is its earliest coface. Pivots found in dimension `d` are exactly the
//! columns that would reduce to zero in dimension `d + 1`, so they are skipped
//! there (clearing).

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::ops::ControlFlow;

use super::combinatorics::Binomials;
use super::PersistencePair;
use crate::graph::DistanceMatrix;

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    index: u64,
}

impl Entry {
    /// Filtration order within one dimension.
    fn filtration_cmp(&self, other: &Entry) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Packs an entry into an integer key whose order is the filtration order:
/// value bits (nonnegative, so monotone) then reversed index.
#[inline]
fn key(value: f64, index: u64) -> u128 {
    // + 0.0 maps -0.0 to +0.0
    (u128::from((value + 0.0).to_bits()) << 64) | u128::from(!index)
}

#[inline]
fn unpack(key: u128) -> Entry {
    Entry { value: f64::from_bits((key >> 64) as u64), index: !(key as u64) }
}

/// Min-heap of packed keys: pops the earliest entry first.
type Column = BinaryHeap<Reverse<u128>>;

struct Rips<'a> {
    dist: &'a DistanceMatrix,
    binomials: Binomials,
    cap: f64,
}

impl Rips<'_> {
    fn diameter(&self, vertices: &[usize]) -> f64 {
        let mut value = 0.0f64;
        for (i, &u) in vertices.iter().enumerate() {
            for &v in &vertices[i + 1..] {
                value = value.max(self.dist.get(u, v));
            }
        }
        value
    }

    /// Visits the cofaces of `simplex` (vertices largest first) with value
    /// `<= cap`, in decreasing index order, until `visit` breaks.
    fn cofaces(&self, simplex: Entry, vertices: &[usize], mut visit: impl FnMut(Entry) -> ControlFlow<()>) {
        let dim = vertices.len() - 1;
        let b = &self.binomials;
        let mut above: u64 = 0;
        let mut below: u64 = simplex.index;
        let mut j = 0;
        for v in (0..self.dist.n()).rev() {
            if j < vertices.len() && vertices[j] == v {
                // v moves from the "below" sum to the "above" sum, shifting its rank up by one
                below -= b.get(v, dim + 1 - j);
                above += b.get(v, dim + 2 - j);
                j += 1;
                continue;
            }
            let mut value = simplex.value;
            for &u in vertices {
                value = value.max(self.dist.get(u, v));
            }
            if value > self.cap {
                continue;
            }
            let index = above + b.get(v, dim + 2 - j) + below;
            if visit(Entry { value, index }).is_break() {
                return;
            }
        }
    }

    fn push_coboundary(&self, simplex: Entry, vertices: &[usize], heap: &mut Column) {
        self.cofaces(simplex, vertices, |e| {
            heap.push(Reverse(key(e.value, e.index)));
            ControlFlow::Continue(())
        });
    }

    /// The earliest coface when it has the simplex's own value: no coface can
    /// come earlier, and the first such coface met has the largest index.
    fn zero_persistence_coface(&self, simplex: Entry, vertices: &[usize]) -> Option<Entry> {
        let mut found = None;
        self.cofaces(simplex, vertices, |e| {
            if e.value == simplex.value {
                found = Some(e);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        found
    }

    /// Pushes the coboundary of a ℤ₂ combination of `dim`-simplices.
    fn push_combination(&self, simplices: &[Entry], dim: usize, scratch: &mut Vec<usize>, heap: &mut Column) {
        for &simplex in simplices {
            self.binomials.decode(simplex.index, dim, scratch);
            self.push_coboundary(simplex, scratch, heap);
        }
    }
}

/// Earliest surviving entry of a ℤ₂ column held as a heap with repeated
/// entries; cancelled pairs are discarded. The pivot stays in the heap.
fn pivot(heap: &mut Column) -> Option<Entry> {
    loop {
        let Reverse(top) = heap.pop()?;
        if heap.peek().is_some_and(|&Reverse(next)| next == top) {
            heap.pop();
            continue;
        }
        heap.push(Reverse(top));
        return Some(unpack(top));
    }
}

/// Reduces a multiset of simplices modulo 2.
fn cancel_pairs(mut simplices: Vec<Entry>) -> Vec<Entry> {
    simplices.sort_unstable_by_key(|e| e.index);
    let mut out: Vec<Entry> = Vec::with_capacity(simplices.len());
    for entry in simplices {
        if out.last().is_some_and(|last| last.index == entry.index) {
            out.pop();
        } else {
            out.push(entry);
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Raw persistence pairs (zero-length pairs included) for dimensions `0..=max_dim`.
pub(super) fn persistence_pairs(dist: &DistanceMatrix, max_dim: usize, cap: f64) -> Vec<PersistencePair> {
    let n = dist.n();
    let mut pairs = Vec::new();
    if n == 0 {
        return pairs;
    }
    let rips = Rips { dist, binomials: Binomials::new(n, max_dim + 2), cap };

    // dimension 0: Kruskal over edges in filtration order
    let mut edges: Vec<Entry> = Vec::with_capacity(n * (n - 1) / 2);
    for j in 1..n {
        for i in 0..j {
            let value = dist.get(i, j);
            if value <= cap {
                edges.push(Entry { value, index: (j * (j - 1) / 2 + i) as u64 });
            }
        }
    }
    edges.sort_by(Entry::filtration_cmp);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut rank = vec![0u8; n];
    let mut columns: Vec<Entry> = Vec::new();
    let mut endpoints = Vec::with_capacity(2);
    for edge in &edges {
        rips.binomials.decode(edge.index, 1, &mut endpoints);
        let (a, b) = (find(&mut parent, endpoints[0]), find(&mut parent, endpoints[1]));
        if a == b {
            columns.push(*edge);
            continue;
        }
        match rank[a].cmp(&rank[b]) {
            Ordering::Less => parent[a] = b,
            Ordering::Greater => parent[b] = a,
            Ordering::Equal => {
                parent[b] = a;
                rank[a] += 1;
            }
        }
        pairs.push(PersistencePair { birth: 0.0, death: edge.value, dim: 0 });
    }
    for v in 0..n {
        if find(&mut parent, v) == v {
            pairs.push(PersistencePair { birth: 0.0, death: cap, dim: 0 });
        }
    }
    if max_dim == 0 {
        return pairs;
    }
    columns.reverse();

    let mut heap = Column::new();
    let mut vertices = Vec::with_capacity(max_dim + 2);
    let mut scratch = Vec::with_capacity(max_dim + 2);
    for dim in 1..=max_dim {
        // pivot index -> reduction column, the simplices whose coboundaries sum
        // to the reduced column; it stays sparse where the reduced column fills in
        let mut pivots: HashMap<u64, Vec<Entry>> = HashMap::new();
        for &column in &columns {
            rips.binomials.decode(column.index, dim, &mut vertices);
            if let Some(coface) = rips.zero_persistence_coface(column, &vertices) {
                if !pivots.contains_key(&coface.index) {
                    pivots.insert(coface.index, vec![column]);
                    continue;
                }
            }
            heap.clear();
            rips.push_coboundary(column, &vertices, &mut heap);
            let mut reduction = vec![column];
            loop {
                match pivot(&mut heap) {
                    None => {
                        pairs.push(PersistencePair { birth: column.value, death: cap, dim });
                        break;
                    }
                    Some(p) => {
                        if let Some(stored) = pivots.get(&p.index) {
                            rips.push_combination(stored, dim, &mut scratch, &mut heap);
                            reduction.extend_from_slice(stored);
                            continue;
                        }
                        pairs.push(PersistencePair { birth: column.value, death: p.value, dim });
                        pivots.insert(p.index, cancel_pairs(std::mem::take(&mut reduction)));
                        break;
                    }
                }
            }
        }
        if dim == max_dim {
            break;
        }
        let cleared: HashSet<u64> = pivots.into_keys().collect();
        columns = enumerate_columns(&rips, dim + 1, &cleared);
    }
    pairs
}

/// All `dim`-simplices with value `<= cap` that are not cleared, in reverse filtration order.
fn enumerate_columns(rips: &Rips<'_>, dim: usize, cleared: &HashSet<u64>) -> Vec<Entry> {
    let n = rips.dist.n();
    let count = rips.binomials.get(n, dim + 1);
    let mut vertices = Vec::with_capacity(dim + 1);
    let mut columns = Vec::new();
    for index in 0..count {
        if cleared.contains(&index) {
            continue;
        }
        rips.binomials.decode(index, dim, &mut vertices);
        let value = rips.diameter(&vertices);
        if value <= rips.cap {
            columns.push(Entry { value, index });
        }
    }
    columns.sort_by(|a, b| b.filtration_cmp(a));
    columns
}
