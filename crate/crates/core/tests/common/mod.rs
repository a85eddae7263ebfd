//! Reference implementations used only by the integration tests. They share
//! nothing with the production code paths they check.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(dim, birth, death)` triples, sorted, zero-length pairs removed.
pub type Bars = Vec<(usize, f64, f64)>;

/// Persistence by explicit ℤ₂ boundary-matrix reduction over the full Rips
/// filtration, ordered by `(value, dim, vertex tuple)`.
pub fn naive_persistence(n: usize, dist: &[f64], max_hom_dim: usize, cap: f64) -> Bars {
    let d = |i: usize, j: usize| dist[i * n + j];
    assert!(n <= 16, "naive oracle enumerates every subset");
    let mut simplices: Vec<(f64, Vec<usize>)> = Vec::new();
    for mask in 1u32..(1 << n) {
        let vertices: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if vertices.len() > max_hom_dim + 2 {
            continue;
        }
        let mut value = 0.0f64;
        for a in 0..vertices.len() {
            for b in a + 1..vertices.len() {
                value = value.max(d(vertices[a], vertices[b]));
            }
        }
        if value <= cap {
            simplices.push((value, vertices));
        }
    }
    simplices.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.len().cmp(&b.1.len()))
            .then_with(|| a.1.cmp(&b.1))
    });
    let position: HashMap<Vec<usize>, usize> =
        simplices.iter().enumerate().map(|(i, s)| (s.1.clone(), i)).collect();

    // columns as sorted row-index sets
    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|(_, vertices)| {
            if vertices.len() == 1 {
                return Vec::new();
            }
            let mut rows: Vec<usize> = (0..vertices.len())
                .map(|skip| {
                    let face: Vec<usize> = vertices
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    position[&face]
                })
                .collect();
            rows.sort_unstable();
            rows
        })
        .collect();

    let mut owner_of_low: HashMap<usize, usize> = HashMap::new();
    let mut paired = vec![false; simplices.len()];
    let mut bars = Vec::new();
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match owner_of_low.get(&low) {
                Some(&k) => {
                    let other = columns[k].clone();
                    columns[j] = symmetric_difference(&columns[j], &other);
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            owner_of_low.insert(low, j);
            paired[low] = true;
            paired[j] = true;
            let dim = simplices[low].1.len() - 1;
            bars.push((dim, simplices[low].0, simplices[j].0));
        }
    }
    for (i, (value, vertices)) in simplices.iter().enumerate() {
        let dim = vertices.len() - 1;
        if !paired[i] && dim <= max_hom_dim {
            bars.push((dim, *value, cap));
        }
    }
    normalize(bars)
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out
}

pub fn normalize(mut bars: Bars) -> Bars {
    bars.retain(|b| b.2 > b.1);
    bars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bars
}

/// Edge weights of a minimum spanning forest (Kruskal), restricted to `<= cap`.
pub fn kruskal_weights(n: usize, dist: &[f64], cap: f64) -> Vec<f64> {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if dist[i * n + j] <= cap {
                edges.push((dist[i * n + j], i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut component: Vec<usize> = (0..n).collect();
    let mut weights = Vec::new();
    for (w, i, j) in edges {
        let (ci, cj) = (component[i], component[j]);
        if ci != cj {
            // relabel the whole component: quadratic, fine for a test oracle
            for c in component.iter_mut() {
                if *c == cj {
                    *c = ci;
                }
            }
            weights.push(w);
        }
    }
    weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    weights
}

/// Random symmetric zero-diagonal matrix with entries in `(0, 1)`. With
/// `levels > 0` entries are quantised to `levels` distinct values, forcing ties.
pub fn random_distances(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<f64> {
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let x: f64 = if levels > 0 {
                f64::from(rng.random_range(1..=levels)) / f64::from(levels + 1)
            } else {
                rng.random_range(0.001..0.999)
            };
            dist[i * n + j] = x;
            dist[j * n + i] = x;
        }
    }
    dist
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points evenly spaced on a circle with chord lengths scaled so the diameter
/// is 1. Each chord is computed once per ring step, so equal steps give
/// bit-identical distances.
pub fn circle_distances(n: usize) -> Vec<f64> {
    let chord: Vec<f64> = (0..=n / 2)
        .map(|step| (std::f64::consts::PI * step as f64 / n as f64).sin())
        .collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let step = i.abs_diff(j).min(n - i.abs_diff(j));
            dist[i * n + j] = chord[step];
        }
    }
    dist
}

/// Brute-force AUROC: wins plus half ties over every (ID, OOD) pair.
pub fn pairwise_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &a in id {
        for &b in ood {
            twice += if a > b { 2 } else if a == b { 1 } else { 0 };
        }
    }
    twice as f64 / (2 * id.len() * ood.len()) as f64
}

/// Negated distance to the `k`-th closest bank vector, by sorting all distances.
pub fn sorted_knn(z: &[f64], bank: &[Vec<f64>], k: usize) -> f64 {
    let mut d: Vec<f64> = bank
        .iter()
        .map(|b| b.iter().zip(z).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    -d[k - 1]
}
