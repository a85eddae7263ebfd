//! Combinatorial number system for simplex indices.
//!
//! A `d`-simplex with vertices `v_d > ... > v_0` has index
//! `C(v_d, d+1) + ... + C(v_1, 2) + C(v_0, 1)`, a bijection between
//! `(d+1)`-subsets of `0..n` and `0..C(n, d+1)`.

/// Table of `C(v, k)` for `v <= n`, `k <= max_k`.
#[derive(Debug, Clone)]
pub struct Binomials {
    n: usize,
    width: usize,
    table: Vec<u64>,
}

impl Binomials {
    pub fn new(n: usize, max_k: usize) -> Self {
        let width = max_k + 1;
        let mut table = vec![0u64; (n + 1) * width];
        for v in 0..=n {
            table[v * width] = 1;
            for k in 1..=max_k.min(v) {
                let above = if k <= v - 1 { table[(v - 1) * width + k] } else { 0 };
                table[v * width + k] = table[(v - 1) * width + k - 1].saturating_add(above);
            }
        }
        Binomials { n, width, table }
    }

    #[inline]
    pub fn get(&self, v: usize, k: usize) -> u64 {
        let width = self.width;
        if k >= width || v > self.n {
            return if v >= k { binomial_u128(v as u64, k as u64).min(u128::from(u64::MAX)) as u64 } else { 0 };
        }
        self.table[v * width + k]
    }

    /// Index of a simplex given its vertices in strictly decreasing order.
    pub fn index_of(&self, vertices_desc: &[usize]) -> u64 {
        let top = vertices_desc.len();
        vertices_desc
            .iter()
            .enumerate()
            .map(|(pos, &v)| self.get(v, top - pos))
            .sum()
    }

    /// Writes the vertices of the `dim`-simplex with `index` into `out`, largest first.
    pub fn decode(&self, mut index: u64, dim: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut upper = self.n;
        for k in (1..=dim + 1).rev() {
            // largest v < upper with C(v, k) <= index
            let (mut lo, mut hi) = (k - 1, upper);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.get(mid, k) <= index {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(lo);
            index -= self.get(lo, k);
            upper = lo;
        }
    }
}

pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}
