//! Dense linear algebra, index arithmetic and random streams.

mod linalg;
mod rng;

pub use linalg::{
    cholesky, cholesky_solve, ols_solve, outer_gram, row_products, spd_inverse, tri_solve, tri_solve_matrix, unvec, vec,
    vech_index, vech_len, vech_pairs, vech_position, LowerTriangular, SymMatrix, Transpose,
};
pub use rng::{draw_standard_normal, draw_uniform, RngStream};

/// Row-major `n × d` block of points, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn from_vec(n: usize, d: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * d, "points buffer has wrong length");
        Points { n, d, data }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Points {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Points::from_vec(rows.len(), d, data)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the rows whose index satisfies `keep`.
    pub fn select_rows(&self, keep: &[bool]) -> Points {
        let data: Vec<f64> = self
            .rows()
            .zip(keep)
            .filter(|(_, &k)| k)
            .flat_map(|(r, _)| r.iter().copied())
            .collect();
        let n = data.len() / self.d.max(1);
        Points::from_vec(n, self.d, data)
    }

    /// Concatenates `self` with itself `times` times.
    pub fn repeated(&self, times: usize) -> Points {
        let mut data = Vec::with_capacity(self.data.len() * times);
        for _ in 0..times {
            data.extend_from_slice(&self.data);
        }
        Points::from_vec(self.n * times, self.d, data)
    }
}

/// Fixed-order sum of `f(i)` for `i in 0..n`, computed in parallel over
/// chunks of a fixed size. The result does not depend on the number of
/// worker threads.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}
