use nalgebra::{DMatrix, DVector};

use crate::error::{LsviError, Result};

/// Dense symmetric matrix. The lower triangle is authoritative; the upper
/// triangle is kept as an exact mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds a symmetric matrix by mirroring the lower triangle of `m`.
    pub fn from_lower(mut m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let d = m.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                m[(j, i)] = m[(i, j)];
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds `(m + mᵀ) / 2`.
    pub fn symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        let d = m.nrows();
        let mut out = m.clone();
        for j in 0..d {
            for i in (j + 1)..d {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(SymMatrix(out))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Returns `self + ridge * I`.
    pub fn add_ridge(&self, ridge: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        SymMatrix(m)
    }

    /// Lower triangle, row by row: `a11, a21, a22, a31, ...`.
    pub fn lower_triangle(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in 0..=i {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn from_lower_triangle(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * (d + 1) / 2 {
            return Err(LsviError::DimensionMismatch {
                expected: d * (d + 1) / 2,
                found: values.len(),
            });
        }
        let mut m = DMatrix::zeros(d, d);
        let mut it = values.iter();
        for i in 0..d {
            for j in 0..=i {
                let v = *it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(SymMatrix(m))
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LsviError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(LsviError::InvalidArgument("empty matrix".into()));
    }
    Ok(())
}

/// Lower-triangular factor with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(DMatrix<f64>);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn identity(d: usize) -> Self {
        LowerTriangular(DMatrix::identity(d, d))
    }

    /// Wraps a matrix that the caller guarantees is lower triangular with
    /// positive diagonal (entries above the diagonal are zeroed).
    pub fn from_matrix(mut m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let d = m.nrows();
        for i in 0..d {
            if !(m[(i, i)] > 0.0) {
                return Err(LsviError::NotPositiveDefinite {
                    pivot: i,
                    value: m[(i, i)],
                });
            }
            for j in (i + 1)..d {
                m[(i, j)] = 0.0;
            }
        }
        Ok(LowerTriangular(m))
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det_product(&self) -> f64 {
        2.0 * self.0.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `L x` written into `out`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        // column-major storage: accumulate column by column
        for (j, &xj) in x.iter().enumerate().take(d) {
            let col = &self.0.as_slice()[j * d..(j + 1) * d];
            for i in j..d {
                out[i] += col[i] * xj;
            }
        }
    }
}

/// Which system `tri_solve` solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    /// `L x = b`
    No,
    /// `Lᵀ x = b`
    Yes,
}

/// Cholesky factorisation `A = L Lᵀ`. Only the lower triangle of `A` is read.
pub fn cholesky(a: &SymMatrix) -> Result<LowerTriangular> {
    let d = a.dim();
    let src = a.matrix();
    let mut l = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut diag = src[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(LsviError::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut acc = src[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Ok(LowerTriangular(l))
}

/// Solves `L x = b` or `Lᵀ x = b` by substitution.
pub fn tri_solve(l: &LowerTriangular, b: &[f64], transpose: Transpose) -> Result<Vec<f64>> {
    let d = l.dim();
    if b.len() != d {
        return Err(LsviError::DimensionMismatch {
            expected: d,
            found: b.len(),
        });
    }
    let m = l.matrix();
    let mut x = b.to_vec();
    match transpose {
        Transpose::No => {
            for i in 0..d {
                let mut acc = x[i];
                for k in 0..i {
                    acc -= m[(i, k)] * x[k];
                }
                x[i] = acc / m[(i, i)];
            }
        }
        Transpose::Yes => {
            for i in (0..d).rev() {
                let mut acc = x[i];
                for k in (i + 1)..d {
                    acc -= m[(k, i)] * x[k];
                }
                x[i] = acc / m[(i, i)];
            }
        }
    }
    Ok(x)
}

/// Solves `op(L) X = B` column by column.
pub fn tri_solve_matrix(
    l: &LowerTriangular,
    b: &DMatrix<f64>,
    transpose: Transpose,
) -> Result<DMatrix<f64>> {
    if b.nrows() != l.dim() {
        return Err(LsviError::DimensionMismatch {
            expected: l.dim(),
            found: b.nrows(),
        });
    }
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for c in 0..b.ncols() {
        let col: Vec<f64> = b.column(c).iter().copied().collect();
        let x = tri_solve(l, &col, transpose)?;
        out.column_mut(c).copy_from_slice(&x);
    }
    Ok(out)
}

/// Solves `A x = b` for symmetric positive definite `A` given its factor.
pub fn cholesky_solve(l: &LowerTriangular, b: &[f64]) -> Result<Vec<f64>> {
    let y = tri_solve(l, b, Transpose::No)?;
    tri_solve(l, &y, Transpose::Yes)
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn spd_inverse(l: &LowerTriangular) -> SymMatrix {
    let d = l.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let y = tri_solve_matrix(l, &id, Transpose::No).expect("square");
    let inv = tri_solve_matrix(l, &y, Transpose::Yes).expect("square");
    SymMatrix::symmetrized(&inv).expect("square")
}

/// `A Aᵀ` without materialising the transpose.
pub fn outer_gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(m, m);
    if m == 0 || n == 0 {
        return out;
    }
    let (rs, cs) = (1isize, m as isize);
    // SAFETY: `a` is a contiguous column-major m×n buffer and `out` an m×m
    // one; the strides below address exactly those elements.
    unsafe {
        matrixmultiply::dgemm(m, n, m, 1.0, a.as_ptr(), rs, cs, a.as_ptr(), cs, rs, 0.0, out.as_mut_ptr(), rs, cs);
    }
    out
}

/// `A Bᵀ` for row-major `A` (`m × k`) and `B` (`n × k`), returned row-major.
pub fn row_products(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    assert!(k > 0 && a.len().is_multiple_of(k) && b.len().is_multiple_of(k), "row length mismatch");
    let (m, n) = (a.len() / k, b.len() / k);
    let mut out = vec![0.0; m * n];
    if m == 0 || n == 0 {
        return out;
    }
    // SAFETY: both inputs hold whole rows of length k and `out` is m×n; the
    // strides read B transposed in place.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), 1, k as isize, 0.0, out.as_mut_ptr(), n as isize, 1,
        );
    }
    out
}

/// Solves `(F + ridge I) β = z` through a Cholesky factorisation.
pub fn ols_solve(f: &SymMatrix, z: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if z.len() != f.dim() {
        return Err(LsviError::DimensionMismatch {
            expected: f.dim(),
            found: z.len(),
        });
    }
    if ridge < 0.0 {
        return Err(LsviError::InvalidArgument("ridge must be non-negative".into()));
    }
    let a = if ridge > 0.0 { f.add_ridge(ridge) } else { f.clone() };
    let l = cholesky(&a).map_err(|_| LsviError::Singular)?;
    cholesky_solve(&l, z)
}

/// Column-major stacking of a matrix.
pub fn vec(u: &DMatrix<f64>) -> Vec<f64> {
    u.as_slice().to_vec()
}

/// Inverse of [`vec`] for a `d × d` matrix.
pub fn unvec(v: &[f64], d: usize) -> Result<DMatrix<f64>> {
    if v.len() != d * d {
        return Err(LsviError::DimensionMismatch {
            expected: d * d,
            found: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(d, d, v))
}

/// Position of the upper-triangular entry `(i, i + k)` in the row-major
/// half-vectorisation, using 1-based `i` and result:
/// `1 + (2d + 2 - i)(i - 1)/2 + k`.
pub fn vech_index(i: usize, k: usize, d: usize) -> Result<usize> {
    if i < 1 || i > d || k > d - i {
        return Err(LsviError::InvalidArgument(format!(
            "vech index (i={i}, k={k}) out of range for d={d}"
        )));
    }
    Ok(1 + (2 * d + 2 - i) * (i - 1) / 2 + k)
}

/// 0-based position of the entry `(row, col)`, `row <= col`, in the
/// half-vectorisation. This is the only place where the 1-based formula
/// is converted.
pub fn vech_position(row: usize, col: usize, d: usize) -> usize {
    debug_assert!(row <= col && col < d);
    vech_index(row + 1, col - row, d).expect("in range") - 1
}

/// Number of entries of the half-vectorisation.
pub fn vech_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Enumerates the upper-triangular pairs `(row, col)` (0-based) in the order
/// used by the orthonormal statistic: row-major, `col` from `row` to `d-1`.
pub fn vech_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i..d).map(move |j| (i, j)))
}
