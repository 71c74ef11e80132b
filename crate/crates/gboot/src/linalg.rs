//! Dense matrix storage and a pivoted Householder QR least-squares solver.
//!
//! The design matrices in this crate are tall and narrow (thousands of rows,
//! at most a handful of columns), so a plain `Vec<f64>` with explicit indexing
//! beats pulling in a linear-algebra dependency. The solver factors the
//! row-scaled design with column pivoting so that rank deficiency is detected
//! and reported against a concrete column rather than silently producing a
//! minimum-norm solution.

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n_cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Dot product of row `i` with a coefficient vector.
    #[inline]
    pub fn row_dot(&self, i: usize, coef: &[f64]) -> f64 {
        self.row(i).iter().zip(coef).map(|(a, b)| a * b).sum()
    }
}

/// Rank deficiency detected during factorization; `column` is the index of
/// the pivot column (in the caller's numbering) that could not be reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDeficient {
    pub column: usize,
}

/// Least-squares solve of `a x ≈ b` via Householder QR with column pivoting.
///
/// Pivoting selects the remaining column of largest norm at every step; a
/// pivot whose norm falls below `max(m, n) · ε · 8` relative to the first
/// pivot marks the matrix rank deficient.
pub fn qr_least_squares(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, RankDeficient> {
    let m = a.n_rows();
    let n = a.n_cols();
    assert_eq!(b.len(), m, "rhs length mismatch");
    if m < n {
        // Fewer rows than columns can never determine all coefficients.
        return Err(RankDeficient { column: n - 1 });
    }

    // Column-major working copy; columns are contiguous for the reflections.
    let mut work = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            work[j * m + i] = a.get(i, j);
        }
    }
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r_diag = vec![0.0; n];
    let mut v = vec![0.0; m];

    let tol_scale = (m.max(n) as f64) * f64::EPSILON * 8.0;
    let mut first_pivot_norm = 0.0;

    for k in 0..n {
        // Pivot on the largest remaining column norm, recomputed from the
        // reduced rows so downdating error cannot accumulate.
        let mut best = k;
        let mut best_sq = 0.0;
        for j in k..n {
            let col = &work[j * m..(j + 1) * m];
            let sq: f64 = col[k..].iter().map(|x| x * x).sum();
            if sq > best_sq {
                best_sq = sq;
                best = j;
            }
        }
        if best != k {
            for i in 0..m {
                work.swap(k * m + i, best * m + i);
            }
            perm.swap(k, best);
        }

        let alpha = best_sq.sqrt();
        if k == 0 {
            first_pivot_norm = alpha;
        }
        if alpha <= tol_scale * first_pivot_norm || alpha == 0.0 {
            return Err(RankDeficient { column: perm[k] });
        }

        // Householder vector for rows k..m of column k.
        let col_k = &work[k * m..(k + 1) * m];
        let sign = if col_k[k] >= 0.0 { 1.0 } else { -1.0 };
        v[k..m].copy_from_slice(&col_k[k..m]);
        v[k] += sign * alpha;
        let vtv: f64 = v[k..m].iter().map(|x| x * x).sum();
        r_diag[k] = -sign * alpha;

        // Reflect the remaining columns and the right-hand side.
        for j in (k + 1)..n {
            let col = &mut work[j * m..(j + 1) * m];
            let dot: f64 = v[k..m].iter().zip(&col[k..m]).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vtv;
            for i in k..m {
                col[i] -= scale * v[i];
            }
        }
        let dot: f64 = v[k..m].iter().zip(&qtb[k..m]).map(|(a, b)| a * b).sum();
        let scale = 2.0 * dot / vtv;
        for i in k..m {
            qtb[i] -= scale * v[i];
        }
    }

    // Back substitution on the upper triangle (row i of R lives in the
    // reduced columns j > i of `work`, plus r_diag on the diagonal).
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qtb[i];
        for j in (i + 1)..n {
            s -= work[j * m + i] * x[j];
        }
        x[i] = s / r_diag[i];
    }

    // Undo the pivot permutation.
    let mut out = vec![0.0; n];
    for (k, &orig) in perm.iter().enumerate() {
        out[orig] = x[k];
    }
    Ok(out)
}
