//! Dense row-major matrices sized for derivative work (n rows, p columns
//! with small p), plus LU determinants and central finite differences.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies the listed rows into `out` (row-major, `idx.len() x cols`).
    pub fn gather_rows(&self, idx: &[usize], out: &mut [f64]) {
        debug_assert_eq!(out.len(), idx.len() * self.cols);
        for (k, &r) in idx.iter().enumerate() {
            out[k * self.cols..(k + 1) * self.cols].copy_from_slice(self.row(r));
        }
    }

    /// `self * other`, naive triple loop.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }
}

/// Determinant of a square matrix given as a row-major slice, by LU
/// factorization with partial pivoting. The slice is destroyed.
///
/// Returns `(det, min_pivot_ratio)` where `min_pivot_ratio` is the smallest
/// `|pivot| / row_norm` seen; a tiny ratio signals numerical degeneracy.
pub fn det_lu_destructive(a: &mut [f64], dim: usize) -> (f64, f64) {
    debug_assert_eq!(a.len(), dim * dim);
    if dim == 0 {
        return (1.0, f64::INFINITY);
    }
    let row_norms: Vec<f64> = (0..dim)
        .map(|r| a[r * dim..(r + 1) * dim].iter().map(|v| v.abs()).fold(0.0, f64::max))
        .collect();
    let mut det = 1.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut perm: Vec<usize> = (0..dim).collect();
    for k in 0..dim {
        // Partial pivot: largest |a[i][k]| for i >= k.
        let (piv_row, piv_abs) = (k..dim)
            .map(|i| (i, a[i * dim + k].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        let norm = row_norms[perm[piv_row]].max(f64::MIN_POSITIVE);
        min_ratio = min_ratio.min(piv_abs / norm);
        if piv_abs == 0.0 {
            return (0.0, 0.0);
        }
        if piv_row != k {
            for j in 0..dim {
                a.swap(k * dim + j, piv_row * dim + j);
            }
            perm.swap(k, piv_row);
            det = -det;
        }
        let pivot = a[k * dim + k];
        det *= pivot;
        for i in k + 1..dim {
            let factor = a[i * dim + k] / pivot;
            a[i * dim + k] = 0.0;
            for j in k + 1..dim {
                a[i * dim + j] -= factor * a[k * dim + j];
            }
        }
    }
    (det, min_ratio)
}

/// Central-difference step for coordinate value `x`: `1e-6 * (1 + |x|)`.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// Jacobian of `f: R^in -> R^out` at `at`, by central differences with the
/// per-coordinate step from [`fd_step`]. Output is `out_dim x in_dim`.
pub fn fd_jacobian<F>(f: F, at: &[f64], out_dim: usize) -> Mat
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut jac = Mat::zeros(out_dim, at.len());
    let mut point = at.to_vec();
    for j in 0..at.len() {
        let h = fd_step(at[j]);
        point[j] = at[j] + h;
        let fp = f(&point);
        point[j] = at[j] - h;
        let fm = f(&point);
        point[j] = at[j];
        debug_assert_eq!(fp.len(), out_dim);
        for i in 0..out_dim {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    jac
}
