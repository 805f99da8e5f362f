//! Minimal dense linear algebra for the LDA math.
//!
//! Matrices are row-major `f64`. Every reduction runs in a fixed order so
//! identical inputs give bit-identical outputs.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge used by the LDA fitting paths unless configured otherwise.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Relative tolerance for the symmetry precondition.
const SYMMETRY_TOL: f64 = 1e-9;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Copies the first `n` rows into a new matrix.
    pub fn top_rows(&self, n: usize) -> Result<Self> {
        if n > self.rows {
            return Err(Error::Shape(format!(
                "requested {n} rows from a matrix with {}",
                self.rows
            )));
        }
        Ok(Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        })
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Symmetry check relative to the largest absolute entry.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                if (self[(r, c)] - self[(c, r)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Returns `self + shift * I`.
    pub fn add_diagonal(&self, shift: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape("diagonal shift needs a square matrix".into()));
        }
        let mut m = self.clone();
        for i in 0..m.rows {
            m[(i, i)] += shift;
        }
        Ok(m)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} against {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// Copies the upper triangle onto the lower one.
    pub(crate) fn mirror_upper(&mut self) {
        for r in 0..self.rows {
            for c in 0..r {
                self.data[r * self.cols + c] = self.data[c * self.cols + r];
            }
        }
    }

    /// Replaces the matrix by `(M + Mᵀ)/2`.
    pub(crate) fn symmetrize(&mut self) {
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                let v = 0.5 * (self[(r, c)] + self[(c, r)]);
                self[(r, c)] = v;
                self[(c, r)] = v;
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Dot product with a fixed four-lane accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        let out_row = &mut out.data[r * b.cols..(r + 1) * b.cols];
        for k in 0..a.cols {
            let v = a[(r, k)];
            if v != 0.0 {
                axpy(v, b.row(k), out_row);
            }
        }
    }
    Ok(out)
}

/// Ridge added to the diagonal of a symmetric matrix: `ridge · tr(m)/d`.
///
/// Falls back to an absolute `ridge` when the trace vanishes (an all-zero
/// scatter matrix) so that a positive ridge always makes the matrix definite.
pub fn ridge_shift(m: &Matrix, ridge: f64) -> f64 {
    let d = m.rows.max(1) as f64;
    let scale = m.trace() / d;
    if scale > 0.0 && scale.is_finite() {
        ridge * scale
    } else {
        ridge
    }
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            m.rows, m.cols
        )));
    }
    if !m.is_finite() {
        return Err(Error::Shape(format!("{what} has non-finite entries")));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::Shape(format!("{what} is not symmetric")));
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`, or `None` when `m`
/// is not numerically positive definite.
pub fn cholesky(m: &Matrix) -> Option<Matrix> {
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let diag = m[(j, j)] - dot(lj, lj);
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l.data[j * n + j] = ljj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l.data[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
fn forward_substitute(l: &Matrix, b: &mut [f64]) {
    let n = l.rows;
    for i in 0..n {
        let s = b[i] - dot(&l.data[i * n..i * n + i], &b[..i]);
        b[i] = s / l.data[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
fn backward_substitute_transposed(l: &Matrix, b: &mut [f64]) {
    let n = l.rows;
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l.data[k * n + i] * b[k];
        }
        b[i] = s / l.data[i * n + i];
    }
}

/// Inverse of `m + ridge·tr(m)/d·I` through a Cholesky factorization.
pub fn invert_spd(m: &Matrix, ridge: f64) -> Result<Matrix> {
    check_symmetric(m, "matrix to invert")?;
    let shift = if ridge > 0.0 { ridge_shift(m, ridge) } else { 0.0 };
    let shifted = m.add_diagonal(shift)?;
    let l = cholesky(&shifted).ok_or(Error::Singular { ridge })?;
    let n = m.rows;
    // Column j of the inverse solves L Lᵀ x = e_j; the result is symmetric so
    // we store it as row j.
    let mut inv = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        forward_substitute(&l, &mut col);
        backward_substitute_transposed(&l, &mut col);
        inv.row_mut(j).copy_from_slice(&col);
    }
    inv.symmetrize();
    if !inv.is_finite() {
        return Err(Error::Singular { ridge });
    }
    Ok(inv)
}

/// Eigenpairs sorted by descending eigenvalue; row `i` of `eigenvectors`
/// belongs to `eigenvalues[i]`, has unit norm, and its largest-magnitude
/// entry is non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// Sorts, normalizes and orients raw pairs given as (value, vector).
    fn from_pairs(mut pairs: Vec<(f64, Vec<f64>)>) -> Self {
        for (_, v) in pairs.iter_mut() {
            let norm = dot(v, v).sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            orient(v);
        }
        // Stable sort keeps ties in solver order, which is deterministic.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let n = pairs.len();
        let dim = pairs.first().map_or(0, |p| p.1.len());
        let mut eigenvalues = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        for (val, vec) in pairs {
            eigenvalues.push(val);
            data.extend(vec);
        }
        Self {
            eigenvalues,
            eigenvectors: Matrix {
                rows: n,
                cols: dim,
                data,
            },
        }
    }
}

/// Flips `v` so that its entry of largest magnitude is non-negative. Ties in
/// magnitude resolve to the first such entry.
fn orient(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigendecomposition of a symmetric matrix (Householder tridiagonalization
/// followed by implicit QL).
pub fn symmetric_eigen(m: &Matrix) -> Result<EigenDecomposition> {
    check_symmetric(m, "matrix")?;
    let n = m.rows;
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = m.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;
    // Columns of v are the eigenvectors.
    let vt = v.transpose();
    let pairs = (0..n).map(|i| (d[i], vt.row(i).to_vec())).collect();
    Ok(EigenDecomposition::from_pairs(pairs))
}

/// Householder reduction of the symmetric matrix held in `v` to tridiagonal
/// form. On return `d` is the diagonal, `e[1..]` the sub-diagonal and `v`
/// the accumulated orthogonal transform.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = v.rows;
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on the tridiagonal matrix (`d`, `e`), accumulating
/// rotations into `v`.
fn tridiagonal_ql(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = v.rows;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iterations = 60 * n.max(1);
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    return Err(Error::NoConvergence { iterations });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let row = k * n;
                        let h = v.data[row + i + 1];
                        let vi = v.data[row + i];
                        v.data[row + i + 1] = s * vi + c * h;
                        v.data[row + i] = c * vi - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Solves `S_B v = λ S_W v` with `S_W` ridged by `ridge·tr(S_W)/d`.
///
/// `S_W` is Cholesky-factored as `L Lᵀ`, the symmetric problem
/// `L⁻¹ S_B L⁻ᵀ y = λ y` is solved, and eigenvectors are mapped back with
/// `v = L⁻ᵀ y`. For symmetric inputs these are the eigenpairs of
/// `S_W⁻¹ S_B`.
pub fn generalized_eig(s_b: &Matrix, s_w: &Matrix, ridge: f64) -> Result<EigenDecomposition> {
    check_symmetric(s_b, "between-class matrix")?;
    check_symmetric(s_w, "within-class matrix")?;
    if s_b.rows != s_w.rows {
        return Err(Error::Shape(format!(
            "between-class matrix is {0}x{0}, within-class matrix is {1}x{1}",
            s_b.rows, s_w.rows
        )));
    }
    let n = s_b.rows;
    let shift = if ridge > 0.0 { ridge_shift(s_w, ridge) } else { 0.0 };
    let l = cholesky(&s_w.add_diagonal(shift)?).ok_or(Error::Singular { ridge })?;

    // Y = L⁻¹ S_B column by column, kept transposed: row j of `yt` is column j.
    let mut yt = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = s_b[(i, j)];
        }
        forward_substitute(&l, &mut col);
        yt.row_mut(j).copy_from_slice(&col);
    }
    // C = Y L⁻ᵀ = (L⁻¹ Yᵀ)ᵀ, so row j of C is L⁻¹ applied to row j of Y.
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            col[i] = yt[(i, j)];
        }
        forward_substitute(&l, &mut col);
        c.row_mut(j).copy_from_slice(&col);
    }
    c.symmetrize();

    let eig = symmetric_eigen(&c)?;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = eig.eigenvectors.row(i).to_vec();
        backward_substitute_transposed(&l, &mut v);
        pairs.push((eig.eigenvalues[i], v));
    }
    let out = EigenDecomposition::from_pairs(pairs);
    if !out.eigenvectors.is_finite() || out.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { ridge });
    }
    Ok(out)
}
