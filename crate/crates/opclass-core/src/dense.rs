//! Dense complex matrices and the small-scale numerics behind the
//! truncation lab: a cyclic Jacobi eigensolver for Hermitian matrices,
//! singular values via the Gram route, and a sampling oracle that brackets
//! extremal singular values without touching the eigensolver path.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_real_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(
            rows.into_iter()
                .map(|row| row.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).conj())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch("matrix add".into()));
        }
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(m)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut m = self.clone();
        for a in m.data.iter_mut() {
            *a *= factor;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Top-left embedding of `self` into an `rows x cols` zero matrix.
    pub fn embed(&self, rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..self.rows.min(rows) {
            for j in 0..self.cols.min(cols) {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    /// Leading principal `n x n` submatrix.
    pub fn principal(&self, n: usize) -> Self {
        Self::from_fn(n.min(self.rows), n.min(self.cols), |i, j| self.get(i, j))
    }

    /// Column selection: keeps `cols` in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from conjugate symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    /// Exactly symmetrize: `(M + M*)/2`. Used after verifying the defect is
    /// within tolerance so downstream code can rely on exact symmetry.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = (m.get(i, j) + adj.get(i, j)) * Complex64::new(0.5, 0.0);
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.norm_sqr() == 0.0)
    }

    /// True when off-diagonal entries vanish exactly.
    pub fn is_diagonal(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j && self.get(i, j).norm_sqr() != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i).re).collect()
    }

    /// Rank by Gaussian elimination with full pivoting and an exact
    /// (non-tolerance) pivot test. Intended for matrices whose entries are
    /// exact input data, e.g. Hankel corners of polynomial symbols.
    pub fn rank_exact(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        let mut row = 0;
        let mut excluded_cols = vec![false; m.cols];
        while row < m.rows {
            // full pivot over remaining block
            let mut best = (0usize, 0usize, 0.0f64);
            for i in row..m.rows {
                for j in 0..m.cols {
                    if excluded_cols[j] {
                        continue;
                    }
                    let a = m.get(i, j).norm();
                    if a > best.2 {
                        best = (i, j, a);
                    }
                }
            }
            if best.2 == 0.0 {
                break;
            }
            let (pi, pj, _) = best;
            // swap rows
            for j in 0..m.cols {
                let tmp = m.get(row, j);
                m.set(row, j, m.get(pi, j));
                m.set(pi, j, tmp);
            }
            let pivot = m.get(row, pj);
            for i in (row + 1)..m.rows {
                let f = m.get(i, pj) / pivot;
                if f.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..m.cols {
                    let v = m.get(i, j) - f * m.get(row, j);
                    m.set(i, j, v);
                }
                m.set(i, pj, Complex64::new(0.0, 0.0));
            }
            excluded_cols[pj] = true;
            rank += 1;
            row += 1;
        }
        rank
    }

    /// Numeric rank: singular values above `tol`.
    pub fn rank_numeric(&self, tol: f64) -> Result<usize> {
        Ok(self.singular_values()?.into_iter().filter(|s| *s > tol).count())
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
    /// matrix via cyclic Jacobi rotations. Errors if the input is not
    /// Hermitian within tolerance or the sweep cap is hit before the
    /// off-diagonal mass is annihilated.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen> {
        if !self.is_square() {
            return Err(Error::InvalidArgument("eigen of non-square matrix".into()));
        }
        if !self.is_hermitian() {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (defect {:.3e})",
                self.hermitian_defect()
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(HermitianEigen { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
        }
        let mut a = self.hermitian_part();
        let mut v = DenseMatrix::identity(n);
        let scale = a.max_abs().max(1.0);
        let tol = 1e-14 * scale;

        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < JACOBI_MAX_SWEEPS {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).norm());
                }
            }
            if off <= tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
            sweeps += 1;
        }
        if !converged {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).norm());
                }
            }
            if off > tol {
                return Err(Error::ConvergenceFailure { sweeps, offdiag: off });
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let vectors = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));

        // Residual contract: ||M v − λ v|| per pair.
        let norm = self.max_abs().max(1.0);
        for j in 0..n {
            let col: Vec<Complex64> = (0..n).map(|i| vectors.get(i, j)).collect();
            let mv = self.matvec(&col);
            let mut res = 0.0f64;
            for i in 0..n {
                res += (mv[i] - col[i] * values[j]).norm_sqr();
            }
            if res.sqrt() > EIGEN_RESIDUAL_TOL * norm {
                return Err(Error::ConvergenceFailure { sweeps, offdiag: res.sqrt() });
            }
        }
        Ok(HermitianEigen { values, vectors })
    }

    /// Singular values, nonincreasing, as square roots of the Gram
    /// eigenvalues.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let gram = self.adjoint().matmul(self)?;
        let mut vals: Vec<f64> = gram
            .hermitian_eigen()?
            .values
            .into_iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        vals.reverse();
        Ok(vals)
    }

    /// Largest singular value.
    pub fn numeric_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Smallest singular value.
    pub fn numeric_min_modulus(&self) -> Result<f64> {
        Ok(self.singular_values()?.last().copied().unwrap_or(0.0))
    }

    /// Hermitian positive-semidefinite square root (eigenvalues clipped
    /// at zero).
    pub fn psd_sqrt(&self) -> Result<DenseMatrix> {
        let eig = self.hermitian_eigen()?;
        Ok(eig.recompose(|l| l.max(0.0).sqrt()))
    }

    /// Moore–Penrose pseudo-inverse of a Hermitian PSD matrix with the given
    /// eigenvalue cutoff; also reports whether any eigenvalue fell below it.
    pub fn psd_pinv(&self, cutoff: f64) -> Result<(DenseMatrix, bool)> {
        let eig = self.hermitian_eigen()?;
        let truncated = eig.values.iter().any(|&l| l < cutoff);
        Ok((eig.recompose(|l| if l >= cutoff { 1.0 / l } else { 0.0 }), truncated))
    }
}

/// Eigendecomposition of a Hermitian matrix: `M = V diag(values) V*`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending real eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: DenseMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuild `V f(Λ) V*`.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        DenseMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &l) in self.values.iter().enumerate() {
                acc += self.vectors.get(i, k) * self.vectors.get(j, k).conj() * f(l);
            }
            acc
        })
    }
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
fn jacobi_rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    // Phase factor turning the pivot real, then a real rotation angle.
    let phase = apq / r;
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // Column update: [e_p, e_q] <- [c·e_p − s·phase*·e_q ,  s·phase·e_p + c·e_q]
    let n = a.rows();
    let cs = Complex64::new(c, 0.0);
    let sp = phase * s;
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * cs - aiq * sp.conj());
        a.set(i, q, aip * sp + aiq * cs);
    }
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * cs - aqj * sp);
        a.set(q, j, apj * sp.conj() + aqj * cs);
    }
    // Clean the pivot pair exactly.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    let app_new = a.get(p, p).re;
    let aqq_new = a.get(q, q).re;
    a.set(p, p, Complex64::new(app_new, 0.0));
    a.set(q, q, Complex64::new(aqq_new, 0.0));
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * cs - viq * sp.conj());
        v.set(i, q, vip * sp + viq * cs);
    }
}

/// Random-plus-refinement bracket of the extremal values of `‖Mx‖` over the
/// complex unit sphere. Independent of the eigensolver path: the acceptance
/// suite uses it as the oracle against `hermitian_eigen`/`singular_values`.
///
/// Returns `(max ‖Mx‖, min ‖Mx‖)` over the sampled and refined points.
pub fn brute_force_extrema(m: &DenseMatrix, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if m.cols() == 0 || m.rows() == 0 {
        return Ok((0.0, 0.0));
    }
    if m.cols() > 6 {
        return Err(Error::InvalidArgument(format!(
            "brute-force oracle is limited to 6 columns, got {}",
            m.cols()
        )));
    }
    let n = m.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm_at = |x: &[Complex64]| -> f64 {
        let y = m.matvec(x);
        y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    };
    let random_unit = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        loop {
            let x: Vec<Complex64> = (0..n)
                .map(|_| {
                    Complex64::new(rng.gen_range(-1.0..=1.0f64), rng.gen_range(-1.0..=1.0f64))
                })
                .collect();
            let nrm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 1e-3 {
                return x.iter().map(|v| v / nrm).collect();
            }
        }
    };

    let coarse = samples.max(64);
    let mut best_max = (f64::NEG_INFINITY, Vec::new());
    let mut best_min = (f64::INFINITY, Vec::new());
    for _ in 0..coarse {
        let x = random_unit(&mut rng);
        let v = norm_at(&x);
        if v > best_max.0 {
            best_max = (v, x.clone());
        }
        if v < best_min.0 {
            best_min = (v, x);
        }
    }

    // Shrinking random local search from the best coarse points.
    let mut refine = |start: Vec<Complex64>, v0: f64, maximize: bool| -> f64 {
        let mut x = start;
        let mut best = v0;
        let mut step = 0.5f64;
        while step > 1e-9 {
            let mut improved = false;
            for _ in 0..60 {
                let cand: Vec<Complex64> = x
                    .iter()
                    .map(|xi| {
                        xi + Complex64::new(
                            rng.gen_range(-step..=step),
                            rng.gen_range(-step..=step),
                        )
                    })
                    .collect();
                let nrm = cand.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if nrm <= 1e-9 {
                    continue;
                }
                let cand: Vec<Complex64> = cand.iter().map(|v| v / nrm).collect();
                let v = norm_at(&cand);
                let better = if maximize { v > best } else { v < best };
                if better {
                    best = v;
                    x = cand;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    };

    let hi = refine(best_max.1, best_max.0, true);
    let lo = refine(best_min.1, best_min.0, false);
    Ok((hi, lo))
}
