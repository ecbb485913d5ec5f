//! Structured complex linear algebra for the ZF and MMSE receivers.
//!
//! Everything here works on tall `M x n` matrices with `n` small (the number
//! of interfering users). Projections and covariance inverses are applied
//! through `n x n` Gram systems, so memory stays `O(M n)` and the cost of one
//! application is `O(M n + n³)`.
//!
//! Long reductions use Neumaier-compensated summation over fixed-size chunks.
//! Chunks may be processed in parallel but their boundaries and the order in
//! which partial sums are combined never depend on the thread count, so the
//! results are bitwise reproducible.

use num_complex::Complex;
use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Elements per reduction chunk.
const CHUNK: usize = 4096;

/// Hermitian tolerance for [`hermitian_solve`] inputs, relative to the largest
/// entry.
const HERMITIAN_TOL: f64 = 1e-10;

/// Condition limit `1 / (1e3 ε)` above which a Hermitian solve is refused.
pub fn default_condition_limit<T: Real>() -> f64 {
    1.0 / (1e3 * T::epsilon().as_f64())
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Neumaier<T> {
    #[inline]
    fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> T {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ComplexAcc<T> {
    re: Neumaier<T>,
    im: Neumaier<T>,
}

impl<T: Real> ComplexAcc<T> {
    #[inline]
    fn add(&mut self, z: Complex<T>) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn value(&self) -> Complex<T> {
        Complex::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of a real sequence, in iteration order.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// `aᴴ b` with a deterministic chunked compensated reduction.
pub fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let partials: Vec<Complex<T>> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| {
            let mut acc = ComplexAcc::default();
            for (x, y) in ca.iter().zip(cb) {
                acc.add(x.conj() * y);
            }
            acc.value()
        })
        .collect();
    let mut acc = ComplexAcc::default();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

/// `‖a‖²` with the same reduction scheme as [`dot`].
pub fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    let partials: Vec<T> = a
        .par_chunks(CHUNK)
        .map(|c| compensated_sum(c.iter().map(|z| z.norm_sqr())))
        .collect();
    compensated_sum(partials)
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Column-major data of length `rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::DegenerateChannel("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stack equal-length columns. An empty list yields a `0 x 0` matrix.
    pub fn from_columns<C: AsRef<[Complex<T>]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!("column of length {} among length {rows}", c.len())));
            }
            data.extend_from_slice(c);
        }
        Self::from_col_major(rows, columns.len(), data)
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[Complex<T>] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex<T>]> {
        (0..self.cols).map(move |j| self.column(j))
    }

    /// Copy of this matrix without column `skip`.
    pub fn without_column(&self, skip: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * self.cols.saturating_sub(1));
        for j in (0..self.cols).filter(|&j| j != skip) {
            data.extend_from_slice(self.column(j));
        }
        Self { rows: self.rows, cols: self.cols - 1, data }
    }

    /// Principal submatrix with row and column `skip` removed.
    pub fn without_row_col(&self, skip: usize) -> Self {
        let keep: Vec<usize> = (0..self.rows).filter(|&i| i != skip).collect();
        let mut out = Self::zeros(keep.len(), self.cols - 1);
        for (jj, j) in (0..self.cols).filter(|&j| j != skip).enumerate() {
            for (ii, &i) in keep.iter().enumerate() {
                out[(ii, jj)] = self[(i, j)];
            }
        }
        out
    }

    /// `Aᴴ x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.rows, "adjoint_mul_vec: length mismatch");
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// `A y`, accumulated column by column.
    pub fn mul_vec(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(y.len(), self.cols, "mul_vec: length mismatch");
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows];
        self.axpy_into(&mut out, y, Complex::new(T::one(), T::zero()));
        out
    }

    /// `out += scale * A y`.
    fn axpy_into(&self, out: &mut [Complex<T>], y: &[Complex<T>], scale: Complex<T>) {
        for (j, &yj) in y.iter().enumerate() {
            let s = yj * scale;
            let col = self.column(j);
            out.par_iter_mut().zip(col.par_iter()).for_each(|(o, c)| *o += c * s);
        }
    }

    fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[j * self.rows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[j * self.rows + i]
    }
}

/// `AᴴA`, filled from the upper triangle so the result is exactly Hermitian.
pub fn gram<T: Real>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = a.cols;
    let mut g = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j {
                Complex::new(norm_sqr(a.column(i)), T::zero())
            } else {
                dot(a.column(i), a.column(j))
            };
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Cholesky factor of a diagonally equilibrated Hermitian positive definite
/// matrix: `H = S L Lᴴ S` with `S = diag(h_ii)^{-1/2}`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    /// Lower factor, row-major.
    l: Vec<Complex<T>>,
    scale: Vec<T>,
    condition: f64,
}

impl<T: Real> Cholesky<T> {
    /// Factor `h`, refusing matrices whose condition estimate exceeds `limit`.
    ///
    /// The estimate is `(max l_ii / min l_ii)²` of the equilibrated factor,
    /// which is a lower bound on the true 2-norm condition number.
    pub fn factor(h: &ComplexMatrix<T>, limit: f64) -> Result<Self> {
        let n = h.rows;
        if h.cols != n {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", h.rows, h.cols)));
        }
        let mut scale = Vec::with_capacity(n);
        for i in 0..n {
            let d = h[(i, i)].re;
            if !(d > T::zero() && d.is_finite()) {
                return Err(Error::NearSingular { condition: f64::INFINITY });
            }
            scale.push(T::one() / d.sqrt());
        }
        let mut l = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            let mut diag = h[(j, j)].re * scale[j] * scale[j];
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if !(diag > T::zero()) {
                return Err(Error::NearSingular { condition: f64::INFINITY });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = Complex::new(ljj, T::zero());
            for i in j + 1..n {
                let mut s = h[(i, j)] * scale[i] * scale[j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let v = l[i * n + i].re.as_f64();
            (lo.min(v), hi.max(v))
        });
        let condition = if n == 0 { 1.0 } else { (hi / lo).powi(2) };
        if condition > limit {
            return Err(Error::NearSingular { condition });
        }
        Ok(Self { n, l, scale, condition })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Solve `H x = b` for one right-hand side.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_vec(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n;
        assert_eq!(b.len(), n, "solve_vec: length mismatch");
        let mut y: Vec<Complex<T>> = b.iter().zip(&self.scale).map(|(v, &s)| v * s).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i].conj() * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        y.iter_mut().zip(&self.scale).for_each(|(v, &s)| *v *= s);
        y
    }
}

/// Solve `H X = B` for Hermitian positive definite `H`.
pub fn hermitian_solve<T: Real>(h: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if h.rows != h.cols || b.rows != h.rows {
        return Err(Error::DimensionMismatch(format!(
            "solve of {}x{} against {}x{}",
            h.rows, h.cols, b.rows, b.cols
        )));
    }
    let tol = T::lit(HERMITIAN_TOL) * h.max_abs();
    for j in 0..h.cols {
        for i in 0..=j {
            if (h[(i, j)] - h[(j, i)].conj()).norm() > tol {
                return Err(Error::DimensionMismatch(format!("matrix is not Hermitian at ({i}, {j})")));
            }
        }
    }
    let chol = Cholesky::factor(h, default_condition_limit::<T>())?;
    let mut data = Vec::with_capacity(b.data.len());
    for c in b.columns() {
        data.extend(chol.solve_vec(c));
    }
    Ok(ComplexMatrix { rows: b.rows, cols: b.cols, data })
}

/// Projector onto the orthogonal complement of the column span of `Ā`,
/// `I - Ā (ĀᴴĀ)⁻¹ Āᴴ`, applied without forming it.
#[derive(Debug, Clone)]
pub struct OrthogonalProjector<'a, T> {
    abar: &'a ComplexMatrix<T>,
    chol: Cholesky<T>,
}

impl<'a, T: Real> OrthogonalProjector<'a, T> {
    pub fn new(abar: &'a ComplexMatrix<T>) -> Result<Self> {
        Self::with_gram(abar, &gram(abar), default_condition_limit::<T>())
    }

    /// Reuse a precomputed `ĀᴴĀ`. Rank deficiency beyond `limit` is reported
    /// as [`Error::CollinearInterferers`].
    pub fn with_gram(abar: &'a ComplexMatrix<T>, gram: &ComplexMatrix<T>, limit: f64) -> Result<Self> {
        if gram.rows != abar.cols {
            return Err(Error::DimensionMismatch("Gram size does not match column count".into()));
        }
        let chol = Cholesky::factor(gram, limit).map_err(|e| match e {
            Error::NearSingular { condition } => Error::CollinearInterferers { condition },
            other => other,
        })?;
        Ok(Self { abar, chol })
    }

    /// `(I - P) x` given the precomputed `Āᴴ x`. Also returns the
    /// coefficients `(ĀᴴĀ)⁻¹ Āᴴ x`.
    pub fn apply_with_adjoint(&self, x: &[Complex<T>], adj: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let coeffs = self.chol.solve_vec(adj);
        let mut out = x.to_vec();
        self.abar.axpy_into(&mut out, &coeffs, Complex::new(-T::one(), T::zero()));
        (out, coeffs)
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let adj = self.abar.adjoint_mul_vec(x);
        self.apply_with_adjoint(x, &adj).0
    }
}

/// `x - Ā (ĀᴴĀ)⁻¹ Āᴴ x`.
pub fn project_orthogonal<T: Real>(abar: &ComplexMatrix<T>, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if x.len() != abar.rows && abar.cols > 0 {
        return Err(Error::DimensionMismatch(format!("vector of length {} against {} rows", x.len(), abar.rows)));
    }
    if abar.cols == 0 {
        return Ok(x.to_vec());
    }
    Ok(OrthogonalProjector::new(abar)?.apply(x))
}

/// Inverse of the interference-plus-noise covariance
/// `C = I + Σ p_i a_i a_iᴴ = I + Ā D Āᴴ`, applied through the Woodbury
/// identity `C⁻¹ = I - Ā (D⁻¹ + ĀᴴĀ)⁻¹ Āᴴ`.
#[derive(Debug, Clone)]
pub struct Whitener<'a, T> {
    abar: &'a ComplexMatrix<T>,
    chol: Cholesky<T>,
}

impl<'a, T: Real> Whitener<'a, T> {
    pub fn new(abar: &'a ComplexMatrix<T>, weights: &[T]) -> Result<Self> {
        Self::with_gram(abar, weights, gram(abar))
    }

    pub fn with_gram(abar: &'a ComplexMatrix<T>, weights: &[T], mut gram: ComplexMatrix<T>) -> Result<Self> {
        if weights.len() != abar.cols || gram.rows != abar.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} interferers",
                weights.len(),
                abar.cols
            )));
        }
        for (i, &p) in weights.iter().enumerate() {
            if !(p > T::zero() && p.is_finite()) {
                return Err(Error::InvalidScenario(format!("interferer weight {p} must be positive")));
            }
            gram[(i, i)] += Complex::new(T::one() / p, T::zero());
        }
        // D⁻¹ + ĀᴴĀ is positive definite for positive weights
        let chol = Cholesky::factor(&gram, f64::INFINITY)?;
        Ok(Self { abar, chol })
    }

    /// `C⁻¹ x` given `Āᴴ x`, plus the coefficients `(D⁻¹ + ĀᴴĀ)⁻¹ Āᴴ x`.
    pub fn apply_with_adjoint(&self, x: &[Complex<T>], adj: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let coeffs = self.chol.solve_vec(adj);
        let mut out = x.to_vec();
        self.abar.axpy_into(&mut out, &coeffs, Complex::new(-T::one(), T::zero()));
        (out, coeffs)
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let adj = self.abar.adjoint_mul_vec(x);
        self.apply_with_adjoint(x, &adj).0
    }
}

/// `C⁻¹ x` for `C = I + Σ p_i a_i a_iᴴ` over the columns of `abar`.
pub fn whitened_apply<T: Real>(abar: &ComplexMatrix<T>, weights: &[T], x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if abar.cols == 0 {
        if !weights.is_empty() {
            return Err(Error::DimensionMismatch("weights given without interferers".into()));
        }
        return Ok(x.to_vec());
    }
    if x.len() != abar.rows {
        return Err(Error::DimensionMismatch(format!("vector of length {} against {} rows", x.len(), abar.rows)));
    }
    Ok(Whitener::new(abar, weights)?.apply(x))
}

/// `C x = x + Σ p_i a_i (a_iᴴ x)`, matrix-free.
pub fn covariance_apply<T: Real>(abar: &ComplexMatrix<T>, weights: &[T], x: &[Complex<T>]) -> Vec<Complex<T>> {
    let coeffs: Vec<Complex<T>> = abar
        .adjoint_mul_vec(x)
        .into_iter()
        .zip(weights)
        .map(|(c, &p)| c * p)
        .collect();
    let mut out = x.to_vec();
    abar.axpy_into(&mut out, &coeffs, Complex::new(T::one(), T::zero()));
    out
}
