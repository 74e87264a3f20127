use std::fmt;

/// Dense row-major 64-bit matrix. Scalars are `1 x 1`, column vectors `n x 1`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{}) ", self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match {rows}x{cols}");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn scalar(v: f64) -> Self {
        Matrix::from_vec(1, 1, vec![v])
    }

    pub fn column(values: Vec<f64>) -> Self {
        let n = values.len();
        Matrix::from_vec(n, 1, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// The single value of a `1 x 1` matrix.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "item() on non-scalar");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(idx.len(), self.cols, out)
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions");
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, self, false, other, false, 0.0, &mut out);
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`, where `op` optionally transposes.
pub(crate) fn gemm(
    alpha: f64,
    a: &Matrix,
    trans_a: bool,
    b: &Matrix,
    trans_b: bool,
    beta: f64,
    c: &mut Matrix,
) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "gemm inner dimensions");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c.data {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: the strides above describe `a`, `b` and `c` exactly and all
    // dimensions were checked against the buffers' shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
