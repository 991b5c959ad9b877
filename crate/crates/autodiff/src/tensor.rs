use crate::{AdError, Result};

/// Row-major dense matrix. Vectors are stored as `n x 1` columns and scalars
/// as `1 x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(AdError::BadData {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// `a (m x k) * b (k x n)` into a fresh `m x n` buffer.
pub(crate) fn matmul_into(a: &Tensor, b: &Tensor, out: &mut [f64]) {
    let (m, k) = a.shape();
    let n = b.cols;
    if n == 1 {
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = dot(&a.data[i * k..(i + 1) * k], &b.data);
        }
        return;
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    gemm_acc(m, k, n, &a.data, &b.data, out);
}

const MR: usize = 8;
const NR: usize = 8;

/// `out (m x n) += a (m x k) * b (k x n)`, all row-major. Full `4 x 8`
/// output tiles are accumulated in registers; ragged edges fall back to
/// row-wise axpy.
pub(crate) fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let m_full = m - m % MR;
    let n_full = n - n % NR;
    for i0 in (0..m_full).step_by(MR) {
        let rows: [&[f64]; MR] = std::array::from_fn(|r| &a[(i0 + r) * k..(i0 + r + 1) * k]);
        for j0 in (0..n_full).step_by(NR) {
            let mut acc = [[0.0f64; NR]; MR];
            for p in 0..k {
                let bp: &[f64; NR] = b[p * n + j0..p * n + j0 + NR].try_into().unwrap();
                for r in 0..MR {
                    let ar = rows[r][p];
                    for c in 0..NR {
                        acc[r][c] += ar * bp[c];
                    }
                }
            }
            for (r, acc_r) in acc.iter().enumerate() {
                let o = &mut out[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
                for c in 0..NR {
                    o[c] += acc_r[c];
                }
            }
        }
        if n_full < n {
            for r in 0..MR {
                edge_row(k, n, n_full, rows[r], b, &mut out[(i0 + r) * n..(i0 + r + 1) * n]);
            }
        }
    }
    for i in m_full..m {
        edge_row(k, n, 0, &a[i * k..(i + 1) * k], b, &mut out[i * n..(i + 1) * n]);
    }
}

fn edge_row(k: usize, n: usize, j0: usize, a_row: &[f64], b: &[f64], out_row: &mut [f64]) {
    for p in 0..k {
        let s = a_row[p];
        if s != 0.0 {
            axpy(s, &b[p * n + j0..(p + 1) * n], &mut out_row[j0..]);
        }
    }
}

/// Row-major transpose of an `m x n` buffer.
pub(crate) fn transpose(m: usize, n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// Dot product with eight independent accumulators so the reduction
/// vectorizes without reassociating a single chain.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let xa = &a[c * 8..c * 8 + 8];
        let xb = &b[c * 8..c * 8 + 8];
        for j in 0..8 {
            acc[j] += xa[j] * xb[j];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor::from_vec(2, 3, vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(0, 3, vec![]).is_err());
        assert_eq!(Tensor::from_vec(2, 3, vec![0.0; 6]).unwrap().shape(), (2, 3));
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn matmul_general_shape() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let mut out = vec![0.0; 4];
        matmul_into(&a, &b, &mut out);
        assert_eq!(out, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn blocked_kernel_matches_naive() {
        for &(m, k, n) in &[(4, 3, 8), (9, 5, 19), (13, 17, 2), (1, 1, 9), (8, 4, 16)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.31).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.17).cos()).collect();
            let mut out = vec![1.0; m * n];
            gemm_acc(m, k, n, &a, &b, &mut out);
            for i in 0..m {
                for j in 0..n {
                    let naive: f64 = 1.0 + (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum::<f64>();
                    assert!((out[i * n + j] - naive).abs() < 1e-12, "{m}x{k}x{n} at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn transpose_round_trip() {
        let a: Vec<f64> = (0..12).map(f64::from).collect();
        let t = transpose(3, 4, &a);
        assert_eq!(t[1], 4.0);
        assert_eq!(transpose(4, 3, &t), a);
    }
}
