//! Strided matrix views over `matrixmultiply::dgemm`.

#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> Mat<'a> {
    /// Row-major `rows x cols`.
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Mat<'a> {
        assert_eq!(data.len(), rows * cols, "matrix buffer size");
        Mat { data, rows, cols, rs: cols, cs: 1 }
    }

    pub fn t(self) -> Mat<'a> {
        Mat { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }
}

/// `c = alpha * a * b + beta * c` with `c` row-major. `c` is not read when
/// `beta == 0`.
pub(crate) fn gemm(alpha: f64, a: Mat<'_>, b: Mat<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "output buffer size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else {
            c.iter_mut().for_each(|x| *x *= beta);
        }
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches:
    // a spans (m-1)*rs + (k-1)*cs < len by construction of `Mat`, same for b,
    // and c is exactly m*n row-major.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product_with_transposes() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|i| (i * i) as f64 * 0.1).collect(); // 3x4
        let mut c = vec![1.0; 8];
        gemm(2.0, Mat::new(&a, 2, 3), Mat::new(&b, 3, 4), 0.5, &mut c);
        for i in 0..2 {
            for j in 0..4 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum();
                assert!((c[i * 4 + j] - (2.0 * s + 0.5)).abs() < 1e-12);
            }
        }
        // (b^T a^T) = (a b)^T
        let mut ct = vec![0.0; 8];
        gemm(1.0, Mat::new(&b, 3, 4).t(), Mat::new(&a, 2, 3).t(), 0.0, &mut ct);
        for i in 0..2 {
            for j in 0..4 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum();
                assert!((ct[j * 2 + i] - s).abs() < 1e-12);
            }
        }
    }
}
