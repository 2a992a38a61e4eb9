//! Small dense kernels shared by the graph ops.

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
///
/// Row-saxpy form: the inner loop streams one row of `b` into one row of
/// `c`, which vectorizes well and keeps summation order fixed, so results
/// are bit-identical from run to run.
pub fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (l, &ail) in arow.iter().enumerate() {
            let brow = &b[l * n..(l + 1) * n];
            // crow += ail * brow
            for (cv, &bv) in crow.iter_mut().zip(brow.iter()) {
                *cv += ail * bv;
            }
        }
    }
}

/// `out[n x m] = a[m x n]` transposed, row-major.
pub fn transpose(m: usize, n: usize, a: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
}
