//! Thin wrappers over the system LAPACK (OpenBLAS) routines used by the
//! assembly and solver code: SVD, symmetric eigendecomposition and Cholesky.
//!
//! ndarray stores row-major while LAPACK expects column-major, so inputs are
//! copied into transposed buffers on the way in and out.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum LinalgError {
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("matrix is not positive definite (Cholesky leading minor {0})")]
    NotPositiveDefinite(i32),
}

extern "C" {
    fn dgesdd_(
        jobz: *const u8,
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        s: *mut f64,
        u: *mut f64,
        ldu: *const i32,
        vt: *mut f64,
        ldvt: *const i32,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        info: *mut i32,
    );
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dpotrf_(uplo: *const u8, n: *const i32, a: *mut f64, lda: *const i32, info: *mut i32);
    fn dpotrs_(
        uplo: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
}

/// Row-major (m, n) array -> column-major buffer with leading dimension m.
fn to_col_major(a: &Array2<f64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut buf = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            buf[j * m + i] = a[[i, j]];
        }
    }
    buf
}

/// Column-major buffer with leading dimension ld -> row-major (m, n) array.
fn from_col_major(buf: &[f64], m: usize, n: usize, ld: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |(i, j)| buf[j * ld + i])
}

pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub vt: Array2<f64>,
}

/// Singular value decomposition. With `full_matrices` the complete U and Vᵀ
/// are returned (needed for null-space extraction), otherwise the thin form.
pub fn svd(a: &Array2<f64>, full_matrices: bool) -> Result<Svd, LinalgError> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut af = to_col_major(a);
    let (jobz, ucols, vtrows) = if full_matrices {
        (b'A', m, n)
    } else {
        (b'S', k, k)
    };
    let mut s = vec![0.0; k];
    let mut u = vec![0.0; m * ucols];
    let mut vt = vec![0.0; vtrows * n];
    let (mi, ni) = (m as i32, n as i32);
    let (ldu, ldvt) = (m as i32, vtrows.max(1) as i32);
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0i32;
    // workspace query
    let mut work_query = [0.0f64];
    let lwork_query = -1i32;
    unsafe {
        dgesdd_(
            &jobz, &mi, &ni, af.as_mut_ptr(), &mi, s.as_mut_ptr(), u.as_mut_ptr(), &ldu,
            vt.as_mut_ptr(), &ldvt, work_query.as_mut_ptr(), &lwork_query, iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dgesdd", info });
    }
    let lwork = work_query[0] as i32;
    let mut work = vec![0.0; lwork as usize];
    unsafe {
        dgesdd_(
            &jobz, &mi, &ni, af.as_mut_ptr(), &mi, s.as_mut_ptr(), u.as_mut_ptr(), &ldu,
            vt.as_mut_ptr(), &ldvt, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dgesdd", info });
    }
    Ok(Svd {
        u: from_col_major(&u, m, ucols, m),
        s: Array1::from_vec(s),
        vt: from_col_major(&vt, vtrows, n, vtrows),
    })
}

/// Eigendecomposition of a symmetric matrix; eigenvalues ascending,
/// eigenvectors as columns.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut af = to_col_major(a);
    let mut w = vec![0.0; n];
    let ni = n as i32;
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    let m1 = -1i32;
    unsafe {
        dsyevd_(
            &b'V', &b'L', &ni, af.as_mut_ptr(), &ni, w.as_mut_ptr(), work_query.as_mut_ptr(),
            &m1, iwork_query.as_mut_ptr(), &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd", info });
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &b'V', &b'L', &ni, af.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd", info });
    }
    Ok((Array1::from_vec(w), from_col_major(&af, n, n, n)))
}

/// Cholesky factorization of a symmetric positive definite matrix.
pub struct Cholesky {
    factor: Vec<f64>, // column-major lower factor
    n: usize,
}

impl Cholesky {
    pub fn new(a: &Array2<f64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut af = to_col_major(a);
        let ni = n as i32;
        let mut info = 0i32;
        unsafe { dpotrf_(&b'L', &ni, af.as_mut_ptr(), &ni, &mut info) };
        if info > 0 {
            return Err(LinalgError::NotPositiveDefinite(info));
        }
        if info < 0 {
            return Err(LinalgError::Lapack { routine: "dpotrf", info });
        }
        Ok(Self { factor: af, n })
    }

    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        assert_eq!(b.len(), self.n);
        let mut buf = b.to_vec();
        self.solve_in_place(&mut buf, 1);
        Array1::from_vec(buf)
    }

    /// Solve against each column of a row-major (n, k) right-hand side.
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let (n, k) = b.dim();
        assert_eq!(n, self.n);
        let mut buf = to_col_major(b);
        self.solve_in_place(&mut buf, k);
        from_col_major(&buf, n, k, n)
    }

    /// Multiply by the lower factor: L·w (used to color Gaussian draws).
    pub fn lower_apply(&self, w: &Array1<f64>) -> Array1<f64> {
        assert_eq!(w.len(), self.n);
        let n = self.n;
        let mut out = Array1::zeros(n);
        for j in 0..n {
            let wj = w[j];
            for i in j..n {
                out[i] += self.factor[j * n + i] * wj;
            }
        }
        out
    }

    fn solve_in_place(&self, b: &mut [f64], nrhs: usize) {
        let ni = self.n as i32;
        let nrhsi = nrhs as i32;
        let mut info = 0i32;
        unsafe {
            dpotrs_(
                &b'L', &ni, &nrhsi, self.factor.as_ptr(), &ni, b.as_mut_ptr(), &ni, &mut info,
            );
        }
        debug_assert_eq!(info, 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn svd_reconstructs() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let d = svd(&a, false).unwrap();
        let rec = d.u.dot(&Array2::from_diag(&d.s)).dot(&d.vt);
        for (x, y) in a.iter().zip(rec.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn svd_full_gives_null_space() {
        // rank-1 matrix, 2 x 3: null space has dimension 2
        let a = array![[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]];
        let d = svd(&a, true).unwrap();
        assert_eq!(d.vt.dim(), (3, 3));
        for i in 1..3 {
            let v = d.vt.row(i);
            let hv = a.dot(&v);
            assert!(hv.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn eigh_matches_hand_example() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (w, v) = eigh(&a).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 3.0, epsilon = 1e-12);
        let av = a.dot(&v.column(1).to_owned());
        for (x, y) in av.iter().zip(v.column(1).iter()) {
            assert_abs_diff_eq!(*x, 3.0 * y, epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve_vec(&array![1.0, 2.0]);
        let b = a.dot(&x);
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            Cholesky::new(&a),
            Err(LinalgError::NotPositiveDefinite(_))
        ));
    }
}
