//! Dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Central-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&Vector) -> Vector, x: &Vector) -> Matrix {
    let n = x.len();
    let mut cols: Vec<Vector> = Vec::with_capacity(n);
    let mut xp = x.clone();
    for i in 0..n {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        cols.push((fp - fm) / (2.0 * h));
    }
    if cols.is_empty() {
        let m = f(x).len();
        return Matrix::zeros(m, 0);
    }
    Matrix::from_columns(&cols)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(g: impl Fn(&Vector) -> f64, x: &Vector) -> Vector {
    let mut xp = x.clone();
    Vector::from_fn(x.len(), |i, _| {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let gp = g(&xp);
        xp[i] = x[i] - h;
        let gm = g(&xp);
        xp[i] = x[i];
        (gp - gm) / (2.0 * h)
    })
}

/// Central-difference derivative of a scalar function of time.
pub fn fd_scalar_derivative(g: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = fd_step(t);
    (g(t + h) - g(t - h)) / (2.0 * h)
}

/// Central-difference derivative of a vector function of time.
pub fn fd_vector_derivative(f: impl Fn(f64) -> Vector, t: f64) -> Vector {
    let h = fd_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_finite_vec(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn is_finite_mat(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// True when the symmetric part has no eigenvalue below `-tol * max(1, |m|)`.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    sym_eigenvalues(m).iter().all(|&l| l >= -tol * scale)
}

/// Symmetric square root factor `L` with `L L^T = m` for PSD `m`.
/// Negative eigenvalues from roundoff are clamped to zero.
pub fn psd_sqrt(m: &Matrix) -> Matrix {
    let n = m.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..n {
            v[(i, j)] *= s;
        }
    }
    v
}

/// Per-column relative error `|a_j - n_j| / max(|a_j|, 1)`, maximised over columns.
pub fn max_column_rel_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    (0..analytic.ncols())
        .map(|j| {
            let a = analytic.column(j);
            let d = (a - numeric.column(j)).norm();
            d / a.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Frobenius-norm relative error `|a - b| / max(|a|, floor)`.
pub fn rel_error(reference: &Matrix, other: &Matrix, floor: f64) -> f64 {
    (reference - other).norm() / reference.norm().max(floor)
}

/// Orthonormal basis of the numerical null space of `m` as columns.
pub fn null_space(m: &Matrix, tol: f64) -> Matrix {
    let n = m.ncols();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    // Pad to square so SVD returns a full right-singular basis.
    let rows = m.nrows().max(n);
    let mut sq = Matrix::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<Vector> = (0..n)
        .filter(|&i| svd.singular_values[i] <= tol * smax)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Eigenvalues of a general square matrix sorted by descending magnitude.
/// Ties are broken by real then imaginary part so the order is deterministic.
pub fn sorted_eigenvalues(m: &Matrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<Complex64> = m
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    ev
}

/// Inverse of a symmetric positive-definite matrix, or `None` when it is
/// not numerically positive definite.
fn checked_cholesky(m: &Matrix) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let chol = symmetrize(m).cholesky()?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) || dmin * dmin < 1e-13 * dmax * dmax {
        return None;
    }
    Some(chol)
}

pub fn spd_inverse(m: &Matrix) -> Option<Matrix> {
    if m.nrows() == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    checked_cholesky(m).map(|c| c.inverse())
}

/// `m^-1 b` for symmetric positive-definite `m`, with the same
/// conditioning check as [`spd_inverse`].
pub fn spd_solve(m: &Matrix, b: &Vector) -> Option<Vector> {
    if m.nrows() == 0 {
        return Some(Vector::zeros(0));
    }
    checked_cholesky(m).map(|c| c.solve(b))
}

pub(crate) fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Serde adapter writing a matrix as a list of rows.
pub mod serde_rows {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(matrix_from_rows(&rows))
    }
}

/// Serde adapter writing a vector as a flat list.
pub mod serde_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Serde adapter for complex numbers as `[re, im]`.
pub mod serde_complex_vec {
    use num_complex::Complex64;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| [c.re, c.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fd_jacobian_of_quadratic() {
        let f = |x: &Vector| Vector::from_vec(vec![x[0] * x[1], x[1] * x[1]]);
        let x = Vector::from_vec(vec![2.0, 3.0]);
        let j = fd_jacobian(f, &x);
        assert!(close(j[(0, 0)], 3.0, 1e-8));
        assert!(close(j[(0, 1)], 2.0, 1e-8));
        assert!(close(j[(1, 0)], 0.0, 1e-8));
        assert!(close(j[(1, 1)], 6.0, 1e-8));
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted_by_magnitude() {
        let m = Matrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 1.0]);
        let ev = sorted_eigenvalues(&m);
        assert!(close(ev[0].re, -2.0, 1e-12));
        assert!(close(ev[1].re, 1.0, 1e-12));
        assert!(close(ev[2].re, 0.5, 1e-12));
    }

    #[test]
    fn spd_inverse_rejects_singular() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&m).is_none());
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = spd_inverse(&m).unwrap();
        assert!((&m * inv - Matrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_reconstructs() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_sqrt(&m);
        assert!((&l * l.transpose() - m).norm() < 1e-12);
    }
}
