//! Small dense linear-algebra kernels used by the geometry and registration
//! code. Self-contained so the geometry stays generic over the scalar type.

use super::{c, Real};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and, for each, the matching unit
/// eigenvector as a row of the second array.
pub(crate) fn jacobi_eigen<T: Real, const N: usize>(mut a: [[T; N]; N]) -> ([T; N], [[T; N]; N]) {
    // v holds eigenvectors as columns while we rotate.
    let mut v = [[T::zero(); N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }

    let mut scale = T::zero();
    for row in &a {
        for &x in row {
            scale = scale.max(x.abs());
        }
    }
    if scale == T::zero() {
        scale = T::one();
    }
    let tol = scale * T::epsilon();

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..N {
            for q in (p + 1)..N {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..N - 1 {
            for q in (p + 1)..N {
                if a[p][q].abs() <= tol * c(1e-3) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (c::<T>(2.0) * a[p][q]);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let cos = T::one() / (T::one() + t * t).sqrt();
                let sin = t * cos;

                let app = a[p][p];
                let aqq = a[q][q];
                let apq = a[p][q];
                a[p][p] = cos * cos * app - c::<T>(2.0) * sin * cos * apq + sin * sin * aqq;
                a[q][q] = sin * sin * app + c::<T>(2.0) * sin * cos * apq + cos * cos * aqq;
                a[p][q] = T::zero();
                a[q][p] = T::zero();
                for k in 0..N {
                    if k != p && k != q {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = cos * akp - sin * akq;
                        a[p][k] = a[k][p];
                        a[k][q] = sin * akp + cos * akq;
                        a[q][k] = a[k][q];
                    }
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = cos * vp - sin * vq;
                    row[q] = sin * vp + cos * vq;
                }
            }
        }
    }

    let mut order: [usize; N] = [0; N];
    for (i, slot) in order.iter_mut().enumerate() {
        *slot = i;
    }
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));

    let mut values = [T::zero(); N];
    let mut vectors = [[T::zero(); N]; N];
    for (rank, &col) in order.iter().enumerate() {
        values[rank] = a[col][col];
        for i in 0..N {
            vectors[rank][i] = v[i][col];
        }
    }
    (values, vectors)
}

/// Solves a 3x3 system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub(crate) fn solve3<T: Real>(a: [[T; 3]; 3], b: [T; 3]) -> Option<[T; 3]> {
    let mut m = [[T::zero(); 4]; 3];
    let mut max_abs = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][j];
            max_abs = max_abs.max(a[i][j].abs());
        }
        m[i][3] = b[i];
    }
    if max_abs == T::zero() {
        return None;
    }
    let tol = max_abs * T::epsilon() * c(1e2);

    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() <= tol {
            return None;
        }
        m.swap(col, pivot_row);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
        }
    }

    let mut x = [T::zero(); 3];
    for col in (0..3).rev() {
        let mut s = m[col][3];
        for k in (col + 1)..3 {
            s = s - m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Inverse of a 3x3 matrix via the adjugate. `None` when near-singular.
pub(crate) fn inv3<T: Real>(a: [[T; 3]; 3]) -> Option<[[T; 3]; 3]> {
    let cof = [
        [
            a[1][1] * a[2][2] - a[1][2] * a[2][1],
            a[0][2] * a[2][1] - a[0][1] * a[2][2],
            a[0][1] * a[1][2] - a[0][2] * a[1][1],
        ],
        [
            a[1][2] * a[2][0] - a[1][0] * a[2][2],
            a[0][0] * a[2][2] - a[0][2] * a[2][0],
            a[0][2] * a[1][0] - a[0][0] * a[1][2],
        ],
        [
            a[1][0] * a[2][1] - a[1][1] * a[2][0],
            a[0][1] * a[2][0] - a[0][0] * a[2][1],
            a[0][0] * a[1][1] - a[0][1] * a[1][0],
        ],
    ];
    let det = a[0][0] * cof[0][0] + a[0][1] * cof[1][0] + a[0][2] * cof[2][0];
    let mut max_abs = T::zero();
    for row in &a {
        for &x in row {
            max_abs = max_abs.max(x.abs());
        }
    }
    if det.abs() <= max_abs * max_abs * max_abs * T::epsilon() * c(1e2) {
        return None;
    }
    let mut inv = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[i][j] / det;
        }
    }
    Some(inv)
}

/// Solves a symmetric positive-definite 6x6 system by Cholesky factorization.
/// Returns `None` when the matrix is not positive definite.
pub(crate) fn solve6_spd<T: Real>(a: [[T; 6]; 6], b: [T; 6]) -> Option<[T; 6]> {
    let mut l = [[T::zero(); 6]; 6];
    for i in 0..6 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = [T::zero(); 6];
    for i in 0..6 {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [T::zero(); 6];
    for i in (0..6).rev() {
        let mut s = y[i];
        for k in (i + 1)..6 {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
