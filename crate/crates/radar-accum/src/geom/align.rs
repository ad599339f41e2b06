use super::linalg::jacobi_eigen;
use super::{c, GeomError, Real, RigidTransform, UnitQuaternion, Vec3};

/// Least-squares rigid alignment of paired points (Kabsch): returns the
/// transform minimizing `sum_i w_i |R src_i + t - dst_i|^2`.
///
/// Requires at least 3 pairs whose source points are not collinear. The
/// rotation comes from an SVD of the weighted cross-covariance with a
/// reflection guard: when the orthogonal factor has determinant -1, the
/// smallest singular direction is flipped so the result stays a proper
/// rotation.
pub fn align_correspondences<T: Real>(
    src: &[Vec3<T>],
    dst: &[Vec3<T>],
    weights: Option<&[T]>,
) -> Result<RigidTransform<T>, GeomError> {
    if src.len() != dst.len() {
        return Err(GeomError::MismatchedCorrespondences { src: src.len(), dst: dst.len() });
    }
    if src.len() < 3 {
        return Err(GeomError::InsufficientCorrespondences { got: src.len() });
    }
    if let Some(w) = weights {
        if w.len() != src.len() {
            return Err(GeomError::InvalidWeights("length mismatch with correspondences"));
        }
        if w.iter().any(|&x| x < T::zero() || !x.is_finite()) {
            return Err(GeomError::InvalidWeights("weights must be finite and non-negative"));
        }
        if w.iter().copied().sum::<T>() <= T::zero() {
            return Err(GeomError::InvalidWeights("weights must not all be zero"));
        }
    }
    let weight = |i: usize| weights.map_or(T::one(), |w| w[i]);

    let wsum: T = (0..src.len()).map(weight).sum();
    let mut src_mean = Vec3::zero();
    let mut dst_mean = Vec3::zero();
    for i in 0..src.len() {
        src_mean += src[i] * weight(i);
        dst_mean += dst[i] * weight(i);
    }
    src_mean = src_mean / wsum;
    dst_mean = dst_mean / wsum;

    // Weighted scatter of the centered source points; its singular values
    // tell whether the rotation is observable.
    let mut scatter = [[T::zero(); 3]; 3];
    // Cross-covariance H = sum w (dst - dst_mean)(src - src_mean)^T.
    let mut h = [[T::zero(); 3]; 3];
    for i in 0..src.len() {
        let s = src[i] - src_mean;
        let d = dst[i] - dst_mean;
        let w = weight(i);
        let sa = [s.x, s.y, s.z];
        let da = [d.x, d.y, d.z];
        for r in 0..3 {
            for cc in 0..3 {
                scatter[r][cc] += w * sa[r] * sa[cc];
                h[r][cc] += w * da[r] * sa[cc];
            }
        }
    }

    let (scatter_eig, _) = jacobi_eigen(scatter);
    let sigma = |x: T| x.max(T::zero()).sqrt();
    if sigma(scatter_eig[1]) < c::<T>(1e-9) * sigma(scatter_eig[0]) {
        return Err(GeomError::DegenerateCorrespondences);
    }

    let rotation = kabsch_rotation(&h)?;
    let translation = dst_mean - rotation.rotate(src_mean);
    Ok(RigidTransform::new(rotation, translation))
}

/// Root-mean-square residual of an alignment under a candidate transform.
pub fn alignment_rms<T: Real>(
    src: &[Vec3<T>],
    dst: &[Vec3<T>],
    transform: &RigidTransform<T>,
) -> T {
    if src.is_empty() {
        return T::zero();
    }
    let sum: T = src
        .iter()
        .zip(dst)
        .map(|(&s, &d)| (transform.apply(s) - d).norm_squared())
        .sum();
    (sum / T::from(src.len()).unwrap()).sqrt()
}

/// Orthogonal Procrustes step: SVD of the cross-covariance `H = U S V^T`
/// computed through the eigendecomposition of `H^T H`, then `R = U D V^T`
/// with `D = diag(1, 1, det(U) det(V))`.
fn kabsch_rotation<T: Real>(h: &[[T; 3]; 3]) -> Result<UnitQuaternion<T>, GeomError> {
    let mut hth = [[T::zero(); 3]; 3];
    for r in 0..3 {
        for cc in 0..3 {
            hth[r][cc] = (0..3).map(|k| h[k][r] * h[k][cc]).sum();
        }
    }
    let (vals, vecs) = jacobi_eigen(hth);
    let v = [
        Vec3::new(vecs[0][0], vecs[0][1], vecs[0][2]),
        Vec3::new(vecs[1][0], vecs[1][1], vecs[1][2]),
        Vec3::new(vecs[2][0], vecs[2][1], vecs[2][2]),
    ];
    let sigma0 = vals[0].max(T::zero()).sqrt();

    let mul_h = |x: Vec3<T>| {
        Vec3::new(
            h[0][0] * x.x + h[0][1] * x.y + h[0][2] * x.z,
            h[1][0] * x.x + h[1][1] * x.y + h[1][2] * x.z,
            h[2][0] * x.x + h[2][1] * x.y + h[2][2] * x.z,
        )
    };

    let u0 = mul_h(v[0]).normalized().ok_or(GeomError::DegenerateCorrespondences)?;
    let mut u1 = mul_h(v[1]);
    u1 -= u0 * u0.dot(u1);
    // The second left-singular direction must be resolvable; otherwise the
    // destination points collapse onto a line and the rotation is ambiguous.
    if u1.norm() < c::<T>(1e-12) * sigma0.max(T::min_positive_value()) {
        return Err(GeomError::DegenerateCorrespondences);
    }
    let u1 = u1.normalized().ok_or(GeomError::DegenerateCorrespondences)?;
    // Complete a right-handed basis; works even when sigma_3 is zero
    // (planar point sets).
    let u2 = u0.cross(u1);

    let det_u = u0.dot(u1.cross(u2)); // +1 by construction
    let det_v = v[0].dot(v[1].cross(v[2]));
    let d = if det_u * det_v < T::zero() { -T::one() } else { T::one() };

    let mut r = [[T::zero(); 3]; 3];
    let us = [u0, u1, u2 * d];
    for (uk, vk) in us.iter().zip(&v) {
        let ua = [uk.x, uk.y, uk.z];
        let va = [vk.x, vk.y, vk.z];
        for row in 0..3 {
            for col in 0..3 {
                r[row][col] += ua[row] * va[col];
            }
        }
    }
    UnitQuaternion::from_rotation_matrix(&r)
}
