use super::linalg::jacobi_eigen;
use super::{c, GeomError, Real, Vec3};

/// Rotation stored as a unit quaternion.
///
/// Invariants: norm 1 within 1e-9 (renormalized on construction) and a
/// canonical sign with `w >= 0`, so equal rotations compare equal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion<T> {
    w: T,
    x: T,
    y: T,
    z: T,
}

impl<T: Real> UnitQuaternion<T> {
    pub fn identity() -> Self {
        UnitQuaternion { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    /// Builds from raw components, requiring the norm to be 1 within 1e-9.
    pub fn from_components(w: T, x: T, y: T, z: T) -> Result<Self, GeomError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - T::one()).abs() > c(1e-9) {
            return Err(GeomError::InvalidRotation("quaternion norm must be 1 within 1e-9"));
        }
        Ok(Self::normalize_unchecked(w, x, y, z))
    }

    /// Builds from raw components of any non-vanishing norm.
    pub fn new_normalize(w: T, x: T, y: T, z: T) -> Result<Self, GeomError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm <= T::min_positive_value() {
            return Err(GeomError::InvalidRotation("quaternion norm too small to normalize"));
        }
        Ok(Self::normalize_unchecked(w, x, y, z))
    }

    fn normalize_unchecked(w: T, x: T, y: T, z: T) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let q = UnitQuaternion { w: w / n, x: x / n, y: y / n, z: z / n };
        q.canonicalized()
    }

    /// Flips the sign so `w >= 0`; for `w == 0` the first nonzero imaginary
    /// component is made positive, keeping the representation unique.
    fn canonicalized(self) -> Self {
        let UnitQuaternion { w, x, y, z } = self;
        let zero = T::zero();
        let flip = if w != zero {
            w < zero
        } else if x != zero {
            x < zero
        } else if y != zero {
            y < zero
        } else {
            z < zero
        };
        if flip {
            UnitQuaternion { w: -w, x: -x, y: -y, z: -z }
        } else {
            self
        }
    }

    pub fn from_rotation_z(angle: T) -> Self {
        let half = angle / c(2.0);
        Self::normalize_unchecked(half.cos(), T::zero(), T::zero(), half.sin())
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Result<Self, GeomError> {
        let axis = axis
            .normalized()
            .ok_or(GeomError::InvalidRotation("rotation axis with near-zero norm"))?;
        let half = angle / c(2.0);
        let s = half.sin();
        Ok(Self::normalize_unchecked(half.cos(), axis.x * s, axis.y * s, axis.z * s))
    }

    /// Exponential map: the rotation vector's norm is the angle in radians.
    pub fn from_scaled_axis(v: Vec3<T>) -> Self {
        let angle = v.norm();
        let half = angle / c(2.0);
        // sin(angle/2)/angle, with the Taylor limit for tiny angles.
        let k = if angle > c(1e-8) {
            half.sin() / angle
        } else {
            c::<T>(0.5) - angle * angle / c(48.0)
        };
        Self::normalize_unchecked(half.cos(), v.x * k, v.y * k, v.z * k)
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }

    pub fn z(&self) -> T {
        self.z
    }

    pub fn wxyz(&self) -> (T, T, T, T) {
        (self.w, self.x, self.y, self.z)
    }

    pub fn dot(&self, other: &Self) -> T {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        UnitQuaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }.canonicalized()
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> T {
        let vec_norm = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        // atan2 form is accurate for both tiny and near-pi angles.
        c::<T>(2.0) * vec_norm.atan2(self.w.abs())
    }

    /// Logarithm map, inverse of [`Self::from_scaled_axis`]. The canonical
    /// sign convention keeps the returned angle (the vector norm) in [0, pi].
    pub fn scaled_axis(&self) -> Vec3<T> {
        let im = Vec3::new(self.x, self.y, self.z);
        let n = im.norm();
        if n == T::zero() {
            return im;
        }
        im * (c::<T>(2.0) * n.atan2(self.w) / n)
    }

    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let im = Vec3::new(self.x, self.y, self.z);
        let t = im.cross(v) * c(2.0);
        v + t * self.w + im.cross(t)
    }

    pub fn to_rotation_matrix(&self) -> [[T; 3]; 3] {
        let (w, x, y, z) = self.wxyz();
        let two = c::<T>(2.0);
        [
            [
                T::one() - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                T::one() - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                T::one() - two * (x * x + y * y),
            ],
        ]
    }

    /// Converts a proper rotation matrix; the caller vouches for
    /// orthonormality (use `RigidTransform::from_matrix4` for validated input).
    pub fn from_rotation_matrix(m: &[[T; 3]; 3]) -> Result<Self, GeomError> {
        // Shepperd's method: branch on the largest diagonal combination.
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if trace > T::zero() {
            let s = (trace + T::one()).sqrt() * c(2.0);
            w = s / c(4.0);
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (T::one() + m[0][0] - m[1][1] - m[2][2]).sqrt() * c(2.0);
            w = (m[2][1] - m[1][2]) / s;
            x = s / c(4.0);
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = (T::one() + m[1][1] - m[0][0] - m[2][2]).sqrt() * c(2.0);
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = s / c(4.0);
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (T::one() + m[2][2] - m[0][0] - m[1][1]).sqrt() * c(2.0);
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = s / c(4.0);
        }
        Self::new_normalize(w, x, y, z)
    }
}

impl<T: Real> std::ops::Mul for UnitQuaternion<T> {
    type Output = Self;

    /// Composition: `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, o: Self) -> Self {
        Self::normalize_unchecked(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Weighted average of rotations: the dominant eigenvector of the 4x4
/// accumulation matrix `M = sum_i w_i q_i q_i^T`.
///
/// Weights default to uniform; they must be non-negative and not all zero.
/// The result is invariant to the sign of each input quaternion because `M`
/// only sees outer products.
pub fn average_quaternions<T: Real>(
    rotations: &[UnitQuaternion<T>],
    weights: Option<&[T]>,
) -> Result<UnitQuaternion<T>, GeomError> {
    if rotations.is_empty() {
        return Err(GeomError::NoRotations);
    }
    if let Some(w) = weights {
        if w.len() != rotations.len() {
            return Err(GeomError::InvalidWeights("length mismatch with rotations"));
        }
        if w.iter().any(|&x| x < T::zero() || !x.is_finite()) {
            return Err(GeomError::InvalidWeights("weights must be finite and non-negative"));
        }
        if w.iter().copied().sum::<T>() <= T::zero() {
            return Err(GeomError::InvalidWeights("weights must not all be zero"));
        }
    }

    let mut m = [[T::zero(); 4]; 4];
    for (i, q) in rotations.iter().enumerate() {
        let w = weights.map_or(T::one(), |ws| ws[i]);
        let comps = [q.w, q.x, q.y, q.z];
        for r in 0..4 {
            for cc in 0..4 {
                m[r][cc] += w * comps[r] * comps[cc];
            }
        }
    }

    let (_, vectors) = jacobi_eigen(m);
    let top = vectors[0];
    UnitQuaternion::new_normalize(top[0], top[1], top[2], top[3])
}
