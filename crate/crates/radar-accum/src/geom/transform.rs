use super::{c, GeomError, Real, UnitQuaternion, Vec3};

/// Row-major homogeneous 4x4 matrix, used at file-format boundaries.
pub type Matrix4<T> = [[T; 4]; 4];

/// Rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: UnitQuaternion<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn new(rotation: UnitQuaternion<T>, translation: Vec3<T>) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn identity() -> Self {
        RigidTransform { rotation: UnitQuaternion::identity(), translation: Vec3::zero() }
    }

    pub fn from_translation(translation: Vec3<T>) -> Self {
        RigidTransform { rotation: UnitQuaternion::identity(), translation }
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    /// Composition: `compose(a, b).apply(p) == a.apply(b.apply(p))`.
    pub fn compose(&self, other: &Self) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(other.translation) + self.translation,
        }
    }

    pub fn invert(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        RigidTransform { rotation: inv_rot, translation: -inv_rot.rotate(self.translation) }
    }

    pub fn to_matrix4(&self) -> Matrix4<T> {
        let r = self.rotation.to_rotation_matrix();
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [T::zero(), T::zero(), T::zero(), T::one()],
        ]
    }

    /// Validates and converts a homogeneous matrix: the 3x3 block must be
    /// orthonormal with determinant +1 within 1e-9 and the last row
    /// (0, 0, 0, 1).
    pub fn from_matrix4(m: &Matrix4<T>) -> Result<Self, GeomError> {
        let tol = c::<T>(1e-9);
        for (j, &expect) in [T::zero(), T::zero(), T::zero(), T::one()].iter().enumerate() {
            if (m[3][j] - expect).abs() > tol {
                return Err(GeomError::NotRigid(format!(
                    "bottom row entry {j} is {}, expected {expect}",
                    m[3][j]
                )));
            }
        }
        let r = [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let dot: T = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { T::one() } else { T::zero() };
                if (dot - expect).abs() > tol {
                    return Err(GeomError::NotRigid(format!(
                        "rotation block is not orthonormal (column {i} . column {j} = {dot})"
                    )));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - T::one()).abs() > tol {
            return Err(GeomError::NotRigid(format!(
                "rotation block determinant is {det}, expected +1"
            )));
        }
        Ok(RigidTransform {
            rotation: UnitQuaternion::from_rotation_matrix(&r)?,
            translation: Vec3::new(m[0][3], m[1][3], m[2][3]),
        })
    }

    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        let (w, x, y, z) = self.rotation.wxyz();
        let conv = |v: T| U::from(v).expect("transform component convertible");
        RigidTransform {
            rotation: UnitQuaternion::new_normalize(conv(w), conv(x), conv(y), conv(z))
                .expect("unit quaternion stays unit under cast"),
            translation: self.translation.cast(),
        }
    }
}

impl<T: Real> std::ops::Mul for RigidTransform<T> {
    type Output = Self;
    fn mul(self, other: Self) -> Self {
        self.compose(&other)
    }
}

/// Flattens a matrix to 16 row-major values.
pub fn mat4_flatten<T: Real>(m: &Matrix4<T>) -> [T; 16] {
    let mut out = [T::zero(); 16];
    for (i, row) in m.iter().enumerate() {
        out[i * 4..i * 4 + 4].copy_from_slice(row);
    }
    out
}

/// Rebuilds a matrix from 16 row-major values.
pub fn mat4_from_flat<T: Real>(v: &[T; 16]) -> Matrix4<T> {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row.copy_from_slice(&v[i * 4..i * 4 + 4]);
    }
    m
}
