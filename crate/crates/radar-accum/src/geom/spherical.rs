use super::{Real, Vec3};

/// Range / azimuth / elevation parameterization of a sensed point.
///
/// Azimuth is measured in the x-y plane from +x toward +y, in (-pi, pi];
/// elevation from the x-y plane toward +z, in [-pi/2, pi/2]. Range is
/// non-negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalDirection<T> {
    pub range: T,
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Real> SphericalDirection<T> {
    pub fn from_cartesian(v: Vec3<T>) -> Self {
        let range = v.norm();
        if range <= T::min_positive_value() {
            return SphericalDirection { range: T::zero(), azimuth: T::zero(), elevation: T::zero() };
        }
        let mut azimuth = v.y.atan2(v.x);
        // atan2 can return -pi; the canonical interval is (-pi, pi].
        if azimuth <= -T::PI() {
            azimuth = T::PI();
        }
        let elevation = (v.z / range).min(T::one()).max(-T::one()).asin();
        SphericalDirection { range, azimuth, elevation }
    }

    pub fn to_cartesian(&self) -> Vec3<T> {
        let ce = self.elevation.cos();
        Vec3::new(
            self.range * ce * self.azimuth.cos(),
            self.range * ce * self.azimuth.sin(),
            self.range * self.elevation.sin(),
        )
    }
}

/// Total angle between the sensor boresight (+x) and a direction given by
/// azimuth and elevation: `acos(cos(azimuth) * cos(elevation))`.
///
/// This is the spherical right-triangle combination of the two angles; it
/// grows monotonically in the magnitude of either input on (-pi/2, pi/2).
pub fn observation_angle<T: Real>(azimuth: T, elevation: T) -> T {
    let p = azimuth.cos() * elevation.cos();
    p.min(T::one()).max(-T::one()).acos()
}
