//! UPA element layout, user coordinates and element-user distances.
//!
//! The array lies on the y-z plane centred at the origin with its normal along
//! +x. Element `(m_y, m_z)` sits at `(0, m_y d, m_z d)`, where the signed
//! offsets run symmetrically around zero: integers for odd element counts and
//! half-integers for even counts.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Free-space wavelength of the default carrier, meters.
pub const DEFAULT_WAVELENGTH: f64 = 0.1256;

/// Element offsets must land within this distance of a grid point.
const GRID_TOLERANCE: f64 = 1e-9;

/// Ratio `d / r` above which the far-from-array assumption is questionable.
pub const EPSILON_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<T> {
    my: usize,
    mz: usize,
    spacing: T,
    element_area: T,
    wavelength: T,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(my: usize, mz: usize, spacing: T, element_area: T, wavelength: T) -> Result<Self> {
        if my == 0 || mz == 0 {
            return Err(Error::InvalidGeometry(format!(
                "element counts must be positive, got {my}x{mz}"
            )));
        }
        for (name, v) in [("spacing", spacing), ("element area", element_area), ("wavelength", wavelength)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidGeometry(format!("{name} must be positive and finite, got {v}")));
            }
        }
        // d >= sqrt(A), compared on the squared quantities with a few ulps of slack
        if element_area > spacing * spacing * (T::one() + T::lit(8.0) * T::epsilon()) {
            return Err(Error::InvalidGeometry(format!(
                "elements overlap: spacing {spacing} < sqrt(area {element_area})"
            )));
        }
        Ok(Self { my, mz, spacing, element_area, wavelength })
    }

    /// Half-wavelength spacing with isotropic-equivalent element area `λ²/4π`.
    pub fn half_wavelength(my: usize, mz: usize, wavelength: T) -> Result<Self> {
        let spacing = wavelength / T::lit(2.0);
        let area = wavelength * wavelength / (T::lit(4.0) * T::PI());
        Self::new(my, mz, spacing, area, wavelength)
    }

    /// Same element parameters with a different element count.
    pub fn resized(&self, my: usize, mz: usize) -> Result<Self> {
        Self::new(my, mz, self.spacing, self.element_area, self.wavelength)
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn mz(&self) -> usize {
        self.mz
    }

    pub fn num_elements(&self) -> usize {
        self.my * self.mz
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn element_area(&self) -> T {
        self.element_area
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// Array occupation ratio `ξ = A / d²`.
    pub fn occupation_ratio(&self) -> T {
        self.element_area / (self.spacing * self.spacing)
    }

    /// Spacing in wavelengths, `d / λ`.
    pub fn normalized_spacing(&self) -> T {
        self.spacing / self.wavelength
    }

    pub fn length_y(&self) -> T {
        T::from_index(self.my) * self.spacing
    }

    pub fn length_z(&self) -> T {
        T::from_index(self.mz) * self.spacing
    }

    /// Signed y offset of zero-based column `iy`.
    #[inline]
    pub fn offset_y(&self, iy: usize) -> T {
        centered_offset(iy, self.my)
    }

    /// Signed z offset of zero-based row `iz`.
    #[inline]
    pub fn offset_z(&self, iz: usize) -> T {
        centered_offset(iz, self.mz)
    }

    /// Signed `(m_y, m_z)` offsets of every element in flattened order:
    /// `m_z` outer, `m_y` inner. Element `(iy, iz)` lands at `iz * my + iy`.
    pub fn offsets(&self) -> impl Iterator<Item = (T, T)> + '_ {
        (0..self.mz).flat_map(move |iz| (0..self.my).map(move |iy| (self.offset_y(iy), self.offset_z(iz))))
    }

    /// Offsets of the element at flattened position `idx`.
    #[inline]
    pub fn offsets_at(&self, idx: usize) -> (T, T) {
        (self.offset_y(idx % self.my), self.offset_z(idx / self.my))
    }

    fn check_offsets(&self, m_y: T, m_z: T) -> Result<()> {
        if on_grid(m_y, self.my) && on_grid(m_z, self.mz) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { m_y: m_y.as_f64(), m_z: m_z.as_f64(), my: self.my, mz: self.mz })
        }
    }

    /// Stable fingerprint of the geometry, used to tie response vectors to
    /// the array they were built for.
    pub fn digest(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.my.hash(&mut h);
        self.mz.hash(&mut h);
        for v in [self.spacing, self.element_area, self.wavelength] {
            v.as_f64().to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[inline]
fn centered_offset<T: Real>(i: usize, count: usize) -> T {
    T::from_index(i) - T::from_index(count - 1) / T::lit(2.0)
}

fn on_grid<T: Real>(m: T, count: usize) -> bool {
    let shifted = m.as_f64() + (count as f64 - 1.0) / 2.0;
    let nearest = shifted.round();
    (shifted - nearest).abs() <= GRID_TOLERANCE && nearest >= 0.0 && nearest <= (count - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vector3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// User position in spherical coordinates about the array centre.
///
/// `theta` is the zenith angle measured from +z, `phi` the azimuth measured
/// from +x towards +y. Only the front half-space (`x >= 0`) is reachable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLocation<T> {
    r: T,
    theta: T,
    phi: T,
}

impl<T: Real> UserLocation<T> {
    pub fn new(r: T, theta: T, phi: T) -> Result<Self> {
        if !(r.is_finite() && r > T::zero()) {
            return Err(Error::InvalidLocation(format!("distance must be positive, got {r}")));
        }
        if !(theta >= T::zero() && theta <= T::PI()) {
            return Err(Error::InvalidLocation(format!("zenith angle {theta} outside [0, pi]")));
        }
        if !(phi >= -T::FRAC_PI_2() && phi <= T::FRAC_PI_2()) {
            return Err(Error::InvalidLocation(format!("azimuth angle {phi} outside [-pi/2, pi/2]")));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// `Ψ = sinθ cosφ`, the cosine against the array normal. Exactly zero
    /// for users in the array plane.
    pub fn cos_x(&self) -> T {
        if self.theta == T::zero() || self.theta == T::PI() || self.phi.abs() == T::FRAC_PI_2() {
            return T::zero();
        }
        self.theta.sin() * self.phi.cos()
    }

    /// `Φ = sinθ sinφ`.
    pub fn cos_y(&self) -> T {
        if self.theta == T::zero() || self.theta == T::PI() {
            return T::zero();
        }
        self.theta.sin() * self.phi.sin()
    }

    /// `Ω = cosθ`, exactly zero on the horizontal plane.
    pub fn cos_z(&self) -> T {
        if self.theta == T::FRAC_PI_2() {
            return T::zero();
        }
        self.theta.cos()
    }

    /// `ε = d / r` for the given element spacing.
    pub fn epsilon(&self, spacing: T) -> T {
        spacing / self.r
    }

    /// Same direction, different range.
    pub fn with_distance(&self, r: T) -> Result<Self> {
        Self::new(r, self.theta, self.phi)
    }
}

/// Centre of element `(m_y, m_z)`.
pub fn element_position<T: Real>(geom: &ArrayGeometry<T>, m_y: T, m_z: T) -> Result<Vector3<T>> {
    geom.check_offsets(m_y, m_z)?;
    Ok(Vector3::new(T::zero(), m_y * geom.spacing, m_z * geom.spacing))
}

pub fn user_position<T: Real>(loc: &UserLocation<T>) -> Vector3<T> {
    Vector3::new(loc.r * loc.cos_x(), loc.r * loc.cos_y(), loc.r * loc.cos_z())
}

/// Inverse of [`user_position`]. A point on the z-axis gets `φ = 0`.
pub fn cartesian_to_spherical<T: Real>(p: &Vector3<T>) -> Result<UserLocation<T>> {
    if !p.is_finite() {
        return Err(Error::InvalidLocation(format!("non-finite point {p:?}")));
    }
    let r = p.norm();
    if r == T::zero() {
        return Err(Error::DegenerateGeometry("point coincides with the array centre".into()));
    }
    if p.x < T::zero() {
        return Err(Error::OutsideFrontHalfSpace { x: p.x.as_f64() });
    }
    let rho = p.x.hypot(p.y);
    let theta = rho.atan2(p.z);
    let phi = if rho == T::zero() { T::zero() } else { p.y.atan2(p.x) };
    UserLocation::new(r, theta, phi)
}

/// Bracketed term `1 - 2 m_y ε Φ - 2 m_z ε Ω + (m_y² + m_z²) ε²`, i.e. the
/// squared element distance normalised by `r²`.
#[inline]
pub(crate) fn normalized_radicand<T: Real>(eps: T, cos_y: T, cos_z: T, m_y: T, m_z: T) -> T {
    let two = T::lit(2.0);
    let ay = m_y * eps;
    let az = m_z * eps;
    T::one() - two * ay * cos_y - two * az * cos_z + ay * ay + az * az
}

/// Distance from the user to the centre of element `(m_y, m_z)`, evaluated in
/// the normalised closed form.
pub fn element_distance<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>, m_y: T, m_z: T) -> Result<T> {
    geom.check_offsets(m_y, m_z)?;
    let eps = loc.epsilon(geom.spacing);
    let rad = normalized_radicand(eps, loc.cos_y(), loc.cos_z(), m_y, m_z);
    if !(rad > T::zero()) {
        return Err(degenerate_radicand(m_y, m_z));
    }
    Ok(loc.r * rad.sqrt())
}

/// `‖w - q‖` computed directly from the Cartesian positions.
pub fn euclidean_element_distance<T: Real>(
    geom: &ArrayGeometry<T>,
    loc: &UserLocation<T>,
    m_y: T,
    m_z: T,
) -> Result<T> {
    let w = element_position(geom, m_y, m_z)?;
    Ok(w.sub(&user_position(loc)).norm())
}

pub(crate) fn degenerate_radicand<T: Real>(m_y: T, m_z: T) -> Error {
    Error::DegenerateGeometry(format!("user coincides with element ({m_y}, {m_z})"))
}

/// Warn when the user is close enough to the array that `ε` is no longer small.
pub(crate) fn warn_if_close<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>) {
    let eps = loc.epsilon(geom.spacing).as_f64();
    if eps >= EPSILON_WARN {
        log::warn!("user at r = {} m gives d/r = {eps:.3} >= {EPSILON_WARN}", loc.r);
    }
}
