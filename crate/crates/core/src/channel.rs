//! PNUSW and UPW array response vectors, channel powers and correlation.
//!
//! Response vectors are flattened with `m_z` as the outer index and `m_y` as
//! the inner one; see [`ArrayGeometry::offsets`].

use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, ArrayGeometry, UserLocation};
use crate::numerics;
use crate::{Error, Real, Result};

/// Fractional distance from an integer below which a Dirichlet kernel is
/// replaced by its limit.
const DIRICHLET_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Pnusw,
    Upw,
}

impl ChannelModel {
    pub const ALL: [ChannelModel; 2] = [ChannelModel::Pnusw, ChannelModel::Upw];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelModel::Pnusw => "pnusw",
            ChannelModel::Upw => "upw",
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of the plane-wave model: `beta0` is the channel power at the
/// reference distance of 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpwConfig<T> {
    beta0: T,
}

impl<T: Real> UpwConfig<T> {
    pub fn new(beta0: T) -> Result<Self> {
        if !(beta0 > T::zero() && beta0.is_finite()) {
            return Err(Error::InvalidScenario(format!("beta0 must be positive, got {beta0}")));
        }
        Ok(Self { beta0 })
    }

    /// `β₀ = A / (4π · 1 m²)`: the power one element collects at 1 m on
    /// boresight, so both models agree on the centre element of a broadside
    /// user.
    pub fn matched(geom: &ArrayGeometry<T>) -> Self {
        Self { beta0: geom.element_area() / (T::lit(4.0) * T::PI()) }
    }

    pub fn beta0(&self) -> T {
        self.beta0
    }
}

/// Channel vector of one user across all array elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector<T> {
    entries: Vec<Complex<T>>,
    model: ChannelModel,
    geom_digest: u64,
}

impl<T: Real> ResponseVector<T> {
    /// Wrap externally computed entries for `geom`.
    pub fn from_entries(entries: Vec<Complex<T>>, model: ChannelModel, geom: &ArrayGeometry<T>) -> Result<Self> {
        if entries.len() != geom.num_elements() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}-element array",
                entries.len(),
                geom.num_elements()
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::DegenerateChannel("non-finite response entry".into()));
        }
        Ok(Self { entries, model, geom_digest: geom.digest() })
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn geom_digest(&self) -> u64 {
        self.geom_digest
    }
}

impl<T> AsRef<[Complex<T>]> for ResponseVector<T> {
    fn as_ref(&self) -> &[Complex<T>] {
        &self.entries
    }
}

/// Normalised squared distance and PNUSW gain of one element.
#[inline]
fn pnusw_element<T: Real>(xi: T, eps: T, loc: &UserLocation<T>, m_y: T, m_z: T) -> Result<(T, T)> {
    let rad = geometry::normalized_radicand(eps, loc.cos_y(), loc.cos_z(), m_y, m_z);
    if !(rad > T::zero()) {
        return Err(geometry::degenerate_radicand(m_y, m_z));
    }
    let gain = xi * eps * eps * loc.cos_x() / (T::lit(4.0) * T::PI() * rad * rad.sqrt());
    Ok((rad, gain))
}

/// Power gain between the user and element `(m_y, m_z)` under the PNUSW
/// model, in the normalised closed form.
pub fn pnusw_gain<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>, m_y: T, m_z: T) -> Result<T> {
    geometry::element_position(geom, m_y, m_z)?;
    pnusw_element(geom.occupation_ratio(), loc.epsilon(geom.spacing()), loc, m_y, m_z).map(|(_, g)| g)
}

/// The same gain from its geometric definition: free-space spreading over
/// `4π‖q - w‖²` times the projected aperture `A (q - w)·x̂ / ‖q - w‖`.
pub fn pnusw_gain_geometric<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>, m_y: T, m_z: T) -> Result<T> {
    let w = geometry::element_position(geom, m_y, m_z)?;
    let diff = geometry::user_position(loc).sub(&w);
    let dist = diff.norm();
    if dist == T::zero() {
        return Err(geometry::degenerate_radicand(m_y, m_z));
    }
    Ok(geom.element_area() * diff.x / (T::lit(4.0) * T::PI() * dist * dist * dist))
}

/// `e^{-j 2π s}` for a phase given in cycles, reduced to `[0, 1)` first.
#[inline]
fn unit_phasor<T: Real>(cycles: T) -> Complex<T> {
    let frac = cycles - cycles.floor();
    let angle = -T::TAU() * frac;
    Complex::new(angle.cos(), angle.sin())
}

/// PNUSW array response: `√g · e^{-j 2π r_m / λ}` per element.
///
/// A user in the array plane (`Ψ = 0`) yields an all-zero vector; consumers
/// report it as a degenerate channel.
pub fn pnusw_response<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>) -> Result<ResponseVector<T>> {
    geometry::warn_if_close(geom, loc);
    let xi = geom.occupation_ratio();
    let eps = loc.epsilon(geom.spacing());
    let r_over_lambda = loc.r() / geom.wavelength();
    let entries = (0..geom.num_elements())
        .into_par_iter()
        .map(|idx| {
            let (m_y, m_z) = geom.offsets_at(idx);
            let (rad, gain) = pnusw_element(xi, eps, loc, m_y, m_z)?;
            Ok(unit_phasor(r_over_lambda * rad.sqrt()) * gain.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResponseVector { entries, model: ChannelModel::Pnusw, geom_digest: geom.digest() })
}

/// UPW array response: common amplitude `√β₀ / r`, spherical phase at the
/// array centre and a linear phase progression across elements.
pub fn upw_response<T: Real>(geom: &ArrayGeometry<T>, loc: &UserLocation<T>, cfg: &UpwConfig<T>) -> ResponseVector<T> {
    let amp = cfg.beta0.sqrt() / loc.r();
    let d_bar = geom.normalized_spacing();
    let (cy, cz) = (loc.cos_y(), loc.cos_z());
    // fold the sign of the progression into the cycle count: e^{+j2πx} = e^{-j2π(-x)}
    let centre = loc.r() / geom.wavelength();
    let entries = (0..geom.num_elements())
        .into_par_iter()
        .map(|idx| {
            let (m_y, m_z) = geom.offsets_at(idx);
            let progression = d_bar * (m_y * cy + m_z * cz);
            unit_phasor(centre) * unit_phasor(-progression) * amp
        })
        .collect();
    ResponseVector { entries, model: ChannelModel::Upw, geom_digest: geom.digest() }
}

/// Response under either model.
pub fn response<T: Real>(
    model: ChannelModel,
    geom: &ArrayGeometry<T>,
    loc: &UserLocation<T>,
    upw: &UpwConfig<T>,
) -> Result<ResponseVector<T>> {
    match model {
        ChannelModel::Pnusw => pnusw_response(geom, loc),
        ChannelModel::Upw => Ok(upw_response(geom, loc, upw)),
    }
}

/// `‖a‖²`.
pub fn channel_power<T: Real>(a: &ResponseVector<T>) -> T {
    numerics::norm_sqr(&a.entries)
}

/// Correlation coefficient `ρ = |a_kᴴ a_i|² / (‖a_k‖² ‖a_i‖²)`.
pub fn correlation<T: Real>(a_k: &ResponseVector<T>, a_i: &ResponseVector<T>) -> Result<T> {
    if a_k.geom_digest != a_i.geom_digest || a_k.len() != a_i.len() {
        return Err(Error::DimensionMismatch("response vectors belong to different arrays".into()));
    }
    correlation_of(&a_k.entries, &a_i.entries)
}

pub(crate) fn correlation_of<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Result<T> {
    let pa = numerics::norm_sqr(a);
    let pb = numerics::norm_sqr(b);
    if !(pa > T::zero() && pb > T::zero()) {
        return Err(Error::DegenerateChannel("correlation of a zero-power channel".into()));
    }
    let rho = numerics::dot(a, b).norm_sqr() / (pa * pb);
    Ok(rho.min(T::one()))
}

/// `(sin(π n x) / sin(π x))²` with the removable singularity at integer `x`
/// replaced by its limit `n²`.
pub fn dirichlet_kernel_sq<T: Real>(n: usize, x: T) -> T {
    let nf = T::from_index(n);
    // sin(πn(k+δ))/sin(π(k+δ)) = ±sin(πnδ)/sin(πδ), so only δ matters
    let delta = x - x.round();
    if delta.abs() <= T::lit(DIRICHLET_SINGULAR_TOL) {
        return nf * nf;
    }
    let ratio = (T::PI() * nf * delta).sin() / (T::PI() * delta).sin();
    ratio * ratio
}

/// UPW correlation from the product of two Dirichlet kernels.
pub fn upw_correlation_closed<T: Real>(geom: &ArrayGeometry<T>, loc_k: &UserLocation<T>, loc_i: &UserLocation<T>) -> T {
    let d_bar = geom.normalized_spacing();
    let dy = d_bar * (loc_k.cos_y() - loc_i.cos_y());
    let dz = d_bar * (loc_k.cos_z() - loc_i.cos_z());
    let m = T::from_index(geom.num_elements());
    let rho = dirichlet_kernel_sq(geom.my(), dy) * dirichlet_kernel_sq(geom.mz(), dz) / (m * m);
    rho.min(T::one())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::geometry::{cartesian_to_spherical, Vector3, DEFAULT_WAVELENGTH};

    fn default_geom(my: usize, mz: usize) -> ArrayGeometry<f64> {
        ArrayGeometry::half_wavelength(my, mz, DEFAULT_WAVELENGTH).unwrap()
    }

    fn loc(r: f64, th: f64, ph: f64) -> UserLocation<f64> {
        UserLocation::new(r, th, ph).unwrap()
    }

    fn upw() -> UpwConfig<f64> {
        UpwConfig::matched(&default_geom(1, 1))
    }

    #[test]
    fn boresight_centre_gain() {
        let g = default_geom(5, 5);
        let l = loc(25.0, FRAC_PI_2, 0.0);
        let gain = pnusw_gain(&g, &l, 0.0, 0.0).unwrap();
        assert_relative_eq!(gain, g.element_area() / (4.0 * PI * 625.0), max_relative = 1e-14);
    }

    #[test]
    fn in_plane_user_has_zero_gain() {
        let g = default_geom(5, 5);
        let l = loc(25.0, FRAC_PI_2, FRAC_PI_2);
        assert_eq!(pnusw_gain(&g, &l, 1.0, 2.0).unwrap(), 0.0);
        let a = pnusw_response(&g, &l).unwrap();
        assert_eq!(channel_power(&a), 0.0);
        assert!(matches!(correlation(&a, &a), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn off_centre_gain_matches_geometric_form() {
        let lambda = 0.1257;
        let g = ArrayGeometry::new(201, 1, lambda / 2.0, lambda * lambda / (4.0 * PI), lambda).unwrap();
        let l = loc(25.0, FRAC_PI_2, 0.0);
        let closed = pnusw_gain(&g, &l, 100.0, 0.0).unwrap();
        // direct evaluation: q - w = (25, -100 d, 0)
        let d = lambda / 2.0;
        let dist2: f64 = 25.0 * 25.0 + (100.0 * d) * (100.0 * d);
        let direct = g.element_area() * 25.0 / (4.0 * PI * dist2 * dist2.sqrt());
        assert_relative_eq!(closed, direct, max_relative = 1e-12);
        assert_relative_eq!(closed, pnusw_gain_geometric(&g, &l, 100.0, 0.0).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn single_element_response() {
        let g = default_geom(1, 1);
        let r = 25.0;
        let a = pnusw_response(&g, &loc(r, FRAC_PI_2, 0.0)).unwrap();
        let amp = (g.element_area() / (4.0 * PI * r * r)).sqrt();
        let phase = -2.0 * PI * r / g.wavelength();
        let expected = Complex::from_polar(amp, phase);
        assert!((a.entries()[0] - expected).norm() < 1e-12 * amp);
        assert_relative_eq!(channel_power(&a), amp * amp, max_relative = 1e-14);
    }

    #[test]
    fn response_entries_follow_gain_and_distance() {
        let g = default_geom(7, 5);
        let l = loc(12.0, 1.1, -0.4);
        let a = pnusw_response(&g, &l).unwrap();
        for (idx, (m_y, m_z)) in g.offsets().enumerate() {
            let z = a.entries()[idx];
            let gain = pnusw_gain(&g, &l, m_y, m_z).unwrap();
            assert_relative_eq!(z.norm_sqr(), gain, max_relative = 1e-12);
            let dist = geometry::element_distance(&g, &l, m_y, m_z).unwrap();
            let expected = Complex::from_polar(1.0, -2.0 * PI * dist / g.wavelength());
            assert!((z / z.norm() - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn power_matches_double_loop_sum() {
        let g = default_geom(10, 10);
        let l = loc(25.0, FRAC_PI_2, 0.0);
        let a = pnusw_response(&g, &l).unwrap();
        let mut brute = 0.0;
        for iz in 0..10 {
            for iy in 0..10 {
                brute += pnusw_gain_geometric(&g, &l, g.offset_y(iy), g.offset_z(iz)).unwrap();
            }
        }
        assert_relative_eq!(channel_power(&a), brute, max_relative = 1e-12);
    }

    #[test]
    fn large_array_power_bounded_and_growing() {
        let l = loc(50.0, FRAC_PI_2, 0.0);
        let small = channel_power(&pnusw_response(&default_geom(101, 101), &l).unwrap());
        let large = channel_power(&pnusw_response(&default_geom(201, 201), &l).unwrap());
        assert!(large > small);
        assert!(large < default_geom(1, 1).occupation_ratio() / 2.0);
    }

    #[test]
    fn upw_examples() {
        let g = default_geom(5, 3);
        let cfg = upw();
        let r = 40.0;
        let a = upw_response(&g, &loc(r, FRAC_PI_2, 0.0), &cfg);
        let first = a.entries()[0];
        let expected = Complex::from_polar(cfg.beta0().sqrt() / r, -2.0 * PI * r / g.wavelength());
        assert!((first - expected).norm() < 1e-12 * expected.norm());
        assert!(a.entries().iter().all(|z| (z - first).norm() < 1e-15));

        let b = upw_response(&g, &loc(r, 0.7, 0.3), &cfg);
        assert_relative_eq!(channel_power(&b), 15.0 * cfg.beta0() / (r * r), max_relative = 1e-13);
    }

    #[test]
    fn upw_linear_phase_progression() {
        // Φ = 1 at θ = π/2, φ = π/2 with d̄ = 1/2: offsets -1, 0, 1 advance by -π, 0, π
        let g = default_geom(3, 1);
        let a = upw_response(&g, &loc(10.0, FRAC_PI_2, FRAC_PI_2), &upw());
        let centre = a.entries()[1];
        for (idx, expected) in [(0, -PI), (2, PI)] {
            let rel = a.entries()[idx] / centre;
            assert!((rel - Complex::from_polar(1.0, expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        let g = default_geom(2, 1);
        let e1 = ResponseVector::from_entries(vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)], ChannelModel::Pnusw, &g).unwrap();
        let e2 = ResponseVector::from_entries(vec![Complex::new(0.0, 0.0), Complex::new(0.0, 3.0)], ChannelModel::Pnusw, &g).unwrap();
        assert_eq!(correlation(&e1, &e2).unwrap(), 0.0);

        let a = pnusw_response(&default_geom(9, 9), &loc(20.0, 1.0, 0.5)).unwrap();
        let scaled: Vec<_> = a.entries().iter().map(|z| z * Complex::new(-0.3, 2.0)).collect();
        let b = ResponseVector::from_entries(scaled, ChannelModel::Pnusw, &default_geom(9, 9)).unwrap();
        assert_relative_eq!(correlation(&a, &b).unwrap(), 1.0, max_relative = 1e-12);

        let other = pnusw_response(&default_geom(9, 7), &loc(20.0, 1.0, 0.5)).unwrap();
        assert!(matches!(correlation(&a, &other), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn same_direction_correlation_drops_with_array_size() {
        let (u1, u2) = (loc(25.0, FRAC_PI_2, 0.0), loc(250.0, FRAC_PI_2, 0.0));
        let rho = |mz| {
            let g = default_geom(10, mz);
            correlation(&pnusw_response(&g, &u1).unwrap(), &pnusw_response(&g, &u2).unwrap()).unwrap()
        };
        assert!(rho(1001) < rho(11));
    }

    #[test]
    fn dirichlet_kernel_limits_and_nulls() {
        assert_eq!(dirichlet_kernel_sq(7, 0.0), 49.0);
        assert_eq!(dirichlet_kernel_sq(7, 2.0), 49.0);
        assert!(dirichlet_kernel_sq(8, 1.0 / 8.0) < 1e-28);
        // near-singular: continuous through the substitution
        assert_relative_eq!(dirichlet_kernel_sq(7, 1.0 + 1e-9), 49.0, max_relative = 1e-12);
    }

    #[test]
    fn upw_closed_form_examples() {
        let g = default_geom(9, 9);
        let a = loc(30.0, 1.2, 0.2);
        let b = loc(90.0, 1.2, 0.2);
        assert_relative_eq!(upw_correlation_closed(&g, &a, &b), 1.0);

        // ΔΦ = 2 / M_y with ΔΩ = 0 lands on the first null
        let my = 9;
        let p1 = cartesian_to_spherical(&Vector3::new((1.0f64 - 0.25).sqrt(), 0.5, 0.0)).unwrap();
        let phi2 = 0.5 - 2.0 / my as f64;
        let p2 = cartesian_to_spherical(&Vector3::new((1.0 - phi2 * phi2).sqrt(), phi2, 0.0)).unwrap();
        assert!(upw_correlation_closed(&g, &p1, &p2) < 1e-28);
    }

    #[test]
    fn upw_closed_form_matches_direct_sum_small_array() {
        let g = default_geom(7, 7);
        let cfg = upw();
        for (k, i) in [((0.3, 0.2), (1.4, -0.8)), ((FRAC_PI_4, FRAC_PI_3), (FRAC_PI_2, 0.0)), ((2.5, 1.0), (0.1, -1.5))] {
            let lk = loc(10.0, k.0, k.1);
            let li = loc(70.0, i.0, i.1);
            let direct = correlation(&upw_response(&g, &lk, &cfg), &upw_response(&g, &li, &cfg)).unwrap();
            assert!((upw_correlation_closed(&g, &lk, &li) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn single_precision_response() {
        let g = ArrayGeometry::<f32>::half_wavelength(9, 9, 0.1256).unwrap();
        let l = UserLocation::<f32>::new(20.0, 1.3, 0.2).unwrap();
        let a = pnusw_response(&g, &l).unwrap();
        let rho = correlation(&a, &a).unwrap();
        assert!((rho - 1.0).abs() < 1e-5);
    }

    fn arb_dir() -> impl Strategy<Value = (f64, f64)> {
        (0.0f64..PI, -FRAC_PI_2..FRAC_PI_2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gain_forms_agree(
            (my, mz) in (1usize..61, 1usize..61),
            r in 2.0f64..300.0,
            (th, ph) in arb_dir(),
            (fy, fz) in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let g = default_geom(my, mz);
            let l = loc(r.max(g.length_y().hypot(g.length_z())), th, ph);
            let iy = ((my - 1) as f64 * fy).round() as usize;
            let iz = ((mz - 1) as f64 * fz).round() as usize;
            let (m_y, m_z) = (g.offset_y(iy), g.offset_z(iz));
            let a = pnusw_gain(&g, &l, m_y, m_z).unwrap();
            let b = pnusw_gain_geometric(&g, &l, m_y, m_z).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a.abs() < 1e-22 && b.abs() < 1e-22));
        }

        #[test]
        fn correlation_in_unit_interval_and_phase_invariant(
            (my, mz) in (1usize..16, 1usize..16),
            (r1, r2) in (1.0f64..200.0, 1.0f64..200.0),
            (d1, d2) in (arb_dir(), arb_dir()),
            rot in 0.0f64..std::f64::consts::TAU,
            upw_model: bool,
        ) {
            let g = default_geom(my, mz);
            let (l1, l2) = (loc(r1 + 2.0, d1.0, d1.1), loc(r2 + 2.0, d2.0, d2.1));
            prop_assume!(l1.cos_x() > 1e-3 && l2.cos_x() > 1e-3);
            let model = if upw_model { ChannelModel::Upw } else { ChannelModel::Pnusw };
            let a = response(model, &g, &l1, &upw()).unwrap();
            let b = response(model, &g, &l2, &upw()).unwrap();
            let rho = correlation(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&rho));
            prop_assert!((correlation(&a, &a).unwrap() - 1.0).abs() < 1e-9);

            let u = Complex::from_polar(1.0, rot);
            let rotate = |v: &ResponseVector<f64>| {
                ResponseVector::from_entries(v.entries().iter().map(|z| z * u).collect(), model, &g).unwrap()
            };
            prop_assert!((correlation(&rotate(&a), &rotate(&b)).unwrap() - rho).abs() < 1e-12);
        }
    }
}
