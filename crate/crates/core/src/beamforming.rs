//! MRC, ZF and MMSE receive beamforming, SINR and SNR loss factors.
//!
//! Every scheme's SINR factors as `γ_k = P̄_k ‖a_k‖² (1 - α_k)`, with the
//! single-user SNR `P̄_k ‖a_k‖²` and a scheme-specific loss factor
//! `α_k ∈ [0, 1]`. [`sinr_closed`] evaluates that factorisation directly;
//! [`sinr`] evaluates the generic ratio for an arbitrary unit beamformer and
//! serves as the cross-check.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelModel, ResponseVector, UpwConfig};
use crate::geometry::{ArrayGeometry, UserLocation};
use crate::numerics::{self, ComplexMatrix, OrthogonalProjector, Whitener};
use crate::{Error, Real, Result};

/// Gram condition estimate above which interferer channels count as
/// collinear.
pub const COLLINEARITY_LIMIT: f64 = 1e12;

/// ZF is declared infeasible when less than this fraction of `‖a_k‖²`
/// survives projection away from the interferers.
pub const ZF_RESIDUAL_FLOOR: f64 = 1e-12;

/// Allowed deviation of `‖v‖` from one in [`sinr`].
const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mrc,
    Zf,
    Mmse,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Mrc, Scheme::Zf, Scheme::Mmse];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Mrc => "mrc",
            Scheme::Zf => "zf",
            Scheme::Mmse => "mmse",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Array, users and their transmit SNRs `P̄_k = P_k / σ²` (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    geom: ArrayGeometry<T>,
    users: Vec<UserLocation<T>>,
    snr: Vec<T>,
    model: ChannelModel,
    upw: UpwConfig<T>,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        geom: ArrayGeometry<T>,
        users: Vec<UserLocation<T>>,
        snr: Vec<T>,
        model: ChannelModel,
        upw: UpwConfig<T>,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidScenario("at least one user is required".into()));
        }
        if snr.len() != users.len() {
            return Err(Error::InvalidScenario(format!("{} SNR values for {} users", snr.len(), users.len())));
        }
        if let Some(p) = snr.iter().find(|p| !(**p > T::zero() && p.is_finite())) {
            return Err(Error::InvalidScenario(format!("transmit SNR must be positive, got {p}")));
        }
        Ok(Self { geom, users, snr, model, upw })
    }

    pub fn geometry(&self) -> &ArrayGeometry<T> {
        &self.geom
    }

    pub fn users(&self) -> &[UserLocation<T>] {
        &self.users
    }

    pub fn snr(&self) -> &[T] {
        &self.snr
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Channel vectors of all users as the columns of an `M x K` matrix.
    pub fn responses(&self) -> Result<ComplexMatrix<T>> {
        let cols = self
            .users
            .iter()
            .map(|u| channel::response(self.model, &self.geom, u, &self.upw).map(ResponseVector::into_entries))
            .collect::<Result<Vec<_>>>()?;
        ComplexMatrix::from_columns(&cols)
    }

    pub fn channel_set(&self) -> Result<ChannelSet<T>> {
        ChannelSet::new(self.responses()?, self.snr.clone())
    }

    /// Beamformer reports for every user under `scheme`.
    pub fn evaluate(&self, scheme: Scheme) -> Result<Vec<BeamformerReport<T>>> {
        let set = self.channel_set()?;
        (0..self.num_users()).map(|k| set.report(scheme, k)).collect()
    }
}

/// SINR and loss factor of one user under one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrOutcome<T> {
    pub sinr: T,
    pub loss_factor: T,
    /// False only for ZF when the user's channel lies in the span of the
    /// interferers; the SINR is then reported as zero.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerReport<T> {
    pub scheme: Scheme,
    pub user: usize,
    /// Unit-norm beamformer with `vᴴa_k` real and non-negative. Empty when
    /// the scheme is infeasible for this user.
    pub v: Vec<Complex<T>>,
    pub sinr: T,
    pub loss_factor: T,
    pub single_user_snr: T,
    pub feasible: bool,
}

/// Channel matrix with its Gram matrix, shared by all per-user evaluations.
#[derive(Debug, Clone)]
pub struct ChannelSet<T> {
    a: ComplexMatrix<T>,
    gram: ComplexMatrix<T>,
    snr: Vec<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(a: ComplexMatrix<T>, snr: Vec<T>) -> Result<Self> {
        check_dims(&a, &snr)?;
        let gram = numerics::gram(&a);
        for k in 0..a.cols() {
            if !(gram[(k, k)].re > T::zero()) {
                return Err(Error::DegenerateChannel(format!("user {k} has a zero-power channel")));
            }
        }
        Ok(Self { a, gram, snr })
    }

    pub fn num_users(&self) -> usize {
        self.a.cols()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.a
    }

    pub fn gram(&self) -> &ComplexMatrix<T> {
        &self.gram
    }

    pub fn channel_power(&self, k: usize) -> T {
        self.gram[(k, k)].re
    }

    pub fn single_user_snr(&self, k: usize) -> T {
        self.snr[k] * self.channel_power(k)
    }

    fn interferers(&self, k: usize) -> (ComplexMatrix<T>, ComplexMatrix<T>, Vec<Complex<T>>, Vec<T>) {
        let abar = self.a.without_column(k);
        let gbar = self.gram.without_row_col(k);
        let adj = (0..self.num_users()).filter(|&i| i != k).map(|i| self.gram[(i, k)]).collect();
        let weights = (0..self.num_users()).filter(|&i| i != k).map(|i| self.snr[i]).collect();
        (abar, gbar, adj, weights)
    }

    fn mrc_outcome(&self, k: usize) -> SinrOutcome<T> {
        let pk = self.channel_power(k);
        let interference = numerics::compensated_sum(
            (0..self.num_users()).filter(|&i| i != k).map(|i| self.snr[i] * self.gram[(i, k)].norm_sqr() / pk),
        );
        let denom = interference + T::one();
        SinrOutcome { sinr: self.single_user_snr(k) / denom, loss_factor: interference / denom, feasible: true }
    }

    /// ZF projection residual `(I - P_k) a_k` and its outcome.
    fn zf_parts(&self, k: usize) -> Result<(Vec<Complex<T>>, SinrOutcome<T>)> {
        let a_k = self.a.column(k);
        let pk = self.channel_power(k);
        if self.num_users() == 1 {
            let outcome = SinrOutcome { sinr: self.single_user_snr(k), loss_factor: T::zero(), feasible: true };
            return Ok((a_k.to_vec(), outcome));
        }
        let (abar, gbar, adj, _) = self.interferers(k);
        let proj = OrthogonalProjector::with_gram(&abar, &gbar, COLLINEARITY_LIMIT)?;
        let (residual, coeffs) = proj.apply_with_adjoint(a_k, &adj);
        let kept = numerics::norm_sqr(&residual);
        let removed = numerics::dot(&adj, &coeffs).re;
        let loss = clamp_unit(removed / pk);
        if !(kept > T::lit(ZF_RESIDUAL_FLOOR) * pk) {
            return Ok((residual, SinrOutcome { sinr: T::zero(), loss_factor: T::one(), feasible: false }));
        }
        Ok((residual, SinrOutcome { sinr: self.snr[k] * kept, loss_factor: loss, feasible: true }))
    }

    /// `C_k⁻¹ a_k` and its outcome.
    fn mmse_parts(&self, k: usize) -> Result<(Vec<Complex<T>>, SinrOutcome<T>)> {
        let a_k = self.a.column(k);
        let pk = self.channel_power(k);
        if self.num_users() == 1 {
            let outcome = SinrOutcome { sinr: self.single_user_snr(k), loss_factor: T::zero(), feasible: true };
            return Ok((a_k.to_vec(), outcome));
        }
        let (abar, gbar, adj, weights) = self.interferers(k);
        let whitener = Whitener::with_gram(&abar, &weights, gbar)?;
        let (w, coeffs) = whitener.apply_with_adjoint(a_k, &adj);
        let quad = numerics::dot(a_k, &w).re.max(T::zero());
        let loss = clamp_unit(numerics::dot(&adj, &coeffs).re / pk);
        Ok((w, SinrOutcome { sinr: self.snr[k] * quad, loss_factor: loss, feasible: true }))
    }

    pub fn sinr_closed(&self, scheme: Scheme, k: usize) -> Result<SinrOutcome<T>> {
        self.check_user(k)?;
        match scheme {
            Scheme::Mrc => Ok(self.mrc_outcome(k)),
            Scheme::Zf => self.zf_parts(k).map(|p| p.1),
            Scheme::Mmse => self.mmse_parts(k).map(|p| p.1),
        }
    }

    pub fn beamformer(&self, scheme: Scheme, k: usize) -> Result<Vec<Complex<T>>> {
        self.check_user(k)?;
        let raw = match scheme {
            Scheme::Mrc => self.a.column(k).to_vec(),
            Scheme::Zf => {
                let (residual, outcome) = self.zf_parts(k)?;
                if !outcome.feasible {
                    return Err(Error::ZeroForcingInfeasible { user: k });
                }
                residual
            }
            Scheme::Mmse => self.mmse_parts(k)?.0,
        };
        normalize_canonical(raw, self.a.column(k))
    }

    pub fn report(&self, scheme: Scheme, k: usize) -> Result<BeamformerReport<T>> {
        let outcome = self.sinr_closed(scheme, k)?;
        let v = match self.beamformer(scheme, k) {
            Ok(v) => v,
            Err(Error::ZeroForcingInfeasible { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        Ok(BeamformerReport {
            scheme,
            user: k,
            v,
            sinr: outcome.sinr,
            loss_factor: outcome.loss_factor,
            single_user_snr: self.single_user_snr(k),
            feasible: outcome.feasible,
        })
    }

    /// Closed-form SINR of every user.
    pub fn sinrs(&self, scheme: Scheme) -> Result<Vec<T>> {
        (0..self.num_users()).map(|k| self.sinr_closed(scheme, k).map(|o| o.sinr)).collect()
    }

    fn check_user(&self, k: usize) -> Result<()> {
        if k >= self.num_users() {
            return Err(Error::DimensionMismatch(format!("user {k} of {}", self.num_users())));
        }
        Ok(())
    }
}

fn check_dims<T: Real>(a: &ComplexMatrix<T>, snr: &[T]) -> Result<()> {
    if a.cols() == 0 {
        return Err(Error::InvalidScenario("no users".into()));
    }
    if snr.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!("{} SNR values for {} users", snr.len(), a.cols())));
    }
    if a.cols() > a.rows() {
        return Err(Error::InvalidScenario(format!("{} users exceed {} antennas", a.cols(), a.rows())));
    }
    if let Some(p) = snr.iter().find(|p| !(**p > T::zero() && p.is_finite())) {
        return Err(Error::InvalidScenario(format!("transmit SNR must be positive, got {p}")));
    }
    Ok(())
}

fn clamp_unit<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Scale to unit norm and rotate so that `vᴴ a` is real and non-negative.
fn normalize_canonical<T: Real>(mut v: Vec<Complex<T>>, a: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let norm = numerics::norm_sqr(&v).sqrt();
    if !(norm > T::zero() && norm.is_finite()) {
        return Err(Error::DegenerateChannel("beamformer direction has zero norm".into()));
    }
    let inner = numerics::dot(&v, a);
    let phase = if inner.norm() > T::zero() { inner / inner.norm() } else { Complex::new(T::one(), T::zero()) };
    // v ← v·phase gives (v·phase)ᴴa = conj(phase)·vᴴa = |vᴴa|
    let scale = phase / norm;
    v.iter_mut().for_each(|z| *z *= scale);
    Ok(v)
}

/// MRC beamformer `a_k / ‖a_k‖`.
pub fn mrc<T: Real>(a_k: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    normalize_canonical(a_k.to_vec(), a_k)
}

/// ZF beamformer for user `k` of the channel matrix `a` (`M x K`).
pub fn zf<T: Real>(a: &ComplexMatrix<T>, k: usize) -> Result<Vec<Complex<T>>> {
    let snr = vec![T::one(); a.cols()];
    ChannelSet::new(a.clone(), snr)?.beamformer(Scheme::Zf, k)
}

/// MMSE beamformer `C_k⁻¹ a_k / ‖C_k⁻¹ a_k‖`.
pub fn mmse<T: Real>(a: &ComplexMatrix<T>, snr: &[T], k: usize) -> Result<Vec<Complex<T>>> {
    ChannelSet::new(a.clone(), snr.to_vec())?.beamformer(Scheme::Mmse, k)
}

/// Received SINR of user `k` with unit-norm beamformer `v`:
/// `P̄_k |vᴴa_k|² / (Σ_{i≠k} P̄_i |vᴴa_i|² + 1)`.
pub fn sinr<T: Real>(v: &[Complex<T>], a: &ComplexMatrix<T>, snr: &[T], k: usize) -> Result<T> {
    check_dims(a, snr)?;
    if k >= a.cols() || v.len() != a.rows() {
        return Err(Error::DimensionMismatch("beamformer does not match the channel matrix".into()));
    }
    let norm = numerics::norm_sqr(v).sqrt();
    if (norm - T::one()).abs() > T::lit(UNIT_NORM_TOL) {
        return Err(Error::NonUnitBeamformer { norm: norm.as_f64() });
    }
    let signal = snr[k] * numerics::dot(v, a.column(k)).norm_sqr();
    let interference =
        numerics::compensated_sum((0..a.cols()).filter(|&i| i != k).map(|i| snr[i] * numerics::dot(v, a.column(i)).norm_sqr()));
    Ok(signal / (interference + T::one()))
}

/// SINR and loss factor from the scheme's closed form.
pub fn sinr_closed<T: Real>(scheme: Scheme, a: &ComplexMatrix<T>, snr: &[T], k: usize) -> Result<SinrOutcome<T>> {
    ChannelSet::new(a.clone(), snr.to_vec())?.sinr_closed(scheme, k)
}

/// Two-user SINRs of user 1 written through the correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoUserSinrs<T> {
    pub mrc: T,
    pub zf: T,
    pub mmse: T,
    pub rho: T,
}

pub fn two_user_sinrs<T: Real>(a1: &[Complex<T>], a2: &[Complex<T>], p1: T, p2: T) -> Result<TwoUserSinrs<T>> {
    if a1.len() != a2.len() {
        return Err(Error::DimensionMismatch("channels of different length".into()));
    }
    let rho = channel::correlation_of(a1, a2)?;
    two_user_sinrs_from(numerics::norm_sqr(a1), numerics::norm_sqr(a2), rho, p1, p2)
}

/// Same closed forms from channel powers and `ρ₁₂` alone.
pub fn two_user_sinrs_from<T: Real>(power1: T, power2: T, rho: T, p1: T, p2: T) -> Result<TwoUserSinrs<T>> {
    if !(rho >= T::zero() && rho <= T::one()) {
        return Err(Error::InvalidScenario(format!("correlation {rho} outside [0, 1]")));
    }
    let s1 = p1 * power1;
    let s2 = p2 * power2;
    Ok(TwoUserSinrs {
        mrc: s1 / (s2 * rho + T::one()),
        zf: s1 * (T::one() - rho),
        mmse: s1 * (T::one() - s2 * rho / (T::one() + s2)),
        rho,
    })
}

/// `Σ log₂(1 + γ_k)` in bps/Hz.
pub fn sum_rate<T: Real>(gammas: &[T]) -> T {
    numerics::compensated_sum(gammas.iter().map(|g| g.ln_1p() / T::LN_2()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::DEFAULT_WAVELENGTH;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn basis(n: usize, k: usize) -> Vec<C> {
        let mut v = vec![c(0.0, 0.0); n];
        v[k] = c(1.0, 0.0);
        v
    }

    fn mat(cols: &[Vec<C>]) -> ComplexMatrix<f64> {
        ComplexMatrix::from_columns(cols).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, k: usize) -> ComplexMatrix<f64> {
        let cols: Vec<Vec<C>> =
            (0..k).map(|_| (0..m).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).collect();
        mat(&cols)
    }

    fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<C> {
        let v: Vec<C> = (0..m).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let n = numerics::norm_sqr(&v).sqrt();
        v.into_iter().map(|z| z / n).collect()
    }

    fn close(a: &[C], b: &[C], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn mrc_examples() {
        assert!(close(&mrc(&[c(2.0, 0.0), c(0.0, 0.0)]).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)], 1e-15));
        let v = mrc(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert!(close(&v, &[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)], 1e-15));
        assert!(matches!(mrc(&[c(0.0, 0.0); 3]), Err(Error::DegenerateChannel(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 30, 1);
        let v = mrc(a.column(0)).unwrap();
        assert_relative_eq!(numerics::norm_sqr(&v), 1.0, max_relative = 1e-14);
        let inner = numerics::dot(&v, a.column(0));
        assert_relative_eq!(inner.re, numerics::norm_sqr(a.column(0)).sqrt(), max_relative = 1e-13);
        assert!(inner.im.abs() < 1e-14);
    }

    #[test]
    fn zf_examples() {
        let a = mat(&[basis(2, 0), basis(2, 1)]);
        assert!(close(&zf(&a, 0).unwrap(), &basis(2, 0), 1e-15));

        let a = mat(&[vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], basis(2, 0)]);
        assert!(close(&zf(&a, 0).unwrap(), &basis(2, 1), 1e-15));
    }

    #[test]
    fn zf_nulls_interferers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 64, 4);
        for k in 0..4 {
            let v = zf(&a, k).unwrap();
            assert_relative_eq!(numerics::norm_sqr(&v), 1.0, max_relative = 1e-12);
            for i in (0..4).filter(|&i| i != k) {
                let leak = numerics::dot(&v, a.column(i)).norm();
                assert!(leak <= 1e-10 * numerics::norm_sqr(a.column(i)).sqrt());
            }
        }
    }

    #[test]
    fn zf_infeasible_and_collinear_cases() {
        let a1 = vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)];
        let a2: Vec<C> = a1.iter().map(|z| z * c(0.0, -3.0)).collect();
        let a = mat(&[a1.clone(), a2.clone()]);
        assert!(matches!(zf(&a, 0), Err(Error::ZeroForcingInfeasible { user: 0 })));
        let out = sinr_closed(Scheme::Zf, &a, &[10.0, 10.0], 0).unwrap();
        assert!(!out.feasible);
        assert_eq!((out.sinr, out.loss_factor), (0.0, 1.0));

        let a = mat(&[basis(3, 0), a1.clone(), a2]);
        assert!(matches!(zf(&a, 0), Err(Error::CollinearInterferers { .. })));
    }

    #[test]
    fn mmse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 12, 1);
        assert!(close(&mmse(&a, &[5.0], 0).unwrap(), &mrc(a.column(0)).unwrap(), 1e-15));

        let a = mat(&[basis(2, 0), basis(2, 1)]);
        assert!(close(&mmse(&a, &[1.0, 1.0], 0).unwrap(), &basis(2, 0), 1e-15));
    }

    #[test]
    fn mmse_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 100, 5);
        let snr: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..20.0)).collect();
        let best = sinr(&mmse(&a, &snr, 2).unwrap(), &a, &snr, 2).unwrap();
        for _ in 0..1000 {
            let u = random_unit(&mut rng, 100);
            assert!(sinr(&u, &a, &snr, 2).unwrap() <= best * (1.0 + 1e-9));
        }
    }

    #[test]
    fn sinr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_matrix(&mut rng, 8, 1);
        let v = mrc(a.column(0)).unwrap();
        assert_relative_eq!(sinr(&v, &a, &[3.0], 0).unwrap(), 3.0 * numerics::norm_sqr(a.column(0)), max_relative = 1e-13);

        let a = mat(&[basis(3, 0), basis(3, 1)]);
        assert_eq!(sinr(&basis(3, 2), &a, &[1.0, 1.0], 0).unwrap(), 0.0);

        let long: Vec<C> = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(sinr(&long, &a, &[1.0, 1.0], 0), Err(Error::NonUnitBeamformer { .. })));
    }

    #[test]
    fn closed_form_examples() {
        let a = mat(&[basis(3, 0), basis(3, 1)]);
        let out = sinr_closed(Scheme::Mrc, &a, &[4.0, 9.0], 0).unwrap();
        assert_eq!((out.sinr, out.loss_factor), (4.0, 0.0));

        // ZF with two users reduces to P̄₁‖a₁‖²(1 - ρ)
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 20, 2);
        let rho = channel::correlation_of(a.column(0), a.column(1)).unwrap();
        let zf_out = sinr_closed(Scheme::Zf, &a, &[2.0, 7.0], 0).unwrap();
        assert_relative_eq!(zf_out.sinr, 2.0 * numerics::norm_sqr(a.column(0)) * (1.0 - rho), max_relative = 1e-10);

        // MMSE with collinear channels
        let a1 = vec![c(0.3, 0.1), c(-0.2, 0.4)];
        let a2: Vec<C> = a1.iter().map(|z| z * c(1.5, -0.5)).collect();
        let a = mat(&[a1, a2.clone()]);
        let s2 = 7.0 * numerics::norm_sqr(&a2);
        let out = sinr_closed(Scheme::Mmse, &a, &[2.0, 7.0], 0).unwrap();
        assert_relative_eq!(out.loss_factor, s2 / (1.0 + s2), max_relative = 1e-12);
    }

    #[test]
    fn two_user_closed_form_examples() {
        let a = two_user_sinrs(&basis(3, 0), &basis(3, 1), 5.0, 3.0).unwrap();
        assert_eq!((a.mrc, a.zf, a.mmse), (5.0, 5.0, 5.0));

        let t = two_user_sinrs_from(2.0, 1.0, 1.0, 1.0, 4.0).unwrap();
        assert_eq!(t.zf, 0.0);
    }

    #[test]
    fn zf_beats_mrc_below_correlation_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..2000 {
            let (pw1, pw2) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
            let (p1, p2) = (rng.gen_range(0.5..100.0), rng.gen_range(0.5..100.0));
            let rho: f64 = rng.gen_range(0.0..1.0);
            let t = two_user_sinrs_from(pw1, pw2, rho, p1, p2).unwrap();
            if rho <= 1.0 - 1.0 / (p2 * pw2) {
                assert!(t.zf >= t.mrc * (1.0 - 1e-12));
            }
            assert!(t.mmse >= t.zf * (1.0 - 1e-12) && t.mmse >= t.mrc * (1.0 - 1e-12));
        }
    }

    #[test]
    fn two_user_sinrs_non_increasing_in_correlation() {
        let mut prev: Option<TwoUserSinrs<f64>> = None;
        for i in 0..=100 {
            let t = two_user_sinrs_from(1.3, 0.7, i as f64 / 100.0, 40.0, 25.0).unwrap();
            if let Some(p) = prev {
                assert!(t.mrc <= p.mrc && t.zf <= p.zf && t.mmse <= p.mmse);
            }
            prev = Some(t);
        }
    }

    #[test]
    fn sum_rate_examples() {
        assert_eq!(sum_rate(&[0.0, 0.0]), 0.0);
        assert_relative_eq!(sum_rate(&[1.0, 3.0]), 3.0, max_relative = 1e-15);
        assert_relative_eq!(sum_rate(&[6.0]), 7f64.log2(), max_relative = 1e-15);
    }

    fn dense(a: &ComplexMatrix<f64>) -> DMatrix<C> {
        DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
    }

    #[test]
    fn decomposition_ordering_and_dense_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let m = rng.gen_range(4..=32);
            let k_users = rng.gen_range(1..=4);
            let a = random_matrix(&mut rng, m, k_users);
            let snr: Vec<f64> = (0..k_users).map(|_| rng.gen_range(0.1..100.0)).collect();
            let set = ChannelSet::new(a.clone(), snr.clone()).unwrap();
            for k in 0..k_users {
                let s = set.single_user_snr(k);
                let mut got = Vec::new();
                for scheme in Scheme::ALL {
                    let r = set.report(scheme, k).unwrap();
                    assert!((0.0..=1.0).contains(&r.loss_factor));
                    assert_relative_eq!(r.sinr, s * (1.0 - r.loss_factor), max_relative = 1e-10);
                    assert_relative_eq!(numerics::norm_sqr(&r.v), 1.0, max_relative = 1e-12);
                    assert_relative_eq!(sinr(&r.v, &a, &snr, k).unwrap(), r.sinr, max_relative = 1e-10);
                    got.push(r.sinr);
                }
                let (g_mrc, g_zf, g_mmse) = (got[0], got[1], got[2]);
                assert!(g_mmse >= g_zf - 1e-9 * g_mmse && g_mmse >= g_mrc - 1e-9 * g_mmse);

                // dense constructions
                let ak = DVector::from_column_slice(a.column(k));
                let abar = dense(&a.without_column(k));
                let mut cov = DMatrix::<C>::identity(m, m);
                for (col, i) in (0..k_users).filter(|&i| i != k).enumerate() {
                    let ai = abar.column(col);
                    cov += ai * ai.adjoint() * c(snr[i], 0.0);
                }
                let mmse_dense = snr[k] * (ak.adjoint() * cov.try_inverse().unwrap() * &ak)[(0, 0)].re;
                assert_relative_eq!(g_mmse, mmse_dense, max_relative = 1e-9);
                let proj = if k_users > 1 {
                    DMatrix::<C>::identity(m, m) - &abar * (abar.adjoint() * &abar).try_inverse().unwrap() * abar.adjoint()
                } else {
                    DMatrix::<C>::identity(m, m)
                };
                let zf_dense = snr[k] * (ak.adjoint() * proj * &ak)[(0, 0)].re;
                assert_relative_eq!(g_zf, zf_dense, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn scenario_validation_and_evaluation() {
        let geom = ArrayGeometry::half_wavelength(5, 5, DEFAULT_WAVELENGTH).unwrap();
        let upw = UpwConfig::matched(&geom);
        let u = UserLocation::new(20.0, 1.2, 0.3).unwrap();
        assert!(Scenario::new(geom, vec![], vec![], ChannelModel::Pnusw, upw).is_err());
        assert!(Scenario::new(geom, vec![u], vec![0.0], ChannelModel::Pnusw, upw).is_err());
        assert!(Scenario::new(geom, vec![u], vec![1.0, 2.0], ChannelModel::Pnusw, upw).is_err());

        let s = Scenario::new(geom, vec![u], vec![1e9], ChannelModel::Pnusw, upw).unwrap();
        let reports: Vec<_> = Scheme::ALL.iter().map(|&sc| s.evaluate(sc).unwrap()[0].clone()).collect();
        for r in &reports {
            assert_relative_eq!(r.sinr, reports[0].single_user_snr, max_relative = 1e-12);
        }

        let crowd = vec![u; 26];
        let s = Scenario::new(geom, crowd, vec![1.0; 26], ChannelModel::Upw, upw).unwrap();
        assert!(matches!(s.evaluate(Scheme::Mrc), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn in_plane_user_is_degenerate() {
        let geom = ArrayGeometry::half_wavelength(5, 5, DEFAULT_WAVELENGTH).unwrap();
        let u = UserLocation::new(20.0, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2).unwrap();
        let s = Scenario::new(geom, vec![u], vec![1.0], ChannelModel::Pnusw, UpwConfig::matched(&geom)).unwrap();
        assert!(matches!(s.evaluate(Scheme::Mmse), Err(Error::DegenerateChannel(_))));
    }
}
