//! Parameter sweeps over array size, user range and user placement.
//!
//! Each sweep returns a [`SweepResult`]: rows of axis values plus metric
//! columns, with values kept in linear units. Columns carry the unit they
//! should be rendered in, so dB conversion happens only at serialization.
//!
//! Sweep points and random drops run in parallel, but results are collected
//! in input order and every drop draws from its own RNG stream derived from
//! `(seed, drop index)`, so outputs do not depend on the thread count.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{self, ChannelSet, Scheme};
use crate::channel::{self, ChannelModel, UpwConfig};
use crate::geometry::{cartesian_to_spherical, ArrayGeometry, UserLocation, Vector3};
use crate::numerics::{self, ComplexMatrix};
use crate::{Error, Result};

type Geometry = ArrayGeometry<f64>;
type Location = UserLocation<f64>;
type Upw = UpwConfig<f64>;

/// Users whose direction cosine against the array normal falls below this
/// are redrawn by [`sample_users`].
pub const MIN_BROADSIDE_COSINE: f64 = 1e-3;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Transmit SNR `P̄` giving reference SNR `P̄ β₀`.
pub fn transmit_snr(reference_snr: f64, upw: &Upw) -> f64 {
    reference_snr / upw.beta0()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelSelection {
    Pnusw,
    Upw,
    #[default]
    Both,
}

impl ModelSelection {
    pub fn models(&self) -> Vec<ChannelModel> {
        match self {
            ModelSelection::Pnusw => vec![ChannelModel::Pnusw],
            ModelSelection::Upw => vec![ChannelModel::Upw],
            ModelSelection::Both => ChannelModel::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Linear,
    Db,
    BpsHz,
}

impl Unit {
    pub fn suffix(&self) -> &'static str {
        match self {
            Unit::Linear => "linear",
            Unit::Db => "db",
            Unit::BpsHz => "bpshz",
        }
    }

    /// Convert a stored linear value to this unit.
    pub fn render(&self, linear: f64) -> f64 {
        match self {
            Unit::Db => linear_to_db(linear),
            Unit::Linear | Unit::BpsHz => linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub model: Option<ChannelModel>,
    pub scheme: Option<Scheme>,
    pub metric: String,
    pub unit: Unit,
}

impl Column {
    fn new(model: ChannelModel, scheme: Option<Scheme>, metric: &str, unit: Unit) -> Self {
        Self { model: Some(model), scheme, metric: metric.to_string(), unit }
    }

    /// `<model>_<scheme>_<metric>_<unit>`, skipping absent parts.
    pub fn name(&self) -> String {
        let mut parts: Vec<&str> = Vec::with_capacity(4);
        if let Some(m) = &self.model {
            parts.push(m.as_str());
        }
        if let Some(s) = &self.scheme {
            parts.push(s.as_str());
        }
        parts.push(&self.metric);
        parts.push(self.unit.suffix());
        parts.join("_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Vec<f64>,
    /// Linear values; `NaN` marks a missing cell.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Axis column names; the first is the swept quantity.
    pub axes: Vec<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<SweepRow>,
    pub metadata: BTreeMap<String, String>,
}

impl SweepResult {
    fn new(axes: &[&str], columns: Vec<Column>) -> Self {
        Self { axes: axes.iter().map(|s| s.to_string()).collect(), columns, rows: Vec::new(), metadata: BTreeMap::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    /// Linear values of the named column in row order.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[j]).collect())
    }

    pub fn axis_values(&self, axis: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.axis[axis]).collect()
    }

    fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.axis.iter().zip(&b.axis).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }
}

fn describe(loc: &Location) -> String {
    format!("r={} theta={} phi={}", loc.r(), loc.theta(), loc.phi())
}

fn check_counts(list: &[usize], what: &str) -> Result<()> {
    if list.is_empty() {
        return Err(Error::InvalidScenario(format!("empty {what} list")));
    }
    if list.contains(&0) {
        return Err(Error::InvalidScenario(format!("{what} values must be positive")));
    }
    Ok(())
}

fn response_pair(
    model: ChannelModel,
    geom: &Geometry,
    a: &Location,
    b: &Location,
    upw: &Upw,
) -> Result<(channel::ResponseVector<f64>, channel::ResponseVector<f64>)> {
    Ok((channel::response(model, geom, a, upw)?, channel::response(model, geom, b, upw)?))
}

/// Correlation of two users' channels as `M_z` grows with `M_y` fixed.
pub fn sweep_correlation_vs_m(
    base: &Geometry,
    loc1: &Location,
    loc2: &Location,
    mz_list: &[usize],
    upw: &Upw,
    models: ModelSelection,
) -> Result<SweepResult> {
    check_counts(mz_list, "M_z")?;
    let models = models.models();
    let columns = models.iter().map(|&m| Column::new(m, None, "rho", Unit::Linear)).collect();
    let mut out = SweepResult::new(&["m", "my", "mz"], columns);
    out.rows = mz_list
        .par_iter()
        .map(|&mz| {
            let geom = base.resized(base.my(), mz)?;
            let values = models
                .iter()
                .map(|&model| {
                    let (a, b) = response_pair(model, &geom, loc1, loc2, upw)?;
                    channel::correlation(&a, &b)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { axis: vec![geom.num_elements() as f64, base.my() as f64, mz as f64], values })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_rows();
    out.meta("experiment", "corr-vs-m");
    out.meta("user1", describe(loc1));
    out.meta("user2", describe(loc2));
    Ok(out)
}

/// Correlation as user 2 moves along a fixed direction.
pub fn sweep_correlation_vs_distance(
    geom: &Geometry,
    loc1: &Location,
    direction2: (f64, f64),
    r2_list: &[f64],
    upw: &Upw,
    models: ModelSelection,
) -> Result<SweepResult> {
    if r2_list.is_empty() {
        return Err(Error::InvalidScenario("empty distance list".into()));
    }
    let users2 = r2_list
        .iter()
        .map(|&r| Location::new(r, direction2.0, direction2.1))
        .collect::<Result<Vec<_>>>()?;
    let models = models.models();
    let columns = models.iter().map(|&m| Column::new(m, None, "rho", Unit::Linear)).collect();
    let mut out = SweepResult::new(&["separation_m", "r2_m"], columns);
    let firsts = models
        .iter()
        .map(|&m| channel::response(m, geom, loc1, upw))
        .collect::<Result<Vec<_>>>()?;
    out.rows = users2
        .par_iter()
        .map(|u2| {
            let values = models
                .iter()
                .zip(&firsts)
                .map(|(&model, a1)| channel::correlation(a1, &channel::response(model, geom, u2, upw)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { axis: vec![(loc1.r() - u2.r()).abs(), u2.r()], values })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_rows();
    out.meta("experiment", "corr-vs-dist");
    out.meta("user1", describe(loc1));
    out.meta("direction2", format!("theta={} phi={}", direction2.0, direction2.1));
    out.meta("my", geom.my());
    out.meta("mz", geom.mz());
    Ok(out)
}

fn channel_set(model: ChannelModel, geom: &Geometry, users: &[Location], snr: &[f64], upw: &Upw) -> Result<ChannelSet<f64>> {
    let cols = users
        .iter()
        .map(|u| channel::response(model, geom, u, upw).map(channel::ResponseVector::into_entries))
        .collect::<Result<Vec<_>>>()?;
    ChannelSet::new(ComplexMatrix::from_columns(&cols)?, snr.to_vec())
}

/// SINR of user 1 under each scheme and model as `M_z` grows.
pub fn sweep_sinr_vs_m(
    base: &Geometry,
    users: [&Location; 2],
    snr: [f64; 2],
    mz_list: &[usize],
    upw: &Upw,
    models: ModelSelection,
) -> Result<SweepResult> {
    check_counts(mz_list, "M_z")?;
    let models = models.models();
    let columns = models
        .iter()
        .flat_map(|&m| Scheme::ALL.map(|s| Column::new(m, Some(s), "sinr", Unit::Db)))
        .collect();
    let mut out = SweepResult::new(&["m", "my", "mz"], columns);
    let users = [*users[0], *users[1]];
    out.rows = mz_list
        .par_iter()
        .map(|&mz| {
            let geom = base.resized(base.my(), mz)?;
            let mut values = Vec::with_capacity(models.len() * 3);
            for &model in &models {
                let set = channel_set(model, &geom, &users, &snr, upw)?;
                for scheme in Scheme::ALL {
                    values.push(set.sinr_closed(scheme, 0)?.sinr);
                }
            }
            Ok(SweepRow { axis: vec![geom.num_elements() as f64, base.my() as f64, mz as f64], values })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_rows();
    out.meta("experiment", "sinr-vs-m");
    out.meta("user1", describe(&users[0]));
    out.meta("user2", describe(&users[1]));
    out.meta("snr", format!("{} {}", snr[0], snr[1]));
    Ok(out)
}

/// Points of the x-y plane (z = 0) at which user 2 is placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PlaneGrid {
    /// `nx x ny` evenly spaced points spanning both ranges inclusively.
    pub fn uniform(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Ok(Self { xs: linspace(x.0, x.1, nx)?, ys: linspace(y.0, y.1, ny)? })
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::InvalidScenario("grid needs at least one point".into())),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

/// MMSE loss factor of user 1 as user 2 moves over a grid in the x-y plane.
/// Cells behind the array (`x <= 0`) are left missing.
pub fn heatmap_snr_loss(
    geom: &Geometry,
    loc1: &Location,
    grid: &PlaneGrid,
    snr: [f64; 2],
    upw: &Upw,
    models: ModelSelection,
) -> Result<SweepResult> {
    let models = models.models();
    let columns = models.iter().map(|&m| Column::new(m, Some(Scheme::Mmse), "alpha", Unit::Linear)).collect();
    let mut out = SweepResult::new(&["x_m", "y_m"], columns);
    let cells: Vec<(f64, f64)> = grid.xs.iter().flat_map(|&x| grid.ys.iter().map(move |&y| (x, y))).collect();
    let firsts = models
        .iter()
        .map(|&m| channel::response(m, geom, loc1, upw).map(channel::ResponseVector::into_entries))
        .collect::<Result<Vec<_>>>()?;
    out.rows = cells
        .par_iter()
        .map(|&(x, y)| {
            if !(x > 0.0) {
                return Ok(SweepRow { axis: vec![x, y], values: vec![f64::NAN; models.len()] });
            }
            let u2 = cartesian_to_spherical(&Vector3::new(x, y, 0.0))?;
            let values = models
                .iter()
                .zip(&firsts)
                .map(|(&model, a1)| {
                    let a2 = channel::response(model, geom, &u2, upw)?.into_entries();
                    let set = ChannelSet::new(ComplexMatrix::from_columns(&[a1.as_slice(), a2.as_slice()])?, snr.to_vec())?;
                    Ok(set.sinr_closed(Scheme::Mmse, 0)?.loss_factor)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { axis: vec![x, y], values })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_rows();
    out.meta("experiment", "snr-loss-heatmap");
    out.meta("user1", describe(loc1));
    out.meta("my", geom.my());
    out.meta("mz", geom.mz());
    Ok(out)
}

/// Box in spherical coordinates from which users are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserRegion {
    pub r: (f64, f64),
    pub theta: (f64, f64),
    pub phi: (f64, f64),
}

impl UserRegion {
    pub fn new(r: (f64, f64), theta: (f64, f64), phi: (f64, f64)) -> Result<Self> {
        let ok = |(lo, hi): (f64, f64), min: f64, max: f64| lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max;
        if !(ok(r, f64::MIN_POSITIVE, f64::MAX)) {
            return Err(Error::InvalidScenario(format!("distance range {r:?} must be positive and ordered")));
        }
        if !ok(theta, 0.0, PI) {
            return Err(Error::InvalidScenario(format!("zenith range {theta:?} outside [0, pi]")));
        }
        if !ok(phi, -FRAC_PI_2, FRAC_PI_2) {
            return Err(Error::InvalidScenario(format!("azimuth range {phi:?} outside [-pi/2, pi/2]")));
        }
        Ok(Self { r, theta, phi })
    }

    /// Users within `r ∈ [50, 100]` m, `θ ∈ [0, π/3]`, `φ ∈ [π/6, π/3]`.
    pub fn default_sumrate() -> Self {
        Self { r: (50.0, 100.0), theta: (0.0, PI / 3.0), phi: (PI / 6.0, PI / 3.0) }
    }

    fn can_face_array(&self) -> bool {
        // largest Ψ over the box is reached at the θ closest to π/2 and the smallest |φ|
        let th = FRAC_PI_2.clamp(self.theta.0, self.theta.1);
        let ph = 0.0f64.clamp(self.phi.0, self.phi.1);
        th.sin() * ph.cos() >= MIN_BROADSIDE_COSINE
    }
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draw `k` users uniformly in each spherical coordinate, redrawing any user
/// nearly in the array plane.
pub fn sample_users_with<R: Rng>(region: &UserRegion, k: usize, rng: &mut R) -> Result<Vec<Location>> {
    if k == 0 {
        return Err(Error::InvalidScenario("at least one user is required".into()));
    }
    if !region.can_face_array() {
        return Err(Error::InvalidScenario("region contains no user facing the array".into()));
    }
    let mut users = Vec::with_capacity(k);
    while users.len() < k {
        let loc = Location::new(uniform_in(rng, region.r), uniform_in(rng, region.theta), uniform_in(rng, region.phi))?;
        if loc.cos_x() >= MIN_BROADSIDE_COSINE {
            users.push(loc);
        }
    }
    Ok(users)
}

/// Generator for one drop: the seed picks the key, the drop index the stream.
pub fn drop_rng(seed: u64, drop: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(drop);
    rng
}

pub fn sample_users(region: &UserRegion, k: usize, seed: u64) -> Result<Vec<Location>> {
    sample_users_with(region, k, &mut drop_rng(seed, 0))
}

/// Mean sum rate over random user drops for a list of `(M_y, M_z)` arrays.
///
/// Each drop places `snr.len()` users once and evaluates them on every array
/// and model. Columns hold the mean and its standard error per model and
/// scheme.
#[allow(clippy::too_many_arguments)]
pub fn sumrate_vs_m(
    base: &Geometry,
    region: &UserRegion,
    snr: &[f64],
    arrays: &[(usize, usize)],
    upw: &Upw,
    seed: u64,
    n_drops: usize,
    models: ModelSelection,
) -> Result<SweepResult> {
    let k = snr.len();
    if arrays.is_empty() || n_drops == 0 {
        return Err(Error::InvalidScenario("need at least one array and one drop".into()));
    }
    let geoms = arrays.iter().map(|&(my, mz)| base.resized(my, mz)).collect::<Result<Vec<_>>>()?;
    if let Some(g) = geoms.iter().find(|g| g.num_elements() < k) {
        return Err(Error::InvalidScenario(format!("{k} users exceed the {} elements of a {}x{} array", g.num_elements(), g.my(), g.mz())));
    }
    let models = models.models();
    let per_array = models.len() * Scheme::ALL.len();

    // drop -> array -> (model, scheme) sum rate
    let drops: Vec<Vec<Vec<f64>>> = (0..n_drops as u64)
        .into_par_iter()
        .map(|d| {
            let users = sample_users_with(region, k, &mut drop_rng(seed, d))?;
            geoms
                .iter()
                .map(|geom| {
                    let mut rates = Vec::with_capacity(per_array);
                    for &model in &models {
                        let set = channel_set(model, geom, &users, snr, upw)?;
                        for scheme in Scheme::ALL {
                            rates.push(beamforming::sum_rate(&set.sinrs(scheme)?));
                        }
                    }
                    Ok(rates)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns = Vec::with_capacity(2 * per_array);
    for &m in &models {
        for s in Scheme::ALL {
            columns.push(Column::new(m, Some(s), "sumrate", Unit::BpsHz));
        }
    }
    for &m in &models {
        for s in Scheme::ALL {
            columns.push(Column::new(m, Some(s), "sumrate_stderr", Unit::BpsHz));
        }
    }
    let mut out = SweepResult::new(&["m", "my", "mz"], columns);
    let n = n_drops as f64;
    for (a, geom) in geoms.iter().enumerate() {
        let mut means = Vec::with_capacity(per_array);
        let mut errs = Vec::with_capacity(per_array);
        for c in 0..per_array {
            let mean = numerics::compensated_sum(drops.iter().map(|d| d[a][c])) / n;
            let var = if n_drops > 1 {
                numerics::compensated_sum(drops.iter().map(|d| (d[a][c] - mean).powi(2))) / (n - 1.0)
            } else {
                0.0
            };
            means.push(mean);
            errs.push((var / n).sqrt());
        }
        means.extend(errs);
        out.rows.push(SweepRow { axis: vec![geom.num_elements() as f64, geom.my() as f64, geom.mz() as f64], values: means });
    }
    out.sort_rows();
    out.meta("experiment", "sumrate-vs-m");
    out.meta("users", k);
    out.meta("drops", n_drops);
    out.meta("seed", seed);
    out.meta("region", format!("{region:?}"));
    Ok(out)
}
