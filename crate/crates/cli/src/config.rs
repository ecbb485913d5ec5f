//! Run configuration: TOML (or JSON sidecar) documents, flag overrides and
//! per-experiment defaults.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use xlmimo::experiments::{db_to_linear, ModelSelection, PlaneGrid, UserRegion};
use xlmimo::geometry::DEFAULT_WAVELENGTH;
use xlmimo::{Geometry, Location, Upw};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CorrVsM,
    CorrVsDist,
    SinrVsM,
    SnrLossHeatmap,
    SumrateVsM,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::CorrVsM => "corr-vs-m",
            Experiment::CorrVsDist => "corr-vs-dist",
            Experiment::SinrVsM => "sinr-vs-m",
            Experiment::SnrLossHeatmap => "snr-loss-heatmap",
            Experiment::SumrateVsM => "sumrate-vs-m",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Angle given in radians or as a multiple of π, e.g. `"pi/2"`, `"-pi/6"`,
/// `"2*pi/3"`, `"0.25pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64, CliError> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

impl From<f64> for Angle {
    fn from(v: f64) -> Self {
        Angle::Radians(v)
    }
}

pub fn parse_angle(text: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("cannot parse angle `{text}`"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    if s.is_empty() {
        return Err(bad());
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (s.as_str(), 1.0),
    };
    let (sign, num) = match num.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, num.strip_prefix('+').unwrap_or(num)),
    };
    let value = match num.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
            c * PI
        }
        None => num.parse::<f64>().map_err(|_| bad())?,
    };
    let out = sign * value / den;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawUser {
    pub r: f64,
    pub theta: Angle,
    pub phi: Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDirection {
    pub theta: Angle,
    pub phi: Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRegion {
    pub r: [f64; 2],
    pub theta: [Angle; 2],
    pub phi: [Angle; 2],
}

/// Configuration document as written by the user. Every key is optional;
/// missing keys take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSelection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub my: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mz: Option<usize>,

    /// Reference SNR `P̄ β₀` of every user, dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db_per_user: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<RawUser>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mz_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction2: Option<RawDirection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<RawGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RawRegion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drops: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrays: Option<Vec<[usize; 2]>>,
}

impl RawConfig {
    /// Parse a TOML document, or a JSON document when `path` ends in
    /// `.json`. A JSON run sidecar is accepted and its `config` object used.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let doc = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(doc).map_err(|e| e.to_string())
    }

    /// Apply `key=value` where the value uses TOML syntax, e.g.
    /// `my=15`, `mz_list=[11,21]`, `grid={x=[1,2],y=[0,1],nx=2,ny=2}`.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let snippet = format!("{key} = {}", value.trim());
        let parsed: toml::Table = toml::from_str(&snippet)
            .or_else(|_| toml::from_str(&format!("{key} = {:?}", value.trim())))
            .map_err(|e| CliError::Config(format!("override `{assignment}`: {e}")))?;
        let mut table = toml::Table::try_from(&*self).map_err(|e| CliError::Config(e.to_string()))?;
        table.extend(parsed);
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("override `{assignment}`: {}", e.message())))?;
        Ok(())
    }
}

/// Experiment-specific inputs after defaults and validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    CorrVsM { users: [Location; 2], mz_list: Vec<usize> },
    CorrVsDist { user1: Location, direction2: (f64, f64), r2_list: Vec<f64> },
    SinrVsM { users: [Location; 2], mz_list: Vec<usize> },
    SnrLossHeatmap { user1: Location, grid: PlaneGrid },
    SumrateVsM { region: UserRegion, k: usize, drops: usize, arrays: Vec<(usize, usize)> },
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub model: ModelSelection,
    pub out: PathBuf,
    /// Array for fixed-size experiments; sweeps resize it.
    pub geometry: Geometry,
    pub upw: Upw,
    /// Transmit SNR `P̄_k` per user, linear.
    pub transmit_snr: Vec<f64>,
    pub plan: Plan,
    /// The configuration with every default written out. Feeding it back
    /// reproduces the run.
    pub resolved: RawConfig,
}

fn user(r: f64, theta: f64, phi: f64) -> RawUser {
    RawUser { r, theta: Angle::Radians(theta), phi: Angle::Radians(phi) }
}

fn step_list(start: usize, stop: usize, step: usize) -> Vec<usize> {
    (start..=stop).step_by(step).collect()
}

fn config_err<E: fmt::Display>(field: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{field}: {e}"))
}

fn not_applicable(raw: &RawConfig, exp: Experiment) -> Result<(), CliError> {
    let present: &[(&str, bool)] = &[
        ("mz", raw.mz.is_some()),
        ("my", raw.my.is_some()),
        ("mz_list", raw.mz_list.is_some()),
        ("direction2", raw.direction2.is_some()),
        ("r2_list", raw.r2_list.is_some()),
        ("grid", raw.grid.is_some()),
        ("region", raw.region.is_some()),
        ("k", raw.k.is_some()),
        ("drops", raw.drops.is_some()),
        ("sides", raw.sides.is_some()),
        ("arrays", raw.arrays.is_some()),
        ("users", raw.users.is_some()),
    ];
    let allowed: &[&str] = match exp {
        Experiment::CorrVsM | Experiment::SinrVsM => &["my", "mz_list", "users"],
        Experiment::CorrVsDist => &["my", "mz", "users", "direction2", "r2_list"],
        Experiment::SnrLossHeatmap => &["my", "mz", "users", "grid"],
        Experiment::SumrateVsM => &["region", "k", "drops", "sides", "arrays"],
    };
    for (key, set) in present {
        if *set && !allowed.contains(key) {
            return Err(CliError::Config(format!("key `{key}` does not apply to experiment {exp}")));
        }
    }
    Ok(())
}

/// Fill defaults for `raw.experiment` and validate everything.
pub fn resolve(raw: &RawConfig) -> Result<RunConfig, CliError> {
    let exp = raw
        .experiment
        .ok_or_else(|| CliError::Config("no experiment given (set `experiment` or pass --experiment)".into()))?;
    not_applicable(raw, exp)?;

    let mut r = raw.clone();
    r.seed.get_or_insert(0);
    r.model.get_or_insert(ModelSelection::Both);
    r.out.get_or_insert_with(|| PathBuf::from(format!("{exp}.csv")));
    let wavelength = *r.wavelength.get_or_insert(DEFAULT_WAVELENGTH);
    r.spacing.get_or_insert(wavelength / 2.0);
    r.element_area.get_or_insert(wavelength * wavelength / (4.0 * PI));

    match exp {
        Experiment::CorrVsM | Experiment::SinrVsM => {
            r.my.get_or_insert(10);
            r.users.get_or_insert_with(|| vec![user(25.0, FRAC_PI_2, 0.0), user(250.0, FRAC_PI_2, 0.0)]);
            r.mz_list.get_or_insert_with(|| step_list(11, 1001, 10));
        }
        Experiment::CorrVsDist => {
            r.my.get_or_insert(200);
            r.mz.get_or_insert(200);
            r.users.get_or_insert_with(|| vec![user(50.0, FRAC_PI_2, 0.0)]);
            r.direction2.get_or_insert(RawDirection { theta: Angle::Radians(FRAC_PI_2), phi: Angle::Radians(0.0) });
            let r1 = r.users.as_ref().and_then(|u| u.first()).map_or(50.0, |u| u.r);
            r.r2_list.get_or_insert_with(|| (0..=200).map(|s| r1 + s as f64).collect());
        }
        Experiment::SnrLossHeatmap => {
            r.my.get_or_insert(200);
            r.mz.get_or_insert(200);
            r.users.get_or_insert_with(|| vec![user(100.0, FRAC_PI_2, 0.0)]);
            r.grid.get_or_insert(RawGrid { x: [50.0, 150.0], y: [-50.0, 50.0], nx: 11, ny: 11 });
        }
        Experiment::SumrateVsM => {
            r.k.get_or_insert(10);
            r.drops.get_or_insert(100);
            let def = UserRegion::default_sumrate();
            r.region.get_or_insert(RawRegion {
                r: [def.r.0, def.r.1],
                theta: [def.theta.0.into(), def.theta.1.into()],
                phi: [def.phi.0.into(), def.phi.1.into()],
            });
            if r.arrays.is_none() {
                let sides = r.sides.take().unwrap_or_else(|| vec![10, 25, 50, 100, 150, 200]);
                r.arrays = Some(sides.into_iter().map(|s| [s, s]).collect());
            } else if r.sides.is_some() {
                return Err(CliError::Config("give either `sides` or `arrays`, not both".into()));
            }
            r.my = None;
            r.mz = None;
        }
    }

    // normalise angles to radians so the resolved document is unambiguous
    if let Some(users) = r.users.as_mut() {
        for (i, u) in users.iter_mut().enumerate() {
            u.theta = Angle::Radians(u.theta.radians().map_err(config_err(&format!("users[{i}].theta")))?);
            u.phi = Angle::Radians(u.phi.radians().map_err(config_err(&format!("users[{i}].phi")))?);
        }
    }
    if let Some(d) = r.direction2.as_mut() {
        d.theta = Angle::Radians(d.theta.radians().map_err(config_err("direction2.theta"))?);
        d.phi = Angle::Radians(d.phi.radians().map_err(config_err("direction2.phi"))?);
    }
    if let Some(reg) = r.region.as_mut() {
        for a in reg.theta.iter_mut().chain(reg.phi.iter_mut()) {
            *a = Angle::Radians(a.radians().map_err(config_err("region"))?);
        }
    }

    let num_users = match exp {
        Experiment::CorrVsM | Experiment::SinrVsM => 2,
        Experiment::CorrVsDist | Experiment::SnrLossHeatmap => 2,
        Experiment::SumrateVsM => r.k.unwrap_or(0),
    };
    if num_users == 0 {
        return Err(CliError::Config("k: at least one user is required".into()));
    }
    let per_user = match (r.snr_db.take(), r.snr_db_per_user.take()) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either `snr_db` or `snr_db_per_user`, not both".into())),
        (_, Some(list)) => {
            if list.len() != num_users {
                return Err(CliError::Config(format!(
                    "snr_db_per_user: {} values for {num_users} users",
                    list.len()
                )));
            }
            list
        }
        (db, None) => vec![db.unwrap_or(50.0); num_users],
    };
    if let Some(bad) = per_user.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("snr_db_per_user: {bad} is not finite")));
    }
    r.snr_db_per_user = Some(per_user.clone());

    let geometry = Geometry::new(
        r.my.unwrap_or(1),
        r.mz.unwrap_or(1),
        r.spacing.unwrap_or_default(),
        r.element_area.unwrap_or_default(),
        wavelength,
    )
    .map_err(config_err("geometry"))?;
    let upw = match r.beta0 {
        Some(b) => Upw::new(b).map_err(config_err("beta0"))?,
        None => Upw::matched(&geometry),
    };
    r.beta0 = Some(upw.beta0());
    let transmit_snr: Vec<f64> = per_user.iter().map(|&db| db_to_linear(db) / upw.beta0()).collect();

    let locations = |min: usize, max: usize| -> Result<Vec<Location>, CliError> {
        let users = r.users.as_deref().unwrap_or_default();
        if users.len() < min || users.len() > max {
            return Err(CliError::Config(format!(
                "users: experiment {exp} needs {} user location(s), got {}",
                if min == max { min.to_string() } else { format!("{min}-{max}") },
                users.len()
            )));
        }
        users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                Location::new(u.r, u.theta.radians()?, u.phi.radians()?).map_err(config_err(&format!("users[{i}]")))
            })
            .collect()
    };

    let check_mz_list = |list: &[usize]| -> Result<Vec<usize>, CliError> {
        if list.is_empty() || list.contains(&0) {
            return Err(CliError::Config("mz_list: needs positive element counts".into()));
        }
        Ok(list.to_vec())
    };

    let plan = match exp {
        Experiment::CorrVsM | Experiment::SinrVsM => {
            let u = locations(2, 2)?;
            let mz_list = check_mz_list(r.mz_list.as_deref().unwrap_or_default())?;
            if exp == Experiment::CorrVsM {
                Plan::CorrVsM { users: [u[0], u[1]], mz_list }
            } else {
                Plan::SinrVsM { users: [u[0], u[1]], mz_list }
            }
        }
        Experiment::CorrVsDist => {
            let u = locations(1, 1)?;
            let d = r.direction2.as_ref().expect("defaulted");
            let direction2 = (d.theta.radians()?, d.phi.radians()?);
            Location::new(1.0, direction2.0, direction2.1).map_err(config_err("direction2"))?;
            let r2_list = r.r2_list.clone().unwrap_or_default();
            if r2_list.is_empty() || r2_list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(CliError::Config("r2_list: needs positive distances".into()));
            }
            Plan::CorrVsDist { user1: u[0], direction2, r2_list }
        }
        Experiment::SnrLossHeatmap => {
            let u = locations(1, 1)?;
            let g = r.grid.as_ref().expect("defaulted");
            let grid = PlaneGrid::uniform((g.x[0], g.x[1]), (g.y[0], g.y[1]), g.nx, g.ny).map_err(config_err("grid"))?;
            Plan::SnrLossHeatmap { user1: u[0], grid }
        }
        Experiment::SumrateVsM => {
            let reg = r.region.as_ref().expect("defaulted");
            let region = UserRegion::new(
                (reg.r[0], reg.r[1]),
                (reg.theta[0].radians()?, reg.theta[1].radians()?),
                (reg.phi[0].radians()?, reg.phi[1].radians()?),
            )
            .map_err(config_err("region"))?;
            let arrays: Vec<(usize, usize)> = r.arrays.as_deref().unwrap_or_default().iter().map(|a| (a[0], a[1])).collect();
            let k = r.k.unwrap_or_default();
            if arrays.is_empty() || arrays.iter().any(|&(my, mz)| my * mz < k) {
                return Err(CliError::Config(format!("arrays: every array needs at least k = {k} elements")));
            }
            let drops = r.drops.unwrap_or_default();
            if drops == 0 {
                return Err(CliError::Config("drops: must be positive".into()));
            }
            Plan::SumrateVsM { region, k, drops, arrays }
        }
    };

    Ok(RunConfig {
        experiment: exp,
        seed: r.seed.unwrap_or_default(),
        model: r.model.unwrap_or_default(),
        out: r.out.clone().unwrap_or_default(),
        geometry,
        upw,
        transmit_snr,
        plan,
        resolved: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_expressions() {
        let cases = [
            ("pi/2", FRAC_PI_2),
            ("-pi/6", -PI / 6.0),
            ("2*pi/3", 2.0 * PI / 3.0),
            ("0.25pi", PI / 4.0),
            ("pi", PI),
            ("0", 0.0),
            ("1.5", 1.5),
            (" pi / 3 ", PI / 3.0),
        ];
        for (text, expected) in cases {
            assert!((parse_angle(text).unwrap() - expected).abs() < 1e-15, "{text}");
        }
        for bad in ["", "tau", "pi/0", "pi/x", "2**pi"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn empty_config_with_experiment_uses_defaults() {
        let raw = RawConfig { experiment: Some(Experiment::SinrVsM), ..Default::default() };
        let cfg = resolve(&raw).unwrap();
        assert_eq!(cfg.geometry.my(), 10);
        assert!((cfg.geometry.spacing() - 0.0628).abs() < 1e-15);
        assert!((cfg.upw.beta0() * cfg.transmit_snr[0] - 1e5).abs() < 1e-6);
        match cfg.plan {
            Plan::SinrVsM { users, mz_list } => {
                assert_eq!(users[0].r(), 25.0);
                assert_eq!(users[1].r(), 250.0);
                assert_eq!(mz_list.first(), Some(&11));
                assert_eq!(mz_list.last(), Some(&1001));
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn snr_db_converts_once() {
        let raw = RawConfig::from_toml("experiment = \"corr-vs-m\"\nsnr_db = 50\n").unwrap();
        let cfg = resolve(&raw).unwrap();
        assert_eq!(db_to_linear(50.0), 1e5);
        for p in &cfg.transmit_snr {
            assert!((p * cfg.upw.beta0() / 1e5 - 1.0).abs() < 1e-14);
        }
        assert_eq!(cfg.resolved.snr_db_per_user, Some(vec![50.0, 50.0]));
    }

    #[test]
    fn my_key_sets_fixed_axis() {
        let raw = RawConfig::from_toml("experiment = \"corr-vs-m\"\nmy = 10\n").unwrap();
        assert_eq!(resolve(&raw).unwrap().geometry.my(), 10);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RawConfig::from_toml("experiment = \"corr-vs-m\"\n\nbogus = 3\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            "experiment = \"corr-vs-m\"\nmy = 0\n",
            "experiment = \"corr-vs-m\"\nspacing = 0.01\n",
            "experiment = \"corr-vs-m\"\nmz_list = []\n",
            "experiment = \"corr-vs-m\"\ndrops = 3\n",
            "experiment = \"sumrate-vs-m\"\nk = 0\n",
            "experiment = \"sumrate-vs-m\"\nk = 50\nsides = [5]\n",
            "experiment = \"corr-vs-dist\"\nr2_list = [-1.0]\n",
            "experiment = \"snr-loss-heatmap\"\n[[users]]\nr = 10\ntheta = \"pi/2\"\nphi = \"pi\"\n",
            "experiment = \"sinr-vs-m\"\nsnr_db_per_user = [1.0]\n",
        ];
        for text in bad {
            let raw = RawConfig::from_toml(text).unwrap();
            assert!(matches!(resolve(&raw), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_use_toml_values() {
        let mut raw = RawConfig { experiment: Some(Experiment::CorrVsM), ..Default::default() };
        raw.set("mz_list=[3, 5]").unwrap();
        raw.set("my = 4").unwrap();
        raw.set("model=upw").unwrap();
        let cfg = resolve(&raw).unwrap();
        assert_eq!(cfg.geometry.my(), 4);
        assert_eq!(cfg.model, ModelSelection::Upw);
        assert!(matches!(cfg.plan, Plan::CorrVsM { ref mz_list, .. } if mz_list == &[3, 5]));
        assert!(raw.set("nonsense=1").is_err());
        assert!(raw.set("missing-equals").is_err());
    }

    #[test]
    fn resolved_config_is_a_fixed_point() {
        for exp in [
            Experiment::CorrVsM,
            Experiment::CorrVsDist,
            Experiment::SinrVsM,
            Experiment::SnrLossHeatmap,
            Experiment::SumrateVsM,
        ] {
            let raw = RawConfig { experiment: Some(exp), ..Default::default() };
            let first = resolve(&raw).unwrap();
            let json = serde_json::to_string(&first.resolved).unwrap();
            let again = resolve(&RawConfig::from_json(&json).unwrap()).unwrap();
            assert_eq!(first, again, "{exp}");
        }
    }

    #[test]
    fn pi_fraction_users_and_region() {
        let text = r#"
experiment = "sumrate-vs-m"
k = 3
drops = 2
sides = [5]
[region]
r = [20, 30]
theta = ["pi/6", "pi/3"]
phi = [0, "pi/4"]
"#;
        let cfg = resolve(&RawConfig::from_toml(text).unwrap()).unwrap();
        match cfg.plan {
            Plan::SumrateVsM { region, k, drops, arrays } => {
                assert!((region.theta.0 - PI / 6.0).abs() < 1e-15);
                assert!((region.phi.1 - PI / 4.0).abs() < 1e-15);
                assert_eq!((k, drops), (3, 2));
                assert_eq!(arrays, vec![(5, 5)]);
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }
}
