//! Scenario files.
//!
//! A scenario is a TOML document. Powers may be given in watts or dBm, user
//! positions in meters or as fractions of the Fraunhofer distance. Every
//! omitted field takes the default listed on the raw structs below.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{
    fraunhofer_distance, fresnel_distance, wavelength_for, ArchitectureKind, ArrayGeometry, DmaParams, User,
};
use crate::dma::{DmaInit, DmaOptions, ElementResponse};
use crate::error::{Error, Result};
use crate::hybrid::{HybridInit, HybridOptions};
use crate::wmmse::WmmseOptions;

/// `P[W] = 10^((dBm − 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    FullyDigital,
    Hybrid,
    Dma,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::FullyDigital, Architecture::Hybrid, Architecture::Dma];

    pub fn label(self) -> &'static str {
        match self {
            Architecture::FullyDigital => "fd",
            Architecture::Hybrid => "hybrid",
            Architecture::Dma => "dma",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" | "fully_digital" | "fully-digital" => Ok(Architecture::FullyDigital),
            "hybrid" => Ok(Architecture::Hybrid),
            "dma" => Ok(Architecture::Dma),
            other => Err(Error::validation("architecture", format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    RateCurve,
    PowerMap,
    SumRateTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    carrier_frequency_hz: f64,
    antenna_length_m: f64,
    p_max_w: Option<f64>,
    p_max_dbm: Option<f64>,
    noise_power_w: Option<f64>,
    noise_power_dbm: Option<f64>,
    #[serde(default = "default_b")]
    boresight_b: f64,
    #[serde(default = "default_architectures")]
    architectures: Vec<Architecture>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    far_field_baseline: bool,
    #[serde(default)]
    outputs: Vec<Output>,
    #[serde(default)]
    spacing: RawSpacing,
    #[serde(default)]
    fully_digital: RawWmmse,
    #[serde(default)]
    hybrid: RawHybrid,
    #[serde(default)]
    dma: RawDma,
    #[serde(default)]
    users: Vec<RawUser>,
    #[serde(default)]
    rate_curve: RawRateCurve,
    #[serde(default)]
    power_map: RawPowerMap,
    #[serde(default)]
    sweep: RawSweep,
}

fn default_b() -> f64 {
    2.0
}

fn default_architectures() -> Vec<Architecture> {
    vec![Architecture::FullyDigital]
}

/// Element spacings in wavelengths.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSpacing {
    fully_digital: f64,
    dma_rows: f64,
    dma_elements: f64,
}

impl Default for RawSpacing {
    fn default() -> Self {
        RawSpacing {
            fully_digital: 0.5,
            dma_rows: 0.5,
            dma_elements: 0.2,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawWmmse {
    max_iters: usize,
    tol: f64,
}

impl Default for RawWmmse {
    fn default() -> Self {
        let d = WmmseOptions::default();
        RawWmmse {
            max_iters: d.max_iters,
            tol: d.tol,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawHybrid {
    n_rf: Option<usize>,
    outer_rounds: usize,
    inner_iters: usize,
    grad_tol: f64,
    init: String,
}

impl Default for RawHybrid {
    fn default() -> Self {
        let d = HybridOptions::default();
        RawHybrid {
            n_rf: None,
            outer_rounds: d.outer_rounds,
            inner_iters: d.rcg.max_iters,
            grad_tol: d.rcg.grad_tol,
            init: "column_space".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDma {
    alpha: f64,
    beta: f64,
    response: String,
    outer_rounds: usize,
    inner_iters: usize,
    tol: f64,
    scale_to_transmit_power: bool,
    init: String,
}

impl Default for RawDma {
    fn default() -> Self {
        let d = DmaOptions::default();
        RawDma {
            alpha: 0.6,
            beta: 827.67,
            response: "lorentzian".into(),
            outer_rounds: d.outer_rounds,
            inner_iters: d.inner_iters,
            tol: d.tol,
            scale_to_transmit_power: d.scale_to_transmit_power,
            init: "best".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    position_m: Option<[f64; 3]>,
    /// Coordinates as multiples of the Fraunhofer distance.
    position_df: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRateCurve {
    points: usize,
    /// Defaults to the Fresnel distance.
    z_min_m: Option<f64>,
    /// Defaults to twice the Fraunhofer distance.
    z_max_m: Option<f64>,
    x_m: f64,
    log_spaced: bool,
}

impl Default for RawRateCurve {
    fn default() -> Self {
        RawRateCurve {
            points: 200,
            z_min_m: None,
            z_max_m: None,
            x_m: 0.0,
            log_spaced: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPowerMap {
    nx: usize,
    nz: usize,
    /// Half-width of the x range as a fraction of the Fraunhofer distance.
    x_half_width_df: f64,
    /// Depth of the z range as a fraction of the Fraunhofer distance.
    z_max_df: f64,
    architecture: Architecture,
}

impl Default for RawPowerMap {
    fn default() -> Self {
        RawPowerMap {
            nx: 101,
            nz: 101,
            x_half_width_df: 0.5,
            z_max_df: 1.0,
            architecture: Architecture::FullyDigital,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    user_counts: Vec<usize>,
    /// Placement annulus in units of the Fresnel and Fraunhofer distances.
    z_min_dn: f64,
    z_max_df: f64,
    max_angle_deg: f64,
}

impl Default for RawSweep {
    fn default() -> Self {
        RawSweep {
            user_counts: vec![1, 2, 4, 6, 8, 10],
            z_min_dn: 1.2,
            z_max_df: 0.9,
            max_angle_deg: 60.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateCurveConfig {
    pub points: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub x: f64,
    pub log_spaced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerMapConfig {
    pub nx: usize,
    pub nz: usize,
    pub x_half_width: f64,
    pub z_max: f64,
    pub architecture: Architecture,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub user_counts: Vec<usize>,
    pub z_min: f64,
    pub z_max: f64,
    pub max_angle: f64,
}

/// A validated scenario in SI units.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub carrier_frequency: f64,
    /// Side `L` of the square aperture.
    pub antenna_length: f64,
    pub p_max: f64,
    pub noise_power: f64,
    pub boresight_b: f64,
    pub architectures: Vec<Architecture>,
    pub seed: u64,
    pub far_field_baseline: bool,
    pub outputs: Vec<Output>,
    /// Spacing of the fully-digital and hybrid arrays, meters.
    pub fd_spacing: f64,
    pub dma_row_spacing: f64,
    pub dma_element_spacing: f64,
    pub fully_digital: WmmseOptions,
    pub n_rf: usize,
    pub hybrid: HybridOptions,
    pub dma_alpha: f64,
    pub dma_beta: f64,
    pub dma: DmaOptions,
    pub users: Vec<User>,
    pub rate_curve: RateCurveConfig,
    pub power_map: PowerMapConfig,
    pub sweep: SweepConfig,
}

/// Elements that fit along `length` at `spacing`.
fn count_along(length: f64, spacing: f64) -> usize {
    ((length / spacing) * (1.0 + 1e-12)).floor() as usize
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        wavelength_for(self.carrier_frequency)
    }

    /// `D = √2 L`, the diagonal of the square aperture.
    pub fn aperture_diameter(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.antenna_length
    }

    pub fn fraunhofer_distance(&self) -> f64 {
        fraunhofer_distance(self.aperture_diameter(), self.wavelength()).expect("validated scenario")
    }

    pub fn fresnel_distance(&self) -> f64 {
        fresnel_distance(self.aperture_diameter(), self.wavelength()).expect("validated scenario")
    }

    /// `(rows, elements per row)` of the array used by `arch`.
    pub fn element_counts(&self, arch: Architecture) -> (usize, usize) {
        match arch {
            Architecture::FullyDigital | Architecture::Hybrid => {
                let n = count_along(self.antenna_length, self.fd_spacing);
                (n, n)
            }
            Architecture::Dma => (
                count_along(self.antenna_length, self.dma_row_spacing),
                count_along(self.antenna_length, self.dma_element_spacing),
            ),
        }
    }

    pub fn geometry(&self, arch: Architecture) -> Result<ArrayGeometry> {
        let (rows, cols) = self.element_counts(arch);
        let (kind, dy, dx) = match arch {
            Architecture::FullyDigital => (ArchitectureKind::FullyDigital, self.fd_spacing, self.fd_spacing),
            Architecture::Hybrid => (ArchitectureKind::Hybrid { n_rf: self.n_rf }, self.fd_spacing, self.fd_spacing),
            Architecture::Dma => (ArchitectureKind::Dma, self.dma_row_spacing, self.dma_element_spacing),
        };
        ArrayGeometry::uniform_planar(rows, cols, dy, dx, kind)
    }

    pub fn dma_params(&self, geometry: &ArrayGeometry) -> Result<DmaParams> {
        DmaParams::feed_at_first_column(geometry, self.dma_alpha, self.dma_beta)
    }

    /// Replaces the run seed, which also seeds the hybrid initialization.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        s.seed = seed;
        if let HybridInit::ColumnSpace { .. } = s.hybrid.init {
            s.hybrid.init = HybridInit::ColumnSpace { seed };
        }
        s
    }

    pub fn with_users(&self, users: Vec<User>) -> Scenario {
        Scenario {
            users,
            ..self.clone()
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(field, format!("must be positive and finite, got {v}")))
    }
}

fn power(field: &str, watts: Option<f64>, dbm: Option<f64>) -> Result<f64> {
    match (watts, dbm) {
        (Some(_), Some(_)) => Err(Error::validation(field, "give either the watt or the dBm form, not both")),
        (Some(w), None) => positive(&format!("{field}_w"), w),
        (None, Some(d)) if d.is_finite() => Ok(dbm_to_watts(d)),
        (None, Some(d)) => Err(Error::validation(format!("{field}_dbm"), format!("must be finite, got {d}"))),
        (None, None) => Err(Error::validation(field, "missing (set the _w or _dbm form)")),
    }
}

fn response(s: &str) -> Result<ElementResponse> {
    match s {
        "lorentzian" => Ok(ElementResponse::Lorentzian),
        "phase_only" => Ok(ElementResponse::PhaseOnly),
        other => Err(Error::validation("dma.response", format!("unknown response `{other}`"))),
    }
}

fn dma_init(s: &str) -> Result<DmaInit> {
    match s {
        "best" => Ok(DmaInit::Best),
        "centroid" => Ok(DmaInit::Centroid),
        "strip_partition" => Ok(DmaInit::StripPartition),
        other => Err(Error::validation("dma.init", format!("unknown initialization `{other}`"))),
    }
}

fn hybrid_init(s: &str, seed: u64) -> Result<HybridInit> {
    match s {
        "column_space" => Ok(HybridInit::ColumnSpace { seed }),
        "dft" => Ok(HybridInit::Dft),
        other => Err(Error::validation("hybrid.init", format!("unknown initialization `{other}`"))),
    }
}

/// Parses and validates scenario text. `origin` is used in diagnostics.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    validate(raw)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, path)
}

fn validate(raw: RawScenario) -> Result<Scenario> {
    let carrier_frequency = positive("carrier_frequency_hz", raw.carrier_frequency_hz)?;
    let antenna_length = positive("antenna_length_m", raw.antenna_length_m)?;
    let p_max = power("p_max", raw.p_max_w, raw.p_max_dbm)?;
    let noise_power = power("noise_power", raw.noise_power_w, raw.noise_power_dbm)?;
    if !(raw.boresight_b >= 0.0 && raw.boresight_b.is_finite()) {
        return Err(Error::validation("boresight_b", format!("must be >= 0, got {}", raw.boresight_b)));
    }
    if raw.architectures.is_empty() {
        return Err(Error::validation("architectures", "at least one architecture is required"));
    }
    let lambda = wavelength_for(carrier_frequency);
    let fd_spacing = positive("spacing.fully_digital", raw.spacing.fully_digital)? * lambda;
    let dma_row_spacing = positive("spacing.dma_rows", raw.spacing.dma_rows)? * lambda;
    let dma_element_spacing = positive("spacing.dma_elements", raw.spacing.dma_elements)? * lambda;

    let d = std::f64::consts::SQRT_2 * antenna_length;
    let d_f = fraunhofer_distance(d, lambda)?;
    let d_n = fresnel_distance(d, lambda)?;

    let fd_count = count_along(antenna_length, fd_spacing);
    if fd_count == 0 {
        return Err(Error::validation("antenna_length_m", "shorter than one element spacing"));
    }
    if count_along(antenna_length, dma_row_spacing) == 0 || count_along(antenna_length, dma_element_spacing) == 0 {
        return Err(Error::validation("antenna_length_m", "shorter than one DMA element spacing"));
    }
    let n_rf = raw.hybrid.n_rf.unwrap_or(fd_count);
    if n_rf == 0 || n_rf > fd_count * fd_count {
        return Err(Error::validation(
            "hybrid.n_rf",
            format!("must lie in 1..={}, got {n_rf}", fd_count * fd_count),
        ));
    }

    let sweep_only = !raw.outputs.is_empty() && raw.outputs.iter().all(|o| *o == Output::SumRateTable);
    if raw.users.is_empty() && !sweep_only {
        return Err(Error::validation("users", "at least one user is required"));
    }
    let users = raw
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let field = format!("users[{i}]");
            let p = match (u.position_m, u.position_df) {
                (Some(p), None) => p,
                (None, Some(f)) => [f[0] * d_f, f[1] * d_f, f[2] * d_f],
                _ => return Err(Error::validation(field, "set exactly one of position_m or position_df")),
            };
            User::new(p).map_err(|e| Error::validation(field, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let fully_digital = WmmseOptions {
        max_iters: raw.fully_digital.max_iters,
        tol: raw.fully_digital.tol,
    };
    let mut hybrid = HybridOptions {
        outer_rounds: raw.hybrid.outer_rounds,
        init: hybrid_init(&raw.hybrid.init, raw.seed)?,
        fully_digital,
        ..HybridOptions::default()
    };
    hybrid.rcg.max_iters = raw.hybrid.inner_iters;
    hybrid.rcg.grad_tol = positive("hybrid.grad_tol", raw.hybrid.grad_tol)?;

    let dma_alpha = raw.dma.alpha;
    if !(dma_alpha >= 0.0 && dma_alpha.is_finite()) {
        return Err(Error::validation("dma.alpha", format!("must be >= 0, got {dma_alpha}")));
    }
    let dma_beta = positive("dma.beta", raw.dma.beta)?;
    let dma = DmaOptions {
        outer_rounds: raw.dma.outer_rounds,
        inner_iters: raw.dma.inner_iters,
        tol: raw.dma.tol,
        response: response(&raw.dma.response)?,
        scale_to_transmit_power: raw.dma.scale_to_transmit_power,
        init: dma_init(&raw.dma.init)?,
    };

    let rc = &raw.rate_curve;
    let z_min = positive("rate_curve.z_min_m", rc.z_min_m.unwrap_or(d_n))?;
    let z_max = positive("rate_curve.z_max_m", rc.z_max_m.unwrap_or(2.0 * d_f))?;
    if rc.points < 2 || z_max <= z_min {
        return Err(Error::validation("rate_curve", "need at least 2 points and z_max_m > z_min_m"));
    }
    let rate_curve = RateCurveConfig {
        points: rc.points,
        z_min,
        z_max,
        x: rc.x_m,
        log_spaced: rc.log_spaced,
    };

    let pm = &raw.power_map;
    if pm.nx < 2 || pm.nz < 1 {
        return Err(Error::validation("power_map", "need nx >= 2 and nz >= 1"));
    }
    let power_map = PowerMapConfig {
        nx: pm.nx,
        nz: pm.nz,
        x_half_width: positive("power_map.x_half_width_df", pm.x_half_width_df)? * d_f,
        z_max: positive("power_map.z_max_df", pm.z_max_df)? * d_f,
        architecture: pm.architecture,
    };

    let sw = &raw.sweep;
    if sw.user_counts.contains(&0) {
        return Err(Error::validation("sweep.user_counts", "user counts must be positive"));
    }
    let sweep = SweepConfig {
        user_counts: sw.user_counts.clone(),
        z_min: positive("sweep.z_min_dn", sw.z_min_dn)? * d_n,
        z_max: positive("sweep.z_max_df", sw.z_max_df)? * d_f,
        max_angle: positive("sweep.max_angle_deg", sw.max_angle_deg)?.to_radians(),
    };
    if sweep.z_max <= sweep.z_min || sweep.max_angle >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::validation("sweep", "empty placement region"));
    }

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".into()),
        carrier_frequency,
        antenna_length,
        p_max,
        noise_power,
        boresight_b: raw.boresight_b,
        architectures: raw.architectures,
        seed: raw.seed,
        far_field_baseline: raw.far_field_baseline,
        outputs: raw.outputs,
        fd_spacing,
        dma_row_spacing,
        dma_element_spacing,
        fully_digital,
        n_rf,
        hybrid,
        dma_alpha,
        dma_beta,
        dma,
        users,
        rate_curve,
        power_map,
        sweep,
    })
}
