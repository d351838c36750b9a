//! Experiment drivers: rate curves along a probe line, normalized power maps
//! over the xz-plane and sum-rate sweeps over the number of users.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scenario::{Architecture, Scenario};
use crate::channel::{build_channel, build_planar_channel, field_vector_at, ArrayGeometry, NearFieldChannel, Point, User};
use crate::dma::solve_dma;
use crate::error::Result;
use crate::hybrid::solve_hybrid;
use crate::numerics::{dotc, ComplexVector};
use crate::precoder::Precoder;
use crate::wmmse::{solve_fully_digital, sum_rate};

/// A precoder designed for a scenario's users together with the array it drives.
#[derive(Clone, Debug)]
pub struct Design {
    pub architecture: Architecture,
    /// Designed from planar-wavefront channel vectors.
    pub far_field: bool,
    pub geometry: ArrayGeometry,
    pub precoder: Precoder,
    /// Per-user transmit vectors, cached from the precoder.
    pub vectors: Vec<ComplexVector>,
}

impl Design {
    pub fn label(&self) -> String {
        if self.far_field {
            format!("{}-farfield", self.architecture)
        } else {
            self.architecture.to_string()
        }
    }
}

/// True (spherical-wavefront) channel of the scenario's users on `geometry`.
pub fn true_channel(scenario: &Scenario, geometry: &ArrayGeometry) -> Result<NearFieldChannel> {
    build_channel(
        &scenario.users,
        geometry,
        scenario.wavelength(),
        scenario.boresight_b,
        scenario.noise_power,
    )
}

/// Designs the precoder of `arch` for the scenario's users. With `far_field`
/// the solver sees planar-wavefront channel vectors instead of the true ones.
pub fn design(scenario: &Scenario, arch: Architecture, far_field: bool) -> Result<Design> {
    let geometry = scenario.geometry(arch)?;
    let build = if far_field { build_planar_channel } else { build_channel };
    let channel = build(
        &scenario.users,
        &geometry,
        scenario.wavelength(),
        scenario.boresight_b,
        scenario.noise_power,
    )?;
    let precoder = match arch {
        Architecture::FullyDigital => {
            Precoder::FullyDigital(solve_fully_digital(&channel, scenario.p_max, &scenario.fully_digital)?)
        }
        Architecture::Hybrid => Precoder::Hybrid(solve_hybrid(&channel, &geometry, scenario.p_max, &scenario.hybrid)?),
        Architecture::Dma => {
            let params = scenario.dma_params(&geometry)?;
            Precoder::Dma(solve_dma(&channel, &geometry, &params, scenario.p_max, &scenario.dma)?)
        }
    };
    let vectors = precoder.effective_vectors();
    Ok(Design {
        architecture: arch,
        far_field,
        geometry,
        precoder,
        vectors,
    })
}

/// Every design the scenario asks for: each architecture, plus its
/// far-field baseline when enabled.
pub fn scenario_designs(scenario: &Scenario) -> Result<Vec<Design>> {
    let mut jobs: Vec<(Architecture, bool)> = scenario.architectures.iter().map(|&a| (a, false)).collect();
    if scenario.far_field_baseline {
        jobs.extend(scenario.architectures.iter().map(|&a| (a, true)));
    }
    jobs.par_iter().map(|&(a, ff)| design(scenario, a, ff)).collect()
}

/// Rate user `m` would get at `point` with the design's transmit vectors,
/// the other streams acting as interference.
pub fn rates_at(design: &Design, point: Point, scenario: &Scenario) -> Result<Vec<f64>> {
    let a = field_vector_at(point, &design.geometry, scenario.wavelength(), scenario.boresight_b)?;
    let gains: Vec<f64> = design.vectors.iter().map(|w| dotc(&a, w).norm_sqr()).collect();
    let total: f64 = gains.iter().sum();
    Ok(gains
        .iter()
        .map(|&g| {
            if g == 0.0 {
                0.0
            } else {
                (1.0 + g / (total - g + scenario.noise_power)).log2()
            }
        })
        .collect())
}

/// Sum-rate of a design on the true channel of the scenario's users.
pub fn true_sum_rate(design: &Design, scenario: &Scenario) -> Result<f64> {
    let channel = true_channel(scenario, &design.geometry)?;
    Ok(sum_rate(channel.links(), &design.vectors))
}

/// Points along a line parallel to the z-axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeLine {
    pub x: f64,
    pub y: f64,
    pub z: Vec<f64>,
}

impl ProbeLine {
    pub fn linear(x: f64, z_min: f64, z_max: f64, points: usize) -> Self {
        let z = (0..points)
            .map(|k| z_min + (z_max - z_min) * k as f64 / (points.max(2) - 1) as f64)
            .collect();
        ProbeLine { x, y: 0.0, z }
    }

    /// Log-spaced between two positive depths.
    pub fn log(x: f64, z_min: f64, z_max: f64, points: usize) -> Self {
        let (l0, l1) = (z_min.ln(), z_max.ln());
        let z = (0..points)
            .map(|k| (l0 + (l1 - l0) * k as f64 / (points.max(2) - 1) as f64).exp())
            .collect();
        ProbeLine { x, y: 0.0, z }
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        let c = &scenario.rate_curve;
        if c.log_spaced {
            Self::log(c.x, c.z_min, c.z_max, c.points)
        } else {
            Self::linear(c.x, c.z_min, c.z_max, c.points)
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.z.iter().map(|&z| [self.x, self.y, z])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateSeries {
    pub design: String,
    pub user: usize,
    pub rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateCurve {
    pub probe: ProbeLine,
    pub series: Vec<RateSeries>,
}

impl RateCurve {
    pub fn series(&self, design: &str, user: usize) -> Option<&RateSeries> {
        self.series.iter().find(|s| s.design == design && s.user == user)
    }
}

/// Rate curves of fixed designs along a probe line.
pub fn rate_curve_for(designs: &[Design], scenario: &Scenario, probe: &ProbeLine) -> Result<RateCurve> {
    let mut series = Vec::new();
    for d in designs {
        let per_point: Vec<Vec<f64>> = probe
            .z
            .par_iter()
            .map(|&z| rates_at(d, [probe.x, probe.y, z], scenario))
            .collect::<Result<_>>()?;
        for m in 0..d.vectors.len() {
            series.push(RateSeries {
                design: d.label(),
                user: m,
                rates: per_point.iter().map(|r| r[m]).collect(),
            });
        }
    }
    Ok(RateCurve {
        probe: probe.clone(),
        series,
    })
}

/// Designs every requested architecture for the scenario's focal users and
/// evaluates the resulting fixed precoders along `probe`.
pub fn run_rate_curve(scenario: &Scenario, probe: &ProbeLine) -> Result<RateCurve> {
    let designs = scenario_designs(scenario)?;
    rate_curve_for(&designs, scenario, probe)
}

/// `|a(p)ᴴ w̃_m|² / ‖a(p)‖²` on an x–z grid at `y = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerMap {
    pub design: String,
    pub user: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Row-major in z: `values[iz * x.len() + ix]`.
    pub values: Vec<f64>,
}

impl PowerMap {
    pub fn value(&self, ix: usize, iz: usize) -> f64 {
        self.values[iz * self.x.len() + ix]
    }

    /// Cell `(ix, iz)` holding the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        (k % self.x.len(), k / self.x.len())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid cell closest to `(x, z)`.
    pub fn nearest_cell(&self, x: f64, z: f64) -> (usize, usize) {
        let nearest = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, &a)| if (a - v).abs() < best.1 { (i, (a - v).abs()) } else { best })
                .0
        };
        (nearest(&self.x, x), nearest(&self.z, z))
    }
}

/// Grid axes of the scenario's power map: `nx` points across
/// `[−half_width, half_width]` and `nz` points `z_max·k/nz`, `k = 1..=nz`.
pub fn power_map_axes(scenario: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let c = &scenario.power_map;
    let x = (0..c.nx)
        .map(|i| -c.x_half_width + 2.0 * c.x_half_width * i as f64 / (c.nx - 1) as f64)
        .collect();
    let z = (1..=c.nz).map(|k| c.z_max * k as f64 / c.nz as f64).collect();
    (x, z)
}

pub fn power_maps_for(design: &Design, scenario: &Scenario) -> Result<Vec<PowerMap>> {
    let (x, z) = power_map_axes(scenario);
    let cells: Vec<(f64, f64)> = z.iter().flat_map(|&zz| x.iter().map(move |&xx| (xx, zz))).collect();
    let per_cell: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(xx, zz)| {
            let a = field_vector_at([xx, 0.0, zz], &design.geometry, scenario.wavelength(), scenario.boresight_b)?;
            let norm = a.norm_sqr();
            Ok(design
                .vectors
                .iter()
                .map(|w| if norm > 0.0 { dotc(&a, w).norm_sqr() / norm } else { 0.0 })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..design.vectors.len())
        .map(|m| PowerMap {
            design: design.label(),
            user: m,
            x: x.clone(),
            z: z.clone(),
            values: per_cell.iter().map(|v| v[m]).collect(),
        })
        .collect())
}

/// Normalized power maps of every user under the scenario's map architecture,
/// followed by its far-field baseline when enabled.
pub fn run_power_map(scenario: &Scenario) -> Result<Vec<PowerMap>> {
    let arch = scenario.power_map.architecture;
    let mut maps = power_maps_for(&design(scenario, arch, false)?, scenario)?;
    if scenario.far_field_baseline {
        maps.extend(power_maps_for(&design(scenario, arch, true)?, scenario)?);
    }
    Ok(maps)
}

/// `count` users drawn uniformly over the xz-plane region
/// `z ∈ [z_min, z_max]`, `|x| ≤ z·tan(max_angle)`, in a seeded order.
pub fn place_users(scenario: &Scenario, count: usize, seed: u64) -> Result<Vec<User>> {
    let c = &scenario.sweep;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tan = c.max_angle.tan();
    (0..count)
        .map(|_| {
            // The region is a wedge whose width grows linearly with z.
            let z = (c.z_min * c.z_min + rng.random::<f64>() * (c.z_max * c.z_max - c.z_min * c.z_min)).sqrt();
            let x = (2.0 * rng.random::<f64>() - 1.0) * z * tan;
            User::new([x, 0.0, z])
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub users: usize,
    pub design: String,
    pub sum_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SumRateTable {
    pub rows: Vec<SweepRow>,
}

impl SumRateTable {
    pub fn column(&self, design: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.design == design)
            .map(|r| (r.users, r.sum_rate))
            .collect()
    }
}

/// Successively adds randomly placed users and records the sum-rate of every
/// requested design on the true channel.
pub fn run_sum_rate_sweep(scenario: &Scenario, user_counts: &[usize]) -> Result<SumRateTable> {
    let max_users = user_counts.iter().copied().max().unwrap_or(0);
    let pool = place_users(scenario, max_users, scenario.seed)?;
    let mut jobs = Vec::new();
    for &m in user_counts {
        for &a in &scenario.architectures {
            jobs.push((m, a, false));
            if scenario.far_field_baseline {
                jobs.push((m, a, true));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(m, arch, ff)| {
            let s = scenario.with_users(pool[..m].to_vec());
            let d = design(&s, arch, ff)?;
            Ok(SweepRow {
                users: m,
                design: d.label(),
                sum_rate: true_sum_rate(&d, &s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRateTable { rows })
}
