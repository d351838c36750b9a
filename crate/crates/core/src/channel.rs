//! Array geometries, near/far-field region boundaries and free-space channel
//! synthesis.
//!
//! Element `(i, l)` (row `i`, column `l`, both zero-based) maps to flat index
//! `i * n_cols + l` in every vector and matrix of the crate. For a DMA, row `i`
//! is microstrip `i`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum user/element separation accepted by the channel builders.
pub const MIN_DISTANCE: f64 = 1e-9;

pub type Point = [f64; 3];

pub fn wavelength_for(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchitectureKind {
    FullyDigital,
    Hybrid { n_rf: usize },
    Dma,
}

impl ArchitectureKind {
    pub fn label(&self) -> &'static str {
        match self {
            ArchitectureKind::FullyDigital => "fd",
            ArchitectureKind::Hybrid { .. } => "hybrid",
            ArchitectureKind::Dma => "dma",
        }
    }
}

/// A uniform planar array in the `z = 0` plane, centred on the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    n_rows: usize,
    n_cols: usize,
    row_spacing: f64,
    col_spacing: f64,
    positions: Vec<Point>,
    kind: ArchitectureKind,
}

impl ArrayGeometry {
    pub fn uniform_planar(
        n_rows: usize,
        n_cols: usize,
        row_spacing: f64,
        col_spacing: f64,
        kind: ArchitectureKind,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidGeometry(format!(
                "array needs at least one element, got {n_rows}x{n_cols}"
            )));
        }
        if !(row_spacing > 0.0 && col_spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacings must be positive, got {row_spacing} and {col_spacing}"
            )));
        }
        if let ArchitectureKind::Hybrid { n_rf } = kind {
            if n_rf == 0 || n_rf > n_rows * n_cols {
                return Err(Error::InvalidGeometry(format!(
                    "n_rf = {n_rf} outside 1..={}",
                    n_rows * n_cols
                )));
            }
        }
        let x0 = (n_cols as f64 - 1.0) / 2.0;
        let y0 = (n_rows as f64 - 1.0) / 2.0;
        let mut positions = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for l in 0..n_cols {
                positions.push([
                    (l as f64 - x0) * col_spacing,
                    (i as f64 - y0) * row_spacing,
                    0.0,
                ]);
            }
        }
        Ok(ArrayGeometry {
            n_rows,
            n_cols,
            row_spacing,
            col_spacing,
            positions,
            kind,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn row_spacing(&self) -> f64 {
        self.row_spacing
    }

    pub fn col_spacing(&self) -> f64 {
        self.col_spacing
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: ArchitectureKind) -> Result<Self> {
        if let ArchitectureKind::Hybrid { n_rf } = kind {
            if n_rf == 0 || n_rf > self.len() {
                return Err(Error::InvalidGeometry(format!("n_rf = {n_rf} out of range")));
            }
        }
        self.kind = kind;
        Ok(self)
    }

    pub fn flat_index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    /// Diagonal of the bounding rectangle of the element positions.
    pub fn aperture_diameter(&self) -> f64 {
        let w = (self.n_cols as f64 - 1.0) * self.col_spacing;
        let h = (self.n_rows as f64 - 1.0) * self.row_spacing;
        w.hypot(h)
    }

    /// Same lattice with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::uniform_planar(
            self.n_rows,
            self.n_cols,
            self.row_spacing * s,
            self.col_spacing * s,
            self.kind,
        )
    }
}

/// Microstrip propagation parameters of a DMA.
#[derive(Clone, Debug, PartialEq)]
pub struct DmaParams {
    alpha: f64,
    beta: f64,
    rho: Vec<f64>,
}

impl DmaParams {
    /// `rho` holds the in-strip coordinate of every element in flat order.
    pub fn new(geometry: &ArrayGeometry, alpha: f64, beta: f64, rho: Vec<f64>) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::validation("alpha", format!("must be >= 0, got {alpha}")));
        }
        if !(beta > 0.0) {
            return Err(Error::validation("beta", format!("must be > 0, got {beta}")));
        }
        if rho.len() != geometry.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} in-strip coordinates for {} elements",
                rho.len(),
                geometry.len()
            )));
        }
        for strip in rho.chunks(geometry.n_cols()) {
            if strip.first().is_some_and(|r| *r < 0.0) || strip.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation(
                    "rho",
                    "must be nonnegative and strictly increasing along each microstrip",
                ));
            }
        }
        Ok(DmaParams { alpha, beta, rho })
    }

    /// Feed at the first column of every strip; `rho` is the x-offset from it.
    pub fn feed_at_first_column(geometry: &ArrayGeometry, alpha: f64, beta: f64) -> Result<Self> {
        let rho = (0..geometry.n_rows())
            .flat_map(|_| (0..geometry.n_cols()).map(|l| l as f64 * geometry.col_spacing()))
            .collect();
        Self::new(geometry, alpha, beta, rho)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Diagonal of the waveguide matrix, `e^{-ρ(α + jβ)}` per element.
    pub fn waveguide_diagonal(&self) -> ComplexVector {
        self.rho
            .iter()
            .map(|r| (C64::new(-self.alpha, -self.beta) * r).exp())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    position: Point,
}

impl User {
    pub fn new(position: Point) -> Result<Self> {
        if !(position[2] > 0.0) || position.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation(
                "user.position",
                format!("user must be in front of the array (z > 0), got {position:?}"),
            ));
        }
        Ok(User { position })
    }

    pub fn on_boresight(z: f64) -> Result<Self> {
        Self::new([0.0, 0.0, z])
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn distance_from_origin(&self) -> f64 {
        norm3(self.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Reactive,
    NearField,
    FarField,
}

/// Wavefront model used to synthesize channel vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wavefront {
    /// Exact per-element distances and angles.
    Spherical,
    /// Far-field approximation: common gain and a linear phase across the aperture.
    Planar,
}

/// The physical layer as seen by the solvers.
#[derive(Clone, Debug)]
pub struct NearFieldChannel {
    pub a: Vec<ComplexVector>,
    pub noise_power: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub users: Vec<User>,
    pub wavefront: Wavefront,
    pub boresight_b: f64,
}

/// Borrowed channel vectors plus noise power: the only thing the rate
/// evaluator and the WMMSE iteration need.
#[derive(Clone, Copy, Debug)]
pub struct Links<'a> {
    pub vectors: &'a [ComplexVector],
    pub noise_power: f64,
}

impl NearFieldChannel {
    pub fn links(&self) -> Links<'_> {
        Links {
            vectors: &self.a,
            noise_power: self.noise_power,
        }
    }

    pub fn n_users(&self) -> usize {
        self.a.len()
    }

    pub fn n_elements(&self) -> usize {
        self.a.first().map_or(0, |a| a.len())
    }
}

fn norm3(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Fraunhofer distance `2 D² / λ`.
pub fn fraunhofer_distance(diameter: f64, wavelength: f64) -> Result<f64> {
    check_positive("diameter", diameter)?;
    check_positive("wavelength", wavelength)?;
    Ok(2.0 * diameter * diameter / wavelength)
}

/// Fresnel distance `∛(D⁴ / 8λ)`.
pub fn fresnel_distance(diameter: f64, wavelength: f64) -> Result<f64> {
    check_positive("diameter", diameter)?;
    check_positive("wavelength", wavelength)?;
    Ok((diameter.powi(4) / (8.0 * wavelength)).cbrt())
}

/// Classifies the user's distance from the array centre. Boundary distances
/// fall into the inner region.
pub fn region_of(user: &User, geometry: &ArrayGeometry, wavelength: f64) -> Region {
    let d = geometry.aperture_diameter();
    let (d_n, d_f) = if d > 0.0 && wavelength > 0.0 {
        (
            (d.powi(4) / (8.0 * wavelength)).cbrt(),
            2.0 * d * d / wavelength,
        )
    } else {
        (0.0, 0.0)
    };
    let r = user.distance_from_origin();
    if r <= d_n {
        Region::Reactive
    } else if r <= d_f {
        Region::NearField
    } else {
        Region::FarField
    }
}

/// Element radiation profile `2(b+1) cos^b θ` on `[0, π/2]`, zero elsewhere.
pub fn radiation_profile(theta: f64, b: f64) -> f64 {
    if (0.0..=PI / 2.0).contains(&theta) {
        2.0 * (b + 1.0) * theta.cos().max(0.0).powf(b)
    } else {
        0.0
    }
}

fn profile_from_cos(cos_theta: f64, b: f64) -> f64 {
    if cos_theta >= 0.0 {
        2.0 * (b + 1.0) * cos_theta.powf(b)
    } else {
        0.0
    }
}

/// Channel vector for an arbitrary point, including points behind the array
/// (whose entries are exactly zero).
pub fn field_vector_at(
    point: Point,
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
) -> Result<ComplexVector> {
    let k = 2.0 * PI / wavelength;
    let mut out = ComplexVector::zeros(geometry.len());
    for (idx, (p, slot)) in geometry.positions().iter().zip(out.iter_mut()).enumerate() {
        let dx = point[0] - p[0];
        let dy = point[1] - p[1];
        let dz = point[2] - p[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d < MIN_DISTANCE {
            return Err(Error::DegenerateGeometry {
                element: idx,
                distance: d,
            });
        }
        let f = profile_from_cos(dz / d, b);
        if f == 0.0 {
            continue;
        }
        let amp = f.sqrt() * wavelength / (4.0 * PI * d);
        // a_m holds the conjugate of the received-signal coefficient A·e^{-jkd}.
        *slot = C64::from_polar(amp, k * d);
    }
    Ok(out)
}

/// Far-field (planar wavefront) approximation of [`field_vector_at`]: the gain
/// and angle are taken from the array centre and the phase is linear across
/// the aperture.
pub fn planar_vector_at(
    point: Point,
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
) -> Result<ComplexVector> {
    let k = 2.0 * PI / wavelength;
    let r = norm3(point);
    if r < MIN_DISTANCE {
        return Err(Error::DegenerateGeometry {
            element: 0,
            distance: r,
        });
    }
    let u = [point[0] / r, point[1] / r, point[2] / r];
    let f = profile_from_cos(u[2], b);
    if f == 0.0 {
        return Ok(ComplexVector::zeros(geometry.len()));
    }
    let amp = f.sqrt() * wavelength / (4.0 * PI * r);
    Ok(geometry
        .positions()
        .iter()
        .map(|p| C64::from_polar(amp, k * (r - p[0] * u[0] - p[1] * u[1])))
        .collect())
}

/// Near-field channel vector `a_m` of one user.
pub fn steering_vector(
    user: &User,
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
) -> Result<ComplexVector> {
    field_vector_at(user.position(), geometry, wavelength, b)
}

/// Dense `N × N` diagonal waveguide matrix of a DMA.
pub fn waveguide_matrix(geometry: &ArrayGeometry, params: &DmaParams) -> Result<ComplexMatrix> {
    if geometry.kind() != ArchitectureKind::Dma {
        return Err(Error::WrongArchitecture {
            expected: "dma",
            found: geometry.kind().label().to_string(),
        });
    }
    if params.rho().len() != geometry.len() {
        return Err(Error::DimensionMismatch("rho length differs from element count".into()));
    }
    Ok(ComplexMatrix::diagonal(&params.waveguide_diagonal()))
}

fn build_with(
    users: &[User],
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
    noise_power: f64,
    wavefront: Wavefront,
) -> Result<NearFieldChannel> {
    if users.is_empty() {
        return Err(Error::Domain("at least one user is required".into()));
    }
    check_positive("wavelength", wavelength)?;
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power must be >= 0, got {noise_power}")));
    }
    let a = users
        .iter()
        .map(|u| match wavefront {
            Wavefront::Spherical => steering_vector(u, geometry, wavelength, b),
            Wavefront::Planar => planar_vector_at(u.position(), geometry, wavelength, b),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NearFieldChannel {
        a,
        noise_power,
        wavelength,
        wavenumber: 2.0 * PI / wavelength,
        users: users.to_vec(),
        wavefront,
        boresight_b: b,
    })
}

/// Stacks the near-field channel vectors of all users.
pub fn build_channel(
    users: &[User],
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
    noise_power: f64,
) -> Result<NearFieldChannel> {
    build_with(users, geometry, wavelength, b, noise_power, Wavefront::Spherical)
}

/// Far-field steering model of the same users, used to design baseline
/// precoders that ignore the spherical wavefront.
pub fn build_planar_channel(
    users: &[User],
    geometry: &ArrayGeometry,
    wavelength: f64,
    b: f64,
    noise_power: f64,
) -> Result<NearFieldChannel> {
    build_with(users, geometry, wavelength, b, noise_power, Wavefront::Planar)
}

/// Rebuilds a channel vector for an arbitrary point under the channel's own
/// wavefront model.
pub fn vector_like(channel: &NearFieldChannel, point: Point, geometry: &ArrayGeometry) -> Result<ComplexVector> {
    match channel.wavefront {
        Wavefront::Spherical => field_vector_at(point, geometry, channel.wavelength, channel.boresight_b),
        Wavefront::Planar => planar_vector_at(point, geometry, channel.wavelength, channel.boresight_b),
    }
}
