//! Dynamic metasurface antenna precoding.
//!
//! Each microstrip is fed by one RF chain and radiates through its elements,
//! whose responses are confined to the Lorentzian circle
//! `{(j + e^{jφ})/2}`. The single-user weights have a closed form (focusing
//! phase plus in-strip delay compensation); the multi-user case alternates
//! WMMSE on the reduced channel with element-by-element phase searches.

pub mod elementwise;

use crate::channel::{vector_like, ArchitectureKind, ArrayGeometry, DmaParams, Links, NearFieldChannel};
use crate::error::{Error, Result};
use crate::numerics::{dotc, ComplexMatrix, ComplexVector, C64};
use crate::wmmse::{mrt_init, run_wmmse, sum_rate, wmmse_step, WmmseOptions, WmmseState};

pub use elementwise::{build_z_vectors, element_1d_update, pruned_objective, sweep, ZTable};

/// How an element phase maps to a complex weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ElementResponse {
    /// `(j + e^{jφ})/2`, the physical metamaterial response.
    #[default]
    Lorentzian,
    /// `e^{jφ}`, the unit-modulus relaxation.
    PhaseOnly,
}

/// A Lorentzian element state, `φ ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzianPhase(f64);

impl LorentzianPhase {
    pub fn new(phi: f64) -> Self {
        LorentzianPhase(phi.rem_euclid(std::f64::consts::TAU))
    }

    pub fn phi(self) -> f64 {
        self.0
    }

    pub fn weight(self) -> C64 {
        ElementResponse::Lorentzian.weight(self.0)
    }
}

/// Maps a unit-modulus weight `e^{jψ}` onto the Lorentzian circle as
/// `(j + e^{jψ})/2`.
pub fn lorentzian_project(phase_only: C64) -> Result<C64> {
    if (phase_only.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "expected a unit-modulus weight, got modulus {}",
            phase_only.norm()
        )));
    }
    Ok((crate::numerics::J + phase_only) * 0.5)
}

#[derive(Clone, Debug)]
pub struct DmaPrecoder {
    /// Element phases in flat order (strip-major).
    pub phases: Vec<f64>,
    pub response: ElementResponse,
    /// Digital precoders, one `N_d`-vector per user.
    pub w: Vec<ComplexVector>,
    /// Diagonal of the waveguide matrix `H`.
    pub h: ComplexVector,
    pub n_strips: usize,
    pub per_strip: usize,
    /// Sum-rate after the initial point and after every digital and analog
    /// block, before any transmit-power rescaling.
    pub objective_trace: Vec<f64>,
}

impl DmaPrecoder {
    /// Element weights `q_{i,l}` in flat order.
    pub fn weights(&self) -> Vec<C64> {
        self.phases.iter().map(|&p| self.response.weight(p)).collect()
    }

    /// Block-structured `N × N_d` matrix `Q`; entries off the owning strip are zero.
    pub fn q(&self) -> ComplexMatrix {
        q_matrix(&self.weights(), self.n_strips, self.per_strip)
    }

    /// `w̃_m = H Q w_m` for every user.
    pub fn effective_vectors(&self) -> Vec<ComplexVector> {
        let q = self.weights();
        self.w
            .iter()
            .map(|wm| {
                ComplexVector::from_fn(q.len(), |k| self.h[k] * q[k] * wm[k / self.per_strip])
            })
            .collect()
    }

    /// `Σ ‖w_m‖²`.
    pub fn digital_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum()
    }

    /// Final sum-rate of the alternation.
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }

    /// `‖H Q W‖_F²`.
    pub fn transmit_power(&self) -> f64 {
        self.effective_vectors().iter().map(|w| w.norm_sqr()).sum()
    }
}

fn q_matrix(weights: &[C64], n_strips: usize, per_strip: usize) -> ComplexMatrix {
    let mut q = ComplexMatrix::zeros(n_strips * per_strip, n_strips);
    for (k, wk) in weights.iter().enumerate() {
        q[(k, k / per_strip)] = *wk;
    }
    q
}

/// `g_m = Qᴴ Hᴴ a_m` from the element weights in flat order.
pub fn effective_channel(
    a: &[ComplexVector],
    weights: &[C64],
    h: &[C64],
    per_strip: usize,
) -> Result<Vec<ComplexVector>> {
    if weights.len() != h.len() || per_strip == 0 || !weights.len().is_multiple_of(per_strip) {
        return Err(Error::DimensionMismatch(format!(
            "{} weights, {} waveguide entries, {per_strip} elements per strip",
            weights.len(),
            h.len()
        )));
    }
    let n_strips = weights.len() / per_strip;
    a.iter()
        .map(|am| {
            if am.len() != weights.len() {
                return Err(Error::DimensionMismatch(format!(
                    "channel vector of length {} for {} elements",
                    am.len(),
                    weights.len()
                )));
            }
            Ok(ComplexVector::from_fn(n_strips, |i| {
                let range = i * per_strip..(i + 1) * per_strip;
                range.map(|k| (weights[k] * h[k]).conj() * am[k]).sum()
            }))
        })
        .collect()
}

/// Starting element phases for the multi-user alternation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DmaInit {
    /// Every element focused on the centroid of the users.
    Centroid,
    /// Strip `i` focused on user `i mod M`.
    StripPartition,
    /// Run from both starts and keep the higher final sum-rate.
    #[default]
    Best,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmaOptions {
    /// Alternation rounds (digital block, then one element sweep).
    pub outer_rounds: usize,
    /// WMMSE iterations per digital block.
    pub inner_iters: usize,
    /// Stop once an outer round improves the sum-rate by less than this, relative.
    pub tol: f64,
    pub response: ElementResponse,
    /// Rescale the digital precoders so that `‖HQW‖_F² = P_max`.
    pub scale_to_transmit_power: bool,
    pub init: DmaInit,
}

impl Default for DmaOptions {
    fn default() -> Self {
        DmaOptions {
            outer_rounds: 10,
            inner_iters: 50,
            tol: 1e-6,
            response: ElementResponse::Lorentzian,
            scale_to_transmit_power: false,
            init: DmaInit::Best,
        }
    }
}

fn check_dma(channel: &NearFieldChannel, geometry: &ArrayGeometry, params: &DmaParams) -> Result<ComplexVector> {
    if geometry.kind() != ArchitectureKind::Dma {
        return Err(Error::WrongArchitecture {
            expected: "dma",
            found: geometry.kind().label().to_string(),
        });
    }
    if channel.n_elements() != geometry.len() || params.rho().len() != geometry.len() {
        return Err(Error::DimensionMismatch(format!(
            "geometry has {} elements, channel vectors {}, rho {}",
            geometry.len(),
            channel.n_elements(),
            params.rho().len()
        )));
    }
    Ok(params.waveguide_diagonal())
}

/// Phases that co-phase every element toward channel vector `a`:
/// `ψ = −arg(a^* h)`, which equals `k|p − p_{i,l}| + β ρ_{i,l}` for the
/// spherical model.
pub fn focusing_phases(a: &[C64], h: &[C64]) -> Vec<f64> {
    a.iter()
        .zip(h)
        .map(|(ak, hk)| {
            let z = ak.conj() * hk;
            (-z.im.atan2(z.re)).rem_euclid(std::f64::consts::TAU)
        })
        .collect()
}

fn scale_all(w: &mut [ComplexVector], s: f64) {
    for wm in w.iter_mut() {
        for x in wm.iter_mut() {
            *x *= s;
        }
    }
}

fn finish(
    mut pre: DmaPrecoder,
    p_max: f64,
    scale_to_transmit_power: bool,
) -> DmaPrecoder {
    if scale_to_transmit_power {
        let tx = pre.transmit_power();
        if tx > 0.0 {
            scale_all(&mut pre.w, (p_max / tx).sqrt());
        }
    }
    pre
}

/// Closed-form single-user configuration: focusing phases per element, then
/// maximal-ratio digital weights against the realized effective channel.
pub fn single_user_weights(
    channel: &NearFieldChannel,
    geometry: &ArrayGeometry,
    params: &DmaParams,
    p_max: f64,
    response: ElementResponse,
) -> Result<DmaPrecoder> {
    let h = check_dma(channel, geometry, params)?;
    if channel.n_users() != 1 {
        return Err(Error::Domain(format!(
            "single-user weights need exactly one user, got {}",
            channel.n_users()
        )));
    }
    let a = &channel.a[0];
    let phases = focusing_phases(a, &h);
    let weights: Vec<C64> = phases.iter().map(|&p| response.weight(p)).collect();
    let per_strip = geometry.n_cols();
    let g = effective_channel(&channel.a, &weights, &h, per_strip)?;
    let w = mrt_init(Links { vectors: &g, noise_power: channel.noise_power }, p_max);
    let rate = sum_rate(Links { vectors: &g, noise_power: channel.noise_power }, &w);
    Ok(DmaPrecoder {
        phases,
        response,
        w,
        h,
        n_strips: geometry.n_rows(),
        per_strip,
        objective_trace: vec![rate],
    })
}

/// One WMMSE pass on the reduced channel `g_m = QᴴHᴴa_m`, with the power
/// budget applied to the digital vectors.
pub fn dma_digital_step(
    channel: &NearFieldChannel,
    weights: &[C64],
    h: &[C64],
    per_strip: usize,
    w: Vec<ComplexVector>,
    p_max: f64,
) -> Result<Vec<ComplexVector>> {
    let g = effective_channel(&channel.a, weights, h, per_strip)?;
    let links = Links {
        vectors: &g,
        noise_power: channel.noise_power,
    };
    let state = WmmseState::new(links, w);
    Ok(wmmse_step(&state, links, p_max)?.w_tilde)
}

/// Alternating optimization of digital precoders and element phases.
/// A single user is handled by [`single_user_weights`].
pub fn solve_dma(
    channel: &NearFieldChannel,
    geometry: &ArrayGeometry,
    params: &DmaParams,
    p_max: f64,
    opts: &DmaOptions,
) -> Result<DmaPrecoder> {
    let h = check_dma(channel, geometry, params)?;
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
    }
    if channel.n_users() == 1 {
        let pre = single_user_weights(channel, geometry, params, p_max, opts.response)?;
        return Ok(finish(pre, p_max, opts.scale_to_transmit_power));
    }

    let centroid = || -> Result<Vec<f64>> {
        let m_users = channel.n_users() as f64;
        let c = channel.users.iter().fold([0.0; 3], |acc, u| {
            let p = u.position();
            [acc[0] + p[0] / m_users, acc[1] + p[1] / m_users, acc[2] + p[2] / m_users]
        });
        Ok(focusing_phases(&vector_like(channel, c, geometry)?, &h))
    };
    let run = |phases| alternate(channel, geometry, h.clone(), phases, p_max, opts);
    match opts.init {
        DmaInit::Centroid => run(centroid()?),
        DmaInit::StripPartition => run(strip_partition_phases(channel, &h, geometry.n_cols())),
        DmaInit::Best => {
            let a = run(centroid()?)?;
            let b = run(strip_partition_phases(channel, &h, geometry.n_cols()))?;
            Ok(if b.objective() > a.objective() { b } else { a })
        }
    }
}

/// Focusing phases with strip `i` aimed at user `i mod M`.
pub fn strip_partition_phases(channel: &NearFieldChannel, h: &[C64], per_strip: usize) -> Vec<f64> {
    let per_user: Vec<Vec<f64>> = channel.a.iter().map(|a| focusing_phases(a, h)).collect();
    (0..h.len())
        .map(|k| per_user[(k / per_strip) % per_user.len()][k])
        .collect()
}

fn alternate(
    channel: &NearFieldChannel,
    geometry: &ArrayGeometry,
    h: ComplexVector,
    mut phases: Vec<f64>,
    p_max: f64,
    opts: &DmaOptions,
) -> Result<DmaPrecoder> {
    let per_strip = geometry.n_cols();
    let noise = channel.noise_power;
    let weights = |ph: &[f64]| -> Vec<C64> { ph.iter().map(|&p| opts.response.weight(p)).collect() };

    let g0 = effective_channel(&channel.a, &weights(&phases), &h, per_strip)?;
    let mut w = mrt_init(Links { vectors: &g0, noise_power: noise }, p_max);
    let mut trace = vec![sum_rate(Links { vectors: &g0, noise_power: noise }, &w)];

    let inner = WmmseOptions {
        max_iters: opts.inner_iters,
        tol: 0.0,
    };
    for _ in 0..opts.outer_rounds {
        let start = *trace.last().unwrap_or(&0.0);

        let g = effective_channel(&channel.a, &weights(&phases), &h, per_strip)?;
        let links = Links { vectors: &g, noise_power: noise };
        let state = run_wmmse(links, w.clone(), p_max, &inner)?;
        if state.sum_rate() >= *trace.last().unwrap_or(&0.0) {
            w = state.w_tilde;
        }
        trace.push(sum_rate(links, &w));

        let z = build_z_vectors(&channel.a, &h, &w, per_strip);
        let mut candidate = phases.clone();
        sweep(&mut candidate, &z, noise, opts.response);
        let g = effective_channel(&channel.a, &weights(&candidate), &h, per_strip)?;
        let rate = sum_rate(Links { vectors: &g, noise_power: noise }, &w);
        if rate >= *trace.last().unwrap_or(&0.0) {
            phases = candidate;
            trace.push(rate);
        } else {
            trace.push(*trace.last().unwrap_or(&0.0));
        }

        let end = *trace.last().unwrap_or(&0.0);
        if end - start <= opts.tol * end.abs() {
            break;
        }
    }

    let pre = DmaPrecoder {
        phases,
        response: opts.response,
        w,
        h,
        n_strips: geometry.n_rows(),
        per_strip,
        objective_trace: trace,
    };
    Ok(finish(pre, p_max, opts.scale_to_transmit_power))
}

/// `|aᴴ H Q w|²` for one user with the given element weights.
pub fn beam_gain(a: &[C64], weights: &[C64], h: &[C64], w: &[C64], per_strip: usize) -> f64 {
    let eff = ComplexVector::from_fn(weights.len(), |k| h[k] * weights[k] * w[k / per_strip]);
    dotc(a, &eff).norm_sqr()
}
