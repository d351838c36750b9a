//! Hybrid precoding with a fully-connected phase-shifter network.
//!
//! The analog matrix `Q` and the digital matrix `W` are fitted to the
//! fully-digital solution by alternating a Riemannian conjugate-gradient
//! update of `Q` with a least-squares update of `W`.

pub mod manifold;
pub mod rcg;

use rand::Rng;

use crate::channel::{ArchitectureKind, ArrayGeometry, NearFieldChannel};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm, ComplexMatrix, ComplexVector, HermitianFactor, C64};
use crate::wmmse::{solve_fully_digital, DigitalPrecoder, WmmseOptions};

pub use manifold::{
    euclidean_grad, matching_objective, project_tangent, real_inner, retract, riemannian_grad,
    vector_transport, ManifoldPoint,
};
pub use rcg::{rcg_minimize, Armijo, RcgOptions, RcgOutcome};

/// Condition estimate above which [`ls_digital`] regularizes `QᴴQ`.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Ridge weight relative to `tr(QᴴQ) / N_RF`.
pub const RIDGE_WEIGHT: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct HybridPrecoder {
    /// Analog precoder, `N × N_RF`, unit-modulus entries.
    pub q: ComplexMatrix,
    /// Digital precoder, `N_RF × M`.
    pub w: ComplexMatrix,
    /// The fully-digital solution being matched.
    pub fully_digital: DigitalPrecoder,
    /// `‖W̃_opt − QW‖_F²` after each analog and each digital step, on the
    /// normalized problem.
    pub surrogate_trace: Vec<f64>,
    /// `‖W̃_opt − QW‖_F / ‖W̃_opt‖_F` before the final power scaling.
    pub matching_residual: f64,
    pub line_search_failures: usize,
}

impl HybridPrecoder {
    /// Columns of `QW`, one transmit vector per user.
    pub fn effective_vectors(&self) -> Vec<ComplexVector> {
        self.q.mul(&self.w).columns()
    }

    pub fn power(&self) -> f64 {
        frobenius_norm(&self.q.mul(&self.w)).powi(2)
    }

    pub fn n_rf(&self) -> usize {
        self.q.cols()
    }
}

/// Starting point of the analog precoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HybridInit {
    /// Phases of the column-space projector of `W̃_opt` applied to a seeded
    /// complex Gaussian matrix.
    ColumnSpace { seed: u64 },
    /// `Q[i, k] = exp(−j 2π i k / N)`.
    Dft,
}

impl Default for HybridInit {
    fn default() -> Self {
        HybridInit::ColumnSpace { seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridOptions {
    pub outer_rounds: usize,
    pub rcg: RcgOptions,
    pub init: HybridInit,
    pub fully_digital: WmmseOptions,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            outer_rounds: 20,
            rcg: RcgOptions::default(),
            init: HybridInit::default(),
            fully_digital: WmmseOptions::default(),
        }
    }
}

/// Factors a Gram matrix, adding `RIDGE_WEIGHT · tr/n` to the diagonal when it
/// is singular or badly conditioned.
fn factor_with_ridge(gram: &ComplexMatrix) -> Result<HermitianFactor> {
    match HermitianFactor::new(gram) {
        Ok(f) if f.condition_estimate() <= RIDGE_CONDITION => return Ok(f),
        _ => {}
    }
    let n = gram.rows();
    let ridge = RIDGE_WEIGHT * gram.trace().re / n as f64;
    let mut reg = gram.clone();
    for i in 0..n {
        reg[(i, i)] += ridge;
    }
    HermitianFactor::new(&reg)
}

/// Least-squares digital precoder `(QᴴQ)⁻¹ Qᴴ W̃_opt`.
pub fn ls_digital(q: &ComplexMatrix, w_opt: &ComplexMatrix) -> Result<ComplexMatrix> {
    if q.rows() != w_opt.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Q has {} rows but W_opt has {}",
            q.rows(),
            w_opt.rows()
        )));
    }
    let factor = factor_with_ridge(&q.adjoint_mul(q))?;
    Ok(factor.solve_matrix(&q.adjoint_mul(w_opt)))
}

pub fn initial_analog(w_opt: &ComplexMatrix, n_rf: usize, init: HybridInit) -> Result<ManifoldPoint> {
    let n = w_opt.rows();
    let q = match init {
        HybridInit::Dft => ComplexMatrix::from_fn(n, n_rf, |i, k| {
            C64::from_polar(1.0, -std::f64::consts::TAU * (i * k) as f64 / n as f64)
        }),
        HybridInit::ColumnSpace { seed } => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let normal = complex_gaussian(&mut rng, n * n_rf);
            let r = ComplexMatrix::from_column_major(n, n_rf, normal)?;
            let factor = factor_with_ridge(&w_opt.adjoint_mul(w_opt))?;
            let proj = w_opt.mul(&factor.solve_matrix(&w_opt.adjoint_mul(&r)));
            ComplexMatrix::from_fn(n, n_rf, |i, k| {
                let z = proj[(i, k)];
                C64::from_polar(1.0, z.im.atan2(z.re))
            })
        }
    };
    ManifoldPoint::from_matrix(&q)
}

/// Circularly-symmetric complex Gaussian samples via Box–Muller.
fn complex_gaussian(rng: &mut impl Rng, len: usize) -> Vec<C64> {
    (0..len)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            C64::from_polar((-u1.ln()).sqrt(), std::f64::consts::TAU * u2)
        })
        .collect()
}

/// Alternates analog and digital updates against the fully-digital solution,
/// then scales the digital part so that `‖QW‖_F² = p_max`.
pub fn solve_hybrid(
    channel: &NearFieldChannel,
    geometry: &ArrayGeometry,
    p_max: f64,
    opts: &HybridOptions,
) -> Result<HybridPrecoder> {
    let ArchitectureKind::Hybrid { n_rf } = geometry.kind() else {
        return Err(Error::WrongArchitecture {
            expected: "hybrid",
            found: geometry.kind().label().to_string(),
        });
    };
    if geometry.len() != channel.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "geometry has {} elements, channel vectors have {}",
            geometry.len(),
            channel.n_elements()
        )));
    }
    let fd = solve_fully_digital(channel, p_max, &opts.fully_digital)?;
    fit_hybrid(fd, n_rf, p_max, opts)
}

/// Hybrid factorization of a given fully-digital solution.
pub fn fit_hybrid(
    fd: DigitalPrecoder,
    n_rf: usize,
    p_max: f64,
    opts: &HybridOptions,
) -> Result<HybridPrecoder> {
    let w_opt_raw = ComplexMatrix::from_columns(&fd.w_tilde);
    let n = w_opt_raw.rows();
    if n_rf == 0 || n_rf > n {
        return Err(Error::InvalidGeometry(format!(
            "n_rf = {n_rf} must lie in 1..={n}"
        )));
    }
    let opt_norm = frobenius_norm(&w_opt_raw);
    if !(opt_norm > 0.0) {
        return Err(Error::Domain("fully-digital precoder is zero".into()));
    }

    let mut point = initial_analog(&w_opt_raw, n_rf, opts.init)?;
    let q0 = point.to_matrix(n, n_rf)?;
    // Scale the target so the first digital iterate has unit norm; the
    // line search then starts at a step length matched to the curvature.
    let w_probe = ls_digital(&q0, &w_opt_raw)?;
    let scale = match frobenius_norm(&w_probe) {
        s if s > 0.0 => 1.0 / s,
        _ => 1.0 / opt_norm,
    };
    let w_opt = w_opt_raw.scaled(C64::new(scale, 0.0));
    let mut w = w_probe.scaled(C64::new(scale, 0.0));

    let mut trace = vec![matching_objective(point.as_vector(), &w, &w_opt)?];
    let mut failures = 0;
    for _ in 0..opts.outer_rounds {
        let out = rcg_minimize(&w, &w_opt, point, &opts.rcg)?;
        failures += usize::from(out.line_search_failed);
        trace.push(out.objective());
        point = out.point;
        let q = point.to_matrix(n, n_rf)?;
        w = ls_digital(&q, &w_opt)?;
        let f = matching_objective(point.as_vector(), &w, &w_opt)?;
        let prev = trace[trace.len() - 2];
        trace.push(f);
        if prev - f <= 1e-12 * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let q = point.to_matrix(n, n_rf)?;
    let residual = trace.last().copied().unwrap_or(0.0).sqrt() / frobenius_norm(&w_opt);
    let eff = frobenius_norm(&q.mul(&w));
    if !(eff > 0.0) {
        return Err(Error::Domain("hybrid precoder collapsed to zero".into()));
    }
    let w = w.scaled(C64::new(p_max.sqrt() / eff, 0.0));

    Ok(HybridPrecoder {
        q,
        w,
        fully_digital: fd,
        surrogate_trace: trace,
        matching_residual: residual,
        line_search_failures: failures,
    })
}
