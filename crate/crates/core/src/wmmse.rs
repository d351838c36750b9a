//! Fully-digital sum-rate maximization by weighted-MMSE block coordinate
//! ascent, and the per-user rate evaluator shared by every architecture.
//!
//! The iteration works on any set of channel vectors ([`Links`]), so the DMA
//! solver runs it unchanged on its reduced channel `g_m = Qᴴ Hᴴ a_m`.
//!
//! The MMSE receiver coefficient of user `m` is `conj(u_m)`: `u_m` is kept in
//! the form used by the precoder update, `a_mᴴ w̃_m / (Σ_j |a_mᴴ w̃_j|² + σ²)`.

use crate::channel::{Links, NearFieldChannel};
use crate::error::{Error, Result};
use crate::numerics::{dotc, ComplexMatrix, ComplexVector, HermitianFactor, C64, ZERO};

/// Iteration cap of the power-multiplier bisection.
pub const BISECTION_MAX_ITERS: usize = 200;

/// Consecutive sub-tolerance steps required before stopping.
pub const STALL_PATIENCE: usize = 3;

/// Per-user transmit vectors `w̃_m` of a fully-digital array.
#[derive(Clone, Debug)]
pub struct DigitalPrecoder {
    pub w_tilde: Vec<ComplexVector>,
    pub objective_history: Vec<f64>,
}

impl DigitalPrecoder {
    pub fn power(&self) -> f64 {
        total_power(&self.w_tilde)
    }
}

#[derive(Clone, Debug)]
pub struct WmmseState {
    pub u: Vec<C64>,
    pub v: Vec<f64>,
    pub w_tilde: Vec<ComplexVector>,
    /// Power multiplier used by the last precoder update.
    pub lambda: f64,
    pub iteration: usize,
    /// Sum-rate after each iteration, starting with the initial point.
    pub objective_history: Vec<f64>,
}

impl WmmseState {
    pub fn new(links: Links<'_>, w0: Vec<ComplexVector>) -> Self {
        let m = w0.len();
        let r = sum_rate(links, &w0);
        WmmseState {
            u: vec![ZERO; m],
            v: vec![1.0; m],
            w_tilde: w0,
            lambda: 0.0,
            iteration: 0,
            objective_history: vec![r],
        }
    }

    pub fn sum_rate(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WmmseOptions {
    pub max_iters: usize,
    /// Stop once the relative sum-rate change falls below this.
    pub tol: f64,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        WmmseOptions {
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

pub fn total_power(w: &[ComplexVector]) -> f64 {
    w.iter().map(ComplexVector::norm_sqr).sum()
}

/// Achievable rate of every user, interference treated as noise.
pub fn rate_per_user(links: Links<'_>, w_tilde: &[ComplexVector]) -> Vec<f64> {
    links
        .vectors
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, w) in w_tilde.iter().enumerate() {
                let p = dotc(a, w).norm_sqr();
                if j == m {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            let denom = interference + links.noise_power;
            if signal == 0.0 {
                0.0
            } else {
                (1.0 + signal / denom).log2()
            }
        })
        .collect()
}

pub fn sum_rate(links: Links<'_>, w_tilde: &[ComplexVector]) -> f64 {
    rate_per_user(links, w_tilde).iter().sum()
}

/// `e_m(u) = |1 − u a_mᴴ w̃_m|² + Σ_{j≠m} |u a_mᴴ w̃_j|² + σ² |u|²`.
pub fn mse_term(u: C64, links: Links<'_>, m: usize, w_tilde: &[ComplexVector]) -> f64 {
    let a = &links.vectors[m];
    let mut e = links.noise_power * u.norm_sqr();
    for (j, w) in w_tilde.iter().enumerate() {
        let s = u * dotc(a, w);
        e += if j == m { (C64::new(1.0, 0.0) - s).norm_sqr() } else { s.norm_sqr() };
    }
    e
}

/// Matched filter per user with an equal power split. Users with an all-zero
/// channel start (and stay) at zero.
pub fn mrt_init(links: Links<'_>, p_max: f64) -> Vec<ComplexVector> {
    let m = links.vectors.len().max(1) as f64;
    let per_user = (p_max / m).sqrt();
    links
        .vectors
        .iter()
        .map(|a| {
            let n = a.norm();
            if n == 0.0 {
                ComplexVector::zeros(a.len())
            } else {
                a.scaled(C64::new(per_user / n, 0.0))
            }
        })
        .collect()
}

/// Solves the precoder block of the iteration:
/// `w̃_m = u_m v_m (Σ_j v_j |u_j|² a_j a_jᴴ + λ I)⁻¹ a_m` with the smallest
/// `λ ≥ 0` that meets the power budget.
///
/// Works in the span of the channel vectors: with `B = [√d_j a_j]` and
/// `d_j = v_j |u_j|²`, `(B Bᴴ + λI)⁻¹ B = B (BᴴB + λI)⁻¹`, so only a
/// `K × K` Hermitian system is solved for `K` active users.
pub fn precoder_update(
    links: Links<'_>,
    u: &[C64],
    v: &[f64],
    p_max: f64,
) -> Result<(Vec<ComplexVector>, f64)> {
    let n = links.vectors.first().map_or(0, |a| a.len());
    let m_users = links.vectors.len();
    let active: Vec<usize> = (0..m_users)
        .filter(|&m| v[m] * u[m].norm_sqr() > 0.0 && links.vectors[m].norm_sqr() > 0.0)
        .collect();
    let mut w = vec![ComplexVector::zeros(n); m_users];
    if active.is_empty() {
        return Ok((w, 0.0));
    }
    let scaled: Vec<ComplexVector> = active
        .iter()
        .map(|&m| links.vectors[m].scaled(C64::new((v[m] * u[m].norm_sqr()).sqrt(), 0.0)))
        .collect();
    let b = ComplexMatrix::from_columns(&scaled);
    let gram = b.adjoint_mul(&b);
    let k = active.len();
    let coef: Vec<C64> = active
        .iter()
        .map(|&m| u[m] * v[m] / (v[m] * u[m].norm_sqr()).sqrt())
        .collect();
    let rhs = ComplexMatrix::from_fn(k, k, |i, j| if i == j { coef[j] } else { ZERO });

    // Solution coefficients and power for a given multiplier; None when the
    // shifted Gram matrix is numerically singular (power treated as infinite).
    let solve_at = |lambda: f64| -> Option<(ComplexMatrix, f64)> {
        let mut shifted = gram.clone();
        for i in 0..k {
            shifted[(i, i)] += lambda;
        }
        let factor = HermitianFactor::new(&shifted).ok()?;
        let x = factor.solve_matrix(&rhs);
        let gx = gram.mul(&x);
        let power: f64 = (0..k).map(|j| dotc(x.column(j), gx.column(j)).re).sum();
        power.is_finite().then_some((x, power))
    };

    let feasible = |s: &Option<(ComplexMatrix, f64)>| s.as_ref().is_some_and(|(_, p)| *p <= p_max);

    let (x, lambda) = match solve_at(0.0) {
        Some((x, p)) if p <= p_max => (x, 0.0),
        _ => {
            let mut iters = 0;
            let mut hi = 1.0;
            let mut best = solve_at(hi);
            while !feasible(&best) {
                hi *= 2.0;
                iters += 1;
                if iters > BISECTION_MAX_ITERS || !hi.is_finite() {
                    return Err(Error::ConvergenceFailure(format!(
                        "no feasible power multiplier found up to {hi:e}"
                    )));
                }
                best = solve_at(hi);
            }
            let mut lo = 0.0;
            loop {
                let p_hi = best.as_ref().map_or(f64::INFINITY, |(_, p)| *p);
                if p_max - p_hi <= 1e-12 * p_max || hi - lo <= 1e-14 * hi {
                    break;
                }
                iters += 1;
                if iters > BISECTION_MAX_ITERS {
                    return Err(Error::ConvergenceFailure(format!(
                        "bisection did not converge: lambda in [{lo:e}, {hi:e}]"
                    )));
                }
                let mid = 0.5 * (lo + hi);
                let trial = solve_at(mid);
                if feasible(&trial) {
                    hi = mid;
                    best = trial;
                } else {
                    lo = mid;
                }
            }
            (best.expect("feasible bracket").0, hi)
        }
    };

    for (slot, &m) in active.iter().enumerate() {
        w[m] = b.mul_vec(x.column(slot));
    }
    Ok((w, lambda))
}

/// One pass of the three block updates (`u`, then `v`, then `w̃`).
pub fn wmmse_step(state: &WmmseState, links: Links<'_>, p_max: f64) -> Result<WmmseState> {
    let w_prev = &state.w_tilde;
    let m_users = links.vectors.len();
    let mut u = Vec::with_capacity(m_users);
    let mut v = Vec::with_capacity(m_users);
    for (m, a) in links.vectors.iter().enumerate() {
        let total: f64 = w_prev.iter().map(|w| dotc(a, w).norm_sqr()).sum::<f64>() + links.noise_power;
        let s = dotc(a, &w_prev[m]);
        let um = if total > 0.0 { s / total } else { ZERO };
        let e = mse_term(um.conj(), links, m, w_prev);
        u.push(um);
        v.push(if e > 0.0 { 1.0 / e } else { f64::MAX });
    }
    let (w_tilde, lambda) = precoder_update(links, &u, &v, p_max)?;
    let mut history = state.objective_history.clone();
    history.push(sum_rate(links, &w_tilde));
    Ok(WmmseState {
        u,
        v,
        w_tilde,
        lambda,
        iteration: state.iteration + 1,
        objective_history: history,
    })
}

/// Iterates [`wmmse_step`] from `w0` until the relative sum-rate change stays
/// below `opts.tol` for [`STALL_PATIENCE`] consecutive steps or
/// `opts.max_iters` is reached.
pub fn run_wmmse(
    links: Links<'_>,
    w0: Vec<ComplexVector>,
    p_max: f64,
    opts: &WmmseOptions,
) -> Result<WmmseState> {
    let mut state = WmmseState::new(links, w0);
    let mut stalled = 0;
    for _ in 0..opts.max_iters {
        let prev = state.sum_rate();
        state = wmmse_step(&state, links, p_max)?;
        let cur = state.sum_rate();
        if (cur - prev).abs() <= opts.tol * cur.abs() {
            stalled += 1;
            if stalled >= STALL_PATIENCE {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(state)
}

pub fn solve_fully_digital(
    channel: &NearFieldChannel,
    p_max: f64,
    opts: &WmmseOptions,
) -> Result<DigitalPrecoder> {
    let links = channel.links();
    if links.vectors.is_empty() {
        return Err(Error::Domain("at least one user is required".into()));
    }
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
    }
    let state = run_wmmse(links, mrt_init(links, p_max), p_max, opts)?;
    Ok(DigitalPrecoder {
        w_tilde: state.w_tilde,
        objective_history: state.objective_history,
    })
}
