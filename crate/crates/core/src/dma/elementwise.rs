//! Element-by-element optimization of the microstrip weights for fixed
//! digital precoders.

use super::ElementResponse;
use crate::numerics::{kron, ComplexMatrix, ComplexVector, C64, J};

/// Points of the coarse phase grid.
pub const GRID_POINTS: usize = 360;
/// Bracket width at which golden-section refinement stops.
pub const PHASE_TOL: f64 = 1e-6;

/// Pruned vectors `z̄_{j,m}`, indexed as `table[j][m]`, each of length
/// `N_d · N_e` in flat element order.
#[derive(Clone, Debug)]
pub struct ZTable {
    pub table: Vec<Vec<ComplexVector>>,
}

impl ZTable {
    pub fn n_users(&self) -> usize {
        self.table.len()
    }

    pub fn len(&self) -> usize {
        self.table.first().and_then(|r| r.first()).map_or(0, |z| z.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, j: usize, m: usize) -> &ComplexVector {
        &self.table[j][m]
    }
}

/// Positions of the nonzero entries of `vec(Q)` for `N_d` strips of `N_e`
/// elements, in increasing order.
pub fn vec_support(n_strips: usize, per_strip: usize) -> Vec<usize> {
    let n = n_strips * per_strip;
    (0..n_strips)
        .flat_map(|i| (0..per_strip).map(move |l| i * n + i * per_strip + l))
        .collect()
}

/// `z_{j,m} = (w_jᵀ ⊗ a_mᴴ H)ᴴ` restricted to the support of `vec(Q)`.
///
/// With this convention `z̄_{j,m}ᴴ q̄ = a_mᴴ H Q w_j`.
pub fn build_z_vectors(
    a: &[ComplexVector],
    h: &[C64],
    w: &[ComplexVector],
    per_strip: usize,
) -> ZTable {
    let n_strips = w.first().map_or(0, |x| x.len());
    let support = vec_support(n_strips, per_strip);
    let table = w
        .iter()
        .map(|wj| {
            let wt = ComplexMatrix::from_rows(&[wj.to_vec()]);
            a.iter()
                .map(|am| {
                    let row: Vec<C64> = am.iter().zip(h).map(|(x, hx)| x.conj() * hx).collect();
                    let ah = ComplexMatrix::from_rows(&[row]);
                    let full = kron(&wt, &ah);
                    support.iter().map(|&k| full.as_slice()[k].conj()).collect()
                })
                .collect()
        })
        .collect();
    ZTable { table }
}

/// `Σ_m log2(1 + |z̄_{m,m}ᴴ q̄|² / (Σ_{j≠m} |z̄_{j,m}ᴴ q̄|² + σ²))`.
pub fn pruned_objective(q_bar: &[C64], z: &ZTable, noise_power: f64) -> f64 {
    let s = inner_products(q_bar, z);
    rate_from_products(&s, z.n_users(), noise_power)
}

/// `s[j·M + m] = z̄_{j,m}ᴴ q̄`.
fn inner_products(q_bar: &[C64], z: &ZTable) -> Vec<C64> {
    let m_users = z.n_users();
    let mut s = vec![C64::new(0.0, 0.0); m_users * m_users];
    for j in 0..m_users {
        for m in 0..m_users {
            s[j * m_users + m] = crate::numerics::dotc(z.get(j, m), q_bar);
        }
    }
    s
}

fn rate_from_products(s: &[C64], m_users: usize, noise_power: f64) -> f64 {
    (0..m_users)
        .map(|m| {
            let signal = s[m * m_users + m].norm_sqr();
            let interference: f64 = (0..m_users)
                .filter(|&j| j != m)
                .map(|j| s[j * m_users + m].norm_sqr())
                .sum();
            let denom = interference + noise_power;
            if signal == 0.0 {
                0.0
            } else {
                (1.0 + signal / denom).log2()
            }
        })
        .sum()
}

impl ElementResponse {
    /// Complex weight realized by phase `phi`.
    pub fn weight(self, phi: f64) -> C64 {
        match self {
            ElementResponse::Lorentzian => (J + C64::from_polar(1.0, phi)) * 0.5,
            ElementResponse::PhaseOnly => C64::from_polar(1.0, phi),
        }
    }

    /// Inverse of [`ElementResponse::weight`], in `[0, 2π)`.
    pub fn phase_of(self, q: C64) -> f64 {
        let z = match self {
            ElementResponse::Lorentzian => q * 2.0 - J,
            ElementResponse::PhaseOnly => q,
        };
        z.im.atan2(z.re).rem_euclid(std::f64::consts::TAU)
    }
}

/// Objective as a function of one element's phase, evaluated in `O(M²)` from
/// cached inner products.
struct ElementSlice<'a> {
    s: &'a [C64],
    coeff: Vec<C64>,
    incumbent: C64,
    response: ElementResponse,
    m_users: usize,
    noise_power: f64,
}

impl ElementSlice<'_> {
    fn eval(&self, phi: f64) -> f64 {
        let delta = self.response.weight(phi) - self.incumbent;
        let shifted: Vec<C64> = self.s.iter().zip(&self.coeff).map(|(s, c)| s + c * delta).collect();
        rate_from_products(&shifted, self.m_users, self.noise_power)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best phase for element `l` given cached products `s`; returns the phase
/// and its objective. Never returns a phase worse than the incumbent.
fn best_phase(
    s: &[C64],
    l: usize,
    z: &ZTable,
    incumbent: C64,
    response: ElementResponse,
    noise_power: f64,
) -> (f64, f64) {
    let m_users = z.n_users();
    let mut coeff = vec![C64::new(0.0, 0.0); m_users * m_users];
    for j in 0..m_users {
        for m in 0..m_users {
            coeff[j * m_users + m] = z.get(j, m)[l].conj();
        }
    }
    let slice = ElementSlice {
        s,
        coeff,
        incumbent,
        response,
        m_users,
        noise_power,
    };
    let step = std::f64::consts::TAU / GRID_POINTS as f64;
    let (mut best_k, mut best_f) = (0, f64::NEG_INFINITY);
    for k in 0..GRID_POINTS {
        let v = slice.eval(k as f64 * step);
        if v > best_f {
            best_k = k;
            best_f = v;
        }
    }
    let centre = best_k as f64 * step;
    let (phi, f_refined) = golden_max(|x| slice.eval(x), centre - step, centre + step, PHASE_TOL);
    let (mut phi, mut f) = if f_refined >= best_f { (phi, f_refined) } else { (centre, best_f) };
    let phi_inc = response.phase_of(incumbent);
    let f_inc = slice.eval(phi_inc);
    if f_inc >= f {
        phi = phi_inc;
        f = f_inc;
    }
    (phi.rem_euclid(std::f64::consts::TAU), f)
}

/// Maximizes the pruned objective over the phase of element `l` with every
/// other entry of `q_bar` held fixed: a 360-point grid followed by
/// golden-section refinement of the best cell.
pub fn element_1d_update(
    q_bar: &[C64],
    l: usize,
    z: &ZTable,
    noise_power: f64,
    response: ElementResponse,
) -> f64 {
    let s = inner_products(q_bar, z);
    best_phase(&s, l, z, q_bar[l], response, noise_power).0
}

/// One row-major sweep of element updates. Updates `phases` in place and
/// returns the objective after every element.
pub fn sweep(
    phases: &mut [f64],
    z: &ZTable,
    noise_power: f64,
    response: ElementResponse,
) -> Vec<f64> {
    let mut q_bar: Vec<C64> = phases.iter().map(|&p| response.weight(p)).collect();
    let mut s = inner_products(&q_bar, z);
    let m_users = z.n_users();
    let mut trace = Vec::with_capacity(phases.len());
    for l in 0..phases.len() {
        let (phi, f) = best_phase(&s, l, z, q_bar[l], response, noise_power);
        let q_new = response.weight(phi);
        let delta = q_new - q_bar[l];
        if delta != C64::new(0.0, 0.0) {
            for j in 0..m_users {
                for m in 0..m_users {
                    s[j * m_users + m] += z.get(j, m)[l].conj() * delta;
                }
            }
        }
        q_bar[l] = q_new;
        phases[l] = phi;
        trace.push(f);
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testing::*;
    use crate::numerics::dotc;
    use rand::Rng;

    fn random_lorentzian(r: &mut impl Rng, len: usize) -> Vec<C64> {
        (0..len)
            .map(|_| ElementResponse::Lorentzian.weight(r.random_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    /// Block-structured `Q` from pruned weights.
    fn q_matrix(q_bar: &[C64], n_strips: usize, per_strip: usize) -> ComplexMatrix {
        let n = n_strips * per_strip;
        let mut q = ComplexMatrix::zeros(n, n_strips);
        for i in 0..n_strips {
            for l in 0..per_strip {
                q[(i * per_strip + l, i)] = q_bar[i * per_strip + l];
            }
        }
        q
    }

    #[test]
    fn support_matches_block_pattern() {
        let q_bar: Vec<C64> = (0..6).map(|k| C64::new(k as f64 + 1.0, 0.0)).collect();
        let q = q_matrix(&q_bar, 2, 3);
        let v = crate::numerics::vec(&q);
        let nz: Vec<usize> = (0..v.len()).filter(|&k| v[k] != C64::new(0.0, 0.0)).collect();
        assert_eq!(nz, vec_support(2, 3));
    }

    #[test]
    fn single_strip_needs_no_pruning() {
        let mut r = rng(50);
        let a = vec![random_vector(&mut r, 4)];
        let h = random_vector(&mut r, 4);
        let w = vec![random_vector(&mut r, 1)];
        let z = build_z_vectors(&a, &h, &w, 4);
        for l in 0..4 {
            let expected = (w[0][0] * a[0][l].conj() * h[l]).conj();
            assert!((z.get(0, 0)[l] - expected).norm() < 1e-15);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn pruned_products_reproduce_matrix_form() {
        let mut r = rng(51);
        let (nd, ne, m_users) = (3, 4, 2);
        let n = nd * ne;
        let a: Vec<_> = (0..m_users).map(|_| random_vector(&mut r, n)).collect();
        let h = random_vector(&mut r, n);
        let w: Vec<_> = (0..m_users).map(|_| random_vector(&mut r, nd)).collect();
        let q_bar = random_lorentzian(&mut r, n);
        let q = q_matrix(&q_bar, nd, ne);
        let hq = ComplexMatrix::diagonal(&h).mul(&q);
        let z = build_z_vectors(&a, &h, &w, ne);
        for j in 0..m_users {
            for m in 0..m_users {
                let direct = dotc(&a[m], &hq.mul_vec(&w[j]));
                let pruned = dotc(z.get(j, m), &q_bar);
                assert!((pruned - direct).norm() <= 1e-12 * direct.norm().max(1.0));
                assert!((dotc(&q_bar, z.get(j, m)) - direct.conj()).norm() <= 1e-12 * direct.norm().max(1.0));
            }
        }
        // The pruned objective equals the matrix-form sum-rate.
        let sigma2 = 0.3;
        let eff: Vec<ComplexVector> = w.iter().map(|wj| hq.mul_vec(wj)).collect();
        let links = crate::channel::Links {
            vectors: &a,
            noise_power: sigma2,
        };
        let matrix_form = crate::wmmse::sum_rate(links, &eff);
        let pruned = pruned_objective(&q_bar, &z, sigma2);
        assert!((pruned - matrix_form).abs() <= 1e-10 * matrix_form);
    }

    #[test]
    fn zero_digital_vector_gives_zero_z() {
        let mut r = rng(52);
        let a = vec![random_vector(&mut r, 6), random_vector(&mut r, 6)];
        let h = random_vector(&mut r, 6);
        let w = vec![ComplexVector::zeros(2), random_vector(&mut r, 2)];
        let z = build_z_vectors(&a, &h, &w, 3);
        assert!(z.get(0, 0).iter().chain(z.get(0, 1).iter()).all(|x| *x == C64::new(0.0, 0.0)));
    }

    #[test]
    fn isolated_element_goes_to_top_of_circle() {
        let mut z0 = ComplexVector::zeros(5);
        z0[2] = C64::new(0.3, -0.7);
        let z = ZTable {
            table: vec![vec![z0]],
        };
        let q_bar: Vec<C64> = vec![ElementResponse::Lorentzian.weight(0.0); 5];
        let phi = element_1d_update(&q_bar, 2, &z, 1e-2, ElementResponse::Lorentzian);
        assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-5, "{phi}");
    }

    #[test]
    fn single_user_update_matches_dense_grid() {
        let mut r = rng(53);
        for _ in 0..5 {
            let z = ZTable {
                table: vec![vec![random_vector(&mut r, 6)]],
            };
            let q_bar = random_lorentzian(&mut r, 6);
            let l = r.random_range(0..6);
            let phi = element_1d_update(&q_bar, l, &z, 0.1, ElementResponse::Lorentzian);
            let eval = |p: f64| {
                let mut q = q_bar.clone();
                q[l] = ElementResponse::Lorentzian.weight(p);
                pruned_objective(&q, &z, 0.1)
            };
            let dense = (0..100_000)
                .map(|k| eval(k as f64 * std::f64::consts::TAU / 100_000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(eval(phi) >= dense - 1e-9, "{} vs {dense}", eval(phi));
        }
    }

    #[test]
    fn multiuser_update_matches_dense_grid_and_never_decreases() {
        let mut r = rng(54);
        for _ in 0..5 {
            let table = (0..3)
                .map(|_| (0..3).map(|_| random_vector(&mut r, 8)).collect())
                .collect();
            let z = ZTable { table };
            let q_bar = random_lorentzian(&mut r, 8);
            let l = r.random_range(0..8);
            let before = pruned_objective(&q_bar, &z, 0.05);
            let phi = element_1d_update(&q_bar, l, &z, 0.05, ElementResponse::Lorentzian);
            let mut q = q_bar.clone();
            q[l] = ElementResponse::Lorentzian.weight(phi);
            let after = pruned_objective(&q, &z, 0.05);
            assert!(after >= before - 1e-12);
            let dense = (0..20_000)
                .map(|k| {
                    let mut q = q_bar.clone();
                    q[l] = ElementResponse::Lorentzian.weight(k as f64 * std::f64::consts::TAU / 20_000.0);
                    pruned_objective(&q, &z, 0.05)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(after >= dense - 1e-6, "{after} vs {dense}");
        }
    }

    #[test]
    fn sweep_is_monotone_and_feasible() {
        let mut r = rng(55);
        let table = (0..2)
            .map(|_| (0..2).map(|_| random_vector(&mut r, 10)).collect())
            .collect();
        let z = ZTable { table };
        let mut phases: Vec<f64> = (0..10).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        let q0: Vec<C64> = phases.iter().map(|&p| ElementResponse::Lorentzian.weight(p)).collect();
        let start = pruned_objective(&q0, &z, 0.2);
        let trace = sweep(&mut phases, &z, 0.2, ElementResponse::Lorentzian);
        let mut prev = start;
        for f in &trace {
            assert!(*f >= prev - 1e-9);
            prev = *f;
        }
        let q: Vec<C64> = phases.iter().map(|&p| ElementResponse::Lorentzian.weight(p)).collect();
        assert!((pruned_objective(&q, &z, 0.2) - prev).abs() < 1e-10);
        assert!(q.iter().all(|x| ((x - J * 0.5).norm() - 0.5).abs() <= 1e-12));
    }

    #[test]
    fn phase_round_trip() {
        for response in [ElementResponse::Lorentzian, ElementResponse::PhaseOnly] {
            for k in 0..50 {
                let phi = k as f64 * 0.125;
                let back = response.phase_of(response.weight(phi));
                let d = (back - phi.rem_euclid(std::f64::consts::TAU)).abs();
                assert!(d < 1e-12 || (d - std::f64::consts::TAU).abs() < 1e-12);
            }
        }
    }
}
