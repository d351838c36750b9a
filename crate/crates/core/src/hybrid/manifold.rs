//! The complex-circle manifold `{q ∈ ℂ^L : |q_l| = 1}` and the matching
//! objective `f(q) = ‖vec(W̃_opt) − (Wᵀ ⊗ I) q‖²`.

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, C64};

/// Entries closer than this to zero cannot be retracted.
pub const RETRACTION_FLOOR: f64 = 1e-14;

/// Unit-modulus tolerance of a [`ManifoldPoint`].
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// A point of the product of complex circles, stored as `vec(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldPoint(ComplexVector);

impl ManifoldPoint {
    pub fn new(q: ComplexVector) -> Result<Self> {
        if let Some((i, z)) = q
            .iter()
            .enumerate()
            .find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
        {
            return Err(Error::Domain(format!(
                "entry {i} has modulus {} (expected 1)",
                z.norm()
            )));
        }
        Ok(ManifoldPoint(q))
    }

    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        ManifoldPoint(phases.into_iter().map(|p| C64::from_polar(1.0, p)).collect())
    }

    pub fn from_matrix(q: &ComplexMatrix) -> Result<Self> {
        Self::new(crate::numerics::vec(q))
    }

    pub fn as_vector(&self) -> &ComplexVector {
        &self.0
    }

    pub fn into_vector(self) -> ComplexVector {
        self.0
    }

    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<ComplexMatrix> {
        ComplexMatrix::from_column_major(rows, cols, self.0.to_vec())
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn check_dims(q_len: usize, w: &ComplexMatrix, w_opt: &ComplexMatrix) -> Result<usize> {
    let n = w_opt.rows();
    if w.cols() != w_opt.cols() || n * w.rows() != q_len {
        return Err(Error::DimensionMismatch(format!(
            "q of length {q_len}, W {}x{}, W_opt {}x{}",
            w.rows(),
            w.cols(),
            w_opt.rows(),
            w_opt.cols()
        )));
    }
    Ok(n)
}

/// `Q W − W̃_opt` with `Q = vec⁻¹(q)`.
fn residual(q: &[C64], w: &ComplexMatrix, w_opt: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = check_dims(q.len(), w, w_opt)?;
    let qm = ComplexMatrix::from_column_major(n, w.rows(), q.to_vec())?;
    Ok(qm.mul(w).sub(w_opt))
}

/// `‖W̃_opt − Q W‖_F²`.
pub fn matching_objective(q: &[C64], w: &ComplexMatrix, w_opt: &ComplexMatrix) -> Result<f64> {
    Ok(residual(q, w, w_opt)?.as_slice().iter().map(|z| z.norm_sqr()).sum())
}

/// Euclidean gradient `2 (W^* ⊗ I)((Wᵀ ⊗ I) q − vec(W̃_opt))`, evaluated as
/// `vec(2 (Q W − W̃_opt) Wᴴ)`.
pub fn euclidean_grad(q: &[C64], w: &ComplexMatrix, w_opt: &ComplexMatrix) -> Result<ComplexVector> {
    let r = residual(q, w, w_opt)?;
    let g = r.mul(&w.adjoint());
    Ok(g.as_slice().iter().map(|z| z * 2.0).collect())
}

/// Orthogonal projection onto the tangent space at `q`:
/// `η − Re{η ∘ q^*} ∘ q`.
pub fn project_tangent(q: &[C64], eta: &[C64]) -> ComplexVector {
    debug_assert_eq!(q.len(), eta.len());
    q.iter()
        .zip(eta)
        .map(|(qi, ei)| ei - qi * (ei * qi.conj()).re)
        .collect()
}

pub fn riemannian_grad(q: &[C64], egrad: &[C64]) -> ComplexVector {
    project_tangent(q, egrad)
}

/// Moves a tangent vector from the previous point's tangent space to the
/// tangent space at `q_new` by re-projection.
pub fn vector_transport(q_new: &[C64], eta_prev: &[C64]) -> ComplexVector {
    project_tangent(q_new, eta_prev)
}

/// Element-wise retraction `(q + s η) / |q + s η|`.
pub fn retract(q: &[C64], direction: &[C64], step: f64) -> Result<ManifoldPoint> {
    let mut out = ComplexVector::zeros(q.len());
    for (i, ((qi, di), o)) in q.iter().zip(direction).zip(out.iter_mut()).enumerate() {
        let z = qi + di * step;
        let mag = z.norm();
        if !(mag >= RETRACTION_FLOOR) {
            return Err(Error::DegenerateRetraction {
                index: i,
                magnitude: mag,
            });
        }
        *o = z / mag;
    }
    Ok(ManifoldPoint(out))
}

/// Real inner product `Re{xᴴ y}` of the ambient space.
pub fn real_inner(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}
