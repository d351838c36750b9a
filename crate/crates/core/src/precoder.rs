use crate::channel::ArchitectureKind;
use crate::dma::DmaPrecoder;
use crate::hybrid::HybridPrecoder;
use crate::numerics::ComplexVector;
use crate::wmmse::DigitalPrecoder;

/// A designed precoder of any architecture.
#[derive(Clone, Debug)]
pub enum Precoder {
    FullyDigital(DigitalPrecoder),
    Hybrid(HybridPrecoder),
    Dma(DmaPrecoder),
}

impl Precoder {
    /// Per-user transmit vectors at the array elements.
    pub fn effective_vectors(&self) -> Vec<ComplexVector> {
        match self {
            Precoder::FullyDigital(p) => p.w_tilde.clone(),
            Precoder::Hybrid(p) => p.effective_vectors(),
            Precoder::Dma(p) => p.effective_vectors(),
        }
    }

    pub fn kind(&self) -> ArchitectureKind {
        match self {
            Precoder::FullyDigital(_) => ArchitectureKind::FullyDigital,
            Precoder::Hybrid(p) => ArchitectureKind::Hybrid { n_rf: p.n_rf() },
            Precoder::Dma(_) => ArchitectureKind::Dma,
        }
    }

    /// Radiated power `Σ ‖w̃_m‖²`.
    pub fn transmit_power(&self) -> f64 {
        self.effective_vectors().iter().map(|w| w.norm_sqr()).sum()
    }
}
