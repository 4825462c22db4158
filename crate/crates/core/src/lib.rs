//! Kicked Ising chains under quenched fields: Floquet evolution, OTOCs,
//! level statistics and Fourier IPR of the OTOC signal.

pub mod algebra;
pub mod analysis;
pub mod config;
pub mod evolution;
pub mod figures;
pub mod kernel;
pub mod otoc;
pub mod output;
pub mod schedules;
pub mod spectral;
pub mod sweep;

pub use algebra::{DenseOperator, PauliAxis};
pub use config::{Angle, RunConfig};
pub use evolution::{ChainParams, HeisenbergConvention};
pub use otoc::{ObservableFamily, ObservableSpec, OtocSeries};
pub use schedules::{ProtocolKind, QuenchProtocol};
pub use spectral::{NnsdScore, SpacingEnsemble, Verdict};
