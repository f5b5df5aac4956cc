//! Quantum state transfer between two impurities coupled through a
//! tight-binding ring channel, in the single-excitation sector.
//!
//! ```
//! use qst_core::{evolve, time_grid, ModelParams, SingleExcitationState};
//!
//! let params = ModelParams::new(16, 8, 0.01, 0.0).unwrap();
//! let times = time_grid(0.0, 628.3185307179587, 3).unwrap();
//! let traj = evolve(&params, &SingleExcitationState::on_a(&params), &times).unwrap();
//! assert!(traj.p_b[2] > 0.99);
//! ```

pub mod dynamics;
pub mod error;
pub mod model;
pub mod regimes;
pub mod spectral;

pub use dynamics::{
    eigendecompose, evolve, evolve_with_amplitudes, occupation_probabilities, time_grid, Propagator,
    SingleExcitationState, Spectrum, Trajectory,
};
pub use error::{QstError, Result};
pub use model::{build_hamiltonian, channel_index, mode_grid, HamiltonianMatrix, ModeGrid, ModelParams, IDX_A, IDX_B};
pub use regimes::{
    classify_regime, predict_strong, predict_weak_offres, predict_weak_resonant, transfer_metrics, DeltaRoots,
    Diagnostics, RabiPrediction, Regime, RegimeReport, ResonantFlag, ResonantPrediction, ResonantProfile,
    StrongPrediction, Thresholds, TransferMetrics,
};
pub use spectral::{
    d_pm, d_pm_gamma, find_poles, lambda_closed, lambda_continuum, lambda_real, lambda_sum, reconstruct_amplitudes,
    self_energy, Parity, Pole, PoleSet,
};
