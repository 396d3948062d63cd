//! Multilevel splitting on path space: ensembles, survival and exponent
//! estimators, separation frequencies and mixing diagnostics.

pub mod cone;
pub mod ensemble;
pub mod estimators;
pub mod mixing;
pub mod pairs;

pub use cone::{cone_estimate_from, estimate_cone_exponent, ConeEstimate, ConeModel};
pub use ensemble::{evolve_ensemble, run_replicate, run_replicates, ParticleEnsemble, ReplicateRun, SplittingModel};
pub use estimators::{estimate_q, estimate_rho1, estimate_xi, q_ratio_convergence, QSequence, SepRow, XiEstimate};
pub use mixing::{mixing_from_runs, Functional, MixingDiagnostic};
pub use pairs::{direct_survival, DirectSurvival, PairModel, PairObservation};
