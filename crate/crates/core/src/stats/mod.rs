//! Fluctuation functionals, RVE and Green-Kubo estimators of `Q`, normality
//! metrics and scaling fits.

pub mod functionals;
pub mod green_kubo;
pub mod moments;
pub mod normality;
pub mod rve;
pub mod scaling;
pub mod test_function;

pub use functionals::{
    corrector_functionals, corrector_functionals_discrete, epsilon, j0, j0_functional,
    solution_functionals, CorrectorFunctionals, SolutionFunctionals, SolutionProblem,
};
pub use green_kubo::{combine_records, green_kubo_window, GreenKuboEstimate, GreenKuboRecord, GreenKuboWindow};
pub use moments::{moment_estimate, MomentEstimate, MomentSample};
pub use normality::{delta_bootstrap, normality_metrics, BootstrapInterval, NormalityMetrics};
pub use rve::{pilot_reference, q_from_commutator_means, rve_estimate, FluctuationTensor, RveEstimate};
pub use scaling::{mu_d, scaling_fit, Correction, ScalingFit, ScalingPoint, StudyResult};
pub use test_function::{ProfileKind, TestFunction};
