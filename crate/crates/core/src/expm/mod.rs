//! Exact factorizations of the isomerisation generators and the
//! propagators built on them.

pub mod dense;
pub mod jordan;
pub mod propagate;
pub mod scalar;
pub mod spectral;
pub mod splitting;

pub use dense::{expm_dense, rk4_step_doubling, solve_master_equation, OdeStats};
pub use jordan::{
    binomial_column, expm_a1_action, fast_z_apply, fast_ztilde_apply, taylor_shift, verify_nilpotent, ztilde_dense,
    JordanFactorization,
};
pub use propagate::{propagate, write_solution_csv, PropagateOptions, PropagationMethod};
pub use scalar::{Arithmetic, HpFloat, Real, Scalar};
pub use spectral::{eigenvector_a0, expm_a0_action, EigenvectorMethod, SpectralFactorization};
pub use splitting::{
    adjudicate_splittings, recorded_constants, splitting_constants, AdjudicationReport, FactorOrder, RhoForm,
    SplittingConstants, SplittingMap,
};
