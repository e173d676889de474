//! Airy functions, their zeros, the two Airy eigen-systems and Ψ.

mod eigen;
mod eval;
mod psi;
mod zeros;

pub use eigen::{eigenfunction_halfline, eigenfunction_interval, HalflineEigenfunction, IntervalEigenfunction};
pub use eval::{
    ai, ai_prime, airy, airy_log_modulus, airy_phase, airy_phase_derivative, airy_phase_diff, airy_scaled, bi, bi_prime, zeta, Airy,
    SERIES_MAX,
};
pub use psi::{global_psi, psi, PsiEvaluator, PSI_QUANTUM};
pub use zeros::{
    airy_zero, cross_wronskian_root, lambda_n, normalized_wronskian, AiryZeroTable, CrossWronskianRoot,
    MAX_BRACKET_EXTENSIONS,
};
