//! Grid function spaces, the Green operator of the admissibility equation
//! `x(t) = T(t,tau) x(tau) + int_tau^t (1/s) T(t,s) y(s) ds`, and probes.

mod function;
mod green;
mod probe;

pub use function::{sliding_l1_norm, sup_norm, GridFunction};
pub use green::{
    default_verification_pairs, green_solve, verify_solution, AdmissibilityReport, DichotomyConstants, GreenOptions,
    GreenSolver, VerifyMode,
};
pub use probe::{
    admissibility_probe, default_battery, uniqueness_probe, AdmissibilitySummary, BatteryMember, MemberReport,
    Uniqueness, UniquenessReport, BUMP_TIMES,
};
