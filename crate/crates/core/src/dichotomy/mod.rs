//! Dichotomy projections, envelope fits and certificates.

mod certificate;
mod pipeline;
mod projection;
mod subspace;

pub use certificate::{
    fit_bounded_growth, fit_dichotomy, projection_norm_bound, BoundedGrowth, DichotomyCertificate, EnvelopeFit,
    ProjectionBound, ProjectionBoundRow, ResidualRow, Side, Verdict, CERTIFICATE_SCHEMA, DRIFT_BIN, DRIFT_LIMIT,
};
pub use pipeline::{certify, CertifyConfig};
pub use projection::{check_projection, ProjFn, ProjectionFamily, ProjectionKind, ProjectionReport};
pub use subspace::{
    computed_projections, direction_exponents, orbit_exponent, projection_from_bases, projections_from_splitting,
    projections_from_z, splitting_at_one, stable_subspace, unstable_subspace_from_z, SplitConfig, Splitting,
};
