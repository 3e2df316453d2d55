//! Shared fixtures for the benchmarks.

use vortex_core::model::TimeCoefficient;
use vortex_core::Perturbation;

/// The standard benchmark perturbation `p = 0.01 cos(2πt) x⁴` on the unit
/// disk.
pub fn standard_perturbation() -> Perturbation {
    Perturbation::monomial(4, 0, TimeCoefficient::cosine(0.01, 1), 1.0).expect("valid monomial")
}
