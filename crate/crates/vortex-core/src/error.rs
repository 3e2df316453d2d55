//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Failures surfaced by the toolkit.
///
/// Domain violations and convergence failures are kept separate from plain
/// input mistakes so that callers (the CLI in particular) can map them to
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A spatial point lies outside the disk where the perturbation is valid.
    #[error("point ({x}, {y}) outside the validity disk of radius {radius}")]
    Domain { x: f64, y: f64, radius: f64 },

    /// A radial coordinate at or below the admissible floor.
    #[error("radial coordinate {r} at or below the domain floor {floor}")]
    RadialDomain { r: f64, floor: f64 },

    /// Evaluation at the vortex location itself.
    #[error("evaluation at the vortex singularity")]
    Singularity,

    /// An integrated trajectory left the domain before the final time.
    #[error("trajectory left the domain at t = {t} (r = {r})")]
    DomainExit { t: f64, r: f64 },

    /// The adaptive step size underflowed.
    #[error("integration step size underflow at t = {t}")]
    StepFailure { t: f64 },

    /// A root bracket that does not straddle its target.
    #[error("bracket [{lo}, {hi}] does not straddle the target angle {target}")]
    Bracket { lo: f64, hi: f64, target: f64 },

    /// An iteration hit its cap without meeting its tolerance.
    #[error("{op} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Orbit solve stalled; the best iterate found so far is attached.
    #[error("orbit solve for ({s}, {q}) stalled at residual {residual:e}")]
    OrbitStalled {
        s: i64,
        q: usize,
        residual: f64,
        best: Box<crate::mather::Orbit>,
    },

    /// A requested rotation number below the admissible window.
    #[error("rotation number {alpha} outside the admissible window (threshold {threshold})")]
    Window { alpha: f64, threshold: f64 },

    /// A map iterate escaped the working strip.
    #[error("iterate {index} left the working strip (r = {r})")]
    StripExit { index: usize, r: f64 },

    /// A continued-fraction denominator beyond the configured cap.
    #[error("convergent denominator {q} exceeds the cap {cap}")]
    Depth { q: i64, cap: i64 },

    /// A target that resolves to a rational within the requested depth.
    #[error("{alpha} is rational within the requested expansion depth")]
    RationalAlpha { alpha: f64 },

    /// The zero-circular-mean hypothesis of the oscillatory estimate fails.
    #[error("circular mean {mean:e} exceeds the zero-mean tolerance {tol:e}")]
    Hypothesis { mean: f64, tol: f64 },

    /// Oscillatory quadrature did not converge under refinement.
    #[error("oscillatory quadrature did not converge (defect {defect:e})")]
    Quadrature { defect: f64 },

    /// Malformed input or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors that signal a usage or configuration mistake rather
    /// than a runtime domain/convergence failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Invalid(_))
    }
}
