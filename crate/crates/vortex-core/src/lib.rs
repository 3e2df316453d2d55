//! Numerical toolkit for the stroboscopic dynamics of a passive particle
//! advected by a point vortex under a small time-periodic forcing.
//!
//! The flow is studied in a chart that sends the vortex to infinity and
//! bounds the vector field there ([`model`]).  On top of the time-1 map
//! ([`flow`]) the crate computes twist profiles and exactness residuals
//! ([`poincare`]), the generating function of the map ([`generating`]),
//! periodic and rational-approximant minimal orbits with their hull
//! functions ([`mather`]), and the asymptotic diagnostics backing the twist
//! limit ([`diagnostics`]).

// Guards are written `!(x > floor)` on purpose: NaN must count as
// out-of-domain, which a flipped comparison would silently admit.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod generating;
pub mod linsolve;
pub mod mat2;
pub mod mather;
pub mod model;
pub mod ode;
pub mod poincare;
pub mod rational;
pub mod weight;

pub use error::Error;
pub use flow::{AugmentedState, Flow, PoincareResult, Tolerances, TrajectoryPoint};
pub use generating::{Generating, GeneratingSample};
pub use mat2::Mat2;
pub use mather::{MatherSet, Orbit};
pub use model::{Perturbation, PerturbationTerm, TimeCoefficient};
pub use poincare::{FrequencyWindow, WorkingStrip};
pub use rational::Convergent;

pub type Result<T> = std::result::Result<T, Error>;
