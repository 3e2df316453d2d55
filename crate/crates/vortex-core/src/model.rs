//! Perturbation model and the two coordinate charts of the advection field.
//!
//! The streamfunction is `Ψ(t,x,y) = ½ ln(x²+y²) + p(t,x,y)` where the
//! perturbation `p` is a finite polynomial in `(x,y)` with finite Fourier
//! coefficients in `t` (period 1).  Its leading part is homogeneous of degree
//! 4, so the origin is a zero of order 4 and every derivative is available in
//! closed form.
//!
//! The chart `r = 1/(2(x²+y²))`, `θ = -Arg(x+iy)` (clockwise angle, stored as
//! an unbounded lift) sends the vortex to `r = ∞` and turns the system into
//!
//! ```text
//!   ṙ = F(t,r,θ),    θ̇ = 2r + G(t,r,θ)
//! ```
//!
//! with `F = 4r² ∂θ[p∘φ]` and `G = -4r² ∂r[p∘φ]`, both bounded on
//! `r > r* = 1/(2ε²)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mat2::Mat2;
use crate::Result;

/// Degree of the leading homogeneous block; lower-order perturbations are
/// rejected at construction.
pub const LEADING_DEGREE: u32 = 4;

/// Finite Fourier sum `a0 + Σ_m cos[m-1]·cos(2πmt) + sin[m-1]·sin(2πmt)`,
/// periodic in `t` with period 1.
///
/// `t` is reduced modulo 1 before evaluation, so the periodicity is exact in
/// floating point, not just up to rounding of large arguments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeCoefficient {
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TimeCoefficient {
    pub fn constant(a0: f64) -> Self {
        Self {
            a0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    /// Single cosine harmonic `amp·cos(2π m t)`.
    pub fn cosine(amp: f64, m: usize) -> Self {
        assert!(m >= 1);
        let mut cos = vec![0.0; m];
        cos[m - 1] = amp;
        Self {
            a0: 0.0,
            cos,
            sin: Vec::new(),
        }
    }

    /// Single sine harmonic `amp·sin(2π m t)`.
    pub fn sine(amp: f64, m: usize) -> Self {
        assert!(m >= 1);
        let mut sin = vec![0.0; m];
        sin[m - 1] = amp;
        Self {
            a0: 0.0,
            cos: Vec::new(),
            sin,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        let mut v = self.a0;
        for (k, &a) in self.cos.iter().enumerate() {
            if a != 0.0 {
                v += a * (TAU * (k + 1) as f64 * t).cos();
            }
        }
        for (k, &b) in self.sin.iter().enumerate() {
            if b != 0.0 {
                v += b * (TAU * (k + 1) as f64 * t).sin();
            }
        }
        v
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        let mut v = 0.0;
        for (k, &a) in self.cos.iter().enumerate() {
            if a != 0.0 {
                let w = TAU * (k + 1) as f64;
                v -= a * w * (w * t).sin();
            }
        }
        for (k, &b) in self.sin.iter().enumerate() {
            if b != 0.0 {
                let w = TAU * (k + 1) as f64;
                v += b * w * (w * t).cos();
            }
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.a0 == 0.0 && self.cos.iter().all(|&a| a == 0.0) && self.sin.iter().all(|&b| b == 0.0)
    }

    /// `max_t |value| + max_t |derivative|`, bounded by the coefficient sums.
    pub fn magnitude(&self) -> f64 {
        let mut m = self.a0.abs();
        let mut md = 0.0;
        for (k, &a) in self.cos.iter().enumerate() {
            m += a.abs();
            md += a.abs() * TAU * (k + 1) as f64;
        }
        for (k, &b) in self.sin.iter().enumerate() {
            m += b.abs();
            md += b.abs() * TAU * (k + 1) as f64;
        }
        m + md
    }
}

/// One monomial `coeff(t) · x^i · y^j` of the perturbation (or, in the
/// oscillatory diagnostics, `coeff(t) · η^i · ξ^j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerm {
    pub i: u32,
    pub j: u32,
    #[serde(flatten)]
    pub coeff: TimeCoefficient,
}

impl PerturbationTerm {
    pub fn new(i: u32, j: u32, coeff: TimeCoefficient) -> Self {
        Self { i, j, coeff }
    }

    pub fn degree(&self) -> u32 {
        self.i + self.j
    }
}

/// Serialized layout of [`Perturbation`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PerturbationSchema {
    degree: u32,
    epsilon: f64,
    terms: Vec<PerturbationTerm>,
    #[serde(default)]
    remainder: Vec<PerturbationTerm>,
}

/// Time-periodic polynomial streamfunction perturbation `p = T₄ + p̃`.
///
/// `leading` carries the degree-4 homogeneous block `T₄`; `remainder` carries
/// terms of degree ≥ 5.  `epsilon` is the radius of the validity disk; all
/// spatial evaluations are rejected outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerturbationSchema", into = "PerturbationSchema")]
pub struct Perturbation {
    epsilon: f64,
    leading: Vec<PerturbationTerm>,
    remainder: Vec<PerturbationTerm>,
}

impl TryFrom<PerturbationSchema> for Perturbation {
    type Error = Error;

    fn try_from(s: PerturbationSchema) -> Result<Self> {
        if s.degree != LEADING_DEGREE {
            return Err(Error::Invalid(format!(
                "perturbation degree must be {LEADING_DEGREE}, got {}",
                s.degree
            )));
        }
        Perturbation::new(s.epsilon, s.terms, s.remainder)
    }
}

impl From<Perturbation> for PerturbationSchema {
    fn from(p: Perturbation) -> Self {
        PerturbationSchema {
            degree: LEADING_DEGREE,
            epsilon: p.epsilon,
            terms: p.leading,
            remainder: p.remainder,
        }
    }
}

impl Perturbation {
    pub fn new(
        epsilon: f64,
        leading: Vec<PerturbationTerm>,
        remainder: Vec<PerturbationTerm>,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        for term in &leading {
            if term.degree() != LEADING_DEGREE {
                return Err(Error::Invalid(format!(
                    "leading term x^{} y^{} has degree {} (must be {LEADING_DEGREE})",
                    term.i,
                    term.j,
                    term.degree()
                )));
            }
        }
        for term in &remainder {
            if term.degree() <= LEADING_DEGREE {
                return Err(Error::Invalid(format!(
                    "remainder term x^{} y^{} has degree {} (must exceed {LEADING_DEGREE})",
                    term.i,
                    term.j,
                    term.degree()
                )));
            }
        }
        Ok(Self {
            epsilon,
            leading,
            remainder,
        })
    }

    /// The zero perturbation on a disk of radius `epsilon`.
    pub fn zero(epsilon: f64) -> Self {
        Self::new(epsilon, Vec::new(), Vec::new()).expect("positive epsilon")
    }

    /// Single leading monomial `coeff(t)·x^i·y^j` with `i+j = 4`.
    pub fn monomial(i: u32, j: u32, coeff: TimeCoefficient, epsilon: f64) -> Result<Self> {
        Self::new(
            epsilon,
            vec![PerturbationTerm::new(i, j, coeff)],
            Vec::new(),
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Invalid(format!("perturbation JSON: {e}")))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Lower edge `r* = 1/(2ε²)` of the regularized domain.
    pub fn r_star(&self) -> f64 {
        1.0 / (2.0 * self.epsilon * self.epsilon)
    }

    pub fn leading_terms(&self) -> &[PerturbationTerm] {
        &self.leading
    }

    pub fn remainder_terms(&self) -> &[PerturbationTerm] {
        &self.remainder
    }

    pub fn is_zero(&self) -> bool {
        self.leading.iter().all(|t| t.coeff.is_zero())
            && self.remainder.iter().all(|t| t.coeff.is_zero())
    }

    /// Value and spatial partial derivatives of `p` at `(t, x, y)`, up to
    /// `order ≤ 3`.  The evaluation is exact polynomial/Fourier arithmetic.
    pub fn eval(&self, t: f64, x: f64, y: f64, order: u8) -> Result<SpatialJet> {
        if order > 3 {
            return Err(Error::Invalid(format!(
                "derivative order {order} exceeds 3"
            )));
        }
        self.check_disk(x, y)?;
        Ok(self.jet(t, x, y, order, TermSelect::All))
    }

    fn check_disk(&self, x: f64, y: f64) -> Result<()> {
        if x * x + y * y >= self.epsilon * self.epsilon {
            return Err(Error::Domain {
                x,
                y,
                radius: self.epsilon,
            });
        }
        Ok(())
    }

    pub(crate) fn jet(&self, t: f64, x: f64, y: f64, order: u8, select: TermSelect) -> SpatialJet {
        let mut jet = SpatialJet {
            order,
            ..SpatialJet::default()
        };
        let both = [&self.leading, &self.remainder];
        let parts: &[&Vec<PerturbationTerm>] = match select {
            TermSelect::All => &both,
            TermSelect::LeadingOnly => &both[..1],
        };
        for terms in parts {
            for term in terms.iter() {
                let a = term.coeff.value(t);
                if a == 0.0 {
                    continue;
                }
                let (i, j) = (term.i, term.j);
                jet.v += a * mono(x, i, 0) * mono(y, j, 0);
                if order >= 1 {
                    jet.dx += a * mono(x, i, 1) * mono(y, j, 0);
                    jet.dy += a * mono(x, i, 0) * mono(y, j, 1);
                }
                if order >= 2 {
                    jet.dxx += a * mono(x, i, 2) * mono(y, j, 0);
                    jet.dxy += a * mono(x, i, 1) * mono(y, j, 1);
                    jet.dyy += a * mono(x, i, 0) * mono(y, j, 2);
                }
                if order >= 3 {
                    jet.dxxx += a * mono(x, i, 3) * mono(y, j, 0);
                    jet.dxxy += a * mono(x, i, 2) * mono(y, j, 1);
                    jet.dxyy += a * mono(x, i, 1) * mono(y, j, 2);
                    jet.dyyy += a * mono(x, i, 0) * mono(y, j, 3);
                }
            }
        }
        jet
    }

    /// Right-hand side of the Cartesian system: `(ẋ, ẏ) = (∂yΨ, -∂xΨ)`.
    pub fn cartesian_field(&self, t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
        let rho2 = x * x + y * y;
        if rho2 == 0.0 {
            return Err(Error::Singularity);
        }
        self.check_disk(x, y)?;
        let jet = self.jet(t, x, y, 1, TermSelect::All);
        Ok((y / rho2 + jet.dy, -x / rho2 - jet.dx))
    }

    /// Regularized field `(F, G)` with `ṙ = F` and `θ̇ = 2r + G`.
    pub fn regularized_field(&self, t: f64, r: f64, theta: f64) -> Result<(f64, f64)> {
        self.check_floor(r)?;
        let fe = self.field_raw(t, r, theta);
        Ok((fe.f, fe.g))
    }

    /// Jacobian `M = ∂(F, 2r+G)/∂(r, θ)` of the regularized field.
    pub fn field_jacobian(&self, t: f64, r: f64, theta: f64) -> Result<Mat2> {
        self.check_floor(r)?;
        Ok(self.field_raw(t, r, theta).jac)
    }

    fn check_floor(&self, r: f64) -> Result<()> {
        let floor = self.r_star();
        if !(r > floor) {
            return Err(Error::RadialDomain { r, floor });
        }
        Ok(())
    }

    /// Field, Jacobian and pointwise value of `p∘φ` in one jet evaluation.
    ///
    /// No domain check; callers integrating through transient stage values
    /// rely on NaN propagation for `r ≤ 0` and reject such steps.
    pub(crate) fn field_raw(&self, t: f64, r: f64, theta: f64) -> FieldEval {
        let two_r = 2.0 * r;
        let s2r = two_r.sqrt();
        let u = 1.0 / s2r;
        let (sn, cs) = theta.sin_cos();
        let x = u * cs;
        let y = -u * sn;
        let jet = self.jet(t, x, y, 2, TermSelect::All);

        // Directional combinations of the spatial gradient and Hessian that
        // the chain rule through x = u cosθ, y = -u sinθ produces.
        let a1 = jet.dx * sn + jet.dy * cs;
        let a2 = jet.dx * cs - jet.dy * sn;
        let q1 = jet.dxx * sn * sn + 2.0 * jet.dxy * sn * cs + jet.dyy * cs * cs;
        let q2 = jet.dxx * cs * cs - 2.0 * jet.dxy * sn * cs + jet.dyy * sn * sn;
        let bq = (jet.dyy - jet.dxx) * sn * cs - jet.dxy * (cs * cs - sn * sn);

        let s2r3 = two_r * s2r;
        let f = -s2r3 * a1;
        let g = s2r * a2;
        let jac = Mat2::new(
            -3.0 * s2r * a1 - bq,
            two_r * q1 - s2r3 * a2,
            2.0 + a2 / s2r - q2 / two_r,
            bq - s2r * a1,
        );
        FieldEval {
            f,
            g,
            jac,
            p_value: jet.v,
        }
    }

    /// Empirical bound `C1 = sup |F| + |2r||G|` over a dense sample, and the
    /// induced safe entry edge `a* = r* + C1`.
    pub fn bound_constant_c1(&self, spec: &C1ScanSpec) -> C1Bound {
        let r_star = self.r_star();
        let mut c1 = 0.0f64;
        let r_lo = r_star * (1.0 + 1e-6);
        let ratio = spec.r_max_factor.max(1.0 + 1e-6);
        for it in 0..spec.t_samples {
            let t = it as f64 / spec.t_samples as f64;
            for ik in 0..spec.theta_samples {
                let theta = TAU * ik as f64 / spec.theta_samples as f64;
                for ir in 0..spec.r_samples {
                    let frac = ir as f64 / (spec.r_samples.max(2) - 1) as f64;
                    let r = r_lo * ratio.powf(frac);
                    let fe = self.field_raw(t, r, theta);
                    let v = fe.f.abs() + 2.0 * r * fe.g.abs();
                    if v > c1 {
                        c1 = v;
                    }
                }
            }
        }
        C1Bound {
            c1,
            a_star: r_star + c1,
        }
    }
}

/// Which block of terms a jet evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TermSelect {
    All,
    LeadingOnly,
}

/// `x^p` differentiated `d` times: falling factorial times `x^(p-d)`.
fn mono(x: f64, p: u32, d: u32) -> f64 {
    if d > p {
        return 0.0;
    }
    let mut fall = 1.0;
    for k in 0..d {
        fall *= (p - k) as f64;
    }
    fall * x.powi((p - d) as i32)
}

/// Value and spatial partials of the perturbation at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpatialJet {
    pub order: u8,
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
    pub dxxx: f64,
    pub dxxy: f64,
    pub dxyy: f64,
    pub dyyy: f64,
}

/// Field value, Jacobian and perturbation value bundled for the integrator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FieldEval {
    pub f: f64,
    pub g: f64,
    pub jac: Mat2,
    pub p_value: f64,
}

/// Sampling resolution for [`Perturbation::bound_constant_c1`].
#[derive(Debug, Clone)]
pub struct C1ScanSpec {
    pub t_samples: usize,
    pub theta_samples: usize,
    pub r_samples: usize,
    /// Upper end of the radial sample range, as a multiple of `r*`.
    pub r_max_factor: f64,
}

impl Default for C1ScanSpec {
    fn default() -> Self {
        Self {
            t_samples: 48,
            theta_samples: 192,
            r_samples: 12,
            r_max_factor: 1000.0,
        }
    }
}

/// Result of the `C1` scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct C1Bound {
    pub c1: f64,
    pub a_star: f64,
}

/// Point of a trajectory in the regularized chart.  `theta` is a lift; it is
/// never wrapped internally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizedState {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
}

/// Chart map `(x, y) → (r, θ)` with `r = 1/(2(x²+y²))`, `θ = -Arg(x+iy)`;
/// the returned angle lies in `(-π, π]`.
pub fn to_regularized(x: f64, y: f64) -> Result<(f64, f64)> {
    let rho2 = x * x + y * y;
    if rho2 == 0.0 {
        return Err(Error::Singularity);
    }
    let r = 0.5 / rho2;
    let mut theta = -y.atan2(x);
    if theta == -PI {
        theta = PI;
    }
    Ok((r, theta))
}

/// Inverse chart map: `x = cosθ/√(2r)`, `y = -sinθ/√(2r)`.
pub fn from_regularized(r: f64, theta: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!(
            "radial coordinate must be positive, got {r}"
        )));
    }
    let u = 1.0 / (2.0 * r).sqrt();
    let (sn, cs) = theta.sin_cos();
    Ok((u * cs, -u * sn))
}
