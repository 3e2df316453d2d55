//! Time-1 stroboscopic map of the forced flow.
//!
//! One trajectory carries seven scalar components: the state `(r, θ)`, the
//! four entries of the first-variation matrix `Y` (solution of
//! `Ẏ = M(t, r(t), θ(t))·Y`, `Y(0) = I`), and the running action
//!
//! ```text
//!   Ṡ = -½ - ½ ln(2r) - G/(4r) + p(t, x(r,θ), y(r,θ)),
//! ```
//!
//! whose value at t = 1 is the primitive of the exactness relation
//! `dS = f(r₁) dθ₁ - f(r₀) dθ₀`.  Co-integrating `Y` and `S` with the state
//! keeps all three consistent at integrator order.
//!
//! The map preserves the area form `dr ∧ dθ / (4r²)`, so `det Y(t)` must
//! equal `(r(t)/r₀)²`; that identity is measured, not enforced.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mat2::Mat2;
use crate::model::{to_regularized, Perturbation};
use crate::ode::{self, Outcome, StepControl};
use crate::Result;

/// Integration tolerances for one trajectory.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        // θ̇ ≈ 2r₀ can reach 10³-10⁴; the step cap bounds phase error per step.
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1e-2,
        }
    }
}

impl Tolerances {
    fn control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            h_init: None,
        }
    }
}

/// State of the augmented system at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub r: f64,
    /// Lift; never wrapped internally.
    pub theta: f64,
    pub y: Mat2,
    pub action: f64,
}

impl AugmentedState {
    /// Fresh initial condition: `Y = I`, action 0.
    pub fn initial(r: f64, theta: f64) -> Self {
        Self {
            r,
            theta,
            y: Mat2::identity(),
            action: 0.0,
        }
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.r,
            self.theta,
            self.y.a,
            self.y.b,
            self.y.c,
            self.y.d,
            self.action,
        ]
    }

    fn from_array(v: &[f64; 7]) -> Self {
        Self {
            r: v[0],
            theta: v[1],
            y: Mat2::new(v[2], v[3], v[4], v[5]),
            action: v[6],
        }
    }
}

/// One accepted step of a dense integration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub y: Mat2,
    pub action: f64,
}

/// Image of one point under the time-1 map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoincareResult {
    pub r1: f64,
    /// Lift of the image angle.
    pub theta1: f64,
    /// Monodromy matrix; its lower-left entry is `∂θ₁/∂r₀`, the twist
    /// derivative of the map.
    pub y1: Mat2,
    /// Action `S(r₀, θ₀)`.
    pub action: f64,
}

impl PoincareResult {
    /// Twist derivative `∂θ₁/∂r₀`.
    pub fn dg_dr0(&self) -> f64 {
        self.y1.c
    }
}

/// Integrator for the regularized system attached to one perturbation.
#[derive(Debug, Clone)]
pub struct Flow<'a> {
    pert: &'a Perturbation,
    tol: Tolerances,
    entry_floor: f64,
}

impl<'a> Flow<'a> {
    pub fn new(pert: &'a Perturbation) -> Self {
        Self {
            pert,
            tol: Tolerances::default(),
            entry_floor: pert.r_star(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Raise the admissible entry edge (typically to `a* = r* + C1`, below
    /// which a trajectory is not guaranteed to stay in the domain).
    pub fn with_entry_floor(mut self, floor: f64) -> Self {
        self.entry_floor = floor.max(self.pert.r_star());
        self
    }

    pub fn perturbation(&self) -> &Perturbation {
        self.pert
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn entry_floor(&self) -> f64 {
        self.entry_floor
    }

    fn rhs(&self, t: f64, v: &[f64; 7]) -> [f64; 7] {
        let r = v[0];
        let fe = self.pert.field_raw(t, r, v[1]);
        let m = fe.jac;
        let action_rate = -0.5 - 0.5 * (2.0 * r).ln() - fe.g / (4.0 * r) + fe.p_value;
        [
            fe.f,
            2.0 * r + fe.g,
            m.a * v[2] + m.b * v[4],
            m.a * v[3] + m.b * v[5],
            m.c * v[2] + m.d * v[4],
            m.c * v[3] + m.d * v[5],
            action_rate,
        ]
    }

    fn check_entry(&self, r: f64, t0: f64) -> Result<()> {
        if !(r > self.entry_floor) {
            return Err(Error::DomainExit { t: t0, r });
        }
        Ok(())
    }

    /// Endpoint of the augmented system over `[t0, t1]`.
    pub fn integrate(&self, state0: &AugmentedState, t0: f64, t1: f64) -> Result<AugmentedState> {
        self.check_entry(state0.r, t0)?;
        let r_star = self.pert.r_star();
        let out = ode::integrate(
            |t, v| self.rhs(t, v),
            t0,
            t1,
            state0.to_array(),
            &self.tol.control(),
            |_, v| v[0] > r_star && v[0].is_finite(),
        )?;
        match out {
            Outcome::Completed { y } => Ok(AugmentedState::from_array(&y)),
            Outcome::Halted { t, y } => Err(Error::DomainExit { t, r: y[0] }),
        }
    }

    /// Full trajectory over `[t0, t1]`, one record per accepted step
    /// (initial point included).
    pub fn integrate_dense(
        &self,
        state0: &AugmentedState,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<TrajectoryPoint>> {
        self.check_entry(state0.r, t0)?;
        let r_star = self.pert.r_star();
        let mut rows = vec![record(t0, &state0.to_array())];
        let out = ode::integrate(
            |t, v| self.rhs(t, v),
            t0,
            t1,
            state0.to_array(),
            &self.tol.control(),
            |t, v| {
                rows.push(record(t, v));
                v[0] > r_star && v[0].is_finite()
            },
        )?;
        match out {
            Outcome::Completed { .. } => Ok(rows),
            Outcome::Halted { t, y } => Err(Error::DomainExit { t, r: y[0] }),
        }
    }

    /// Time-1 map with monodromy and action.
    ///
    /// The lift is preserved: `poincare(r0, θ0 + 2π)` equals
    /// `poincare(r0, θ0)` shifted by `2π` in the angle.
    pub fn poincare(&self, r0: f64, theta0: f64) -> Result<PoincareResult> {
        let end = self.integrate(&AugmentedState::initial(r0, theta0), 0.0, 1.0)?;
        Ok(PoincareResult {
            r1: end.r,
            theta1: end.theta,
            y1: end.y,
            action: end.action,
        })
    }

    /// Integrate the Cartesian system and the regularized system from the
    /// same physical point over `[0, 1]` and return the max-norm discrepancy
    /// of the endpoints mapped to the regularized chart (angles compared
    /// modulo 2π).
    pub fn conjugacy_check(&self, x0: f64, y0: f64) -> Result<f64> {
        let (r0, theta0) = to_regularized(x0, y0)?;
        self.check_entry(r0, 0.0)?;

        let reg = self.integrate(&AugmentedState::initial(r0, theta0), 0.0, 1.0)?;

        // Radius below which the Cartesian trajectory counts as singular.
        let rho2_min = 1e-12;
        let out = ode::integrate(
            |t, v: &[f64; 2]| {
                let jet = self
                    .pert
                    .jet(t, v[0], v[1], 1, crate::model::TermSelect::All);
                let rho2 = v[0] * v[0] + v[1] * v[1];
                [v[1] / rho2 + jet.dy, -v[0] / rho2 - jet.dx]
            },
            0.0,
            1.0,
            [x0, y0],
            &self.tol.control(),
            |_, v| v[0] * v[0] + v[1] * v[1] > rho2_min,
        )?;
        let cart = match out {
            Outcome::Completed { y } => y,
            Outcome::Halted { .. } => return Err(Error::Singularity),
        };
        let (rc, thc) = to_regularized(cart[0], cart[1])?;
        let dtheta = wrap_angle(thc - reg.theta);
        Ok((rc - reg.r).abs().max(dtheta.abs()))
    }
}

fn record(t: f64, v: &[f64; 7]) -> TrajectoryPoint {
    TrajectoryPoint {
        t,
        r: v[0],
        theta: v[1],
        y: Mat2::new(v[2], v[3], v[4], v[5]),
        action: v[6],
    }
}

/// Reduce an angle difference to `(-π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let mut w = d.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w -= std::f64::consts::TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{from_regularized, C1ScanSpec, TimeCoefficient};
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn gamma_quartic(gamma: f64) -> Perturbation {
        Perturbation::monomial(4, 0, TimeCoefficient::cosine(gamma, 1), 1.0).unwrap()
    }

    #[test]
    fn unperturbed_closed_form() {
        let p = Perturbation::zero(1.0);
        let flow = Flow::new(&p);
        let res = flow.poincare(PI, 0.0).unwrap();
        assert_relative_eq!(res.r1, PI, max_relative = 1e-12);
        assert_relative_eq!(res.theta1, TAU, max_relative = 1e-12);
        let expected_y = Mat2::new(1.0, 0.0, 2.0, 1.0);
        assert!(res.y1.sub(&expected_y).max_norm() < 1e-11);
        assert_relative_eq!(res.action, -0.5 - 0.5 * (TAU).ln(), max_relative = 1e-12);
    }

    #[test]
    fn unperturbed_map_is_rigid_shear() {
        let p = Perturbation::zero(1.0);
        let flow = Flow::new(&p);
        for &(r0, th0) in &[(1.0, 0.3), (7.5, -2.0), (60.0, 14.0)] {
            let res = flow.poincare(r0, th0).unwrap();
            assert_relative_eq!(res.r1, r0, max_relative = 1e-12);
            assert_relative_eq!(res.theta1, th0 + 2.0 * r0, max_relative = 1e-12);
            assert_relative_eq!(res.y1.det(), 1.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn radial_drift_bounded_by_c1() {
        let gamma = 0.01;
        let p = gamma_quartic(gamma);
        let c1 = p.bound_constant_c1(&C1ScanSpec::default()).c1;
        let flow = Flow::new(&p);
        for &th0 in &[0.0, 1.0, 2.5, 4.0, 5.5] {
            let rows = flow
                .integrate_dense(&AugmentedState::initial(10.0, th0), 0.0, 1.0)
                .unwrap();
            for row in &rows {
                assert!((row.r - 10.0).abs() <= c1 * row.t + 1e-9);
            }
        }
    }

    #[test]
    fn determinant_tracks_radial_ratio() {
        let p = gamma_quartic(0.01);
        let tol = Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 1e-2,
        };
        let flow = Flow::new(&p).with_tolerances(tol);
        for &(r0, th0) in &[(2.0, 0.7), (10.0, 3.0), (40.0, 5.0)] {
            let res = flow.poincare(r0, th0).unwrap();
            let expected = (res.r1 / r0) * (res.r1 / r0);
            assert_relative_eq!(res.y1.det(), expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn action_gradient_identity_at_a_point() {
        // Central differences of S against f(r1)·∇θ1 - f(r0)·∇θ0.
        let p = gamma_quartic(0.01);
        let tol = Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 1e-2,
        };
        let flow = Flow::new(&p).with_tolerances(tol);
        let (r0, th0) = (12.0, 1.2);
        let base = flow.poincare(r0, th0).unwrap();
        let d = 1e-3;
        let sp = flow.poincare(r0 + d, th0).unwrap().action;
        let sm = flow.poincare(r0 - d, th0).unwrap().action;
        let ds_dr = (sp - sm) / (2.0 * d);
        let expected_r = crate::weight::f(base.r1) * base.y1.c;
        assert!((ds_dr - expected_r).abs() < 1e-7);

        let sp = flow.poincare(r0, th0 + d).unwrap().action;
        let sm = flow.poincare(r0, th0 - d).unwrap().action;
        let ds_dth = (sp - sm) / (2.0 * d);
        let expected_th = crate::weight::f(base.r1) * base.y1.d - crate::weight::f(r0);
        assert!((ds_dth - expected_th).abs() < 1e-7);
    }

    #[test]
    fn lift_equivariance() {
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p);
        let a = flow.poincare(5.0, 0.4).unwrap();
        let b = flow.poincare(5.0, 0.4 + TAU).unwrap();
        assert!((b.r1 - a.r1).abs() < 1e-9);
        assert!((b.theta1 - a.theta1 - TAU).abs() < 1e-9);
    }

    #[test]
    fn tolerance_halving_is_convergent() {
        let p = gamma_quartic(0.01);
        let rtol = 1e-9;
        let coarse = Flow::new(&p)
            .with_tolerances(Tolerances {
                rtol,
                atol: rtol * 1e-2,
                max_step: 1e-2,
            })
            .poincare(10.0, 0.7)
            .unwrap();
        let fine = Flow::new(&p)
            .with_tolerances(Tolerances {
                rtol: rtol / 2.0,
                atol: rtol * 5e-3,
                max_step: 1e-2,
            })
            .poincare(10.0, 0.7)
            .unwrap();
        let scale = coarse.theta1.abs().max(1.0);
        let diff = (coarse.r1 - fine.r1)
            .abs()
            .max((coarse.theta1 - fine.theta1).abs());
        assert!(diff < 10.0 * rtol * scale, "diff {diff:e}");
    }

    #[test]
    fn entry_below_floor_is_domain_exit() {
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p).with_entry_floor(0.6);
        assert!(matches!(
            flow.poincare(0.55, 0.0),
            Err(Error::DomainExit { .. })
        ));
    }

    #[test]
    fn trajectory_crossing_the_floor_exits() {
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p);
        // Marginal entry with the field initially pushing r down.
        let r0 = p.r_star() * (1.0 + 1e-4);
        let res = flow.poincare(r0, PI / 4.0);
        match res {
            Err(Error::DomainExit { t, r }) => {
                assert!(t > 0.0 && t < 0.5);
                assert!(r <= p.r_star());
            }
            other => panic!("expected domain exit, got {other:?}"),
        }
    }

    #[test]
    fn conjugacy_unperturbed_circle() {
        let p = Perturbation::zero(1.0);
        let flow = Flow::new(&p);
        // Points on the circle r = π (radius 1/√(2π)).
        let rho = 1.0 / (2.0 * PI).sqrt();
        for &phi in &[0.0f64, 1.0, 2.0, 4.5] {
            let d = flow
                .conjugacy_check(rho * phi.cos(), rho * phi.sin())
                .unwrap();
            assert!(d < 1e-9, "discrepancy {d:e}");
        }
    }

    #[test]
    fn conjugacy_perturbed_random_seeds() {
        use rand::{Rng, SeedableRng};
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..6 {
            let r0: f64 = rng.gen_range(10.0..100.0);
            let th0: f64 = rng.gen_range(0.0..TAU);
            let (x0, y0) = from_regularized(r0, th0).unwrap();
            let d = flow.conjugacy_check(x0, y0).unwrap();
            assert!(d < 1e-6, "discrepancy {d:e} at r0 = {r0}");
        }
    }

    #[test]
    fn conjugacy_with_loose_tolerance() {
        let p = gamma_quartic(0.01);
        let (x0, y0) = from_regularized(2.0, 0.9).unwrap();
        let loose = Flow::new(&p)
            .with_tolerances(Tolerances {
                rtol: 1e-4,
                atol: 1e-6,
                max_step: 1e-2,
            })
            .conjugacy_check(x0, y0)
            .unwrap();
        let tight = Flow::new(&p).conjugacy_check(x0, y0).unwrap();
        assert!(loose < 1e-3, "discrepancy {loose:e}");
        assert!(loose >= tight);
    }

    #[test]
    fn dense_output_covers_span() {
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p);
        let rows = flow
            .integrate_dense(&AugmentedState::initial(5.0, 0.0), 0.0, 1.0)
            .unwrap();
        assert_eq!(rows.first().unwrap().t, 0.0);
        assert_eq!(rows.last().unwrap().t, 1.0);
        assert!(rows.len() >= 101); // max_step 1e-2 forces at least 100 steps
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn growth_estimate_is_finite_and_small() {
        let gamma = 0.01;
        let p = gamma_quartic(gamma);
        let c1 = p.bound_constant_c1(&C1ScanSpec::default()).c1;
        let flow = Flow::new(&p);
        let mut k_hat = 0.0f64;
        for &r0 in &[10.0, 20.0, 50.0] {
            for &th0 in &[0.0, 2.0, 4.0] {
                let rows = flow
                    .integrate_dense(&AugmentedState::initial(r0, th0), 0.0, 1.0)
                    .unwrap();
                for row in &rows {
                    let dev = (row.r - r0).abs() + (row.theta - th0 - 2.0 * r0 * row.t).abs();
                    k_hat = k_hat.max(dev);
                }
            }
        }
        let bound = 2.0 * c1 + c1 / (2.0 * (10.0 - c1)) + c1;
        assert!(
            k_hat.is_finite() && k_hat <= bound,
            "K = {k_hat}, bound = {bound}"
        );
    }
}
