//! Minimal orbits, rotation numbers, rational-approximant families for
//! irrational frequencies, and hull functions.
//!
//! An `(s, q)`-periodic orbit makes `s` angular revolutions in `q` periods:
//! `x_{n+q} = x_n + 2πs`, `r_{n+q} = r_n`.  Such configurations are critical
//! points of the action `Σ h(xₙ, xₙ₊₁)` — equivalently, solutions of the
//! discrete Euler-Lagrange system
//!
//! ```text
//!   ∂₁h(xₙ, xₙ₊₁) + ∂₂h(xₙ₋₁, xₙ) = 0,       rₙ = f⁻¹(-∂₁h(xₙ, xₙ₊₁)).
//! ```
//!
//! The solver is damped Newton on the cyclic-tridiagonal Hessian (only
//! nearest-neighbor coupling enters through `∂²₁₂h`), with a gradient-descent
//! fallback when the Newton direction stalls.  Irrational frequencies are
//! approached exclusively through continued-fraction convergents; the
//! convergent orbits are the computable shadow of the invariant set, and the
//! `|xₙ - x₀ - 2πnα| < 2π` deviation bound gives a per-convergent pass/fail
//! certificate.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::Error;
use crate::flow::Flow;
use crate::generating::Generating;
use crate::linsolve::{solve_cyclic_tridiagonal, solve_tridiagonal};
use crate::rational::{convergents, gcd, Convergent};
use crate::Result;

/// A converged `(s, q)`-periodic configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Orbit {
    pub s: i64,
    pub q: usize,
    /// Lift, length `q + 1` with `x[q] = x[0] + 2πs`.
    pub x: Vec<f64>,
    /// Radial components, length `q`.
    pub r: Vec<f64>,
    /// `Σ h(xₙ, xₙ₊₁)`.
    pub action: f64,
    /// Max norm of the discrete Euler-Lagrange residual.
    pub el_residual: f64,
    /// Worst distance between the mapped point `P(rₙ, xₙ)` and
    /// `(rₙ₊₁, xₙ₊₁)`, measured with fresh map evaluations.
    pub map_residual: f64,
    /// Number of Newton steps that had to be shortened to keep the iterate
    /// inside the generating-function domain.
    #[serde(skip)]
    pub clamp_events: usize,
}

impl Orbit {
    pub fn alpha(&self) -> f64 {
        self.s as f64 / self.q as f64
    }

    /// Gap structure of `{xₙ mod 2π}`: the largest circular spacing.
    pub fn largest_gap(&self) -> f64 {
        let mut res: Vec<f64> = self.x[..self.q].iter().map(|x| x.rem_euclid(TAU)).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut gap = res[0] + TAU - res[self.q - 1];
        for w in res.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    }
}

/// Solver options for [`periodic_orbit`].
#[derive(Debug, Clone, Copy)]
pub struct OrbitOpts {
    /// Convergence target on the max-norm Euler-Lagrange residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Step for the finite-difference diagonal of the Hessian.
    pub fd_step: f64,
    /// Margin over the lower domain boundary kept by step limiting.
    pub gap_margin: f64,
    /// Backtracking factor of the line search, in (0, 1).
    pub damping: f64,
}

impl Default for OrbitOpts {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 60,
            fd_step: 1e-5,
            gap_margin: 0.1,
            damping: 0.5,
        }
    }
}

struct ElState {
    pairs: Vec<crate::generating::GeneratingSample>,
    residual: Vec<f64>,
    res_norm: f64,
}

fn el_state(g: &Generating<'_>, s: i64, x: &[f64]) -> Result<ElState> {
    let q = x.len();
    let mut pairs = Vec::with_capacity(q);
    for n in 0..q {
        let x1 = if n + 1 == q {
            x[0] + TAU * s as f64
        } else {
            x[n + 1]
        };
        pairs.push(g.eval(x[n], x1)?);
    }
    let mut residual = Vec::with_capacity(q);
    let mut res_norm = 0.0f64;
    for n in 0..q {
        let prev = (n + q - 1) % q;
        let e = pairs[n].d1h + pairs[prev].d2h;
        res_norm = res_norm.max(e.abs());
        residual.push(e);
    }
    Ok(ElState {
        pairs,
        residual,
        res_norm,
    })
}

/// Largest fraction of the step `delta` that keeps every gap above `floor`.
fn gap_limited_fraction(x: &[f64], s: i64, delta: &[f64], floor: f64) -> f64 {
    let q = x.len();
    let mut tau = 1.0f64;
    for n in 0..q {
        let (gap, dgap) = if n + 1 == q {
            (x[0] + TAU * s as f64 - x[n], delta[0] - delta[n])
        } else {
            (x[n + 1] - x[n], delta[n + 1] - delta[n])
        };
        if dgap < 0.0 {
            let allowed = (gap - floor) / (-dgap);
            if allowed < tau {
                tau = allowed.max(0.0);
            }
        }
    }
    tau
}

fn newton_direction(g: &Generating<'_>, st: &ElState, fd_step: f64, mu: f64) -> Result<Vec<f64>> {
    let q = st.pairs.len();
    let mut diag = Vec::with_capacity(q);
    let mut band = Vec::with_capacity(q);
    for n in 0..q {
        let prev = (n + q - 1) % q;
        let pn = &st.pairs[n];
        let pp = &st.pairs[prev];
        let d11 = g.d11h(pn.x, pn.x1, fd_step)?;
        let d22 = g.d22h(pp.x, pp.x1, fd_step)?;
        diag.push(d11 + d22 + mu);
        band.push(pn.d12h);
    }
    let rhs: Vec<f64> = st.residual.iter().map(|e| -e).collect();
    match q {
        1 => {
            let j = diag[0] + 2.0 * band[0];
            if j == 0.0 {
                return Err(Error::Invalid("singular scalar system".into()));
            }
            Ok(vec![rhs[0] / j])
        }
        2 => {
            let j00 = diag[0];
            let j11 = diag[1];
            let j01 = band[0] + band[1];
            let det = j00 * j11 - j01 * j01;
            if det == 0.0 {
                return Err(Error::Invalid("singular 2x2 system".into()));
            }
            Ok(vec![
                (rhs[0] * j11 - rhs[1] * j01) / det,
                (rhs[1] * j00 - rhs[0] * j01) / det,
            ])
        }
        _ => {
            let sub = band[..q - 1].to_vec();
            let sup = band[..q - 1].to_vec();
            let corner = band[q - 1];
            solve_cyclic_tridiagonal(&sub, &diag, &sup, corner, corner, &rhs).or_else(|_| {
                // Fall back to a non-cyclic solve of the banded part;
                // only used to escape a singular Sherman-Morrison update.
                solve_tridiagonal(&sub, &diag, &sup, &rhs)
            })
        }
    }
}

/// Solve the `(s, q)` Euler-Lagrange system.
///
/// The rotation number `s/q` must lie inside the admissible window of the
/// attached frequency data.  `x_init` defaults to the equispaced
/// configuration `xₙ = 2πns/q`; the returned orbit is normalized so that
/// `x₀ ∈ [0, 2π)`.
pub fn periodic_orbit(
    g: &Generating<'_>,
    s: i64,
    q: usize,
    x_init: Option<&[f64]>,
    opts: &OrbitOpts,
) -> Result<Orbit> {
    if q == 0 || s < 1 {
        return Err(Error::Invalid(format!("invalid orbit type ({s}, {q})")));
    }
    if !(opts.damping > 0.0 && opts.damping < 1.0) {
        return Err(Error::Invalid(format!(
            "damping {} outside (0, 1)",
            opts.damping
        )));
    }
    if gcd(s, q as i64) != 1 {
        return Err(Error::Invalid(format!(
            "orbit type ({s}, {q}) is not in lowest terms"
        )));
    }
    let alpha = s as f64 / q as f64;
    if !g.window().admits(alpha) {
        return Err(Error::Window {
            alpha,
            threshold: g.window().alpha_threshold,
        });
    }

    let mut x: Vec<f64> = match x_init {
        Some(init) => {
            if init.len() != q {
                return Err(Error::Invalid(format!(
                    "x_init length {} does not match q = {q}",
                    init.len()
                )));
            }
            init.to_vec()
        }
        None => (0..q).map(|n| TAU * alpha * n as f64).collect(),
    };

    let gap_floor = TAU * g.window().w_minus + opts.gap_margin;
    let mut clamp_events = 0usize;
    let mut st = el_state(g, s, &x)?;
    let mut best = (x.clone(), st.res_norm);

    let mut iter = 0;
    while st.res_norm >= opts.tol {
        if iter >= opts.max_iter {
            let orbit = finalize(g, s, q, &best.0, clamp_events)?;
            return Err(Error::OrbitStalled {
                s,
                q,
                residual: best.1,
                best: Box::new(orbit),
            });
        }
        iter += 1;

        // Newton direction, with growing diagonal regularization if the
        // cyclic solve is singular (translation-degenerate limit).
        let mut delta = None;
        let mut mu = 0.0;
        for _ in 0..6 {
            match newton_direction(g, &st, opts.fd_step, mu) {
                Ok(d) if d.iter().all(|v| v.is_finite()) => {
                    delta = Some(d);
                    break;
                }
                _ => mu = if mu == 0.0 { 1e-8 } else { mu * 100.0 },
            }
        }

        let mut advanced = false;
        if let Some(delta) = delta {
            let tau = gap_limited_fraction(&x, s, &delta, gap_floor);
            if tau < 1.0 {
                clamp_events += 1;
            }
            let mut lambda = tau;
            for _ in 0..24 {
                if lambda <= 0.0 {
                    break;
                }
                let cand: Vec<f64> = x
                    .iter()
                    .zip(&delta)
                    .map(|(xi, di)| xi + lambda * di)
                    .collect();
                if let Ok(cand_st) = el_state(g, s, &cand) {
                    if cand_st.res_norm < st.res_norm {
                        x = cand;
                        st = cand_st;
                        advanced = true;
                        break;
                    }
                }
                lambda *= opts.damping;
            }
        }

        if !advanced {
            // Gradient descent on the action: the residual is its gradient.
            let mut eta = 0.25;
            for _ in 0..30 {
                let step: Vec<f64> = st.residual.iter().map(|e| -eta * e).collect();
                let tau = gap_limited_fraction(&x, s, &step, gap_floor);
                if tau < 1.0 {
                    clamp_events += 1;
                }
                let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + tau * si).collect();
                if let Ok(cand_st) = el_state(g, s, &cand) {
                    if cand_st.res_norm < st.res_norm {
                        x = cand;
                        st = cand_st;
                        advanced = true;
                        break;
                    }
                }
                eta *= opts.damping;
            }
        }

        if !advanced {
            let orbit = finalize(g, s, q, &best.0, clamp_events)?;
            return Err(Error::OrbitStalled {
                s,
                q,
                residual: best.1,
                best: Box::new(orbit),
            });
        }
        if st.res_norm < best.1 {
            best = (x.clone(), st.res_norm);
        }
    }

    finalize(g, s, q, &x, clamp_events)
}

fn finalize(g: &Generating<'_>, s: i64, q: usize, x: &[f64], clamp_events: usize) -> Result<Orbit> {
    // One representative per translation class: shift x₀ into [0, 2π).
    let shift = TAU * (x[0] / TAU).floor();
    let mut lift: Vec<f64> = x.iter().map(|xi| xi - shift).collect();
    lift.push(lift[0] + TAU * s as f64);

    let st = el_state(g, s, &lift[..q])?;
    let r: Vec<f64> = st.pairs.iter().map(|p| p.r).collect();
    let action: f64 = st.pairs.iter().map(|p| p.h).sum();

    // Map residual against fresh Poincaré evaluations.
    let mut map_residual = 0.0f64;
    for n in 0..q {
        let p = g.flow().poincare(r[n], lift[n])?;
        let (r_next, x_next) = if n + 1 == q {
            (r[0], lift[q])
        } else {
            (r[n + 1], lift[n + 1])
        };
        map_residual = map_residual
            .max((p.r1 - r_next).abs())
            .max((p.theta1 - x_next).abs());
    }

    Ok(Orbit {
        s,
        q,
        x: lift,
        r,
        action,
        el_residual: st.res_norm,
        map_residual,
        clamp_events,
    })
}

/// Residuals of an orbit recomputed from scratch, plus the ordering
/// certificates for the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitResiduals {
    pub el: f64,
    pub map: f64,
    /// `max_n |xₙ - x₀ - 2πn·s/q|`; the certificate requires `< 2π`.
    pub max_rotation_deviation: f64,
    pub rotation_bound_ok: bool,
    /// All translates `x_{n+q'} + 2πs'` comparable with the orbit itself.
    pub comparability_ok: bool,
}

pub fn orbit_residuals(g: &Generating<'_>, orbit: &Orbit) -> Result<OrbitResiduals> {
    let q = orbit.q;
    let s = orbit.s;
    let st = el_state(g, s, &orbit.x[..q])?;

    let mut map = 0.0f64;
    for n in 0..q {
        let p = g.flow().poincare(orbit.r[n], orbit.x[n])?;
        let (r_next, x_next) = if n + 1 == q {
            (orbit.r[0], orbit.x[q])
        } else {
            (orbit.r[n + 1], orbit.x[n + 1])
        };
        map = map
            .max((p.r1 - r_next).abs())
            .max((p.theta1 - x_next).abs());
    }

    let alpha = orbit.alpha();
    let mut max_dev = 0.0f64;
    for (n, &xn) in orbit.x.iter().enumerate() {
        max_dev = max_dev.max((xn - orbit.x[0] - TAU * alpha * n as f64).abs());
    }

    // x_{n} for n in [0, 2q) via the periodic extension.
    let ext = |n: usize| -> f64 {
        if n < q {
            orbit.x[n]
        } else {
            orbit.x[n - q] + TAU * s as f64
        }
    };
    let mut comparability_ok = true;
    let tol = 1e-9;
    for sp in -s..=s {
        for qp in 1..=q {
            let (mut pos, mut neg) = (false, false);
            for n in 0..q {
                let v = ext(n + qp) + TAU * sp as f64 - orbit.x[n];
                if v > tol {
                    pos = true;
                } else if v < -tol {
                    neg = true;
                }
            }
            if pos && neg {
                comparability_ok = false;
            }
        }
    }

    Ok(OrbitResiduals {
        el: st.res_norm,
        map,
        max_rotation_deviation: max_dev,
        rotation_bound_ok: max_dev < TAU,
        comparability_ok,
    })
}

/// Rotation-number estimate from iterated map lifts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationEstimate {
    pub alpha_hat: f64,
    /// Standard error of the fitted slope, in rotation-number units.
    pub stderr: f64,
    pub iterates: usize,
}

/// Iterate the map `n_iter` times from `(r0, θ0)` and fit the angular lift:
/// `α̂` is the least-squares slope over the last half of the iterates,
/// divided by 2π.  Every iterate must stay above `floor`.
pub fn rotation_number(
    flow: &Flow<'_>,
    floor: f64,
    r0: f64,
    theta0: f64,
    n_iter: usize,
) -> Result<RotationEstimate> {
    if n_iter < 4 {
        return Err(Error::Invalid(
            "rotation number needs at least 4 iterates".into(),
        ));
    }
    let mut lifts = Vec::with_capacity(n_iter + 1);
    lifts.push(theta0);
    let (mut r, mut th) = (r0, theta0);
    for index in 0..n_iter {
        let p = flow.poincare(r, th)?;
        r = p.r1;
        th = p.theta1;
        if !(r > floor) {
            return Err(Error::StripExit { index, r });
        }
        lifts.push(th);
    }

    let start = lifts.len() / 2;
    let pts: Vec<(f64, f64)> = lifts[start..]
        .iter()
        .enumerate()
        .map(|(k, &x)| ((start + k) as f64, x))
        .collect();
    let m = pts.len() as f64;
    let mean_n = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_x = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_n).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_n) * (p.1 - mean_x)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let fit = mean_x + slope * (p.0 - mean_n);
            (p.1 - fit).powi(2)
        })
        .sum();
    let stderr = (ss_res / (m - 2.0).max(1.0) / sxx).sqrt() / TAU;
    Ok(RotationEstimate {
        alpha_hat: slope / TAU,
        stderr,
        iterates: n_iter,
    })
}

/// Hull-function samples of one convergent orbit: `φ(ξₙ) = xₙ`,
/// `η(ξₙ) = rₙ` at `ξₙ = 2παn mod 2π`, sorted by `ξ`.
#[derive(Debug, Clone, Serialize)]
pub struct HullSamples {
    pub xi: Vec<f64>,
    pub phi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Strict decreases of `φ` along the sorted samples (flagged, never
    /// repaired).
    pub monotone_violations: usize,
    /// Largest jump of `φ` between adjacent samples.
    pub max_jump: f64,
}

pub fn hull_from_orbit(orbit: &Orbit) -> HullSamples {
    let q = orbit.q;
    let alpha = orbit.alpha();
    let mut rows: Vec<(f64, f64, f64)> = (0..q)
        .map(|n| {
            let xi_lift = TAU * alpha * n as f64;
            let revs = (xi_lift / TAU).floor();
            (xi_lift - TAU * revs, orbit.x[n] - TAU * revs, orbit.r[n])
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut monotone_violations = 0;
    let mut max_jump = 0.0f64;
    for w in rows.windows(2) {
        let jump = w[1].1 - w[0].1;
        if jump < -1e-12 {
            monotone_violations += 1;
        }
        max_jump = max_jump.max(jump.abs());
    }
    // Wrap-around pair: φ(ξ₀ + 2π) = φ(ξ₀) + 2π must not undercut the last
    // sample.
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        if first.1 + TAU < last.1 - 1e-12 {
            monotone_violations += 1;
        }
    }

    HullSamples {
        xi: rows.iter().map(|r| r.0).collect(),
        phi: rows.iter().map(|r| r.1).collect(),
        eta: rows.iter().map(|r| r.2).collect(),
        monotone_violations,
        max_jump,
    }
}

/// Gap-statistic verdict for the invariant set of one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    #[serde(rename = "curve")]
    Curve,
    #[serde(rename = "cantor-candidate")]
    CantorCandidate,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Rational-approximant family for an irrational frequency.
#[derive(Debug, Clone, Serialize)]
pub struct MatherSet {
    pub alpha: f64,
    pub convergents: Vec<Convergent>,
    pub orbits: Vec<Orbit>,
    pub hull: HullSamples,
    /// Largest circular gap of the deepest convergent orbit.
    pub largest_gap: f64,
    /// Gap statistic per convergent, in depth order.
    pub gaps: Vec<f64>,
    pub classification: Classification,
}

/// Compute convergent orbits of `alpha` down to `depth` and assemble the
/// hull samples and gap statistic.
///
/// The classification is a heuristic: an equidistributing orbit family
/// (gap below `2·4π/q`) reads as a curve, a gap that stabilizes above that
/// threshold across the last two depths reads as a Cantor-set candidate,
/// anything else is inconclusive.
pub fn mather_set(
    g: &Generating<'_>,
    alpha: f64,
    depth: usize,
    q_cap: i64,
    opts: &OrbitOpts,
) -> Result<MatherSet> {
    if !g.window().admits(alpha) {
        return Err(Error::Window {
            alpha,
            threshold: g.window().alpha_threshold,
        });
    }
    let convs = convergents(alpha, depth, q_cap)?;
    let mut orbits = Vec::with_capacity(convs.len());
    let mut gaps = Vec::with_capacity(convs.len());
    for c in &convs {
        let orbit = periodic_orbit(g, c.s, c.q as usize, None, opts)?;
        gaps.push(orbit.largest_gap());
        orbits.push(orbit);
    }
    let deepest = orbits.last().expect("depth >= 1");
    let hull = hull_from_orbit(deepest);
    let largest_gap = *gaps.last().unwrap();

    let threshold = 2.0 * (2.0 * TAU) / deepest.q as f64;
    let classification = if largest_gap < threshold {
        Classification::Curve
    } else if gaps.len() >= 2 {
        let prev = gaps[gaps.len() - 2];
        if (largest_gap - prev).abs() <= 0.25 * prev {
            Classification::CantorCandidate
        } else {
            Classification::Inconclusive
        }
    } else {
        Classification::Inconclusive
    };

    Ok(MatherSet {
        alpha,
        convergents: convs,
        orbits,
        hull,
        largest_gap,
        gaps,
        classification,
    })
}

/// Worst defect of the conjugation relation on the deepest convergent:
/// the map applied to `(η(ξ), φ(ξ))` against the samples at `ξ + 2πα`,
/// evaluated with fresh trajectories.
pub fn hull_relation_defect(flow: &Flow<'_>, ms: &MatherSet) -> Result<f64> {
    let orbit = ms.orbits.last().expect("nonempty");
    let q = orbit.q;
    let mut defect = 0.0f64;
    for n in 0..q {
        let p = flow.poincare(orbit.r[n], orbit.x[n])?;
        let (r_next, x_next) = if n + 1 == q {
            (orbit.r[0], orbit.x[q])
        } else {
            (orbit.r[n + 1], orbit.x[n + 1])
        };
        defect = defect
            .max((p.r1 - r_next).abs())
            .max((p.theta1 - x_next).abs());
    }
    Ok(defect)
}

/// Flow-level verification of a solution family.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyReport {
    /// Worst defect of `(r,θ)_{ξ+2π} = (r,θ)_ξ + (0, 2π)` over samples.
    pub max_translation_defect: f64,
    /// Worst defect of `(r(t+1), θ(t+1))_ξ = (r(t), θ(t))_{ξ+2πα}`.
    pub max_timeshift_defect: f64,
    /// Smallest angular advance `θ(1) - θ(0)` over the sampled family
    /// (positive means clockwise rotation of the underlying particle).
    pub min_angular_advance: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `θ̇ > 0` held at every accepted step of every sampled trajectory.
    pub monotone_argument_ok: bool,
}

/// Integrate the flow from hull initial conditions and check the family
/// relations at the requested intermediate times (all in `[0, 1]`).
pub fn verify_solution_family(
    flow: &Flow<'_>,
    ms: &MatherSet,
    n_xi: usize,
    t_samples: &[f64],
) -> Result<FamilyReport> {
    let orbit = ms.orbits.last().expect("nonempty");
    let q = orbit.q;
    let n_xi = n_xi.clamp(1, q);
    let pert = flow.perturbation();

    let mut translation = 0.0f64;
    let mut timeshift = 0.0f64;
    let mut min_advance = f64::INFINITY;
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    let mut monotone_ok = true;

    for k in 0..n_xi {
        let n = k * q / n_xi;
        let (rn, xn) = (orbit.r[n], orbit.x[n]);
        let (rn1, xn1) = if n + 1 == q {
            (orbit.r[0], orbit.x[q])
        } else {
            (orbit.r[n + 1], orbit.x[n + 1])
        };

        let rows = flow.integrate_dense(&crate::flow::AugmentedState::initial(rn, xn), 0.0, 1.0)?;
        for row in &rows {
            r_min = r_min.min(row.r);
            r_max = r_max.max(row.r);
            let (_, g_val) = pert.regularized_field(row.t, row.r, row.theta)?;
            if 2.0 * row.r + g_val <= 0.0 {
                monotone_ok = false;
            }
        }
        min_advance = min_advance.min(rows.last().unwrap().theta - xn);

        for &t in t_samples {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Invalid(format!("t sample {t} outside [0, 1]")));
            }
            let base = flow.integrate(
                &crate::flow::AugmentedState::initial(rn, xn),
                0.0,
                t.max(1e-12),
            )?;
            let shifted = flow.integrate(
                &crate::flow::AugmentedState::initial(rn, xn + TAU),
                0.0,
                t.max(1e-12),
            )?;
            translation = translation
                .max((shifted.r - base.r).abs())
                .max((shifted.theta - base.theta - TAU).abs());

            let long =
                flow.integrate(&crate::flow::AugmentedState::initial(rn, xn), 0.0, 1.0 + t)?;
            let next = flow.integrate(
                &crate::flow::AugmentedState::initial(rn1, xn1),
                0.0,
                t.max(1e-12),
            )?;
            timeshift = timeshift
                .max((long.r - next.r).abs())
                .max((long.theta - next.theta).abs());
        }
    }

    Ok(FamilyReport {
        max_translation_defect: translation,
        max_timeshift_defect: timeshift,
        min_angular_advance: min_advance,
        r_min,
        r_max,
        monotone_argument_ok: monotone_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Tolerances;
    use crate::model::{Perturbation, TimeCoefficient};
    use crate::poincare::{angle_grid, boundary_frequencies, working_strip, StripOpts};
    use crate::rational::golden_mean;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gamma_quartic(gamma: f64) -> Perturbation {
        Perturbation::monomial(4, 0, TimeCoefficient::cosine(gamma, 1), 1.0).unwrap()
    }

    fn setup(
        pert: &Perturbation,
    ) -> (
        Flow<'_>,
        crate::poincare::WorkingStrip,
        crate::poincare::FrequencyWindow,
    ) {
        let tol = Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 1e-2,
        };
        let strip = working_strip(pert, tol, &StripOpts::default()).unwrap();
        let flow = Flow::new(pert)
            .with_tolerances(tol)
            .with_entry_floor(strip.a_star);
        let window = boundary_frequencies(&flow, strip.r_bar, &angle_grid(32)).unwrap();
        (flow, strip, window)
    }

    #[test]
    fn unperturbed_one_one_orbit() {
        let p = Perturbation::zero(1.0);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 1, 1, None, &OrbitOpts::default()).unwrap();
        assert_eq!(orbit.x.len(), 2);
        assert_relative_eq!(orbit.x[1] - orbit.x[0], TAU, epsilon = 1e-12);
        assert_relative_eq!(orbit.r[0], PI, max_relative = 1e-10);
        assert!(orbit.el_residual < 1e-12);
        assert!(orbit.map_residual < 1e-9);
    }

    #[test]
    fn unperturbed_three_two_orbit() {
        let p = Perturbation::zero(1.0);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 3, 2, None, &OrbitOpts::default()).unwrap();
        assert_relative_eq!(orbit.x[1] - orbit.x[0], 3.0 * PI, max_relative = 1e-10);
        for &r in &orbit.r {
            assert_relative_eq!(r, 1.5 * PI, max_relative = 1e-10);
        }
    }

    #[test]
    fn perturbed_seven_two_orbit() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 7, 2, None, &OrbitOpts::default()).unwrap();
        assert!(orbit.el_residual < 1e-10, "el {:e}", orbit.el_residual);
        assert!(orbit.map_residual < 1e-6, "map {:e}", orbit.map_residual);
        let res = orbit_residuals(&g, &orbit).unwrap();
        assert!(res.rotation_bound_ok);
        assert!(res.comparability_ok);
    }

    #[test]
    fn injected_defect_is_detected() {
        let p = Perturbation::zero(1.0);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let mut orbit = periodic_orbit(&g, 3, 2, None, &OrbitOpts::default()).unwrap();
        orbit.x[1] += 0.1;
        let res = orbit_residuals(&g, &orbit).unwrap();
        assert!(res.el > 1e-4, "el {:e}", res.el);
    }

    #[test]
    fn window_refusal_and_type_validation() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let threshold = window.alpha_threshold;
        let g = Generating::new(&flow, strip, window);
        // Threshold is ~0.54 for this perturbation; 1/3 is inadmissible.
        assert!(threshold > 1.0 / 3.0);
        assert!(matches!(
            periodic_orbit(&g, 1, 3, None, &OrbitOpts::default()),
            Err(Error::Window { .. })
        ));
        assert!(periodic_orbit(&g, 2, 4, None, &OrbitOpts::default()).is_err());
        assert!(periodic_orbit(&g, 0, 1, None, &OrbitOpts::default()).is_err());
    }

    #[test]
    fn translation_equivariance_of_the_solve() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let base = periodic_orbit(&g, 3, 2, None, &OrbitOpts::default()).unwrap();
        let shifted_init: Vec<f64> = (0..2).map(|n| TAU * 1.5 * n as f64 + TAU).collect();
        let shifted = periodic_orbit(&g, 3, 2, Some(&shifted_init), &OrbitOpts::default()).unwrap();
        // Both normalize to the same representative.
        for (a, b) in base.x.iter().zip(&shifted.x) {
            assert!((a - b).abs() < 1e-8, "reps differ by {}", (a - b).abs());
        }
    }

    #[test]
    fn action_is_locally_minimal() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 3, 2, None, &OrbitOpts::default()).unwrap();
        for n in 0..orbit.q {
            for delta in [-1e-4, 1e-4] {
                let mut x = orbit.x[..orbit.q].to_vec();
                x[n] += delta;
                let st = el_state(&g, orbit.s, &x).unwrap();
                let action: f64 = st.pairs.iter().map(|p| p.h).sum();
                assert!(
                    action >= orbit.action - 1e-9,
                    "action dropped by {}",
                    orbit.action - action
                );
            }
        }
    }

    #[test]
    fn rotation_number_unperturbed() {
        let p = Perturbation::zero(1.0);
        let flow = Flow::new(&p);
        let est = rotation_number(&flow, 0.5, PI, 0.3, 32).unwrap();
        assert_relative_eq!(est.alpha_hat, 1.0, epsilon = 1e-11);
        let phi = golden_mean();
        let est = rotation_number(&flow, 0.5, PI * phi, 0.0, 32).unwrap();
        assert_relative_eq!(est.alpha_hat, phi, epsilon = 1e-9);
        assert!(est.stderr < 1e-9);
    }

    #[test]
    fn rotation_number_matches_orbit_type() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 7, 2, None, &OrbitOpts::default()).unwrap();
        let est = rotation_number(&flow, strip.a_star, orbit.r[0], orbit.x[0], 200).unwrap();
        assert!(
            (est.alpha_hat - 3.5).abs() < 1e-6,
            "alpha {}",
            est.alpha_hat
        );
        let est = rotation_number(&flow, strip.a_star, orbit.r[0], orbit.x[0], 64).unwrap();
        assert!(
            (est.alpha_hat - 3.5).abs() < 1e-8,
            "alpha {}",
            est.alpha_hat
        );
    }

    #[test]
    fn strip_exit_reports_index() {
        let p = gamma_quartic(0.01);
        let flow = Flow::new(&p);
        // A floor just under the starting radius is crossed immediately for
        // a drifting trajectory.
        let res = rotation_number(&flow, 4.0, 1.0, 0.0, 16);
        assert!(matches!(res, Err(Error::StripExit { index: 0, .. })));
    }

    #[test]
    fn unperturbed_mather_set_is_a_curve() {
        let p = Perturbation::zero(1.0);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let ms = mather_set(&g, golden_mean(), 5, 377, &OrbitOpts::default()).unwrap();
        assert_eq!(ms.convergents.len(), 5);
        assert_eq!(ms.orbits.last().unwrap().q, 8);
        // Equispaced orbits: gap = 2π/q shrinking with depth.
        for (gap, c) in ms.gaps.iter().zip(&ms.convergents) {
            assert_relative_eq!(*gap, TAU / c.q as f64, max_relative = 1e-6);
        }
        assert_eq!(ms.classification, Classification::Curve);
        // Hull samples: φ(ξ) = ξ + x₀, η = πα per convergent.
        let alpha = ms.orbits.last().unwrap().alpha();
        for ((xi, phi), eta) in ms.hull.xi.iter().zip(&ms.hull.phi).zip(&ms.hull.eta) {
            assert_relative_eq!(phi - xi, ms.hull.phi[0] - ms.hull.xi[0], epsilon = 1e-8);
            assert_relative_eq!(*eta, PI * alpha, max_relative = 1e-8);
        }
        assert_eq!(ms.hull.monotone_violations, 0);
    }

    #[test]
    fn perturbed_golden_mather_set() {
        let start = std::time::Instant::now();
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let ms = mather_set(&g, golden_mean(), 8, 377, &OrbitOpts::default()).unwrap();
        assert_eq!(ms.orbits.last().unwrap().q, 34);
        assert!(matches!(
            ms.classification,
            Classification::Curve | Classification::Inconclusive
        ));
        assert_eq!(ms.hull.monotone_violations, 0);
        let defect = hull_relation_defect(&flow, &ms).unwrap();
        assert!(defect < 1e-5, "hull relation defect {defect:e}");
        assert!(start.elapsed().as_secs() < 60);
    }

    #[test]
    fn hull_order_is_preserved_under_rotation() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let orbit = periodic_orbit(&g, 8, 5, None, &OrbitOpts::default()).unwrap();
        let hull = hull_from_orbit(&orbit);
        assert_eq!(hull.monotone_violations, 0);
        assert!(hull.xi.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn family_relations_hold() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        let ms = mather_set(&g, golden_mean(), 4, 377, &OrbitOpts::default()).unwrap();
        let report = verify_solution_family(&flow, &ms, 3, &[0.25, 0.75]).unwrap();
        assert!(
            report.max_translation_defect < 1e-9,
            "translation {:e}",
            report.max_translation_defect
        );
        assert!(
            report.max_timeshift_defect < 1e-5,
            "timeshift {:e}",
            report.max_timeshift_defect
        );
        assert!(report.min_angular_advance > 0.0);
        assert!(report.monotone_argument_ok);
        assert!(report.r_min > strip.r_bar && report.r_max.is_finite());
    }

    #[test]
    fn rational_target_rejected_by_mather_set() {
        let p = gamma_quartic(0.01);
        let (flow, strip, window) = setup(&p);
        let g = Generating::new(&flow, strip, window);
        assert!(matches!(
            mather_set(&g, 1.5, 4, 377, &OrbitOpts::default()),
            Err(Error::RationalAlpha { .. })
        ));
        assert!(matches!(
            mather_set(&g, golden_mean(), 6, 10, &OrbitOpts::default()),
            Err(Error::Depth { .. })
        ));
    }
}
