//! Grid-level analysis of the time-1 map: twist profile, exactness
//! residuals, growth constants, and the admissible rotation-number window.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::flow::Flow;
use crate::model::{C1ScanSpec, Perturbation};
use crate::weight;
use crate::Result;

/// Twist derivative `∂θ₁/∂r₀` sampled on a grid.
///
/// Values come from the monodromy matrix; `fd_crosscheck` records the worst
/// disagreement against central finite differences of `θ₁` at three probe
/// points of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct TwistScan {
    pub r_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// `dg_dr0[i][j]` at `(r_grid[i], theta_grid[j])`; `None` where the
    /// trajectory left the domain.
    pub dg_dr0: Vec<Vec<Option<f64>>>,
    /// Per-radius sup of `|∂θ₁/∂r₀ - 2|`.
    pub sup_dev_by_r: Vec<Option<f64>>,
    /// Global sup of the deviation.
    pub sup_dev: f64,
    pub fd_crosscheck: f64,
    /// Least-squares slope of `ln sup_dev` against `ln r`.  Exploratory
    /// output only; no pass/fail is attached to it.
    pub decay_exponent: Option<f64>,
}

pub fn twist_scan(flow: &Flow<'_>, r_grid: &[f64], theta_grid: &[f64]) -> TwistScan {
    let cells: Vec<Vec<Option<f64>>> = r_grid
        .par_iter()
        .map(|&r0| {
            theta_grid
                .iter()
                .map(|&th0| flow.poincare(r0, th0).ok().map(|p| p.dg_dr0()))
                .collect()
        })
        .collect();

    let sup_dev_by_r: Vec<Option<f64>> = cells
        .iter()
        .map(|row| {
            row.iter()
                .filter_map(|v| v.map(|d| (d - 2.0).abs()))
                .fold(None, |acc: Option<f64>, d| {
                    Some(acc.map_or(d, |a| a.max(d)))
                })
        })
        .collect();
    let sup_dev = sup_dev_by_r.iter().flatten().fold(0.0f64, |a, &b| a.max(b));

    // Cross-validate the variational route against finite differences of the
    // map at three deterministic probe points.
    let mut fd_crosscheck = 0.0f64;
    if !r_grid.is_empty() && !theta_grid.is_empty() {
        let probes = [
            (0, 0),
            (r_grid.len() / 2, theta_grid.len() / 2),
            (r_grid.len() - 1, theta_grid.len() - 1),
        ];
        for (i, j) in probes {
            let (r0, th0) = (r_grid[i], theta_grid[j]);
            let d = 1e-5 * r0.abs().max(1.0);
            if let (Some(Some(v)), Ok(p), Ok(m)) = (
                cells.get(i).map(|row| row[j]),
                flow.poincare(r0 + d, th0),
                flow.poincare(r0 - d, th0),
            ) {
                let fd = (p.theta1 - m.theta1) / (2.0 * d);
                fd_crosscheck = fd_crosscheck.max((fd - v).abs());
            }
        }
    }

    let pts: Vec<(f64, f64)> = r_grid
        .iter()
        .zip(&sup_dev_by_r)
        .filter_map(|(&r, d)| d.filter(|&d| d > 0.0).map(|d| (r.ln(), d.ln())))
        .collect();
    let decay_exponent = if pts.len() >= 2 {
        Some(ls_slope(&pts))
    } else {
        None
    };

    TwistScan {
        r_grid: r_grid.to_vec(),
        theta_grid: theta_grid.to_vec(),
        dg_dr0: cells,
        sup_dev_by_r,
        sup_dev,
        fd_crosscheck,
        decay_exponent,
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Worst mismatch between finite differences of the action and the one-form
/// `f(r₁)∇θ₁ - f(r₀)∇θ₀` over a grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactnessScan {
    pub max_residual: f64,
    pub at: (f64, f64),
    pub fd_step: f64,
}

/// `fd_step` must lie in `[1e-7, 1e-3]`.  Richardson extrapolation over two
/// step sizes removes the leading truncation term, so the reported residual
/// is dominated by integrator noise.
pub fn exactness_scan(
    flow: &Flow<'_>,
    r_grid: &[f64],
    theta_grid: &[f64],
    fd_step: f64,
) -> Result<ExactnessScan> {
    if !(1e-7..=1e-3).contains(&fd_step) {
        return Err(Error::Invalid(format!(
            "fd_step {fd_step:e} outside [1e-7, 1e-3]"
        )));
    }
    let mut points = Vec::new();
    for &r0 in r_grid {
        for &th0 in theta_grid {
            points.push((r0, th0));
        }
    }
    let residuals: Result<Vec<f64>> =
        points
            .par_iter()
            .map(|&(r0, th0)| {
                let base = flow.poincare(r0, th0)?;
                let f1 = weight::f(base.r1);
                let ds_dr = richardson(
                    |d| {
                        Ok((flow.poincare(r0 + d, th0)?.action
                            - flow.poincare(r0 - d, th0)?.action)
                            / (2.0 * d))
                    },
                    fd_step,
                )?;
                let ds_dth = richardson(
                    |d| {
                        Ok((flow.poincare(r0, th0 + d)?.action
                            - flow.poincare(r0, th0 - d)?.action)
                            / (2.0 * d))
                    },
                    fd_step,
                )?;
                let res_r = (ds_dr - f1 * base.y1.c).abs();
                let res_th = (ds_dth - (f1 * base.y1.d - weight::f(r0))).abs();
                Ok(res_r.max(res_th))
            })
            .collect();
    let residuals = residuals?;
    let (mut max_residual, mut at) = (0.0f64, (f64::NAN, f64::NAN));
    for (res, &(r0, th0)) in residuals.iter().zip(&points) {
        if *res > max_residual {
            max_residual = *res;
            at = (r0, th0);
        }
    }
    Ok(ExactnessScan {
        max_residual,
        at,
        fd_step,
    })
}

fn richardson(mut fd: impl FnMut(f64) -> Result<f64>, step: f64) -> Result<f64> {
    let coarse = fd(step)?;
    let fine = fd(step / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Empirical sup of `|r(t) - r₀| + |θ(t) - θ₀ - 2r₀t|` over a grid of
/// initial conditions and all accepted steps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KEstimate {
    pub k_hat: f64,
    pub at: (f64, f64),
}

pub fn estimate_k(flow: &Flow<'_>, r_grid: &[f64], theta_grid: &[f64]) -> Result<KEstimate> {
    let mut points = Vec::new();
    for &r0 in r_grid {
        for &th0 in theta_grid {
            points.push((r0, th0));
        }
    }
    let devs: Result<Vec<f64>> = points
        .par_iter()
        .map(|&(r0, th0)| {
            let rows =
                flow.integrate_dense(&crate::flow::AugmentedState::initial(r0, th0), 0.0, 1.0)?;
            Ok(rows
                .iter()
                .map(|p| (p.r - r0).abs() + (p.theta - th0 - 2.0 * r0 * p.t).abs())
                .fold(0.0f64, f64::max))
        })
        .collect();
    let devs = devs?;
    let (mut k_hat, mut at) = (0.0f64, (f64::NAN, f64::NAN));
    for (dev, &pt) in devs.iter().zip(&points) {
        if *dev > k_hat {
            k_hat = *dev;
            at = pt;
        }
    }
    Ok(KEstimate { k_hat, at })
}

/// Angular advance of the map along the lower edge of the working strip and
/// the induced admissible rotation-number threshold.
///
/// The upper boundary frequency is unbounded for this system (the advance
/// `θ₁ - θ₀ ≈ 2r₀` grows without bound), so the admissible window is
/// one-sided: every `α > alpha_threshold` is accepted.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyWindow {
    pub r_bar: f64,
    pub theta_grid: Vec<f64>,
    /// Samples of `α⁻(x) = (θ₁(r̄, x) - x)/(2π)`.
    pub alpha_minus: Vec<f64>,
    /// `max_x α⁻(x)`.
    pub w_minus: f64,
    /// `(2π·W⁻ + 2)/(2π)`.
    pub alpha_threshold: f64,
}

impl FrequencyWindow {
    /// Periodic linear interpolation of the `α⁻` samples.
    pub fn alpha_minus_at(&self, x: f64) -> f64 {
        let n = self.theta_grid.len();
        if n == 0 {
            return f64::NAN;
        }
        if n == 1 {
            return self.alpha_minus[0];
        }
        let xr = x.rem_euclid(TAU);
        let step = TAU / n as f64;
        let k = (xr / step).floor() as usize % n;
        let frac = xr / step - (xr / step).floor();
        let a = self.alpha_minus[k];
        let b = self.alpha_minus[(k + 1) % n];
        a + frac * (b - a)
    }

    pub fn admits(&self, alpha: f64) -> bool {
        alpha > self.alpha_threshold
    }
}

/// `theta_grid` should be uniform on `[0, 2π)` for the interpolation in
/// [`FrequencyWindow::alpha_minus_at`] to be meaningful.
pub fn boundary_frequencies(
    flow: &Flow<'_>,
    r_bar: f64,
    theta_grid: &[f64],
) -> Result<FrequencyWindow> {
    let alpha_minus: Result<Vec<f64>> = theta_grid
        .par_iter()
        .map(|&x| Ok((flow.poincare(r_bar, x)?.theta1 - x) / TAU))
        .collect();
    let alpha_minus = alpha_minus?;
    let w_minus = alpha_minus.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    Ok(FrequencyWindow {
        r_bar,
        theta_grid: theta_grid.to_vec(),
        alpha_minus,
        w_minus,
        alpha_threshold: (TAU * w_minus + 2.0) / TAU,
    })
}

/// The strip on which the map is applied: twist holds, the argument is
/// monotone, and trajectories stay inside the domain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorkingStrip {
    pub r_star: f64,
    pub c1: f64,
    /// `r* + C1`; entry edge guaranteeing no domain exit over one period.
    pub a_star: f64,
    /// Monotone-argument edge: `2r - C1/(2r) > 0` for `r > a1`.
    pub a1: f64,
    /// Probe-grid twist edge: smallest sampled radius with `∂θ₁/∂r₀ > 0`
    /// at every probe angle.  A numerical surrogate, logged rather than
    /// proven.
    pub a2: f64,
    pub k_hat: f64,
    /// `max{a*, a1, a2} + K`.
    pub r_bar: f64,
}

/// Probe resolution for [`working_strip`].
#[derive(Debug, Clone)]
pub struct StripOpts {
    pub theta_probes: usize,
    pub r_probes: usize,
    /// Radial span (as a factor over the lower edge) for the K estimate.
    pub k_span: f64,
    pub c1_scan: C1ScanSpec,
}

impl Default for StripOpts {
    fn default() -> Self {
        Self {
            theta_probes: 16,
            r_probes: 12,
            k_span: 20.0,
            c1_scan: C1ScanSpec::default(),
        }
    }
}

pub fn working_strip(
    pert: &Perturbation,
    tol: crate::flow::Tolerances,
    opts: &StripOpts,
) -> Result<WorkingStrip> {
    let r_star = pert.r_star();
    let bound = pert.bound_constant_c1(&opts.c1_scan);
    let (c1, a_star) = (bound.c1, bound.a_star);
    let a1 = c1.sqrt() / 2.0;
    let base = a_star.max(a1);

    let flow = Flow::new(pert).with_tolerances(tol);
    let thetas: Vec<f64> = (0..opts.theta_probes)
        .map(|k| TAU * k as f64 / opts.theta_probes as f64)
        .collect();

    // Twist probe: geometric ladder of radii upward from the entry edge.
    let mut a2 = None;
    let mut probe = base * (1.0 + 1e-3);
    for _ in 0..24 {
        let twist_ok = thetas.iter().all(|&th| {
            flow.poincare(probe, th)
                .map(|p| p.dg_dr0() > 0.0)
                .unwrap_or(false)
        });
        if twist_ok {
            a2 = Some(probe);
            break;
        }
        probe *= 1.5;
    }
    let a2 = a2.ok_or(Error::NoConvergence {
        op: "twist edge probe",
        iterations: 24,
        residual: probe,
    })?;

    let edge = base.max(a2);
    let rs: Vec<f64> = (0..opts.r_probes)
        .map(|k| {
            let frac = k as f64 / (opts.r_probes.max(2) - 1) as f64;
            edge * (1.0 + 1e-3) * opts.k_span.powf(frac)
        })
        .collect();
    let k_hat = estimate_k(&flow, &rs, &thetas)?.k_hat;

    Ok(WorkingStrip {
        r_star,
        c1,
        a_star,
        a1,
        a2,
        k_hat,
        r_bar: edge + k_hat,
    })
}

/// Uniform grid helper: `n` points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// `n` equally spaced angles on `[0, 2π)`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}
