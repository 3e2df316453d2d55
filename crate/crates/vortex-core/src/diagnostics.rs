//! Numerical verification of the asymptotic machinery: the Jacobian
//! splitting and its radial decay rates, oscillatory-integral decay, and
//! monodromy convergence to the shear limit.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::flow::Flow;
use crate::mat2::Mat2;
use crate::model::{Perturbation, PerturbationTerm, TermSelect, TimeCoefficient};
use crate::Result;

/// Splitting `M = A + B + C` of the field Jacobian along a point, with
/// `A = [[0,0],[2,0]]` and `B` carrying only the top-right entry
/// `b₁₂ = ∂θθ[T₄(t, cosθ, -sinθ)]`, computed from the leading homogeneous
/// block alone (independent of `r`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplittingSample {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub b12: f64,
    /// Remainder `C = M - A - B`.
    pub c: Mat2,
    /// Full Jacobian, for reference.
    pub m: Mat2,
    /// `(r^{3/2}|c₁₁|, r^{1/2}|c₁₂|, r²|c₂₁|, r|c₂₂|)` — each stays bounded
    /// in `r` when the remainder block vanishes to order 5.
    pub scaled: [f64; 4],
}

pub fn splitting(pert: &Perturbation, t: f64, r: f64, theta: f64) -> Result<SplittingSample> {
    let m = pert.field_jacobian(t, r, theta)?;
    let (sn, cs) = theta.sin_cos();
    // Leading-block jet on the unit circle; the homogeneous part factors out
    // of the radial scale, so b₁₂ depends on (t, θ) only.
    let jet = pert.jet(t, cs, -sn, 2, TermSelect::LeadingOnly);
    let b12 = (jet.dxx * sn * sn + 2.0 * jet.dxy * sn * cs + jet.dyy * cs * cs) - jet.dx * cs
        + jet.dy * sn;
    let c = Mat2::new(m.a, m.b - b12, m.c - 2.0, m.d);
    let scaled = [
        r.powf(1.5) * c.a.abs(),
        r.sqrt() * c.b.abs(),
        r * r * c.c.abs(),
        r * c.d.abs(),
    ];
    Ok(SplittingSample {
        t,
        r,
        theta,
        b12,
        c,
        m,
        scaled,
    })
}

/// Range of each scaled remainder norm over a sampling grid.
#[derive(Debug, Clone, Serialize)]
pub struct SplittingScan {
    pub r_grid: Vec<f64>,
    /// Per radius, the max of each scaled norm over the (t, θ) samples.
    pub per_r: Vec<[f64; 4]>,
    /// `(min, max)` of the per-radius maxima, one pair per norm.
    pub ranges: [(f64, f64); 4],
}

pub fn splitting_scan(
    pert: &Perturbation,
    r_grid: &[f64],
    t_samples: usize,
    theta_samples: usize,
) -> Result<SplittingScan> {
    let per_r: Result<Vec<[f64; 4]>> = r_grid
        .par_iter()
        .map(|&r| {
            let mut sup = [0.0f64; 4];
            for it in 0..t_samples {
                let t = it as f64 / t_samples as f64;
                for ik in 0..theta_samples {
                    let theta = TAU * ik as f64 / theta_samples as f64;
                    let s = splitting(pert, t, r, theta)?;
                    for (acc, v) in sup.iter_mut().zip(s.scaled) {
                        *acc = acc.max(v);
                    }
                }
            }
            Ok(sup)
        })
        .collect();
    let per_r = per_r?;
    let mut ranges = [(f64::INFINITY, 0.0f64); 4];
    for sup in &per_r {
        for (range, v) in ranges.iter_mut().zip(sup) {
            range.0 = range.0.min(*v);
            range.1 = range.1.max(*v);
        }
    }
    Ok(SplittingScan {
        r_grid: r_grid.to_vec(),
        per_r,
        ranges,
    })
}

/// Oscillatory probe: `I(λ) = ∫₀¹ q(s, cos(λs+β(s)), sin(λs+β(s))) φ(s) ds`
/// for a trigonometric-polynomial integrand `q` with zero circular mean.
#[derive(Debug, Clone)]
pub struct OscillatoryProbe {
    /// Terms `coeff(t)·η^i·ξ^h` of the polynomial `q(t, η, ξ)`.
    pub poly: Vec<PerturbationTerm>,
    pub beta: TimeCoefficient,
    pub weight: TimeCoefficient,
    pub lambdas: Vec<f64>,
}

impl OscillatoryProbe {
    pub fn degree(&self) -> u32 {
        self.poly.iter().map(|t| t.degree()).max().unwrap_or(0)
    }

    fn eval_poly(&self, t: f64, eta: f64, xi: f64) -> f64 {
        self.poly
            .iter()
            .map(|term| term.coeff.value(t) * eta.powi(term.i as i32) * xi.powi(term.j as i32))
            .sum()
    }

    /// `∫₀^{2π} q(t, cosθ, sinθ) dθ / (2π)` by an alias-free trapezoid rule.
    pub fn circular_mean(&self, t: f64) -> f64 {
        let nodes = 8 * (self.degree() as usize + 1);
        let mut sum = 0.0;
        for k in 0..nodes {
            let th = TAU * k as f64 / nodes as f64;
            sum += self.eval_poly(t, th.cos(), th.sin());
        }
        sum / nodes as f64
    }
}

// 10-point Gauss-Legendre rule on [-1, 1].
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Raw value of `I(λ)` by panel-wise Gauss-Legendre quadrature with at least
/// ten nodes per period of the fastest harmonic `N·λ`; a blindly adaptive
/// rule would miss the cancellation at large `λ`.
pub fn oscillatory_integral(probe: &OscillatoryProbe, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let degree = probe.degree().max(1) as f64;
    let panels = ((degree * lambda / TAU).ceil() as usize).max(16);
    let coarse = composite_gl(probe, lambda, panels);
    let fine = composite_gl(probe, lambda, 2 * panels);
    let defect = (coarse - fine).abs();
    if defect > 1e-12f64.max(1e-8 * fine.abs()) {
        return Err(Error::Quadrature { defect });
    }
    Ok(fine)
}

fn composite_gl(probe: &OscillatoryProbe, lambda: f64, panels: usize) -> f64 {
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for k in 0..5 {
            for sign in [-1.0, 1.0] {
                let s = mid + sign * half * GL_X[k];
                let phase = lambda * s + probe.beta.value(s);
                acc +=
                    GL_W[k] * probe.eval_poly(s, phase.cos(), phase.sin()) * probe.weight.value(s);
            }
        }
        total += acc * half;
    }
    total
}

/// Decay record of the oscillatory probe.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub lambdas: Vec<f64>,
    /// Envelope of `|I|` near each `λ` (max over one `2π` window of offsets,
    /// so the zeros of the oscillating integral do not poison the fit).
    pub integrals: Vec<f64>,
    /// Least-squares slope of `log |I|` against `log λ` over the upper
    /// decade of the probed range.
    pub fitted_exponent: f64,
    /// `max λ·|I(λ)|`.
    pub c_rl_hat: f64,
}

/// Evaluate the probe across its `λ` list and fit the decay exponent.
///
/// Rejects probes whose circular mean is not numerically zero, and `λ`
/// lists that do not span at least two decades.
pub fn oscillatory_decay(probe: &OscillatoryProbe) -> Result<DecayFit> {
    for k in 0..=32 {
        let t = k as f64 / 32.0;
        let mean = probe.circular_mean(t);
        if mean.abs() > 1e-10 {
            return Err(Error::Hypothesis { mean, tol: 1e-10 });
        }
    }
    let mut lambdas = probe.lambdas.clone();
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Invalid("lambda values must be positive".into()));
    }
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (lambdas[0], *lambdas.last().unwrap());
    if hi / lo < 100.0 {
        return Err(Error::Invalid(format!(
            "lambda range [{lo}, {hi}] must span at least two decades"
        )));
    }

    let integrals: Result<Vec<f64>> = lambdas
        .par_iter()
        .map(|&l| {
            let mut env = 0.0f64;
            for j in 0..6 {
                let shifted = l + TAU * j as f64 / 6.0;
                env = env.max(oscillatory_integral(probe, shifted)?.abs());
            }
            Ok(env)
        })
        .collect();
    let integrals = integrals?;

    let cutoff = hi / 10.0;
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(&integrals)
        .filter(|(&l, &v)| l >= cutoff && v > 0.0)
        .map(|(&l, &v)| (l.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Invalid(
            "not enough points in the upper decade".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let fitted_exponent = sxy / sxx;

    let c_rl_hat = lambdas
        .iter()
        .zip(&integrals)
        .map(|(&l, &v)| l * v)
        .fold(0.0f64, f64::max);

    Ok(DecayFit {
        lambdas,
        integrals,
        fitted_exponent,
        c_rl_hat,
    })
}

/// Phase-drift statistics `β(t) = θ(t) - θ₀ - 2r₀t` along one trajectory.
/// Report-only: the sup of the drift and of its rate enter the oscillatory
/// constant but are not certified here.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetaStats {
    pub sup_beta: f64,
    pub sup_beta_dot: f64,
}

pub fn beta_stats(flow: &Flow<'_>, r0: f64, theta0: f64) -> Result<BetaStats> {
    let rows = flow.integrate_dense(&crate::flow::AugmentedState::initial(r0, theta0), 0.0, 1.0)?;
    let pert = flow.perturbation();
    let mut sup_beta = 0.0f64;
    let mut sup_beta_dot = 0.0f64;
    for row in &rows {
        sup_beta = sup_beta.max((row.theta - theta0 - 2.0 * r0 * row.t).abs());
        let (_, g) = pert.regularized_field(row.t, row.r, row.theta)?;
        sup_beta_dot = sup_beta_dot.max((2.0 * (row.r - r0) + g).abs());
    }
    Ok(BetaStats {
        sup_beta,
        sup_beta_dot,
    })
}

/// Deviation of the monodromy matrix from the integrable shear `[[1,0],[2,1]]`
/// along a list of starting radii.
#[derive(Debug, Clone, Serialize)]
pub struct MonodromyScan {
    pub r0_list: Vec<f64>,
    pub deviations: Vec<f64>,
    /// True when the deviations decrease along the radii sorted increasing.
    pub monotone_decay: bool,
}

pub fn monodromy_limit_scan(
    flow: &Flow<'_>,
    r0_list: &[f64],
    theta0: f64,
) -> Result<MonodromyScan> {
    let shear = Mat2::new(1.0, 0.0, 2.0, 1.0);
    let deviations: Result<Vec<f64>> = r0_list
        .par_iter()
        .map(|&r0| Ok(flow.poincare(r0, theta0)?.y1.sub(&shear).max_norm()))
        .collect();
    let deviations = deviations?;
    let mut order: Vec<usize> = (0..r0_list.len()).collect();
    order.sort_by(|&i, &j| r0_list[i].partial_cmp(&r0_list[j]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| deviations[i]).collect();
    let monotone_decay = sorted.windows(2).all(|w| w[1] < w[0]);
    Ok(MonodromyScan {
        r0_list: r0_list.to_vec(),
        deviations,
        monotone_decay,
    })
}
