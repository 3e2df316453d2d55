//! Full invariant battery run by the `verify` command: every module's
//! checkable property, evaluated on the configured perturbation, with one
//! pass/fail record per check.

use serde::Serialize;
use serde_json::json;
use vortex_core::diagnostics::{
    monodromy_limit_scan, oscillatory_decay, splitting_scan, OscillatoryProbe,
};
use vortex_core::generating::Generating;
use vortex_core::mather::{
    hull_relation_defect, mather_set, orbit_residuals, periodic_orbit, rotation_number,
    verify_solution_family,
};
use vortex_core::model::{from_regularized, to_regularized, PerturbationTerm, TimeCoefficient};
use vortex_core::poincare::{
    angle_grid, boundary_frequencies, estimate_k, exactness_scan, linspace, twist_scan,
    working_strip,
};
use vortex_core::rational::golden_mean;
use vortex_core::{Error, Flow, Perturbation, Tolerances};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub values: serde_json::Value,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, values: serde_json::Value, threshold: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            values,
            threshold: threshold.into(),
            pass,
        }
    }
}

fn tight(tol: Tolerances) -> Tolerances {
    Tolerances {
        rtol: tol.rtol.min(1e-12),
        atol: tol.atol.min(1e-14),
        max_step: tol.max_step,
    }
}

/// Run every check; returns the records (the caller decides the exit code).
pub fn run_battery(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let mut checks = Vec::new();
    let pert = cfg.perturbation.clone();
    let tol = cfg.integrator.tolerances();

    let mut strip =
        working_strip(&pert, tol, &cfg.strip.strip_opts()).map_err(|e| battery_err("strip", e))?;
    if let Some(r_bar) = cfg.strip.r_bar {
        strip.r_bar = r_bar;
    }
    let flow = Flow::new(&pert)
        .with_tolerances(tol)
        .with_entry_floor(strip.a_star);
    let flow_tight = Flow::new(&pert)
        .with_tolerances(tight(tol))
        .with_entry_floor(strip.a_star);

    // Chart round trip.
    {
        let mut worst = 0.0f64;
        for k in 0..512 {
            let r = 0.6 + 40.0 * k as f64 / 512.0;
            let th = 12.0 * k as f64 / 512.0 - 6.0;
            let (x, y) = from_regularized(r, th).unwrap();
            let (r2, th2) = to_regularized(x, y).unwrap();
            worst = worst
                .max((r2 - r).abs() / r.max(1.0))
                .max(vortex_core::flow::wrap_angle(th2 - th).abs());
        }
        checks.push(Check::new(
            "chart round trip",
            json!({ "max_error": worst }),
            "< 1e-12",
            worst < 1e-12,
        ));
    }

    // Conjugacy of the two charts along trajectories.
    {
        let mut worst = 0.0f64;
        for &(r0, th0) in &[
            (2.0 * strip.r_bar + 1.0, 0.9),
            (10.0 * strip.r_bar + 5.0, 2.7),
            (20.0 * strip.r_bar + 20.0, 5.1),
        ] {
            let (x0, y0) = from_regularized(r0, th0).unwrap();
            worst = worst.max(flow.conjugacy_check(x0, y0)?);
        }
        checks.push(Check::new(
            "chart conjugacy along the flow",
            json!({ "max_discrepancy": worst }),
            "< 1e-6",
            worst < 1e-6,
        ));
    }

    // Field Jacobian against finite differences.
    {
        let mut worst = 0.0f64;
        for &r in &[strip.r_bar * 2.0 + 1.0, strip.r_bar * 20.0 + 10.0] {
            for &th in &[0.4, 2.1, 4.9] {
                for &t in &[0.0, 0.37] {
                    let m = pert.field_jacobian(t, r, th)?;
                    let hr = 1e-5 * r.max(1.0);
                    let ht = 1e-5;
                    let (fp, gp) = pert.regularized_field(t, r + hr, th)?;
                    let (fm, gm) = pert.regularized_field(t, r - hr, th)?;
                    let (ftp, gtp) = pert.regularized_field(t, r, th + ht)?;
                    let (ftm, gtm) = pert.regularized_field(t, r, th - ht)?;
                    let scale = m.max_norm().max(1.0);
                    worst = worst
                        .max((m.a - (fp - fm) / (2.0 * hr)).abs() / scale)
                        .max((m.b - (ftp - ftm) / (2.0 * ht)).abs() / scale)
                        .max((m.c - 2.0 - (gp - gm) / (2.0 * hr)).abs() / scale)
                        .max((m.d - (gtp - gtm) / (2.0 * ht)).abs() / scale);
                }
            }
        }
        checks.push(Check::new(
            "field Jacobian vs finite differences",
            json!({ "max_relative_error": worst }),
            "< 1e-6",
            worst < 1e-6,
        ));
    }

    // Integrable reference: zero perturbation on the same disk.
    {
        let zero = Perturbation::zero(pert.epsilon());
        let zflow = Flow::new(&zero).with_tolerances(tol);
        let mut worst = 0.0f64;
        for &r0 in &[5.0, 20.0, 80.0] {
            for &th0 in &[0.0, 2.5] {
                let p = zflow.poincare(r0, th0)?;
                worst = worst
                    .max((p.r1 - r0).abs())
                    .max((p.theta1 - th0 - 2.0 * r0).abs())
                    .max(
                        p.y1.sub(&vortex_core::Mat2::new(1.0, 0.0, 2.0, 1.0))
                            .max_norm(),
                    )
                    .max((p.action + 0.5 + 0.5 * (2.0 * r0).ln()).abs());
            }
        }
        checks.push(Check::new(
            "integrable closed form",
            json!({ "max_deviation": worst }),
            "< 1e-9",
            worst < 1e-9,
        ));
    }

    // Symplectic defect: det Y(1) = (r1/r0)².
    {
        let mut worst = 0.0f64;
        for &r0 in &linspace(2.0 * strip.r_bar + 5.0, 40.0 * strip.r_bar + 60.0, 5) {
            for &th0 in &angle_grid(4) {
                let p = flow_tight.poincare(r0, th0)?;
                let expected = (p.r1 / r0) * (p.r1 / r0);
                worst = worst.max((p.y1.det() / expected - 1.0).abs());
            }
        }
        checks.push(Check::new(
            "determinant identity det Y = (r1/r0)^2",
            json!({ "max_relative_defect": worst }),
            "< 1e-8",
            worst < 1e-8,
        ));
    }

    // Exactness of the action one-form.
    {
        let scan = exactness_scan(
            &flow_tight,
            &linspace(2.0 * strip.r_bar + 5.0, 20.0 * strip.r_bar + 50.0, 6),
            &angle_grid(6),
            1e-3,
        )?;
        checks.push(Check::new(
            "action one-form exactness",
            json!({ "max_residual": scan.max_residual, "at": scan.at }),
            "< 1e-6",
            scan.max_residual < 1e-6,
        ));
    }

    // Lift equivariance.
    {
        let r0 = 3.0 * strip.r_bar + 2.0;
        let a = flow.poincare(r0, 0.7)?;
        let b = flow.poincare(r0, 0.7 + std::f64::consts::TAU)?;
        let defect = (b.r1 - a.r1)
            .abs()
            .max((b.theta1 - a.theta1 - std::f64::consts::TAU).abs());
        checks.push(Check::new(
            "lift equivariance",
            json!({ "defect": defect }),
            "< 1e-9",
            defect < 1e-9,
        ));
    }

    // Twist profile: deviation decays along a radius ladder and the
    // derivative stays positive on the strip.
    {
        let base = (4.0 * strip.r_bar).max(10.0);
        let ladder = [base, 10.0 * base, 100.0 * base];
        let scan = twist_scan(&flow, &ladder, &angle_grid(8));
        let sups: Vec<f64> = scan
            .sup_dev_by_r
            .iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect();
        let non_increasing = sups.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let final_small = *sups.last().unwrap() < 0.01;
        let near = twist_scan(
            &flow,
            &linspace(strip.r_bar * 1.01, base, 4),
            &angle_grid(8),
        );
        let positive = near
            .dg_dr0
            .iter()
            .flatten()
            .all(|v| v.map(|d| d > 0.0).unwrap_or(false));
        checks.push(Check::new(
            "twist limit and positivity",
            json!({
                "sup_dev_by_r": sups,
                "fd_crosscheck": scan.fd_crosscheck,
                "positive_on_strip": positive,
            }),
            "non-increasing, < 0.01 at top, > 0 on strip, crosscheck < 1e-5",
            non_increasing && final_small && positive && scan.fd_crosscheck < 1e-5,
        ));
    }

    // Growth constant.
    {
        let r_lo = 2.0 * strip.r_bar + 5.0;
        let k = estimate_k(&flow, &linspace(r_lo, 10.0 * r_lo, 4), &angle_grid(6))?;
        let c1 = strip.c1;
        let bound = 3.0 * c1 + c1 / (2.0 * (r_lo - c1)) + 1e-9;
        checks.push(Check::new(
            "trajectory growth constant",
            json!({ "k_hat": k.k_hat, "bound": bound }),
            "K below the drift bound",
            k.k_hat <= bound,
        ));
    }

    // Frequency window.
    let window = boundary_frequencies(&flow, strip.r_bar, &angle_grid(64))?;
    {
        let spread = window
            .alpha_minus
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - window
                .alpha_minus
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "admissible frequency window",
            json!({
                "w_minus": window.w_minus,
                "alpha_threshold": window.alpha_threshold,
                "alpha_minus_spread": spread,
            }),
            "threshold finite, spread < 0.01",
            window.alpha_threshold.is_finite() && spread < 0.01,
        ));
    }

    let gen = Generating::new(&flow_tight, strip, window.clone());

    // Generating-function identities.
    {
        let mut worst_fd = 0.0f64;
        let mut worst_recon = 0.0f64;
        let mut worst_period = 0.0f64;
        let mut twist_sign_ok = true;
        let d = 5e-3;
        let base_gap = (window.alpha_threshold + 1.0) * std::f64::consts::TAU;
        for &(x, gap) in &[
            (0.4, base_gap),
            (2.9, 2.0 * base_gap),
            (5.3, 4.0 * base_gap),
        ] {
            let x1 = x + gap;
            let s = gen.eval(x, x1)?;
            let fd1 = (gen.eval(x + d, x1)?.h - gen.eval(x - d, x1)?.h) / (2.0 * d);
            let fd2 = (gen.eval(x, x1 + d)?.h - gen.eval(x, x1 - d)?.h) / (2.0 * d);
            worst_fd = worst_fd.max((fd1 - s.d1h).abs()).max((fd2 - s.d2h).abs());
            twist_sign_ok &= s.d12h < 0.0;
            let shifted = gen.eval(x + std::f64::consts::TAU, x1 + std::f64::consts::TAU)?;
            worst_period = worst_period.max((shifted.h - s.h).abs());
            let image = flow_tight.poincare(s.r, x)?;
            worst_recon = worst_recon
                .max((image.r1 - vortex_core::weight::f_inv(s.d2h)).abs())
                .max((image.theta1 - x1).abs());
        }
        checks.push(Check::new(
            "generating function identities",
            json!({
                "max_fd_mismatch": worst_fd,
                "max_periodicity_defect": worst_period,
                "max_reconstruction_defect": worst_recon,
                "cross_derivative_negative": twist_sign_ok,
            }),
            "fd < 1e-6, periodicity < 1e-9, reconstruction < 1e-7, d12h < 0",
            worst_fd < 1e-6 && worst_period < 1e-9 && worst_recon < 1e-7 && twist_sign_ok,
        ));
    }

    // Periodic orbits at three admissible types.
    {
        let a = (window.alpha_threshold + 0.3).ceil() as i64;
        let types = [(a, 1usize), (2 * a + 1, 2), (3 * a + 1, 3)];
        let opts = cfg.solver.orbit_opts();
        let mut worst_el = 0.0f64;
        let mut worst_map = 0.0f64;
        let mut worst_rot = 0.0f64;
        let mut certificates = true;
        for &(s, q) in &types {
            let orbit = periodic_orbit(&gen, s, q, None, &opts)?;
            let res = orbit_residuals(&gen, &orbit)?;
            // Iterate count aligned to the period so the fit window holds
            // whole periods; the periodic component biases the slope as
            // 1/window² otherwise.
            let n_iter = 2 * q * (512usize).div_ceil(2 * q);
            let rot = rotation_number(&flow_tight, strip.a_star, orbit.r[0], orbit.x[0], n_iter)?;
            worst_el = worst_el.max(orbit.el_residual);
            worst_map = worst_map.max(orbit.map_residual);
            worst_rot = worst_rot.max((rot.alpha_hat - orbit.alpha()).abs());
            certificates &= res.rotation_bound_ok && res.comparability_ok;
        }
        checks.push(Check::new(
            "periodic orbits",
            json!({
                "types": types,
                "max_el_residual": worst_el,
                "max_map_residual": worst_map,
                "max_rotation_error": worst_rot,
                "certificates_ok": certificates,
            }),
            "EL < 1e-10, map < 1e-6, rotation < 1e-8, ordering certificates hold",
            worst_el < 1e-10 && worst_map < 1e-6 && worst_rot < 1e-8 && certificates,
        ));
    }

    // Rational-approximant family at a golden-mean frequency.
    {
        let shift = (window.alpha_threshold + 0.3 - golden_mean())
            .ceil()
            .max(0.0);
        let alpha = golden_mean() + shift;
        let ms = mather_set(&gen, alpha, 5, 377, &cfg.solver.orbit_opts())?;
        let defect = hull_relation_defect(&flow, &ms)?;
        let family = verify_solution_family(&flow, &ms, 2, &[0.5])?;
        checks.push(Check::new(
            "hull functions and solution family",
            json!({
                "alpha": alpha,
                "largest_gap": ms.largest_gap,
                "classification": ms.classification,
                "hull_map_defect": defect,
                "monotone_violations": ms.hull.monotone_violations,
                "translation_defect": family.max_translation_defect,
                "timeshift_defect": family.max_timeshift_defect,
                "min_angular_advance": family.min_angular_advance,
            }),
            "defects < 1e-5, no monotone violations, advance > 0",
            defect < 1e-5
                && ms.hull.monotone_violations == 0
                && family.max_translation_defect < 1e-5
                && family.max_timeshift_defect < 1e-5
                && family.min_angular_advance > 0.0
                && family.monotone_argument_ok,
        ));
    }

    // Oscillatory decay probe.
    {
        let probe = OscillatoryProbe {
            poly: vec![PerturbationTerm::new(1, 0, TimeCoefficient::constant(1.0))],
            beta: TimeCoefficient::sine(0.1, 1),
            weight: TimeCoefficient::constant(1.0),
            lambdas: (0..=24)
                .map(|k| 100.0 * 100.0f64.powf(k as f64 / 24.0))
                .collect(),
        };
        let fit = oscillatory_decay(&probe)?;
        checks.push(Check::new(
            "oscillatory integral decay",
            json!({ "fitted_exponent": fit.fitted_exponent, "c_rl_hat": fit.c_rl_hat }),
            "exponent <= -0.9, max lambda|I| < 10",
            fit.fitted_exponent <= -0.9 && fit.c_rl_hat < 10.0,
        ));
    }

    // Jacobian splitting decay rates.
    {
        let base = (2.0 * strip.a_star).max(10.0);
        let r_grid: Vec<f64> = (0..9)
            .map(|k| base * 100.0f64.powf(k as f64 / 8.0))
            .collect();
        let scan = splitting_scan(&pert, &r_grid, 4, 24)?;
        let mut bounded = true;
        for (min, max) in scan.ranges {
            if max > 1e-12 && max / min >= 3.0 {
                bounded = false;
            }
        }
        checks.push(Check::new(
            "Jacobian splitting scaled norms",
            json!({ "ranges": scan.ranges }),
            "each scaled norm varies by < 3x across two decades",
            bounded,
        ));
    }

    // Monodromy convergence to the shear limit.
    {
        let base = (4.0 * strip.r_bar).max(10.0);
        let rs = [base, 10.0 * base, 100.0 * base, 1000.0 * base];
        let scan = monodromy_limit_scan(&flow, &rs, 0.0)?;
        let first = scan.deviations[0];
        let last = *scan.deviations.last().unwrap();
        let pass = first < 1e-9 || (scan.monotone_decay && last < first / 10.0);
        checks.push(Check::new(
            "monodromy shear limit",
            json!({ "r0": rs, "deviations": scan.deviations }),
            "decaying by > 10x across the ladder (or identically integrable)",
            pass,
        ));
    }

    Ok(checks)
}

fn battery_err(stage: &str, e: Error) -> Error {
    Error::Invalid(format!("verification setup failed at {stage}: {e}"))
}

#[derive(Serialize)]
pub struct BatteryReport<'a> {
    pub checks: &'a [Check],
    pub all_pass: bool,
}
