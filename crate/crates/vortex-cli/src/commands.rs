//! Command implementations: each builds the flow stack from the
//! configuration, runs one analysis, and writes its artifacts (CSV data plus
//! a summary JSON embedding the config hash and tool version).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vortex_core::diagnostics::{monodromy_limit_scan, oscillatory_decay, OscillatoryProbe};
use vortex_core::flow::AugmentedState;
use vortex_core::generating::Generating;
use vortex_core::mather::{
    hull_relation_defect, mather_set, orbit_residuals, periodic_orbit, rotation_number,
};
use vortex_core::model::{PerturbationTerm, TimeCoefficient};
use vortex_core::poincare::{
    angle_grid, boundary_frequencies, exactness_scan, linspace, twist_scan, working_strip,
};
use vortex_core::{Error, Flow, Perturbation, WorkingStrip};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Context shared by all commands.
pub struct Ctx {
    pub cfg: RunConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig, config_hash: String, out_dir: PathBuf) -> Result<Self, Error> {
        fs::create_dir_all(&out_dir)
            .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self {
            cfg,
            config_hash,
            out_dir,
        })
    }

    pub fn strip(&self) -> Result<WorkingStrip, Error> {
        let mut strip = working_strip(
            &self.cfg.perturbation,
            self.cfg.integrator.tolerances(),
            &self.cfg.strip.strip_opts(),
        )?;
        if let Some(r_bar) = self.cfg.strip.r_bar {
            strip.r_bar = r_bar;
        }
        Ok(strip)
    }

    pub fn flow_at<'a>(&self, pert: &'a Perturbation, floor: f64) -> Flow<'a> {
        Flow::new(pert)
            .with_tolerances(self.cfg.integrator.tolerances())
            .with_entry_floor(floor)
    }

    pub fn write_summary<T: Serialize>(&self, name: &str, data: &T) -> Result<PathBuf, Error> {
        #[derive(Serialize)]
        struct Summary<'a, T: Serialize> {
            version: &'a str,
            config_hash: &'a str,
            #[serde(flatten)]
            data: &'a T,
        }
        let path = self.out_dir.join(name);
        let body = serde_json::to_string_pretty(&Summary {
            version: VERSION,
            config_hash: &self.config_hash,
            data,
        })
        .map_err(|e| Error::Invalid(format!("summary serialization: {e}")))?;
        write_text(&path, &body)?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, body: &str) -> Result<PathBuf, Error> {
        let path = self.out_dir.join(name);
        write_text(&path, body)?;
        Ok(path)
    }
}

fn write_text(path: &Path, body: &str) -> Result<(), Error> {
    fs::write(path, body)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn simulate(ctx: &Ctx, r0: f64, theta0: f64, t1: f64, dense: bool) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let rows = flow.integrate_dense(&AugmentedState::initial(r0, theta0), 0.0, t1)?;

    let mut csv = String::from("t,r,theta,y11,y12,y21,y22,action\n");
    let selected: Vec<_> = if dense {
        rows.iter().collect()
    } else {
        vec![rows.last().expect("nonempty trajectory")]
    };
    for p in selected {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.t, p.r, p.theta, p.y.a, p.y.b, p.y.c, p.y.d, p.action
        )
        .expect("string write");
    }
    let path = ctx.write_text("trajectory.csv", &csv)?;

    let last = rows.last().unwrap();
    #[derive(Serialize)]
    struct SimulateSummary {
        r0: f64,
        theta0: f64,
        t1: f64,
        r_end: f64,
        theta_end: f64,
        det_y: f64,
        action: f64,
        steps: usize,
    }
    ctx.write_summary(
        "simulate_summary.json",
        &SimulateSummary {
            r0,
            theta0,
            t1,
            r_end: last.r,
            theta_end: last.theta,
            det_y: last.y.det(),
            action: last.action,
            steps: rows.len() - 1,
        },
    )?;
    println!(
        "simulate: r({t1}) = {}, theta({t1}) = {}, {} accepted steps -> {}",
        last.r,
        last.theta,
        rows.len() - 1,
        path.display()
    );
    Ok(())
}

pub fn twist(ctx: &Ctx, r_list: Option<Vec<f64>>, theta_n: usize) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let rs = r_list.unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
    let thetas = angle_grid(theta_n.max(2));
    let scan = twist_scan(&flow, &rs, &thetas);

    let mut csv = String::from("r");
    for th in &scan.theta_grid {
        write!(csv, ",{th}").expect("string write");
    }
    csv.push('\n');
    for (i, r) in scan.r_grid.iter().enumerate() {
        write!(csv, "{r}").expect("string write");
        for v in &scan.dg_dr0[i] {
            match v {
                Some(v) => write!(csv, ",{v}").expect("string write"),
                None => csv.push_str(",nan"),
            }
        }
        csv.push('\n');
    }
    ctx.write_text("twist_scan.csv", &csv)?;

    let mut sup_csv = String::from("r,sup_dev\n");
    for (r, d) in scan.r_grid.iter().zip(&scan.sup_dev_by_r) {
        writeln!(sup_csv, "{r},{}", d.unwrap_or(f64::NAN)).expect("string write");
    }
    ctx.write_text("twist_sup.csv", &sup_csv)?;

    #[derive(Serialize)]
    struct TwistSummary {
        sup_dev: f64,
        sup_dev_by_r: Vec<Option<f64>>,
        fd_crosscheck: f64,
        decay_exponent: Option<f64>,
    }
    let path = ctx.write_summary(
        "twist_summary.json",
        &TwistSummary {
            sup_dev: scan.sup_dev,
            sup_dev_by_r: scan.sup_dev_by_r.clone(),
            fd_crosscheck: scan.fd_crosscheck,
            decay_exponent: scan.decay_exponent,
        },
    )?;
    println!(
        "twist-scan: sup |dG/dr0 - 2| = {:.3e}, fd crosscheck {:.3e} -> {}",
        scan.sup_dev,
        scan.fd_crosscheck,
        path.display()
    );
    Ok(())
}

pub fn exactness(
    ctx: &Ctx,
    fd_step: f64,
    grid_n: usize,
    r_min: f64,
    r_max: f64,
) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let scan = exactness_scan(
        &flow,
        &linspace(r_min, r_max, grid_n.max(2)),
        &angle_grid(grid_n.max(2)),
        fd_step,
    )?;
    let path = ctx.write_summary("exactness_summary.json", &scan)?;
    println!(
        "exactness: max residual {:.3e} at (r0, theta0) = ({}, {}) -> {}",
        scan.max_residual,
        scan.at.0,
        scan.at.1,
        path.display()
    );
    Ok(())
}

pub fn window(ctx: &Ctx, theta_n: usize) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let win = boundary_frequencies(&flow, strip.r_bar, &angle_grid(theta_n.max(2)))?;

    let mut csv = String::from("x,alpha_minus\n");
    for (x, a) in win.theta_grid.iter().zip(&win.alpha_minus) {
        writeln!(csv, "{x},{a}").expect("string write");
    }
    ctx.write_text("window.csv", &csv)?;

    // A-priori variant of the threshold from the drift bounds alone.
    let coarse_advance = 2.0 * strip.r_bar
        + 2.0 * strip.c1
        + strip.c1 / (2.0 * (strip.r_bar - strip.c1).max(strip.c1));
    #[derive(Serialize)]
    struct WindowSummary {
        #[serde(rename = "W_minus")]
        w_minus: f64,
        alpha_threshold: f64,
        alpha_threshold_apriori: f64,
        r_bar: f64,
        strip: WorkingStrip,
    }
    let path = ctx.write_summary(
        "window_summary.json",
        &WindowSummary {
            w_minus: win.w_minus,
            alpha_threshold: win.alpha_threshold,
            alpha_threshold_apriori: (coarse_advance + 2.0) / std::f64::consts::TAU,
            r_bar: strip.r_bar,
            strip,
        },
    )?;
    println!(
        "window: W- = {:.6}, admissible alpha > {:.6} -> {}",
        win.w_minus,
        win.alpha_threshold,
        path.display()
    );
    Ok(())
}

fn build_generating<'a>(
    ctx: &Ctx,
    flow: &'a Flow<'a>,
    strip: WorkingStrip,
) -> Result<Generating<'a>, Error> {
    let win = boundary_frequencies(flow, strip.r_bar, &angle_grid(64))?;
    let _ = ctx;
    Ok(Generating::new(flow, strip, win))
}

pub fn orbit(ctx: &Ctx, s: i64, q: usize, x0: Option<f64>) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let gen = build_generating(ctx, &flow, strip)?;
    let init: Option<Vec<f64>> = x0.map(|x0| {
        (0..q)
            .map(|n| x0 + std::f64::consts::TAU * s as f64 * n as f64 / q as f64)
            .collect()
    });
    let orbit = periodic_orbit(&gen, s, q, init.as_deref(), &ctx.cfg.solver.orbit_opts())?;
    let residuals = orbit_residuals(&gen, &orbit)?;
    let rotation = rotation_number(&flow, strip.a_star, orbit.r[0], orbit.x[0], 64)?;

    // Generating-function samples along the orbit pairs.
    let mut csv = String::from("x,x1,R,h,d1h,d2h,d12h\n");
    for n in 0..orbit.q {
        let sample = gen.eval(orbit.x[n], orbit.x[n + 1])?;
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            sample.x, sample.x1, sample.r, sample.h, sample.d1h, sample.d2h, sample.d12h
        )
        .expect("string write");
    }
    ctx.write_text(&format!("orbit_{s}_{q}_samples.csv"), &csv)?;

    let archive = ctx.out_dir.join(format!("orbit_{s}_{q}.json"));
    write_text(
        &archive,
        &serde_json::to_string_pretty(&orbit)
            .map_err(|e| Error::Invalid(format!("orbit serialization: {e}")))?,
    )?;

    #[derive(Serialize)]
    struct OrbitSummary {
        s: i64,
        q: usize,
        action: f64,
        el_residual: f64,
        map_residual: f64,
        rotation_number: f64,
        rotation_bound_ok: bool,
        comparability_ok: bool,
    }
    let path = ctx.write_summary(
        "orbit_summary.json",
        &OrbitSummary {
            s,
            q,
            action: orbit.action,
            el_residual: orbit.el_residual,
            map_residual: orbit.map_residual,
            rotation_number: rotation.alpha_hat,
            rotation_bound_ok: residuals.rotation_bound_ok,
            comparability_ok: residuals.comparability_ok,
        },
    )?;
    println!(
        "orbit ({s}, {q}): EL residual {:.3e}, map residual {:.3e}, rotation {:.9} -> {}",
        orbit.el_residual,
        orbit.map_residual,
        rotation.alpha_hat,
        path.display()
    );
    Ok(())
}

pub fn mather(ctx: &Ctx, alpha: f64, depth: usize, q_cap: i64) -> Result<(), Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let gen = build_generating(ctx, &flow, strip)?;
    let ms = mather_set(&gen, alpha, depth, q_cap, &ctx.cfg.solver.orbit_opts())?;
    let defect = hull_relation_defect(&flow, &ms)?;

    let archive = ctx.out_dir.join(format!("mather_{alpha:.6}_{depth}.json"));
    write_text(
        &archive,
        &serde_json::to_string_pretty(&ms)
            .map_err(|e| Error::Invalid(format!("archive serialization: {e}")))?,
    )?;

    let mut hull_csv = String::from("xi,phi,eta\n");
    for ((xi, phi), eta) in ms.hull.xi.iter().zip(&ms.hull.phi).zip(&ms.hull.eta) {
        writeln!(hull_csv, "{xi},{phi},{eta}").expect("string write");
    }
    ctx.write_text("hull.csv", &hull_csv)?;

    #[derive(Serialize)]
    struct MatherSummary<'a> {
        alpha: f64,
        depth: usize,
        convergents: &'a [vortex_core::Convergent],
        gaps: &'a [f64],
        largest_gap: f64,
        classification: &'a vortex_core::mather::Classification,
        hull_map_defect: f64,
        monotone_violations: usize,
    }
    let path = ctx.write_summary(
        "mather_summary.json",
        &MatherSummary {
            alpha,
            depth,
            convergents: &ms.convergents,
            gaps: &ms.gaps,
            largest_gap: ms.largest_gap,
            classification: &ms.classification,
            hull_map_defect: defect,
            monotone_violations: ms.hull.monotone_violations,
        },
    )?;
    println!(
        "mather alpha = {alpha}: {} convergents, largest gap {:.4}, {:?}, hull defect {:.3e} -> {}",
        ms.convergents.len(),
        ms.largest_gap,
        ms.classification,
        defect,
        path.display()
    );
    Ok(())
}

pub fn rl_check(
    ctx: &Ctx,
    lambda_min: f64,
    lambda_max: f64,
    per_decade: usize,
) -> Result<(), Error> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min) {
        return Err(Error::Invalid(
            "lambda range must be positive and increasing".into(),
        ));
    }
    let decades = (lambda_max / lambda_min).log10();
    let total = ((decades * per_decade as f64).round() as usize).max(2);
    let lambdas: Vec<f64> = (0..=total)
        .map(|k| lambda_min * (lambda_max / lambda_min).powf(k as f64 / total as f64))
        .collect();
    let probe = OscillatoryProbe {
        poly: vec![PerturbationTerm::new(1, 0, TimeCoefficient::constant(1.0))],
        beta: TimeCoefficient::sine(0.1, 1),
        weight: TimeCoefficient::constant(1.0),
        lambdas,
    };
    let fit = oscillatory_decay(&probe)?;

    let mut csv = String::from("lambda,envelope\n");
    for (l, v) in fit.lambdas.iter().zip(&fit.integrals) {
        writeln!(csv, "{l},{v}").expect("string write");
    }
    ctx.write_text("rl_decay.csv", &csv)?;

    #[derive(Serialize)]
    struct RlSummary {
        fitted_exponent: f64,
        c_rl_hat: f64,
        lambda_min: f64,
        lambda_max: f64,
    }
    let path = ctx.write_summary(
        "rl_summary.json",
        &RlSummary {
            fitted_exponent: fit.fitted_exponent,
            c_rl_hat: fit.c_rl_hat,
            lambda_min,
            lambda_max,
        },
    )?;
    println!(
        "rl-check: fitted exponent {:.4}, max lambda|I| = {:.4} -> {}",
        fit.fitted_exponent,
        fit.c_rl_hat,
        path.display()
    );
    Ok(())
}

pub fn monodromy(ctx: &Ctx) -> Result<Vec<f64>, Error> {
    let pert = ctx.cfg.perturbation.clone();
    let strip = ctx.strip()?;
    let flow = ctx.flow_at(&pert, strip.a_star);
    let scan = monodromy_limit_scan(&flow, &[10.0, 100.0, 1000.0, 10000.0], 0.0)?;
    Ok(scan.deviations)
}

/// Gnuplot scripts consuming the CSV artifacts of the other commands.
pub fn report(ctx: &Ctx) -> Result<(), Error> {
    let twist = "\
set terminal pngcairo size 800,600\n\
set output 'twist_decay.png'\n\
set logscale xy\n\
set xlabel 'r0'\n\
set ylabel 'sup |dG/dr0 - 2|'\n\
set datafile separator ','\n\
plot 'twist_sup.csv' using 1:2 skip 1 with linespoints title 'twist deviation'\n";
    ctx.write_text("twist_decay.gp", twist)?;

    let orbit = "\
set terminal pngcairo size 800,600\n\
set output 'orbit_portrait.png'\n\
set xlabel 'x mod 2pi'\n\
set ylabel 'R'\n\
set datafile separator ','\n\
plot 'orbit_*_samples.csv' using (column(1)-2*pi*floor(column(1)/(2*pi))):3 skip 1 \\\n\
     with points pt 7 title 'orbit points'\n";
    ctx.write_text("orbit_portrait.gp", orbit)?;

    let hull = "\
set terminal pngcairo size 800,600\n\
set output 'hull_functions.png'\n\
set xlabel 'xi'\n\
set datafile separator ','\n\
plot 'hull.csv' using 1:2 skip 1 with linespoints title 'phi(xi)', \\\n\
     'hull.csv' using 1:3 skip 1 with linespoints title 'eta(xi)'\n";
    ctx.write_text("hull_functions.gp", hull)?;

    println!("report: wrote twist_decay.gp, orbit_portrait.gp, hull_functions.gp");
    Ok(())
}
