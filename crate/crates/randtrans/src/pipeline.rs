//! Named experiment pipelines.
//!
//! A pipeline assembles a laboratory (driving system, fiber maps along the
//! orbit, Julia clouds, registered grids), runs one subsystem's checks and
//! writes deterministic CSV artifacts plus a content-hash manifest. Reruns
//! with the same config and seed are byte-identical.

use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::artifacts::{emit_plot_data, fmt, write_csv, Manifest};
use crate::config::ExperimentConfig;
use crate::driving::DrivingSystem;
use crate::gibbs::{self, GibbsFamily, ReferenceKind};
use crate::grid::GridDensity;
use crate::julia::{self, CloudOptions, JuliaCloud, MixingOptions};
use crate::maps::FiberMap;
use crate::nevanlinna::{self, SmtErrorConfig};
use crate::stats;
use crate::transfer::{self, OrbitData, PotentialConfig};
use crate::{cones, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    CheckConditions,
    Julia,
    Nevanlinna,
    Gibbs,
    Cones,
    Correlations,
    Clt,
    All,
}

impl Pipeline {
    pub fn parse(name: &str) -> Option<Pipeline> {
        Some(match name {
            "check-conditions" => Pipeline::CheckConditions,
            "julia" => Pipeline::Julia,
            "nevanlinna" => Pipeline::Nevanlinna,
            "gibbs" => Pipeline::Gibbs,
            "cones" => Pipeline::Cones,
            "correlations" => Pipeline::Correlations,
            "clt" => Pipeline::Clt,
            "all" => Pipeline::All,
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 8] = [
        "check-conditions",
        "julia",
        "nevanlinna",
        "gibbs",
        "cones",
        "correlations",
        "clt",
        "all",
    ];
}

/// One pipeline's verdict.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

/// A full run: per-pipeline verdicts plus the manifest location.
#[derive(Debug)]
pub struct RunReport {
    pub outcomes: Vec<PipelineOutcome>,
    pub manifest_path: PathBuf,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// The assembled laboratory over a finite orbit window.
pub struct Lab {
    pub sys: DrivingSystem,
    pub maps: Vec<FiberMap>,
    pub clouds: Vec<JuliaCloud>,
    pub orbit: OrbitData,
    pub potential: PotentialConfig,
}

impl Lab {
    /// Build `fibers` grids (and clouds) starting at the seeded base point.
    /// `maps` extends `julia_depth` past the last grid so every cloud has a
    /// full pullback runway.
    pub fn assemble(cfg: &ExperimentConfig, fibers: usize) -> Result<Lab> {
        Self::assemble_with(cfg, fibers, cfg.potential, cfg.geometry.grid_max_points)
    }

    pub fn assemble_with(
        cfg: &ExperimentConfig,
        fibers: usize,
        potential: PotentialConfig,
        grid_max_points: usize,
    ) -> Result<Lab> {
        let sys = cfg.driving_system()?;
        let base = sys.sample_fibers(1, fibers as i64 + 64, cfg.seed)?[0];
        let depth = cfg.geometry.julia_depth;
        let total_maps = fibers + depth;
        let mut maps = Vec::with_capacity(total_maps);
        for j in 0..total_maps {
            let x = sys.advance(base, j as i64)?;
            maps.push(cfg.fiber_map(sys.parameter_at(x))?);
        }
        let opts = CloudOptions {
            eta_shrink: cfg.geometry.eta_shrink,
            h_dedup: cfg.h_dedup(),
            max_points_per_level: (grid_max_points * 4).max(2000),
            keep_words: false,
        };
        let cell_hint = (cfg.geometry.r_max / (grid_max_points as f64).sqrt()).max(cfg.h_dedup());
        let mut clouds = Vec::with_capacity(fibers);
        let mut grids = Vec::with_capacity(fibers);
        for j in 0..fibers {
            let cloud = julia::approximate_julia(
                j,
                &maps[j..j + depth],
                cfg.geometry.r_max,
                |rel| julia::default_seeds(&maps[(j + rel).min(total_maps - 1)]),
                &opts,
            )?;
            grids.push(cloud.to_grid(
                cfg.geometry.grid_min_depth,
                grid_max_points,
                cell_hint,
            )?);
            clouds.push(cloud);
        }
        Ok(Lab {
            sys,
            maps: maps.clone(),
            clouds,
            orbit: OrbitData::new(maps[..fibers - 1].to_vec(), grids),
            potential,
        })
    }

    fn family(&self, cfg: &ExperimentConfig, window: usize) -> Result<GibbsFamily> {
        gibbs::gibbs_family(
            &self.orbit,
            &self.potential,
            window,
            cfg.geometry.pullback_depth,
            ReferenceKind::UniformWithin(cfg.geometry.r0),
        )
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    manifest: Manifest,
}

impl Ctx<'_> {
    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf> {
        let path = write_csv(&self.dir.join(name), header, rows)?;
        self.manifest.add(&path)?;
        Ok(path)
    }
}

/// Run one pipeline (or all) under `out_dir`; writes the manifest last so it
/// covers every artifact.
pub fn run(cfg: &ExperimentConfig, pipeline: Pipeline, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut ctx = Ctx {
        cfg,
        dir: out_dir.to_path_buf(),
        manifest: Manifest::new(out_dir),
    };
    let mut outcomes = Vec::new();
    let selected = |p: Pipeline| pipeline == p || pipeline == Pipeline::All;
    if selected(Pipeline::CheckConditions) {
        outcomes.push(check_conditions(&mut ctx)?);
    }
    if selected(Pipeline::Julia) {
        outcomes.push(julia_pipeline(&mut ctx)?);
    }
    if selected(Pipeline::Nevanlinna) {
        outcomes.push(nevanlinna_pipeline(&mut ctx)?);
    }
    if selected(Pipeline::Gibbs) {
        outcomes.push(gibbs_pipeline(&mut ctx)?);
    }
    if selected(Pipeline::Cones) {
        outcomes.push(cones_pipeline(&mut ctx)?);
    }
    if selected(Pipeline::Correlations) {
        outcomes.push(correlations_pipeline(&mut ctx)?);
    }
    if selected(Pipeline::Clt) {
        outcomes.push(clt_pipeline(&mut ctx)?);
    }
    let summary_rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![
                o.name.to_string(),
                if o.passed { "pass" } else { "fail" }.to_string(),
                o.details.clone(),
            ]
        })
        .collect();
    ctx.csv("summary.csv", &["pipeline", "status", "details"], summary_rows)?;
    let manifest_path = ctx.manifest.write()?;
    Ok(RunReport {
        outcomes,
        manifest_path,
    })
}

fn check_conditions(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let lab = Lab::assemble(cfg, 4)?;
    let profile = cfg.growth_profile()?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut all_ok = true;
    // C3 balanced growth on sampled cloud points, per fiber
    for j in 0..3 {
        let samples = lab.clouds[j].positions();
        if lab.maps[j].is_transcendental() {
            let rep = lab.maps[j].check_balanced_growth(&samples)?;
            rows.push(vec![
                "balanced-growth".into(),
                fmt(j as f64),
                "kappa_fit".into(),
                fmt(rep.kappa_fit),
                rep.pass.to_string(),
            ]);
            all_ok &= rep.pass;
        }
    }
    // C1 characteristic growth window on a radius grid for the first fiber
    if lab.maps[0].is_transcendental() {
        let radii: Vec<f64> = (0..8)
            .map(|i| 2.0 * (cfg.geometry.r_max / 2.0).powf(i as f64 / 7.0))
            .collect();
        let table = nevanlinna::characteristic(&lab.maps[0], &radii)?;
        for (i, &r) in table.radii.iter().enumerate() {
            let t = table.characteristic[i];
            let ok = profile.omega(r) <= t + 1e-6 && t <= profile.c_rho * r.powf(profile.rho) + 1e-6;
            rows.push(vec![
                "characteristic-window".into(),
                fmt(r),
                "t_ring".into(),
                fmt(t),
                ok.to_string(),
            ]);
            all_ok &= ok;
        }
    }
    // C2 base points within the normalization radius
    let positions: Vec<Vec<Complex64>> = (0..4).map(|j| lab.clouds[j].positions()).collect();
    match crate::maps::normalize(
        &lab.maps[..3],
        &positions,
        cfg.family.t_norm,
        10.0 * cfg.h_dedup(),
    ) {
        Ok(data) => {
            for (j, d) in data.iter().enumerate() {
                rows.push(vec![
                    "base-point".into(),
                    fmt(j as f64),
                    "image_gap".into(),
                    fmt(d.image_gap),
                    "true".into(),
                ]);
            }
        }
        Err(e) => {
            rows.push(vec![
                "base-point".into(),
                "0".into(),
                "error".into(),
                format!("{e}"),
                "false".into(),
            ]);
            all_ok = false;
        }
    }
    // C4: fitted forward-derivative caps C_{R,N} over cloud points, reported
    // (growth across N is flagged suspicious, never fatal)
    let big_r = cfg.geometry.r0;
    let mut prev_cap = 0.0f64;
    for n in 1..=3usize {
        let mut cap = 0.0f64;
        for p in &lab.clouds[0].points {
            let mut z = p.z;
            let mut deriv = 1.0f64;
            let mut inside = z.norm() <= big_r;
            for map in lab.maps.iter().take(n) {
                match (map.eval(z), map.deriv(z)) {
                    (Ok(fz), Ok(dz)) => {
                        deriv *= dz.norm();
                        z = fz;
                    }
                    _ => {
                        inside = false;
                        break;
                    }
                }
            }
            if inside && z.norm() <= big_r {
                cap = cap.max(deriv);
            }
        }
        rows.push(vec![
            "forward-derivative-cap".into(),
            fmt(n as f64),
            "c_rn".into(),
            fmt(cap),
            (n == 1 || cap <= prev_cap.max(1.0) * 50.0).to_string(),
        ]);
        prev_cap = cap;
    }
    ctx.csv(
        "conditions.csv",
        &["condition", "fiber_or_radius", "metric", "value", "pass"],
        rows,
    )?;
    Ok(PipelineOutcome {
        name: "check-conditions",
        passed: all_ok,
        details: String::new(),
    })
}

fn julia_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let lab = Lab::assemble(cfg, 3)?;
    for j in 0..3 {
        let rows = lab.clouds[j].points.iter().map(|p| {
            vec![
                fmt(p.z.re),
                fmt(p.z.im),
                fmt(p.depth as f64),
                fmt(p.log_deriv),
            ]
        });
        let path = ctx.csv(
            &format!("cloud_{j}.csv"),
            &["re", "im", "depth", "log_deriv"],
            rows,
        )?;
        if j == 0 {
            emit_plot_data(&path, "re", &["im"], &mut ctx.manifest)?;
        }
    }
    let fit = julia::expansion_constants(&lab.clouds[0])?;
    let margin = julia::hyperbolicity_margin(&lab.maps, &lab.clouds[0], 6);
    let mixing = julia::mixing_time(
        &lab.maps,
        &lab.clouds,
        1.0,
        cfg.geometry.r0.min(5.0),
        &MixingOptions::default(),
    )?;
    let mixing_str = match mixing {
        julia::MixingOutcome::Found(n) => fmt(n as f64),
        julia::MixingOutcome::CapExceeded => "cap-exceeded".into(),
    };
    ctx.csv(
        "julia_diagnostics.csv",
        &["metric", "value"],
        vec![
            vec!["gamma_fit".into(), fmt(fit.gamma)],
            vec!["gamma_ci_low".into(), fmt(fit.gamma_ci_low)],
            vec!["c_fit".into(), fmt(fit.c)],
            vec!["expansion_pass".into(), fit.pass.to_string()],
            vec!["delta0_margin".into(), fmt(margin)],
            vec!["mixing_time".into(), mixing_str],
        ],
    )?;
    Ok(PipelineOutcome {
        name: "julia",
        passed: fit.pass,
        details: format!("gamma={:.3}", fit.gamma),
    })
}

fn nevanlinna_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let sys = cfg.driving_system()?;
    let base = sys.sample_fibers(1, 64, cfg.seed)?[0];
    let map = cfg.fiber_map(sys.parameter_at(base))?;
    let mut pass = true;
    let mut details = Vec::new();
    // characteristic table over a log grid spanning the order-estimate window
    let radii: Vec<f64> = (0..14)
        .map(|i| 1.0 * (4.0 * cfg.geometry.r_max).max(120.0).powf(i as f64 / 13.0))
        .collect();
    let table = nevanlinna::characteristic(&map, &radii)?;
    let path = ctx.csv(
        "characteristic.csv",
        &["r", "a_f", "t_ring", "err"],
        table.radii.iter().enumerate().map(|(i, &r)| {
            vec![
                fmt(r),
                fmt(table.area[i]),
                fmt(table.characteristic[i]),
                fmt(table.quad_error[i]),
            ]
        }),
    )?;
    emit_plot_data(&path, "r", &["a_f", "t_ring"], &mut ctx.manifest)?;
    if map.is_transcendental() {
        let order = nevanlinna::order_estimate(&table)?;
        pass &= (order - cfg.growth_profile()?.rho).abs() <= 0.15 * cfg.growth_profile()?.rho;
        details.push(format!("order={order:.3}"));
    }
    // FMT margins over five targets
    let f0 = map.eval(Complex64::new(0.0, 0.0))?;
    let targets: Vec<Complex64> = [
        Complex64::new(2.0, 0.0),
        Complex64::new(0.5, 0.5),
        Complex64::new(-1.0, 0.3),
        Complex64::new(0.1, -0.8),
        Complex64::new(3.0, 2.0),
    ]
    .into_iter()
    .filter(|w| (w - f0).norm() > 1e-6)
    .collect();
    let fmt_radii = [1.0, 2.0, 5.0, 10.0, 20.0];
    let mut fmt_rows = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for w in &targets {
        let report = nevanlinna::fmt_check(&map, *w, &fmt_radii)?;
        for (i, &r) in report.radii.iter().enumerate() {
            fmt_rows.push(vec![
                fmt(w.re),
                fmt(w.im),
                fmt(r),
                fmt(report.lhs[i]),
                fmt(report.rhs[i]),
                fmt(report.margins[i]),
            ]);
        }
        max_violation = max_violation.max(report.max_violation);
    }
    let path = ctx.csv(
        "fmt_margins.csv",
        &["w_re", "w_im", "r", "lhs", "rhs", "margin"],
        fmt_rows,
    )?;
    emit_plot_data(&path, "r", &["margin"], &mut ctx.manifest)?;
    pass &= max_violation <= 1e-3;
    details.push(format!("fmt_max_violation={max_violation:.2e}"));
    if map.is_transcendental() {
        // tail sums: dual-route agreement across the sweep
        let mut tail_rows = Vec::new();
        let mut worst_gap = 0.0f64;
        for &s in &[1.5, 2.0, 3.0] {
            for &r in &[1.0, 5.0, 10.0] {
                let t = nevanlinna::tail_sum(&map, Complex64::new(0.4, 0.1), s, r)?;
                worst_gap = worst_gap.max(t.relative_gap());
                tail_rows.push(vec![
                    fmt(s),
                    fmt(r),
                    fmt(t.direct),
                    fmt(t.stieltjes),
                    fmt(t.relative_gap()),
                ]);
            }
        }
        ctx.csv(
            "tail_sums.csv",
            &["s", "inner_radius", "direct", "stieltjes", "relative_gap"],
            tail_rows,
        )?;
        pass &= worst_gap <= 1e-8;
        details.push(format!("tail_gap={worst_gap:.2e}"));
        // uniform SMT margins on a grid above the admissible radius
        let sharp0 = map.spherical_deriv(Complex64::new(0.0, 0.0));
        let l = (1.0 / sharp0).max(sharp0).max(1.0) * 1.05;
        let profile = cfg.growth_profile()?;
        let r0 = l * std::f64::consts::E.powf(std::f64::consts::E);
        let smt_radii: Vec<f64> = (0..5).map(|i| r0 * (1.1f64).powi(i)).collect();
        let smt_table = nevanlinna::characteristic(&map, &smt_radii)?;
        let smt_cfg = SmtErrorConfig::calibrated(l, profile.rho, profile.c_rho, &smt_table)?;
        let smt_targets = [
            f0 + Complex64::new(0.15, 0.0),
            f0 + Complex64::new(-0.1, 0.1),
            f0 + Complex64::new(0.0, -0.2),
        ];
        match nevanlinna::smt_lower_bound_check(&map, &smt_targets, &smt_radii, &smt_cfg) {
            Ok(report) => {
                ctx.csv(
                    "smt_margins.csv",
                    &["r", "counting_sum", "lower_bound", "margin"],
                    report.radii.iter().enumerate().map(|(i, &r)| {
                        vec![
                            fmt(r),
                            fmt(report.counting_sum[i]),
                            fmt(report.lower_bound[i]),
                            fmt(report.margins[i]),
                        ]
                    }),
                )?;
                pass &= report.min_margin >= 0.0;
                details.push(format!("smt_min_margin={:.3}", report.min_margin));
            }
            Err(e) => {
                pass = false;
                details.push(format!("smt_error={e}"));
            }
        }
    }
    Ok(PipelineOutcome {
        name: "nevanlinna",
        passed: pass,
        details: details.join(" "),
    })
}

fn gibbs_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let window = cfg.geometry.window;
    let depth = cfg.geometry.pullback_depth;
    let lab = Lab::assemble(cfg, window + depth + 7)?;
    let family = lab.family(cfg, window)?;
    let mut pass = true;
    let mut details = Vec::new();
    // λ table with cumulative products
    let mut cumulative = 1.0;
    let lambda_rows: Vec<Vec<String>> = family
        .lambdas
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            cumulative *= l;
            vec![fmt(j as f64), fmt(l), fmt(cumulative)]
        })
        .collect();
    let path = ctx.csv("lambda_table.csv", &["fiber", "lambda", "lambda_n"], lambda_rows)?;
    emit_plot_data(&path, "fiber", &["lambda"], &mut ctx.manifest)?;
    // measure and density dumps for the first fiber
    ctx.csv(
        "measure_fiber0.csv",
        &["re", "im", "weight"],
        lab.orbit.grids[0]
            .points
            .iter()
            .zip(&family.nus[0].weights)
            .map(|(z, w)| vec![fmt(z.re), fmt(z.im), fmt(*w)]),
    )?;
    let last = window - 1;
    ctx.csv(
        "density_last_fiber.csv",
        &["re", "im", "value"],
        lab.orbit.grids[last]
            .points
            .iter()
            .zip(&family.rhos[last].values)
            .map(|(z, v)| vec![fmt(z.re), fmt(z.im), fmt(*v)]),
    )?;
    // convergence of ℒ̂ᵏ1 at the last fiber
    let k_max = (last).min(30);
    let conv = gibbs::invariant_density(&lab.orbit, &family, &lab.potential, last, k_max, 5)?;
    let path = ctx.csv(
        "density_convergence.csv",
        &["k", "increment"],
        conv.increments
            .iter()
            .map(|(k, d)| vec![fmt(*k as f64), fmt(*d)]),
    )?;
    emit_plot_data(&path, "k", &["increment"], &mut ctx.manifest)?;
    pass &= conv.theta_fit < 1.0 && !conv.non_geometric;
    details.push(format!(
        "theta={:.3} r2={:.3}",
        conv.theta_fit, conv.r_squared
    ));
    // ρ positivity after burn-in
    let burned = family
        .rhos
        .iter()
        .skip(family.window.min(10))
        .all(|r| r.min_value() > 0.0);
    pass &= burned;
    if !burned {
        details.push("rho-not-positive".into());
    }
    // tightness
    let radii: Vec<f64> = (0..6)
        .map(|i| cfg.geometry.r0 * (cfg.geometry.r_max / cfg.geometry.r0).powf(i as f64 / 5.0))
        .collect();
    let tight = gibbs::tightness_check(&lab.orbit, &family, cfg.geometry.r0, &radii)?;
    ctx.csv(
        "tightness.csv",
        &["fiber", "core_mass"],
        tight
            .core_mass
            .iter()
            .enumerate()
            .map(|(j, m)| vec![fmt(j as f64), fmt(*m)]),
    )?;
    pass &= tight.item_a && tight.item_b;
    details.push(format!(
        "tight_a={} tight_b={} eps_feasible={:.3}",
        tight.item_a, tight.item_b, tight.epsilon_feasible
    ));
    // conformality residual at a few fibers
    let g_samples: Vec<GridDensity> = (0..8)
        .map(|s| gibbs::random_holder_density(&lab.orbit.grids[2], cfg.seed ^ s, 8, 1.2))
        .collect();
    let residual = gibbs::conformality_residual(
        &lab.orbit,
        &lab.potential,
        2,
        depth,
        ReferenceKind::UniformWithin(cfg.geometry.r0),
        &g_samples,
    )?;
    pass &= residual <= 5e-3;
    details.push(format!("residual={residual:.2e}"));
    // uniform bounds
    let ns: Vec<usize> = (1..=k_max.min(20)).collect();
    let fibers: Vec<usize> = vec![last];
    let ub = gibbs::uniform_bound_check(&lab.orbit, &family, &lab.potential, &ns, &fibers)?;
    let path = ctx.csv(
        "uniform_bounds.csv",
        &["n", "max_l1hat"],
        ub.maxima
            .iter()
            .map(|(n, m)| vec![fmt(*n as f64), fmt(*m)]),
    )?;
    emit_plot_data(&path, "n", &["max_l1hat"], &mut ctx.manifest)?;
    pass &= ub.pass;
    details.push(format!(
        "m_emp={:.3} ub_slope={:.2e}±{:.2e}",
        ub.m_emp, ub.slope, ub.slope_ci
    ));
    // lower bounds
    let lb_radii: Vec<f64> = (0..4)
        .map(|i| cfg.geometry.r0 * (2.0f64).powf(i as f64 / 3.0))
        .collect();
    let lb = gibbs::lower_bound_diagnostics(
        &lab.orbit,
        &family,
        &lab.potential,
        &cfg.growth_profile()?,
        &lb_radii,
        &[0, 1, 2],
    )?;
    ctx.csv(
        "lower_bounds.csv",
        &["r", "measured_min", "shape", "c_emp"],
        lb.rows
            .iter()
            .zip(&lb.c_emp)
            .map(|((r, m, s), c)| vec![fmt(*r), fmt(*m), fmt(*s), fmt(*c)]),
    )?;
    pass &= lb.pass;
    if !lb.pass {
        details.push(format!(
            "lb_slopes {:.2}/{:.2}",
            lb.slope_measured, lb.slope_shape
        ));
    }
    Ok(PipelineOutcome {
        name: "gibbs",
        passed: pass,
        details: details.join(" "),
    })
}

fn cones_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let window = cfg.geometry.window;
    let depth = cfg.geometry.pullback_depth;
    let lab = Lab::assemble(cfg, window + depth + 7)?;
    let family = lab.family(cfg, window)?;
    let mut pass = true;
    let mut details = Vec::new();
    // empirical inputs
    let expansion = julia::expansion_constants(&lab.clouds[0])?;
    let last = window - 1;
    let ns: Vec<usize> = (1..=last.min(12)).collect();
    let ub = gibbs::uniform_bound_check(&lab.orbit, &family, &lab.potential, &ns, &[last])?;
    let dist = transfer::distortion_check(
        &lab.orbit,
        &lab.potential,
        &[1, 2, 4, 8],
        lab.potential.delta,
        400,
    )?;
    let k_dist = dist
        .k_fits
        .iter()
        .map(|(_, k)| *k)
        .fold(0.0f64, f64::max)
        .max(1e-3);
    let lb = gibbs::lower_bound_diagnostics(
        &lab.orbit,
        &family,
        &lab.potential,
        &cfg.growth_profile()?,
        &[cfg.geometry.r0],
        &[0, 1],
    )?;
    let a_ball = lb.a_emp.iter().copied().fold(1.0f64, f64::max);
    // ℒ̂1 radius profile for R₁
    let one0 = GridDensity::constant(&lab.orbit.grids[0], 1.0);
    let (l1_raw, _) = lab.orbit.apply(0, &one0, &lab.potential)?;
    let l1_hat = l1_raw.scale(1.0 / family.lambdas[0]);
    let l1_samples: Vec<(f64, f64)> = lab.orbit.grids[1]
        .points
        .iter()
        .zip(&l1_hat.values)
        .map(|(z, v)| (z.norm(), *v))
        .collect();
    // probe the mixing floor with the constant density
    let probe_inputs = cones::EmpiricalInputs {
        m_bound: ub.m_emp.max(1.0),
        k_dist,
        a_ball,
        c_exp: expansion.c.min(1.0).max(1e-3),
        gamma: expansion.gamma,
        a_mix: 0.1, // placeholder until probed below
        r0: cfg.geometry.r0,
        delta0: 0.25,
        mixing_n: 2,
    };
    let pre = cones::compute_constants(&probe_inputs, lab.potential.beta, &l1_samples)?;
    let probe_n = pre.n0.min(last);
    let one = GridDensity::constant(&lab.orbit.grids[0], 1.0);
    let img = lab
        .orbit
        .normalized_apply_n(0, probe_n, &one, &lab.potential, &family.lambdas)?;
    let big_r = cfg.geometry.r0 / 2.0;
    let a_mix = lab.orbit.grids[probe_n]
        .points
        .iter()
        .zip(&img.values)
        .filter(|(z, _)| z.norm() <= 2.0 * big_r)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    let inputs = cones::EmpiricalInputs {
        a_mix,
        mixing_n: probe_n,
        ..probe_inputs
    };
    let mut consts = cones::compute_constants(&inputs, lab.potential.beta, &l1_samples)?;
    // a short window cannot host a deeper Bowen step; clamp and report
    let clamped = consts.n_r + 2 > window;
    if clamped {
        consts.n_r = window.saturating_sub(2).max(1);
    }
    // constants ledger with provenance
    let inputs_hash = {
        use sha2::{Digest, Sha256};
        let text = format!("{inputs:?}|{}", lab.potential.beta);
        let d = Sha256::digest(text.as_bytes());
        d.iter().take(8).map(|b| format!("{b:02x}")).collect::<String>()
    };
    let ledger = vec![
        ("beta", consts.beta, "config"),
        ("delta", consts.delta, "formula"),
        ("m_bound", consts.m_bound, "measured"),
        ("k_dist", consts.k_dist, "measured"),
        ("a_ball", consts.a_ball, "measured"),
        ("script_a", consts.script_a, "formula"),
        ("h_var", consts.h_var, "formula"),
        ("c_exp", consts.c_exp, "measured"),
        ("gamma", consts.gamma, "measured"),
        ("n0", consts.n0 as f64, "formula"),
        ("r0", consts.r0, "config"),
        ("r1", consts.r1, "formula"),
        ("a_mix", consts.a_mix, "measured"),
        ("eta", consts.eta, "formula"),
        ("n_r", consts.n_r as f64, "formula"),
    ];
    ctx.csv(
        "cone_constants.csv",
        &["constant", "value", "provenance", "inputs_hash"],
        ledger
            .iter()
            .map(|(k, v, p)| vec![k.to_string(), fmt(*v), p.to_string(), inputs_hash.clone()]),
    )?;
    // invariance, bowen, contraction
    let ns_inv: Vec<usize> = vec![consts.n0.min(last - 1), (2 * consts.n0).min(last - 1)];
    let inv = cones::cone_invariance_test(
        &lab.orbit,
        &family,
        &consts,
        &lab.potential,
        0,
        &ns_inv,
        12,
        cfg.seed,
    )?;
    ctx.csv(
        "cone_invariance.csv",
        &["n", "passes", "samples"],
        inv.rows
            .iter()
            .map(|(n, p, s)| vec![fmt(*n as f64), fmt(*p as f64), fmt(*s as f64)]),
    )?;
    pass &= inv.pass_fraction == 1.0;
    details.push(format!("invariance={:.2}", inv.pass_fraction));
    let bowen = cones::bowen_step_check(
        &lab.orbit,
        &family,
        &consts,
        &lab.potential,
        0,
        big_r,
        8,
        cfg.seed ^ 0x9e37,
    )?;
    ctx.csv(
        "bowen_step.csv",
        &["sample", "a_emp", "remainder_in_c0"],
        bowen
            .a_emp
            .iter()
            .zip(&bowen.remainder_in_c0)
            .enumerate()
            .map(|(i, (a, ok))| vec![fmt(i as f64), fmt(*a), ok.to_string()]),
    )?;
    pass &= bowen.pass;
    details.push(format!("eta_xr={:.3}", bowen.eta_xr));
    let ns_contr: Vec<usize> = [2usize, 4, 6, 9, 12]
        .iter()
        .copied()
        .filter(|&n| n < last)
        .collect();
    let contraction = cones::contraction_rate(
        &lab.orbit,
        &family,
        &consts,
        &lab.potential,
        0,
        &ns_contr,
        6,
        cfg.seed ^ 0x51f1,
    )?;
    let path = ctx.csv(
        "contraction.csv",
        &["n", "diameter"],
        contraction
            .diameters
            .iter()
            .map(|(n, d)| vec![fmt(*n as f64), fmt(*d)]),
    )?;
    emit_plot_data(&path, "n", &["diameter"], &mut ctx.manifest)?;
    pass &= contraction.theta_fit < 1.0 && contraction.r_squared >= 0.9;
    details.push(format!(
        "theta={:.3} r2={:.3}",
        contraction.theta_fit, contraction.r_squared
    ));
    if clamped {
        details.push("bowen-depth-clamped".into());
    }
    Ok(PipelineOutcome {
        name: "cones",
        passed: pass,
        details: details.join(" "),
    })
}

fn correlations_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let window = cfg.geometry.window;
    let depth = cfg.geometry.pullback_depth;
    let lab = Lab::assemble(cfg, window + depth + 7)?;
    let family = lab.family(cfg, window)?;
    let r0 = cfg.geometry.r0;
    let g_obs = move |_: usize, z: Complex64| (z.re / r0).clamp(-1.0, 1.0);
    let h_obs = g_obs;
    let n_grid: Vec<usize> = vec![1, 2, 3, 4, 5, 6, 8, 10]
        .into_iter()
        .filter(|&n| n + 1 < window)
        .collect();
    let n_top = n_grid.iter().copied().max().unwrap_or(1);
    let usable_starts = window.saturating_sub(n_top + 1).max(1);
    let start_fibers: Vec<usize> = (0..cfg.stats.corr_fibers.min(usable_starts)).collect();
    let report = stats::correlation(
        &lab.orbit,
        &family,
        &lab.potential,
        &g_obs,
        &h_obs,
        &n_grid,
        &start_fibers,
    )?;
    let gfit_resid: Vec<f64> = report
        .ns
        .iter()
        .zip(&report.values)
        .map(|(&n, &v)| v - report.b_fit * report.theta_corr.powi(n as i32))
        .collect();
    let path = ctx.csv(
        "correlations.csv",
        &["n", "value", "fit_residual"],
        report
            .ns
            .iter()
            .zip(&report.values)
            .zip(&gfit_resid)
            .map(|((n, v), res)| vec![fmt(*n as f64), fmt(*v), fmt(*res)]),
    )?;
    emit_plot_data(&path, "n", &["value"], &mut ctx.manifest)?;
    let mut pass = report.r_squared >= 0.9 && report.theta_corr < 1.0;
    let mut details = vec![format!(
        "theta={:.3} r2={:.3}",
        report.theta_corr, report.r_squared
    )];
    // Monte-Carlo oracle at small n
    let mut mc_rows = Vec::new();
    for &n in &[1usize, 2, 5] {
        if !report.ns.contains(&n) {
            continue;
        }
        let (mc, se) = stats::correlation_monte_carlo(
            &lab.orbit,
            &family,
            &lab.potential,
            &g_obs,
            &h_obs,
            n,
            0,
            cfg.stats.mc_trajectories,
            cfg.seed ^ n as u64,
        )?;
        let op = {
            let single = stats::correlation(
                &lab.orbit,
                &family,
                &lab.potential,
                &g_obs,
                &h_obs,
                &[n],
                &[0],
            )?;
            single.signed[0]
        };
        let ok = (op - mc).abs() <= 3.0 * se.max(1e-12);
        if !ok {
            details.push(format!("mc-mismatch n={n} op={op:.4} mc={mc:.4} se={se:.4}"));
        }
        mc_rows.push(vec![
            fmt(n as f64),
            fmt(op),
            fmt(mc),
            fmt(se),
            ok.to_string(),
        ]);
        pass &= ok;
    }
    ctx.csv(
        "correlation_mc.csv",
        &["n", "operator", "monte_carlo", "std_error", "agree_3se"],
        mc_rows,
    )?;
    details.push("mc-checked".into());
    Ok(PipelineOutcome {
        name: "correlations",
        passed: pass,
        details: details.join(" "),
    })
}

fn clt_pipeline(ctx: &mut Ctx) -> Result<PipelineOutcome> {
    let cfg = ctx.cfg;
    let n = cfg.stats.clt_n;
    let depth = cfg.geometry.pullback_depth;
    // lighter potential keeps the long sweep linear in n
    let light = PotentialConfig {
        k_max: cfg.stats.clt_k_max,
        ..cfg.potential
    };
    let grid_cap = cfg.geometry.grid_max_points.min(700);
    // the window must host the burn-in, the Birkhoff length and the doubled
    // Green–Kubo correlation sweep; centering against unconverged early ρ
    // would bias every sum
    let sigma_fiber_count = 4usize;
    let burn_in = depth.min(30);
    let spread = 40usize.min(n.max(2) - 1).max(1);
    let window = (burn_in + spread + n + 2)
        .max(burn_in + sigma_fiber_count + 2 * cfg.stats.corr_k_cap + 2);
    let lab = Lab::assemble_with(cfg, window + depth + 5, light, grid_cap)?;
    let family = gibbs::gibbs_family(
        &lab.orbit,
        &light,
        window,
        depth,
        ReferenceKind::UniformWithin(cfg.geometry.r0),
    )?;
    let r0 = cfg.geometry.r0;
    let psi = move |_: usize, z: Complex64| (z.norm() / r0).tanh();
    let sigma_fibers: Vec<usize> = (burn_in..burn_in + sigma_fiber_count).collect();
    let report = stats::birkhoff_clt(
        &lab.orbit,
        &family,
        &light,
        &psi,
        burn_in,
        spread,
        n,
        cfg.stats.clt_samples,
        cfg.seed,
        cfg.stats.corr_k_cap,
        &sigma_fibers,
    )?;
    // quantile table against the fitted normal
    let mut sorted = report.normalized_sums.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sigma = report.sigma2.sqrt();
    let quantile_rows: Vec<Vec<String>> = (1..20)
        .map(|q| {
            let p = q as f64 / 20.0;
            let idx = ((sorted.len() as f64 * p) as usize).min(sorted.len() - 1);
            let z = inv_normal_cdf(p) * sigma;
            vec![fmt(p), fmt(sorted[idx]), fmt(z)]
        })
        .collect();
    let path = ctx.csv(
        "clt_quantiles.csv",
        &["p", "sample_quantile", "normal_quantile"],
        quantile_rows,
    )?;
    emit_plot_data(&path, "normal_quantile", &["sample_quantile"], &mut ctx.manifest)?;
    // histogram
    if !sorted.is_empty() {
        let lo = sorted[0];
        let hi = *sorted.last().unwrap();
        let bins = 40usize;
        let width = ((hi - lo) / bins as f64).max(1e-12);
        let mut counts = vec![0usize; bins];
        for &s in &sorted {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        ctx.csv(
            "clt_histogram.csv",
            &["bin_center", "count"],
            counts
                .iter()
                .enumerate()
                .map(|(b, c)| vec![fmt(lo + (b as f64 + 0.5) * width), fmt(*c as f64)]),
        )?;
    }
    let sigma_stable = if report.sigma2 > 0.0 {
        (report.sigma2_doubled - report.sigma2).abs() <= 0.05 * report.sigma2
    } else {
        false
    };
    let pass = !report.coboundary && report.p_value > 0.01 && sigma_stable;
    ctx.csv(
        "clt_summary.csv",
        &["metric", "value"],
        vec![
            vec!["n".into(), fmt(report.n as f64)],
            vec!["samples".into(), fmt(report.samples as f64)],
            vec!["sigma2".into(), fmt(report.sigma2)],
            vec!["sigma2_doubled".into(), fmt(report.sigma2_doubled)],
            vec!["ks_statistic".into(), fmt(report.ks_statistic)],
            vec!["p_value".into(), fmt(report.p_value)],
            vec!["escapes".into(), fmt(report.escapes as f64)],
        ],
    )?;
    Ok(PipelineOutcome {
        name: "clt",
        passed: pass,
        details: format!("p={:.4} sigma2={:.4}", report.p_value, report.sigma2),
    })
}

/// Inverse normal CDF (Acklam's rational approximation; |rel err| < 1.2e-9).
fn inv_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inv_normal_cdf(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A small, fast configuration for pipeline smoke tests.
    pub fn small_config(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_random_exp();
        cfg.geometry.window = 8;
        cfg.geometry.pullback_depth = 8;
        cfg.geometry.julia_depth = 8;
        cfg.geometry.grid_max_points = 250;
        cfg.potential.k_max = 60;
        cfg.potential.eps_tail = 2.0;
        cfg.stats.clt_n = 6;
        cfg.stats.clt_samples = 600;
        cfg.stats.corr_k_cap = 3;
        cfg.stats.corr_fibers = 2;
        cfg.stats.mc_trajectories = 3000;
        cfg.stats.clt_k_max = 60;
        cfg.output_dir = out.to_string_lossy().into_owned();
        cfg
    }

    #[test]
    fn pipeline_names_parse() {
        for name in Pipeline::NAMES {
            assert!(Pipeline::parse(name).is_some());
        }
        assert!(Pipeline::parse("nosuch").is_none());
    }

    #[test]
    fn check_conditions_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let report = run(&cfg, Pipeline::CheckConditions, dir.path()).unwrap();
        assert!(dir.path().join("conditions.csv").exists());
        assert!(dir.path().join("manifest.csv").exists());
        assert!(report.outcomes[0].passed, "{:?}", report.outcomes);
    }

    #[test]
    fn manifest_covers_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        run(&cfg, Pipeline::Julia, dir.path()).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let name = entry.unwrap().file_name().to_string_lossy().into_owned();
            if name == "manifest.csv" {
                continue;
            }
            assert!(
                manifest.contains(&name),
                "artifact {name} missing from manifest"
            );
        }
    }
}
