//! Experiment drivers. Each returns the report files it produced as
//! `(file name, contents)` plus step statistics for the metadata file.

use std::fmt::Write;
use std::sync::Arc;

use rayon::prelude::*;

use sbpgcl::discretization::{freestream_test, Model, SemiDiscreteOperator};
use sbpgcl::mesh::build_perturbed_cube;
use sbpgcl::metrics::{analytic_metrics, build_metrics, gcl_residual, MetricProvenance};
use sbpgcl::physics::prim_to_cons;
use sbpgcl::sbp::{SbpOperator1D, TensorOperator3D};
use sbpgcl::time::{integrate_with_observer, StepStats};
use sbpgcl::verification::{
    calibrate_final_time, errors_csv, ratio_summary, ratios_csv, run_case, vortex_state,
    CaseResult, ComparisonRow, ErrorReport, VARIABLES,
};

use crate::config::{Command, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

fn solver(e: sbpgcl::Error) -> CliError {
    CliError::Solver(e.to_string())
}

#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    /// Resolved values that are not part of the config (calibrated `t_f`).
    pub notes: Vec<String>,
    /// `(label, stats)` per time integration.
    pub stats: Vec<(String, StepStats)>,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match cmd {
        Command::MetricsCheck => metrics_check(cfg),
        Command::Freestream => freestream(cfg),
        Command::Vortex if cfg.periodic => periodic_vortex(cfg),
        Command::Vortex | Command::Shock => error_study(cmd, cfg),
    }
}

fn cube(
    p: usize,
    cells: usize,
    eta: f64,
) -> Result<(TensorOperator3D, sbpgcl::mesh::HexMesh), CliError> {
    let sbp = TensorOperator3D::lgl(p).map_err(solver)?;
    let mesh = build_perturbed_cube(&sbp, cells, eta).map_err(solver)?;
    Ok((sbp, mesh))
}

fn metrics_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let variants = cfg.metric_variants().map_err(CliError::Config)?;

    let mut sbp_csv = String::from("p,accuracy_residual,symmetry_residual,min_weight\n");
    for &p in &cfg.sbp_degrees {
        let op = SbpOperator1D::lgl(p).map_err(solver)?;
        let n = op.n();
        let mut acc: f64 = 0.0;
        for k in 0..=p {
            let xk: Vec<f64> = op.nodes.iter().map(|x| x.powi(k as i32)).collect();
            let mut dx = vec![0.0; n];
            op.apply(&xk, &mut dx);
            for (i, x) in op.nodes.iter().enumerate() {
                let exact = if k == 0 {
                    0.0
                } else {
                    k as f64 * x.powi(k as i32 - 1)
                };
                acc = acc.max((dx[i] - exact).abs() / (k as f64).max(1.0));
            }
        }
        let mut sym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                sym = sym.max((op.q_at(i, j) + op.q_at(j, i) - op.e[i * n + j]).abs());
            }
        }
        let min_w = op.weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let _ = writeln!(sbp_csv, "{p},{acc:.16e},{sym:.16e},{min_w:.16e}");
    }
    report.files.push(("sbp.csv".into(), sbp_csv));

    // optimized metrics satisfy the weak (constrained) form with analytic
    // face data; the other variants are judged on the strong volume form
    let mut gcl = String::from(
        "p,eta,metric,volume_residual,constrained_residual,gcl_residual,metric_scale\n",
    );
    let mut summary = format!(
        "{:<4} {:<6} {:<15} {:>11} {:>11} {:>11}\n",
        "p", "eta", "metric", "volume", "constrained", "gcl"
    );
    for &p in &cfg.degrees {
        for &eta in &cfg.etas {
            let (sbp, mesh) = cube(p, cfg.cells_per_dir[0], eta)?;
            if cfg.dump_mesh {
                report
                    .files
                    .push((format!("mesh_p{p}_eta{eta}.txt"), mesh.dump()));
            }
            let an = analytic_metrics(&mesh, &sbp).map_err(solver)?;
            for &m in &variants {
                let set = build_metrics(&mesh, &sbp, m, &an).map_err(solver)?;
                let r = gcl_residual(&set, &an, &sbp, &mesh).map_err(solver)?;
                let (vol, con) = (r.volume_max_scaled(), r.constrained_max_scaled());
                let g = if m == MetricProvenance::Optimized {
                    con
                } else {
                    vol
                };
                let _ = writeln!(
                    gcl,
                    "{p},{eta},{},{vol:.16e},{con:.16e},{g:.16e},{:.16e}",
                    m.name(),
                    r.max_scale()
                );
                let _ = writeln!(
                    summary,
                    "{p:<4} {eta:<6} {:<15} {vol:>11.3e} {con:>11.3e} {g:>11.3e}",
                    m.name()
                );
            }
        }
    }
    report.files.push(("gcl.csv".into(), gcl));
    report.files.push(("summary.txt".into(), summary));
    Ok(report)
}

fn freestream(cfg: &RunConfig) -> Result<Report, CliError> {
    let variants = cfg.metric_variants().map_err(CliError::Config)?;
    let controller = cfg.controller().map_err(CliError::Config)?;
    let gas = cfg.vortex_params().gas();
    let state = prim_to_cons(&cfg.freestream_state, &gas);
    let mut cases = Vec::new();
    for &p in &cfg.degrees {
        for &eta in &cfg.etas {
            for &m in &variants {
                cases.push((p, eta, m));
            }
        }
    }
    let cells = cfg.cells_per_dir[0];
    let drifts: Vec<f64> = cases
        .par_iter()
        .map(|&(p, eta, m)| {
            let (sbp, mesh) = cube(p, cells, eta)?;
            let an = analytic_metrics(&mesh, &sbp).map_err(solver)?;
            let vol = build_metrics(&mesh, &sbp, m, &an).map_err(solver)?;
            let op = SemiDiscreteOperator::new(mesh, sbp, vol, an, Model::Euler(gas), cfg.sat())
                .map_err(solver)?
                .with_boundary(Arc::new(move |_, _, o: &mut [f64]| {
                    o.copy_from_slice(&state)
                }));
            freestream_test(&op, &state, cfg.t_final, &controller).map_err(solver)
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("p,eta,metric,drift\n");
    let mut summary = format!("{:<4} {:<6} {:<15} {:>11}\n", "p", "eta", "metric", "drift");
    for ((p, eta, m), d) in cases.iter().zip(&drifts) {
        let _ = writeln!(csv, "{p},{eta},{},{d:.16e}", m.name());
        let _ = writeln!(summary, "{p:<4} {eta:<6} {:<15} {d:>11.3e}", m.name());
    }
    Ok(Report {
        files: vec![
            ("freestream.csv".into(), csv),
            ("summary.txt".into(), summary),
        ],
        ..Report::default()
    })
}

fn resolve_final_time(cmd: Command, cfg: &RunConfig, report: &mut Report) -> Result<f64, CliError> {
    let Some(cal) = &cfg.calibration else {
        return Ok(cfg.t_final);
    };
    let metric =
        MetricProvenance::parse(&cal.metric).map_err(|e| CliError::Config(e.to_string()))?;
    let base = cfg
        .case_config(cmd, cal.degree, cal.eta, cfg.cells_per_dir[0], metric, 0.0)
        .map_err(CliError::Config)?;
    let tf = calibrate_final_time(&base, cal.density_error, cal.t_first, cal.t_max, 1e-9)
        .map_err(solver)?;
    report.notes.push(format!(
        "calibrated t_final = {tf:.16e} (density error {:e} at p = {}, eta = {}, {})",
        cal.density_error,
        cal.degree,
        cal.eta,
        metric.name()
    ));
    Ok(tf)
}

fn error_study(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let variants = cfg.metric_variants().map_err(CliError::Config)?;
    let tf = resolve_final_time(cmd, cfg, &mut report)?;
    let mut cases = Vec::new();
    for &cells in &cfg.cells_per_dir {
        for &p in &cfg.degrees {
            for &eta in &cfg.etas {
                for &m in &variants {
                    cases.push((
                        cells,
                        cfg.case_config(cmd, p, eta, cells, m, tf)
                            .map_err(CliError::Config)?,
                    ));
                }
            }
        }
    }
    let results: Vec<CaseResult> = cases
        .par_iter()
        .map(|(_, c)| run_case(c))
        .collect::<Result<_, _>>()
        .map_err(solver)?;
    for ((cells, _), r) in cases.iter().zip(&results) {
        report.stats.push((
            format!(
                "{} p={} eta={} {} cells={cells}",
                r.report.case,
                r.report.p,
                r.report.eta,
                r.report.metric.name()
            ),
            r.stats,
        ));
    }
    let reports_for = |cells: usize| -> Vec<ErrorReport> {
        cases
            .iter()
            .zip(&results)
            .filter(|((c, _), _)| *c == cells)
            .map(|(_, r)| r.report.clone())
            .collect()
    };

    let mut summary = String::new();
    if cfg.cells_per_dir.len() == 1 {
        let reports = reports_for(cfg.cells_per_dir[0]);
        report
            .files
            .push(("errors.csv".into(), errors_csv(&reports)));
        summary.push_str(&error_table(&reports));
        let rows = comparison_rows(&reports);
        if !rows.is_empty() {
            report.files.push(("ratios.csv".into(), ratios_csv(&rows)));
            summary.push_str("\nThomas-Lombard / optimized error ratios\n");
            summary.push_str(&ratio_summary(&rows));
        }
    } else {
        let mut conv = String::from(
            "case,p,eta,metric,variable,cells_coarse,cells_fine,error_coarse,error_fine,rate\n",
        );
        for &cells in &cfg.cells_per_dir {
            let reports = reports_for(cells);
            report
                .files
                .push((format!("errors_{cells}.csv"), errors_csv(&reports)));
            let _ = writeln!(summary, "{cells}^3 elements");
            summary.push_str(&error_table(&reports));
            summary.push('\n');
        }
        for pair in cfg.cells_per_dir.windows(2) {
            let (coarse, fine) = (reports_for(pair[0]), reports_for(pair[1]));
            for (a, b) in coarse.iter().zip(&fine) {
                for (v, name) in VARIABLES.iter().enumerate() {
                    let rate =
                        (a.errors[v] / b.errors[v]).ln() / (pair[1] as f64 / pair[0] as f64).ln();
                    let _ = writeln!(
                        conv,
                        "{},{},{},{},{name},{},{},{:.16e},{:.16e},{rate:.16e}",
                        a.case,
                        a.p,
                        a.eta,
                        a.metric.name(),
                        pair[0],
                        pair[1],
                        a.errors[v],
                        b.errors[v]
                    );
                    if v == 0 {
                        let _ = writeln!(
                            summary,
                            "density rate p={} eta={} {} {}->{}: {rate:.3}",
                            a.p,
                            a.eta,
                            a.metric.name(),
                            pair[0],
                            pair[1]
                        );
                    }
                }
            }
        }
        report.files.push(("convergence.csv".into(), conv));
    }
    report.files.push(("summary.txt".into(), summary));
    Ok(report)
}

/// Pairs Thomas–Lombard and optimized reports with equal `(p, η)`.
fn comparison_rows(reports: &[ErrorReport]) -> Vec<ComparisonRow> {
    reports
        .iter()
        .filter(|r| r.metric == MetricProvenance::ThomasLombard)
        .filter_map(|tl| {
            reports
                .iter()
                .find(|o| o.metric == MetricProvenance::Optimized && o.p == tl.p && o.eta == tl.eta)
                .map(|o| ComparisonRow {
                    p: tl.p,
                    eta: tl.eta,
                    thomas_lombard: tl.clone(),
                    optimized: o.clone(),
                })
        })
        .collect()
}

fn error_table(reports: &[ErrorReport]) -> String {
    let mut s = format!("{:<4} {:<6} {:<15}", "p", "eta", "metric");
    for v in VARIABLES {
        let _ = write!(s, " {v:>10}");
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{:<4} {:<6} {:<15}", r.p, r.eta, r.metric.name());
        for e in r.errors {
            let _ = write!(s, " {e:>10.3e}");
        }
        s.push('\n');
    }
    s
}

fn periodic_vortex(cfg: &RunConfig) -> Result<Report, CliError> {
    let variants = cfg.metric_variants().map_err(CliError::Config)?;
    let controller = cfg.controller().map_err(CliError::Config)?;
    let vp = cfg.vortex_params();
    let gas = vp.gas();
    let cells = cfg.cells_per_dir[0];
    let mut report = Report::default();
    let mut csv =
        String::from("p,eta,metric,step,t,mass,momentum_1,momentum_2,momentum_3,energy,entropy\n");
    let mut summary = format!(
        "{:<4} {:<6} {:<15} {:>16} {:>16} {:>20}\n",
        "p", "eta", "metric", "conserved_drift", "entropy_drift", "max_entropy_increase"
    );
    for &p in &cfg.degrees {
        for &eta in &cfg.etas {
            for &m in &variants {
                let (sbp, mut mesh) = cube(p, cells, eta)?;
                for d in 0..3 {
                    mesh.make_periodic(d, 2.0).map_err(solver)?;
                }
                let an = analytic_metrics(&mesh, &sbp).map_err(solver)?;
                let vol = build_metrics(&mesh, &sbp, m, &an).map_err(solver)?;
                let op =
                    SemiDiscreteOperator::new(mesh, sbp, vol, an, Model::Euler(gas), cfg.sat())
                        .map_err(solver)?;
                let q0 = op.sample(|x, o| {
                    o.copy_from_slice(&prim_to_cons(&vortex_state(x, 0.0, &vp), &gas))
                });
                let mut history = vec![(
                    0.0,
                    op.integrate(&q0),
                    op.total_entropy(&q0).map_err(solver)?,
                )];
                let sol = integrate_with_observer(
                    |t, y, dy| op.time_derivative(y, t, dy),
                    &q0,
                    (0.0, cfg.t_final),
                    &controller,
                    |t, y| {
                        history.push((t, op.integrate(y), op.total_entropy(y)?));
                        Ok(())
                    },
                )
                .map_err(solver)?;
                let (_, m0, s0) = &history[0];
                let mut drift: f64 = 0.0;
                let mut rise = f64::NEG_INFINITY;
                for (step, (t, tot, s)) in history.iter().enumerate() {
                    let _ = write!(csv, "{p},{eta},{},{step},{t:.16e}", m.name());
                    for v in tot {
                        let _ = write!(csv, ",{v:.16e}");
                    }
                    let _ = writeln!(csv, ",{s:.16e}");
                    drift = tot
                        .iter()
                        .zip(m0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(drift, f64::max);
                    if step > 0 {
                        rise = rise.max(s - history[step - 1].2);
                    }
                }
                let s_end = history.last().map(|h| h.2).unwrap_or(*s0);
                let _ = writeln!(
                    summary,
                    "{p:<4} {eta:<6} {:<15} {drift:>16.3e} {:>16.3e} {rise:>20.3e}",
                    m.name(),
                    (s_end - s0).abs()
                );
                report.stats.push((
                    format!("vortex-periodic p={p} eta={eta} {}", m.name()),
                    sol.stats,
                ));
            }
        }
    }
    report.files.push(("conservation.csv".into(), csv));
    report.files.push(("summary.txt".into(), summary));
    Ok(report)
}
