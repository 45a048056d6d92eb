//! Exact solutions (isentropic vortex, viscous shock), the volume-scaled
//! L² error norm, and drivers that compare Thomas–Lombard and optimized
//! metric terms on the perturbed cube.

use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::discretization::{Model, SatConfig, SemiDiscreteOperator};
use crate::error::{Error, Result};
use crate::mesh::{build_perturbed_cube, HexMesh};
use crate::metrics::{analytic_metrics, build_metrics, MetricProvenance, MetricSet};
use crate::physics::{cons_to_prim, prim_to_cons, GasModel, NVAR};
use crate::sbp::TensorOperator3D;
use crate::time::{integrate, StepController, StepStats};

/// Primitive state `[ρ, u1, u2, u3, T]`.
pub type PrimState = [f64; NVAR];

/// Column names of the primitive variables in reports.
pub const VARIABLES: [&str; NVAR] = ["rho", "u1", "u2", "u3", "T"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexParams {
    pub epsilon: f64,
    pub mach: f64,
    /// Free-stream speed of sound. With `T∞ = 1` the displayed temperature
    /// profile is an exact Euler solution only when `c∞ M∞ = 1`.
    pub c_inf: f64,
    pub gamma: f64,
    pub alpha_deg: f64,
    pub center: [f64; 3],
}

impl Default for VortexParams {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            mach: 0.5,
            c_inf: 2.0,
            gamma: 1.4,
            alpha_deg: 45.0,
            center: [0.0; 3],
        }
    }
}

impl VortexParams {
    pub fn u_inf(&self) -> f64 {
        self.mach * self.c_inf
    }

    /// Gas with `T∞ = 1` and `γ R T∞ = c∞²`.
    pub fn gas(&self) -> GasModel {
        GasModel::inviscid(self.gamma, self.c_inf * self.c_inf / self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mach > 0.0) || !(self.c_inf > 0.0) || !(self.gamma > 1.0) {
            return Err(Error::InvalidArgument(
                "vortex needs M∞ > 0, c∞ > 0 and γ > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Isentropic vortex advected with the free stream.
pub fn vortex_state(x: [f64; 3], t: f64, p: &VortexParams) -> PrimState {
    let u = p.u_inf();
    let al = p.alpha_deg.to_radians();
    let dx = x[0] - p.center[0] - u * al.cos() * t;
    let dy = x[1] - p.center[1] - u * al.sin() * t;
    let g = 1.0 - (dx * dx + dy * dy);
    let temp =
        1.0 - p.epsilon * p.epsilon * p.mach * p.mach * (p.gamma - 1.0) / (8.0 * PI * PI) * g.exp();
    let rho = temp.powf(1.0 / (p.gamma - 1.0));
    let amp = p.epsilon / (2.0 * PI) * (0.5 * g).exp();
    [
        rho,
        u * al.cos() - amp * dy,
        u * al.sin() + amp * dx,
        1.0,
        temp,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockParams {
    pub mach: f64,
    pub reynolds: f64,
    pub prandtl: f64,
    pub gamma: f64,
    /// Upstream speed in the shock frame (`ρ_L = 1`, `T_L = 1`, so the
    /// upstream sound speed is `u_left / M∞`).
    pub u_left: f64,
    /// Unit normal of the shock plane (flow direction in the shock frame).
    pub direction: [f64; 3],
    /// Uniform velocity added to the shock-frame solution.
    pub translation: [f64; 3],
    /// Reference length of the Reynolds number.
    pub length: f64,
}

impl Default for ShockParams {
    fn default() -> Self {
        let s = 1.0 / 3f64.sqrt();
        Self {
            mach: 2.5,
            reynolds: 10.0,
            prandtl: 0.75,
            gamma: 1.4,
            u_left: 1.0,
            direction: [s, s, s],
            translation: [0.0; 3],
            length: 2.0,
        }
    }
}

impl ShockParams {
    /// `U_R / U_L` from the Rankine–Hugoniot relations.
    pub fn v_f(&self) -> f64 {
        let m2 = self.mach * self.mach;
        (2.0 + (self.gamma - 1.0) * m2) / ((self.gamma + 1.0) * m2)
    }

    pub fn mass_flow(&self) -> f64 {
        self.u_left
    }

    /// `ρ_L U_L L / Re∞`.
    pub fn mu(&self) -> f64 {
        self.u_left * self.length / self.reynolds
    }

    /// Gas constant giving `T_L = 1` and `c_L = U_L / M∞`.
    pub fn gas_constant(&self) -> f64 {
        let c = self.u_left / self.mach;
        c * c / self.gamma
    }

    pub fn alpha(&self) -> f64 {
        2.0 * self.gamma / (self.gamma + 1.0) * self.mu() / (self.prandtl * self.mass_flow())
    }

    pub fn gas(&self) -> Result<GasModel> {
        GasModel::new(self.gamma, self.gas_constant(), self.prandtl, self.mu())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mach > 1.0)
            || !(self.reynolds > 0.0)
            || !(self.prandtl > 0.0)
            || !(self.gamma > 1.0)
            || !(self.u_left > 0.0)
            || !(self.length > 0.0)
        {
            return Err(Error::InvalidArgument(
                "shock needs M∞ > 1 and positive Re∞, Pr, U_L, L with γ > 1".into(),
            ));
        }
        let n = norm(self.direction);
        if !((n - 1.0).abs() < 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "shock direction must be a unit vector, |n| = {n}"
            )));
        }
        Ok(())
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Left side of the implicit shock relation; increasing in `v` and zero at
/// the solution.
fn shock_relation(x: f64, v: f64, v_f: f64, alpha: f64) -> f64 {
    let a = (v - 1.0).abs();
    let b = (v - v_f).abs();
    x - 0.5 * alpha * ((a * b).ln() + (1.0 + v_f) / (1.0 - v_f) * (a / b).ln())
}

/// Normalized momentum `V ∈ (V_f, 1)` at signed distance `x` from the shock
/// center, by bisection.
pub fn shock_momentum(x: f64, p: &ShockParams) -> Result<f64> {
    let v_f = p.v_f();
    let alpha = p.alpha();
    if !(v_f > 0.0 && v_f < 1.0) || !(alpha > 0.0) {
        return Err(Error::Bracket(format!(
            "degenerate shock: V_f = {v_f}, alpha = {alpha}"
        )));
    }
    let (mut lo, mut hi) = (v_f + 1e-12, 1.0 - 1e-12);
    let (flo, fhi) = (
        shock_relation(x, lo, v_f, alpha),
        shock_relation(x, hi, v_f, alpha),
    );
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(Error::Bracket(format!(
            "no root in [{lo}, {hi}] at x = {x} (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shock_relation(x, mid, v_f, alpha) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Like [`shock_momentum`] but saturates at the bracket ends far from the
/// shock, where the profile equals its limit to within `1e-12`.
fn shock_momentum_saturated(x: f64, p: &ShockParams) -> Result<f64> {
    match shock_momentum(x, p) {
        Ok(v) => Ok(v),
        Err(Error::Bracket(_)) if x.is_finite() => {
            let v_f = p.v_f();
            if shock_relation(x, v_f + 1e-12, v_f, p.alpha()) > 0.0 {
                Ok(v_f + 1e-12)
            } else {
                Ok(1.0 - 1e-12)
            }
        }
        Err(e) => Err(e),
    }
}

/// Viscous shock: constant mass flow and total enthalpy in the shock frame,
/// then a uniform translation.
pub fn shock_state(x: [f64; 3], t: f64, p: &ShockParams) -> Result<PrimState> {
    let gas = p.gas()?;
    let n = p.direction;
    let s = p.translation;
    let xs = [x[0] - s[0] * t, x[1] - s[1] * t, x[2] - s[2] * t];
    let dist = xs[0] * n[0] + xs[1] * n[1] + xs[2] * n[2];
    let v = shock_momentum_saturated(dist, p)?;
    let ul = p.u_left;
    let un = ul * v;
    let rho = p.mass_flow() / un;
    // c_p T + u²/2 = c_p T_L + U_L²/2 with T_L = 1
    let temp = 1.0 + (ul * ul - un * un) / (2.0 * gas.cp());
    Ok([
        rho,
        un * n[0] + s[0],
        un * n[1] + s[1],
        un * n[2] + s[2],
        temp,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub case: String,
    pub p: usize,
    pub eta: f64,
    pub metric: MetricProvenance,
    pub t_final: f64,
    /// Volume-scaled L² error per primitive variable.
    pub errors: [f64; NVAR],
}

/// Volume-scaled L² norm of `prim(q) − exact(x)` per primitive variable,
/// `sqrt(Ω_c⁻¹ Σ eᵀ M J e)` per variable with `Ω_c = Σ 1ᵀ M J 1`.
pub fn l2_error(
    q: &[f64],
    exact: impl Fn([f64; 3]) -> Result<PrimState> + Sync,
    mesh: &HexMesh,
    sbp: &TensorOperator3D,
    jac: &MetricSet,
    gas: &GasModel,
) -> Result<[f64; NVAR]> {
    let n = sbp.num_nodes();
    let k_el = mesh.num_elements();
    if q.len() != k_el * n * NVAR {
        return Err(Error::SizeMismatch {
            expected: k_el * n * NVAR,
            got: q.len(),
        });
    }
    if jac.elements.len() != k_el {
        return Err(Error::SizeMismatch {
            expected: k_el,
            got: jac.elements.len(),
        });
    }
    let partial: Vec<(f64, [f64; NVAR])> = (0..k_el)
        .into_par_iter()
        .map(|e| -> Result<(f64, [f64; NVAR])> {
            let em = &jac.elements[e];
            let mut vol = 0.0;
            let mut acc = [0.0; NVAR];
            for k in 0..n {
                let i = (e * n + k) * NVAR;
                let qs: [f64; NVAR] = q[i..i + NVAR].try_into().expect("five variables");
                let num = cons_to_prim(&qs, gas).map_err(|x| x.at(e, k))?;
                let ex = exact(mesh.elements[e].coords[k])?;
                let w = sbp.mass[k] * em.j[k];
                vol += w;
                for v in 0..NVAR {
                    acc[v] += w * (num[v] - ex[v]).powi(2);
                }
            }
            Ok((vol, acc))
        })
        .collect::<Result<_>>()?;
    let omega: f64 = partial.iter().map(|p| p.0).sum();
    let mut out = [0.0; NVAR];
    for (_, acc) in &partial {
        for v in 0..NVAR {
            out[v] += acc[v];
        }
    }
    Ok(out.map(|s| (s / omega).sqrt()))
}

/// `Σ 1ᵀ M J 1`.
pub fn domain_volume(sbp: &TensorOperator3D, jac: &MetricSet) -> f64 {
    jac.elements
        .iter()
        .map(|em| em.j.iter().zip(&sbp.mass).map(|(j, m)| j * m).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseKind {
    Vortex(VortexParams),
    Shock(ShockParams),
}

impl CaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            CaseKind::Vortex(_) => "vortex",
            CaseKind::Shock(_) => "shock",
        }
    }

    pub fn gas(&self) -> Result<GasModel> {
        match self {
            CaseKind::Vortex(v) => Ok(v.gas()),
            CaseKind::Shock(s) => s.gas(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        Ok(match self {
            CaseKind::Vortex(v) => Model::Euler(v.gas()),
            CaseKind::Shock(s) => Model::NavierStokes(s.gas()?),
        })
    }

    pub fn exact(&self, x: [f64; 3], t: f64) -> Result<PrimState> {
        match self {
            CaseKind::Vortex(v) => Ok(vortex_state(x, t, v)),
            CaseKind::Shock(s) => shock_state(x, t, s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CaseKind::Vortex(v) => v.validate(),
            CaseKind::Shock(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub kind: CaseKind,
    pub degree: usize,
    pub cells_per_dir: usize,
    pub eta: f64,
    pub metric: MetricProvenance,
    pub t_final: f64,
    pub controller: StepController,
    pub sat: SatConfig,
}

impl CaseConfig {
    /// Perturbed-cube defaults: 27 elements, tolerance `1e-8`, dissipative
    /// interface fluxes.
    pub fn new(
        kind: CaseKind,
        degree: usize,
        eta: f64,
        metric: MetricProvenance,
        t_final: f64,
    ) -> Self {
        Self {
            kind,
            degree,
            cells_per_dir: 3,
            eta,
            metric,
            t_final,
            controller: StepController::default(),
            sat: SatConfig::gas_default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub report: ErrorReport,
    pub stats: StepStats,
}

/// Operator for a case with boundary data from the exact solution.
pub fn build_case_operator(cfg: &CaseConfig) -> Result<SemiDiscreteOperator> {
    cfg.kind.validate()?;
    if cfg.degree == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let sbp = TensorOperator3D::lgl(cfg.degree)?;
    let mesh = build_perturbed_cube(&sbp, cfg.cells_per_dir, cfg.eta)?;
    let analytic = analytic_metrics(&mesh, &sbp)?;
    let volume = build_metrics(&mesh, &sbp, cfg.metric, &analytic)?;
    let gas = cfg.kind.gas()?;
    let kind = cfg.kind;
    let boundary = Arc::new(move |x: [f64; 3], t: f64, out: &mut [f64]| {
        // exact states are admissible wherever the shock relation brackets
        let w = kind.exact(x, t).unwrap_or([f64::NAN; NVAR]);
        out.copy_from_slice(&prim_to_cons(&w, &gas));
    });
    Ok(
        SemiDiscreteOperator::new(mesh, sbp, volume, analytic, cfg.kind.model()?, cfg.sat)?
            .with_boundary(boundary),
    )
}

/// Initial condition from the exact solution at `t = 0`.
pub fn initial_state(op: &SemiDiscreteOperator, kind: &CaseKind) -> Result<Vec<f64>> {
    let gas = kind.gas()?;
    let n = op.nodes_per_element();
    let mut q = vec![0.0; op.len()];
    for (e, el) in op.mesh.elements.iter().enumerate() {
        for k in 0..n {
            let w = kind.exact(el.coords[k], 0.0)?;
            let i = (e * n + k) * NVAR;
            q[i..i + NVAR].copy_from_slice(&prim_to_cons(&w, &gas));
        }
    }
    Ok(q)
}

/// Integrates one case to `t_final` and measures the error against the
/// exact solution.
pub fn run_case(cfg: &CaseConfig) -> Result<CaseResult> {
    if !(cfg.t_final >= 0.0) {
        return Err(Error::InvalidArgument(
            "final time must be non-negative".into(),
        ));
    }
    let op = build_case_operator(cfg)?;
    let q0 = initial_state(&op, &cfg.kind)?;
    let sol = integrate(
        |t, y, dy| op.time_derivative(y, t, dy),
        &q0,
        (0.0, cfg.t_final),
        &cfg.controller,
    )?;
    let gas = cfg.kind.gas()?;
    let tf = cfg.t_final;
    let errors = l2_error(
        &sol.y,
        |x| cfg.kind.exact(x, tf),
        &op.mesh,
        &op.sbp,
        &op.volume,
        &gas,
    )?;
    Ok(CaseResult {
        report: ErrorReport {
            case: cfg.kind.name().into(),
            p: cfg.degree,
            eta: cfg.eta,
            metric: cfg.metric,
            t_final: tf,
            errors,
        },
        stats: sol.stats,
    })
}

/// Smallest final time at which the density error of `cfg` reaches
/// `target`: the step is doubled from `t_first` until the error exceeds the
/// target, then the crossing is bisected to `rel_tol` of its value.
pub fn calibrate_final_time(
    cfg: &CaseConfig,
    target: f64,
    t_first: f64,
    t_max: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(target > 0.0 && t_first > 0.0 && t_max >= t_first && rel_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "calibration needs a positive target, a positive start time and t_max >= t_first"
                .into(),
        ));
    }
    let excess = |t: f64| -> Result<f64> {
        let mut c = cfg.clone();
        c.t_final = t;
        Ok(run_case(&c)?.report.errors[0] - target)
    };
    let (mut lo, mut hi) = (0.0, t_first);
    while excess(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > t_max {
            return Err(Error::Bracket(format!(
                "density error stays below {target:e} up to t = {t_max}"
            )));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: CaseKind,
    pub degrees: Vec<usize>,
    pub etas: Vec<f64>,
    pub t_final: f64,
    pub cells_per_dir: usize,
    pub controller: StepController,
    pub sat: SatConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub p: usize,
    pub eta: f64,
    pub thomas_lombard: ErrorReport,
    pub optimized: ErrorReport,
}

impl ComparisonRow {
    /// Thomas–Lombard error over optimized error per variable.
    pub fn ratios(&self) -> [f64; NVAR] {
        std::array::from_fn(|v| self.thomas_lombard.errors[v] / self.optimized.errors[v])
    }
}

/// Runs every `(p, η)` pair with Thomas–Lombard and optimized volume
/// metrics (analytic coupling metrics in both) in parallel.
pub fn comparison_study(study: &StudyConfig) -> Result<Vec<ComparisonRow>> {
    let mut cases = Vec::new();
    for &p in &study.degrees {
        for &eta in &study.etas {
            for metric in [MetricProvenance::ThomasLombard, MetricProvenance::Optimized] {
                cases.push(CaseConfig {
                    kind: study.kind,
                    degree: p,
                    cells_per_dir: study.cells_per_dir,
                    eta,
                    metric,
                    t_final: study.t_final,
                    controller: study.controller.clone(),
                    sat: study.sat,
                });
            }
        }
    }
    let results: Vec<CaseResult> = cases.par_iter().map(run_case).collect::<Result<_>>()?;
    Ok(results
        .chunks(2)
        .map(|pair| ComparisonRow {
            p: pair[0].report.p,
            eta: pair[0].report.eta,
            thomas_lombard: pair[0].report.clone(),
            optimized: pair[1].report.clone(),
        })
        .collect())
}

/// `case,p,eta,metric,variable,error` with 17 significant digits.
pub fn errors_csv(reports: &[ErrorReport]) -> String {
    let mut s = String::from("case,p,eta,metric,variable,error\n");
    for r in reports {
        for (v, name) in VARIABLES.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.16e}",
                r.case,
                r.p,
                r.eta,
                r.metric.name(),
                name,
                r.errors[v]
            );
        }
    }
    s
}

/// `case,p,eta,variable,error_thomas_lombard,error_optimized,ratio`.
pub fn ratios_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("case,p,eta,variable,error_thomas_lombard,error_optimized,ratio\n");
    for r in rows {
        let ratios = r.ratios();
        for (v, name) in VARIABLES.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.16e},{:.16e},{:.16e}",
                r.thomas_lombard.case,
                r.p,
                r.eta,
                name,
                r.thomas_lombard.errors[v],
                r.optimized.errors[v],
                ratios[v]
            );
        }
    }
    s
}

/// Ratio table rounded to four significant digits, one block per variable
/// with rows `p` and columns `η`.
pub fn ratio_summary(rows: &[ComparisonRow]) -> String {
    let mut etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    let mut ps: Vec<usize> = rows.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    let mut s = String::new();
    for (v, name) in VARIABLES.iter().enumerate() {
        let _ = write!(s, "{name:<6}");
        for eta in &etas {
            let _ = write!(s, " {:>9}", format!("eta={eta}"));
        }
        s.push('\n');
        for p in &ps {
            let _ = write!(s, "p={p:<4}");
            for eta in &etas {
                match rows.iter().find(|r| r.p == *p && r.eta == *eta) {
                    Some(r) => {
                        let _ = write!(s, " {:>9.3}", r.ratios()[v]);
                    }
                    None => {
                        let _ = write!(s, " {:>9}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s
}
