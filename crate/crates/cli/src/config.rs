//! JSON run configuration. A config file is merged over the defaults of the
//! chosen subcommand, so it only needs the fields it changes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sbpgcl::discretization::{Dissipation, SatConfig};
use sbpgcl::metrics::MetricProvenance;
use sbpgcl::time::{RkPair, StepController};
use sbpgcl::verification::{CaseConfig, CaseKind, ShockParams, VortexParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MetricsCheck,
    Freestream,
    Vortex,
    Shock,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MetricsCheck => "metrics-check",
            Command::Freestream => "freestream",
            Command::Vortex => "vortex",
            Command::Shock => "shock",
        }
    }
}

/// Final time found by matching the density error of one reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub degree: usize,
    pub eta: f64,
    pub metric: String,
    pub density_error: f64,
    /// Initial guess; doubled until the error exceeds the target.
    pub t_first: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    pub epsilon: f64,
    pub mach: f64,
    pub c_inf: f64,
    pub gamma: f64,
    pub alpha_deg: f64,
}

impl Default for VortexConfig {
    fn default() -> Self {
        let v = VortexParams::default();
        Self {
            epsilon: v.epsilon,
            mach: v.mach,
            c_inf: v.c_inf,
            gamma: v.gamma,
            alpha_deg: v.alpha_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockConfig {
    pub mach: f64,
    pub reynolds: f64,
    pub prandtl: f64,
    pub gamma: f64,
    pub u_left: f64,
    /// Shock normal; normalized before use.
    pub direction: [f64; 3],
    pub translation: [f64; 3],
    pub length: f64,
}

impl Default for ShockConfig {
    fn default() -> Self {
        let s = ShockParams::default();
        Self {
            mach: s.mach,
            reynolds: s.reynolds,
            prandtl: s.prandtl,
            gamma: s.gamma,
            u_left: s.u_left,
            direction: [1.0, 1.0, 1.0],
            translation: s.translation,
            length: s.length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional guard: must name the subcommand the file is used with.
    pub case: Option<String>,
    pub degrees: Vec<usize>,
    pub etas: Vec<f64>,
    /// More than one entry turns a vortex or shock run into a convergence
    /// study between consecutive refinements.
    pub cells_per_dir: Vec<usize>,
    pub metrics: Vec<String>,
    pub t_final: f64,
    /// Replaces `t_final` when present.
    pub calibration: Option<Calibration>,
    pub tolerance: f64,
    pub rk_pair: String,
    pub dissipation: bool,
    pub ip_coefficient: f64,
    /// Vortex only: periodic cube, conservation history instead of errors.
    pub periodic: bool,
    /// Primitive `[ρ, u1, u2, u3, T]` for the free-stream test.
    pub freestream_state: [f64; 5],
    pub dump_mesh: bool,
    /// Degrees for the one-dimensional operator check of `metrics-check`.
    pub sbp_degrees: Vec<usize>,
    pub vortex: VortexConfig,
    pub shock: ShockConfig,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn defaults(cmd: Command) -> Self {
        let base = Self {
            case: None,
            degrees: vec![2, 3, 4],
            etas: vec![1.0],
            cells_per_dir: vec![3],
            metrics: vec![
                "analytic".into(),
                "thomas_lombard".into(),
                "optimized".into(),
            ],
            t_final: 1.0,
            calibration: None,
            tolerance: 1e-8,
            rk_pair: "bs32".into(),
            dissipation: true,
            ip_coefficient: SatConfig::gas_default().ip_coefficient,
            periodic: false,
            freestream_state: [1.0, 0.7, -0.4, 1.0, 1.0],
            dump_mesh: false,
            sbp_degrees: (1..=16).collect(),
            vortex: VortexConfig::default(),
            shock: ShockConfig::default(),
            output: None,
        };
        let comparison = vec!["thomas_lombard".into(), "optimized".into()];
        let all_etas = vec![0.25, 0.5, 0.75, 1.0];
        match cmd {
            Command::MetricsCheck | Command::Freestream => base,
            Command::Vortex => Self {
                degrees: vec![1, 2, 3, 4],
                etas: all_etas,
                metrics: comparison,
                calibration: Some(Calibration {
                    degree: 1,
                    eta: 0.25,
                    metric: "thomas_lombard".into(),
                    density_error: 6.062e-3,
                    t_first: 0.02,
                    t_max: 10.0,
                }),
                ..base
            },
            Command::Shock => Self {
                degrees: vec![2],
                etas: all_etas,
                metrics: comparison,
                t_final: 5.0,
                ..base
            },
        }
    }

    /// Merges a JSON document over the subcommand defaults.
    pub fn from_json(cmd: Command, text: &str) -> Result<Self, String> {
        let user: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
        if !user.is_object() {
            return Err("config must be a JSON object".into());
        }
        let mut merged = serde_json::to_value(Self::defaults(cmd)).map_err(|e| e.to_string())?;
        merge(&mut merged, user);
        serde_json::from_value(merged).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn metric_variants(&self) -> Result<Vec<MetricProvenance>, String> {
        self.metrics
            .iter()
            .map(|m| MetricProvenance::parse(m).map_err(|e| e.to_string()))
            .collect()
    }

    pub fn controller(&self) -> Result<StepController, String> {
        let mut c = StepController::with_tolerance(self.tolerance);
        c.pair = RkPair::parse(&self.rk_pair).map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub fn sat(&self) -> SatConfig {
        SatConfig {
            dissipation: if self.dissipation {
                Dissipation::Scalar
            } else {
                Dissipation::None
            },
            ip_coefficient: self.ip_coefficient,
            ..SatConfig::gas_default()
        }
    }

    pub fn vortex_params(&self) -> VortexParams {
        VortexParams {
            epsilon: self.vortex.epsilon,
            mach: self.vortex.mach,
            c_inf: self.vortex.c_inf,
            gamma: self.vortex.gamma,
            alpha_deg: self.vortex.alpha_deg,
            ..VortexParams::default()
        }
    }

    pub fn shock_params(&self) -> Result<ShockParams, String> {
        let d = self.shock.direction;
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err("shock direction must be a nonzero finite vector".into());
        }
        Ok(ShockParams {
            mach: self.shock.mach,
            reynolds: self.shock.reynolds,
            prandtl: self.shock.prandtl,
            gamma: self.shock.gamma,
            u_left: self.shock.u_left,
            direction: d.map(|v| v / norm),
            translation: self.shock.translation,
            length: self.shock.length,
        })
    }

    pub fn case_kind(&self, cmd: Command) -> Result<CaseKind, String> {
        match cmd {
            Command::Shock => Ok(CaseKind::Shock(self.shock_params()?)),
            _ => Ok(CaseKind::Vortex(self.vortex_params())),
        }
    }

    /// Every check that does not need a solve.
    pub fn validate(&self, cmd: Command) -> Result<(), String> {
        if let Some(case) = &self.case {
            if case != cmd.name() {
                return Err(format!(
                    "config is for '{case}' but the subcommand is '{}'",
                    cmd.name()
                ));
            }
        }
        if self.degrees.is_empty() || self.etas.is_empty() || self.cells_per_dir.is_empty() {
            return Err("degrees, etas and cells_per_dir must be non-empty".into());
        }
        if let Some(p) = self.degrees.iter().find(|p| !(1..=16).contains(*p)) {
            return Err(format!("degree {p} outside 1..=16"));
        }
        if let Some(p) = self.sbp_degrees.iter().find(|p| !(1..=32).contains(*p)) {
            return Err(format!("operator check degree {p} outside 1..=32"));
        }
        if let Some(eta) = self.etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(format!(
                "perturbation amplitude {eta} must be finite and non-negative"
            ));
        }
        if let Some(c) = self.cells_per_dir.iter().find(|c| !(1..=32).contains(*c)) {
            return Err(format!("cells_per_dir {c} outside 1..=32"));
        }
        let variants = self.metric_variants()?;
        if variants.is_empty() {
            return Err("at least one metric variant is required".into());
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err("t_final must be finite and non-negative".into());
        }
        self.controller()?;
        if !(self.ip_coefficient.is_finite() && self.ip_coefficient >= 0.0) {
            return Err("ip_coefficient must be finite and non-negative".into());
        }
        if self.periodic && cmd != Command::Vortex {
            return Err("periodic runs are only available for the vortex".into());
        }
        if self.freestream_state.iter().any(|v| !v.is_finite())
            || self.freestream_state[0] <= 0.0
            || self.freestream_state[4] <= 0.0
        {
            return Err(
                "freestream_state needs finite values with positive density and temperature".into(),
            );
        }
        if let Some(c) = &self.calibration {
            if !matches!(cmd, Command::Vortex | Command::Shock) {
                return Err("calibration applies to vortex and shock runs only".into());
            }
            MetricProvenance::parse(&c.metric).map_err(|e| e.to_string())?;
            if !(1..=16).contains(&c.degree) || !(c.eta.is_finite() && c.eta >= 0.0) {
                return Err("calibration degree or eta out of range".into());
            }
            if !(c.density_error > 0.0 && c.t_first > 0.0 && c.t_max >= c.t_first) {
                return Err("calibration needs density_error > 0 and 0 < t_first <= t_max".into());
            }
        }
        match cmd {
            Command::Vortex | Command::Freestream => {
                self.vortex_params().validate().map_err(|e| e.to_string())?
            }
            Command::Shock => self.shock_params()?.validate().map_err(|e| e.to_string())?,
            Command::MetricsCheck => {}
        }
        Ok(())
    }

    pub fn case_config(
        &self,
        cmd: Command,
        p: usize,
        eta: f64,
        cells: usize,
        metric: MetricProvenance,
        t_final: f64,
    ) -> Result<CaseConfig, String> {
        let mut c = CaseConfig::new(self.case_kind(cmd)?, p, eta, metric, t_final);
        c.cells_per_dir = cells;
        c.controller = self.controller()?;
        c.sat = self.sat();
        Ok(c)
    }
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        for cmd in [
            Command::MetricsCheck,
            Command::Freestream,
            Command::Vortex,
            Command::Shock,
        ] {
            let c = RunConfig::from_json(cmd, "{}").unwrap();
            assert_eq!(c, RunConfig::defaults(cmd));
            c.validate(cmd).unwrap();
        }
    }

    #[test]
    fn nested_fields_merge() {
        let c = RunConfig::from_json(Command::Shock, r#"{"shock": {"reynolds": 20}}"#).unwrap();
        assert_eq!(c.shock.reynolds, 20.0);
        assert_eq!(c.shock.mach, ShockParams::default().mach);
    }

    #[test]
    fn null_disables_calibration() {
        let c = RunConfig::from_json(Command::Vortex, r#"{"calibration": null}"#).unwrap();
        assert!(c.calibration.is_none());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(RunConfig::from_json(Command::Vortex, r#"{"degre": [2]}"#).is_err());
        assert!(RunConfig::from_json(Command::Vortex, "[1]").is_err());
        let bad = [
            r#"{"degrees": [0]}"#,
            r#"{"etas": [-0.5]}"#,
            r#"{"metrics": ["curl"]}"#,
            r#"{"tolerance": 0}"#,
            r#"{"rk_pair": "rk4"}"#,
            r#"{"case": "shock"}"#,
            r#"{"vortex": {"mach": -1}}"#,
        ];
        for text in bad {
            let c = RunConfig::from_json(Command::Vortex, text).unwrap();
            assert!(c.validate(Command::Vortex).is_err(), "{text}");
        }
        let c =
            RunConfig::from_json(Command::Shock, r#"{"shock": {"direction": [0, 0, 0]}}"#).unwrap();
        assert!(c.validate(Command::Shock).is_err());
    }
}
