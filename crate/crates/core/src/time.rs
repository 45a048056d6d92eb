//! Explicit embedded Runge–Kutta integration with H211b digital-filter
//! step-size control.

use crate::error::{Error, Result};

/// Butcher tableau with an embedded error estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RkPair {
    pub name: &'static str,
    /// Strictly lower-triangular stage matrix, row-major `s × s`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub c: Vec<f64>,
    /// Order of the advancing solution.
    pub order: usize,
    pub embedded_order: usize,
    /// Last stage is evaluated at the new solution and can be reused.
    pub fsal: bool,
}

impl RkPair {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn a_at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages() + j]
    }

    /// Bogacki–Shampine 3(2), FSAL.
    pub fn bogacki_shampine() -> Self {
        #[rustfmt::skip]
        let a = vec![
            0.0, 0.0, 0.0, 0.0,
            0.5, 0.0, 0.0, 0.0,
            0.0, 0.75, 0.0, 0.0,
            2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0,
        ];
        Self {
            name: "bs32",
            a,
            b: vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            b_hat: vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125],
            c: vec![0.0, 0.5, 0.75, 1.0],
            order: 3,
            embedded_order: 2,
            fsal: true,
        }
    }

    /// Dormand–Prince 5(4), FSAL.
    pub fn dormand_prince() -> Self {
        #[rustfmt::skip]
        let a = vec![
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0, 0.0,
            19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0, 0.0,
            9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0, 0.0,
            35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0,
        ];
        Self {
            name: "dp54",
            a,
            b: vec![
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
                0.0,
            ],
            b_hat: vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ],
            c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
            order: 5,
            embedded_order: 4,
            fsal: true,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bs32" | "bogacki_shampine" => Ok(Self::bogacki_shampine()),
            "dp54" | "dormand_prince" => Ok(Self::dormand_prince()),
            other => Err(Error::InvalidArgument(format!(
                "unknown Runge-Kutta pair '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub pair: RkPair,
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// H211b filter parameter `b`.
    pub filter_b: f64,
    /// Upper bound on accepted plus rejected steps.
    pub max_steps: usize,
    /// Largest step size; a stability bound for problems whose error
    /// estimate alone does not limit the step.
    pub max_step: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self::with_tolerance(1e-8)
    }
}

impl StepController {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            pair: RkPair::bogacki_shampine(),
            rtol: tol,
            atol: tol,
            safety: 0.9,
            min_ratio: 0.2,
            max_ratio: 5.0,
            filter_b: 4.0,
            max_steps: 10_000_000,
            max_step: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::InvalidArgument(
                "safety factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio < 1.0 && self.max_ratio > 1.0) {
            return Err(Error::InvalidArgument(
                "step ratio clamps must bracket 1".into(),
            ));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument(
                "maximum step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub final_h: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub y: Vec<f64>,
    pub t: f64,
    pub stats: StepStats,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], c: &StepController) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = c.atol + c.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn weighted_norm(v: &[f64], y: &[f64], c: &StepController) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(x, yy)| (x / (c.atol + c.rtol * yy.abs())).powi(2))
        .sum();
    (s / n).sqrt()
}

pub fn integrate<F>(
    rhs: F,
    y0: &[f64],
    span: (f64, f64),
    controller: &StepController,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_with_observer(rhs, y0, span, controller, |_, _| Ok(()))
}

/// Adaptive integration; `observer(t, y)` runs after every accepted step.
pub fn integrate_with_observer<F, O>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    controller: &StepController,
    mut observer: O,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    controller.validate()?;
    let (t0, t1) = span;
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(
            "integration span must be increasing".into(),
        ));
    }
    let pair = &controller.pair;
    let s = pair.stages();
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = StepStats::default();
    if t1 == t0 {
        return Ok(Solution { y, t: t0, stats });
    }
    let span_len = t1 - t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; s];
    rhs(t0, &y, &mut k[0])?;
    stats.rhs_evaluations += 1;

    // initial step from derivative magnitudes
    let q = pair.embedded_order.min(pair.order) as f64;
    let d0 = weighted_norm(&y, &y, controller);
    let d1 = weighted_norm(&k[0], &y, controller);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span_len);
    let y_trial: Vec<f64> = y.iter().zip(&k[0]).map(|(a, b)| a + h0 * b).collect();
    let mut f_trial = vec![0.0; n];
    rhs(t0 + h0, &y_trial, &mut f_trial)?;
    stats.rhs_evaluations += 1;
    let diff: Vec<f64> = f_trial.iter().zip(&k[0]).map(|(a, b)| a - b).collect();
    let d2 = weighted_norm(&diff, &y, controller) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (q + 1.0))
    };
    let mut h = (100.0 * h0).min(h1).min(span_len).min(controller.max_step);

    let kexp = q + 1.0;
    let bfil = controller.filter_b;
    let mut prev_err: Option<f64> = None;
    let mut prev_ratio: f64 = 1.0;
    let mut t = t0;
    let mut ystage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut errv = vec![0.0; n];
    let mut k_last = vec![0.0; n];
    while t < t1 {
        if stats.accepted + stats.rejected >= controller.max_steps {
            return Err(Error::Solver(format!(
                "step limit {} reached at t = {t:e}",
                controller.max_steps
            )));
        }
        let last = t + h >= t1 - 1e-14 * span_len;
        if last {
            h = t1 - t;
        }
        if h < 1e-14 * span_len {
            return Err(Error::StepUnderflow {
                t,
                h,
                accepted: stats.accepted,
                rejected: stats.rejected,
            });
        }
        for i in 1..s {
            for (idx, ys) in ystage.iter_mut().enumerate() {
                let mut acc = y[idx];
                for j in 0..i {
                    let aij = pair.a_at(i, j);
                    if aij != 0.0 {
                        acc += h * aij * k[j][idx];
                    }
                }
                *ys = acc;
            }
            rhs(t + pair.c[i] * h, &ystage, &mut k[i])?;
            stats.rhs_evaluations += 1;
        }
        for idx in 0..n {
            let mut acc = 0.0;
            let mut e = 0.0;
            for j in 0..s {
                acc += pair.b[j] * k[j][idx];
                e += (pair.b[j] - pair.b_hat[j]) * k[j][idx];
            }
            ynew[idx] = y[idx] + h * acc;
            errv[idx] = h * e;
        }
        let err = error_norm(&errv, &y, &ynew, controller);
        if !err.is_finite() {
            stats.rejected += 1;
            h *= controller.min_ratio;
            prev_err = None;
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            stats.accepted += 1;
            stats.final_h = h;
            if pair.fsal {
                k_last.copy_from_slice(&k[s - 1]);
                k[0].copy_from_slice(&k_last);
            } else {
                rhs(t, &y, &mut k[0])?;
                stats.rhs_evaluations += 1;
            }
            observer(t, &y)?;
            let e1 = err.max(1e-10);
            let ratio = match prev_err {
                Some(e0) => {
                    (1.0 / e1).powf(1.0 / (bfil * kexp))
                        * (1.0 / e0).powf(1.0 / (bfil * kexp))
                        * prev_ratio.powf(-1.0 / bfil)
                }
                None => (1.0 / e1).powf(1.0 / kexp),
            };
            let ratio =
                (controller.safety * ratio).clamp(controller.min_ratio, controller.max_ratio);
            prev_err = Some(e1);
            prev_ratio = ratio;
            h = (h * ratio).min(controller.max_step);
        } else {
            stats.rejected += 1;
            let ratio =
                (controller.safety * (1.0 / err).powf(1.0 / kexp)).clamp(controller.min_ratio, 1.0);
            h *= ratio;
        }
    }
    Ok(Solution { y, t, stats })
}

/// Fixed-step integration with the advancing weights of `pair`.
pub fn integrate_fixed<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    steps: usize,
    pair: &RkPair,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "at least one step is required".into(),
        ));
    }
    let s = pair.stages();
    let n = y0.len();
    let h = (span.1 - span.0) / steps as f64;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; s];
    let mut ystage = vec![0.0; n];
    for step in 0..steps {
        let t = span.0 + step as f64 * h;
        for i in 0..s {
            for idx in 0..n {
                let mut acc = y[idx];
                for j in 0..i {
                    acc += h * pair.a_at(i, j) * k[j][idx];
                }
                ystage[idx] = acc;
            }
            rhs(t + pair.c[i] * h, &ystage, &mut k[i])?;
        }
        for idx in 0..n {
            y[idx] += h * (0..s).map(|j| pair.b[j] * k[j][idx]).sum::<f64>();
        }
    }
    Ok(y)
}
