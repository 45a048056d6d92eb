//! Calorically perfect gas: state conversions, entropy variables, inviscid
//! and two-point fluxes, and viscous coefficient matrices.

use std::fmt;

use crate::error::{Error, Result};

pub const NVAR: usize = 5;
pub type State = [f64; NVAR];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    pub gamma: f64,
    pub r: f64,
    pub prandtl: f64,
    pub mu: f64,
    pub t_inf: f64,
    pub rho_inf: f64,
}

impl GasModel {
    pub fn new(gamma: f64, r: f64, prandtl: f64, mu: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must exceed 1, got {gamma}"
            )));
        }
        if !(r > 0.0) || !(prandtl > 0.0) || !(mu >= 0.0) {
            return Err(Error::InvalidArgument(
                "gas constant and Prandtl number must be positive, viscosity non-negative".into(),
            ));
        }
        Ok(Self {
            gamma,
            r,
            prandtl,
            mu,
            t_inf: 1.0,
            rho_inf: 1.0,
        })
    }

    pub fn inviscid(gamma: f64, r: f64) -> Self {
        Self {
            gamma,
            r,
            prandtl: 0.72,
            mu: 0.0,
            t_inf: 1.0,
            rho_inf: 1.0,
        }
    }

    #[inline]
    pub fn cp(&self) -> f64 {
        self.gamma * self.r / (self.gamma - 1.0)
    }

    #[inline]
    pub fn cv(&self) -> f64 {
        self.r / (self.gamma - 1.0)
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.cp() * self.mu / self.prandtl
    }

    pub fn is_viscous(&self) -> bool {
        self.mu > 0.0
    }
}

/// Reason a state was rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Inadmissible(pub String);

impl Inadmissible {
    pub fn at(self, element: usize, node: usize) -> Error {
        Error::InadmissibleState {
            element,
            node,
            reason: self.0,
        }
    }
}

impl fmt::Display for Inadmissible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Inadmissible> for Error {
    fn from(e: Inadmissible) -> Self {
        Error::InvalidArgument(format!("inadmissible state: {}", e.0))
    }
}

pub type PhysResult<T> = std::result::Result<T, Inadmissible>;

/// Primitive quantities cached for flux evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prim {
    pub rho: f64,
    pub u: [f64; 3],
    pub t: f64,
    pub p: f64,
}

impl Prim {
    pub fn from_cons(q: &State, gas: &GasModel) -> PhysResult<Self> {
        let [rho, u1, u2, u3, t] = cons_to_prim(q, gas)?;
        Ok(Self {
            rho,
            u: [u1, u2, u3],
            t,
            p: rho * gas.r * t,
        })
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        0.5 * self.rho / self.p
    }

    #[inline]
    pub fn sound_speed(&self, gas: &GasModel) -> f64 {
        (gas.gamma * self.p / self.rho).sqrt()
    }
}

/// `[ρ, u1, u2, u3, T]`.
pub fn cons_to_prim(q: &State, gas: &GasModel) -> PhysResult<[f64; 5]> {
    let rho = q[0];
    if !(rho > 0.0) {
        return Err(Inadmissible(format!("density {rho:e}")));
    }
    let u = [q[1] / rho, q[2] / rho, q[3] / rho];
    let ke = 0.5 * rho * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    let t = (q[4] - ke) / (rho * gas.cv());
    if !(t > 0.0) {
        return Err(Inadmissible(format!("temperature {t:e}")));
    }
    Ok([rho, u[0], u[1], u[2], t])
}

pub fn prim_to_cons(w: &[f64; 5], gas: &GasModel) -> State {
    let [rho, u1, u2, u3, t] = *w;
    [
        rho,
        rho * u1,
        rho * u2,
        rho * u3,
        rho * gas.cv() * t + 0.5 * rho * (u1 * u1 + u2 * u2 + u3 * u3),
    ]
}

pub fn pressure(q: &State, gas: &GasModel) -> PhysResult<f64> {
    Ok(Prim::from_cons(q, gas)?.p)
}

/// Specific entropy `s = c_v log(T/T∞) − R log(ρ/ρ∞)`.
pub fn specific_entropy(rho: f64, t: f64, gas: &GasModel) -> f64 {
    gas.cv() * (t / gas.t_inf).ln() - gas.r * (rho / gas.rho_inf).ln()
}

/// Mathematical entropy `S = −ρ s`.
pub fn entropy(q: &State, gas: &GasModel) -> PhysResult<f64> {
    let [rho, _, _, _, t] = cons_to_prim(q, gas)?;
    Ok(-rho * specific_entropy(rho, t, gas))
}

/// `W = ∂S/∂Q = [c_P − s − |u|²/(2T), u/T, −1/T]`.
pub fn entropy_vars(q: &State, gas: &GasModel) -> PhysResult<State> {
    let [rho, u1, u2, u3, t] = cons_to_prim(q, gas)?;
    let s = specific_entropy(rho, t, gas);
    let u2s = u1 * u1 + u2 * u2 + u3 * u3;
    Ok([
        gas.cp() - s - 0.5 * u2s / t,
        u1 / t,
        u2 / t,
        u3 / t,
        -1.0 / t,
    ])
}

pub fn entropy_vars_to_cons(w: &State, gas: &GasModel) -> PhysResult<State> {
    if !(w[4] < 0.0) {
        return Err(Inadmissible(format!("W5 = {:e} must be negative", w[4])));
    }
    let t = -1.0 / w[4];
    let u = [w[1] * t, w[2] * t, w[3] * t];
    let u2s = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let s = gas.cp() - w[0] - 0.5 * u2s / t;
    let rho = gas.rho_inf * ((gas.cv() * (t / gas.t_inf).ln() - s) / gas.r).exp();
    Ok(prim_to_cons(&[rho, u[0], u[1], u[2], t], gas))
}

/// Inviscid flux in Cartesian direction `m` (0-based).
pub fn euler_flux(q: &State, gas: &GasModel, m: usize) -> PhysResult<State> {
    let pr = Prim::from_cons(q, gas)?;
    let mut n = [0.0; 3];
    n[m] = 1.0;
    Ok(euler_flux_prim(&pr, q, n))
}

/// `Σ_m n_m F^I_m` from cached primitives.
#[inline]
pub fn euler_flux_prim(pr: &Prim, q: &State, n: [f64; 3]) -> State {
    let un = pr.u[0] * n[0] + pr.u[1] * n[1] + pr.u[2] * n[2];
    [
        q[0] * un,
        q[1] * un + pr.p * n[0],
        q[2] * un + pr.p * n[1],
        q[3] * un + pr.p * n[2],
        (q[4] + pr.p) * un,
    ]
}

/// Logarithmic mean `(a − b)/(log a − log b)`.
#[inline]
pub fn log_mean(a: f64, b: f64) -> f64 {
    let zeta = a / b;
    let f = (zeta - 1.0) / (zeta + 1.0);
    let u = f * f;
    if u < 1e-4 {
        let denom = 1.0 + u / 3.0 + u * u / 5.0 + u * u * u / 7.0;
        0.5 * (a + b) / denom
    } else {
        0.5 * (a + b) * f / (0.5 * zeta.ln())
    }
}

/// Entropy-conservative two-point flux contracted with `n`.
#[inline]
pub fn chandrashekar_flux_prim(l: &Prim, r: &Prim, gas: &GasModel, n: [f64; 3]) -> State {
    let (bl, br) = (l.beta(), r.beta());
    let rho_ln = log_mean(l.rho, r.rho);
    let beta_ln = log_mean(bl, br);
    let ub = [
        0.5 * (l.u[0] + r.u[0]),
        0.5 * (l.u[1] + r.u[1]),
        0.5 * (l.u[2] + r.u[2]),
    ];
    let p_hat = 0.5 * (l.rho + r.rho) / (bl + br);
    let u2_avg = 0.5
        * (l.u[0] * l.u[0]
            + l.u[1] * l.u[1]
            + l.u[2] * l.u[2]
            + r.u[0] * r.u[0]
            + r.u[1] * r.u[1]
            + r.u[2] * r.u[2]);
    let un = ub[0] * n[0] + ub[1] * n[1] + ub[2] * n[2];
    let f0 = rho_ln * un;
    let f1 = p_hat * n[0] + ub[0] * f0;
    let f2 = p_hat * n[1] + ub[1] * f0;
    let f3 = p_hat * n[2] + ub[2] * f0;
    let f4 = (1.0 / (2.0 * (gas.gamma - 1.0) * beta_ln) - 0.5 * u2_avg) * f0
        + ub[0] * f1
        + ub[1] * f2
        + ub[2] * f3;
    [f0, f1, f2, f3, f4]
}

pub fn chandrashekar_flux(
    ql: &State,
    qr: &State,
    gas: &GasModel,
    n: [f64; 3],
) -> PhysResult<State> {
    let l = Prim::from_cons(ql, gas)?;
    let r = Prim::from_cons(qr, gas)?;
    Ok(chandrashekar_flux_prim(&l, &r, gas, n))
}

/// Entropy flux potential `ψ_m = R ρ u_m`.
pub fn entropy_potential(q: &State, gas: &GasModel) -> [f64; 3] {
    [gas.r * q[1], gas.r * q[2], gas.r * q[3]]
}

/// Largest characteristic speed `|u·n| + c|n|`.
#[inline]
pub fn max_wave_speed(pr: &Prim, gas: &GasModel, n: [f64; 3]) -> f64 {
    let un = pr.u[0] * n[0] + pr.u[1] * n[1] + pr.u[2] * n[2];
    let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    un.abs() + pr.sound_speed(gas) * nn
}

/// Physical viscous fluxes `F^V_m` (rows `m`) from Cartesian gradients of
/// the entropy variables (`grad_w[j][v] = ∂W_v/∂x_j`).
#[inline]
pub fn viscous_flux(pr: &Prim, gas: &GasModel, grad_w: &[[f64; 5]; 3]) -> [[f64; 5]; 3] {
    let t = pr.t;
    // du[i][j] = ∂u_i/∂x_j, dt[j] = ∂T/∂x_j
    let mut du = [[0.0; 3]; 3];
    let mut dt = [0.0; 3];
    for j in 0..3 {
        dt[j] = t * t * grad_w[j][4];
        for i in 0..3 {
            du[i][j] = t * (grad_w[j][i + 1] + pr.u[i] * grad_w[j][4]);
        }
    }
    let div = du[0][0] + du[1][1] + du[2][2];
    let mu = gas.mu;
    let kappa = gas.kappa();
    let mut out = [[0.0; 5]; 3];
    for m in 0..3 {
        let mut e = kappa * dt[m];
        for i in 0..3 {
            let mut tau = mu * (du[i][m] + du[m][i]);
            if i == m {
                tau -= 2.0 / 3.0 * mu * div;
            }
            out[m][i + 1] = tau;
            e += tau * pr.u[i];
        }
        out[m][4] = e;
    }
    out
}

pub type Block = [[f64; 5]; 5];

/// Cartesian coefficient blocks with `F^V_m = Σ_j C_mj ∂W/∂x_j`
/// (`c[m][j]`).
pub fn cartesian_viscous_matrices(pr: &Prim, gas: &GasModel) -> [[Block; 3]; 3] {
    let mut c = [[[[0.0; 5]; 5]; 3]; 3];
    for j in 0..3 {
        for col in 0..5 {
            let mut g = [[0.0; 5]; 3];
            g[j][col] = 1.0;
            let f = viscous_flux(pr, gas, &g);
            for m in 0..3 {
                for row in 0..5 {
                    c[m][j][row][col] = f[m][row];
                }
            }
        }
    }
    c
}

/// Curvilinear blocks `Ĉ_la = Σ_{m,j} a^l_m C_mj a^a_j / J` (`out[l][a]`),
/// with `metric[l][m] = a^l_m`.
pub fn viscous_coefficient_matrices(
    q: &State,
    gas: &GasModel,
    metric: &[[f64; 3]; 3],
    jac: f64,
) -> PhysResult<[[Block; 3]; 3]> {
    let pr = Prim::from_cons(q, gas)?;
    let c = cartesian_viscous_matrices(&pr, gas);
    let mut out = [[[[0.0; 5]; 5]; 3]; 3];
    for l in 0..3 {
        for a in 0..3 {
            for m in 0..3 {
                for j in 0..3 {
                    let s = metric[l][m] * metric[a][j] / jac;
                    if s == 0.0 {
                        continue;
                    }
                    for r in 0..5 {
                        for k in 0..5 {
                            out[l][a][r][k] += s * c[m][j][r][k];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn air() -> GasModel {
        GasModel::new(1.4, 1.0 / 1.4, 0.72, 0.01).unwrap()
    }

    #[test]
    fn rest_state_temperature() {
        let g = air();
        let q = [1.0, 0.0, 0.0, 0.0, g.cv() * g.t_inf];
        let w = cons_to_prim(&q, &g).unwrap();
        assert!((w[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_density_and_temperature() {
        let g = air();
        assert!(cons_to_prim(&[-1.0, 0.0, 0.0, 0.0, 1.0], &g).is_err());
        assert!(cons_to_prim(&[1.0, 2.0, 0.0, 0.0, 1.0], &g).is_err());
    }

    #[test]
    fn flux_at_rest_is_pressure_only() {
        let g = air();
        let q = [1.3, 0.0, 0.0, 0.0, 2.0];
        let p = pressure(&q, &g).unwrap();
        for m in 0..3 {
            let f = euler_flux(&q, &g, m).unwrap();
            for (v, fv) in f.iter().enumerate() {
                let e = if v == m + 1 { p } else { 0.0 };
                assert!((fv - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn log_mean_edge_cases() {
        assert_eq!(log_mean(2.5, 2.5), 2.5);
        let exact = (3.0f64 - 1.0) / (3.0f64.ln() - 1.0f64.ln());
        assert!((log_mean(3.0, 1.0) - exact).abs() < 1e-15);
        let a: f64 = 1.0;
        let b: f64 = 1.0 + 1e-7;
        let exact = (b - a) / (b.ln() - a.ln());
        assert!((log_mean(a, b) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn zero_viscosity_gives_zero_blocks() {
        let g = GasModel::inviscid(1.4, 1.0);
        let q = [1.0, 0.3, -0.2, 0.1, 3.0];
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = viscous_coefficient_matrices(&q, &g, &id, 1.0).unwrap();
        assert!(c.iter().flatten().flatten().flatten().all(|v| *v == 0.0));
    }
}
