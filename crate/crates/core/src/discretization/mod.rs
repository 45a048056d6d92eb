//! Semi-discrete residuals for linear convection–diffusion, the Euler and
//! the Navier–Stokes equations on curvilinear SBP elements.
//!
//! Global fields are stored element-major, then node, then variable:
//! `q[(e * N + k) * nvar + v]`. Residual routines return the Jacobian
//! weighted time derivative `J dq/dt`; [`SemiDiscreteOperator::time_derivative`]
//! divides by `J`.

mod euler;
mod scalar;
mod viscous;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{face_dir, HexMesh, NUM_FACES};
use crate::metrics::{face_normals, FaceNormals, MetricProvenance, MetricSet};
use crate::physics::{self, GasModel};
use crate::sbp::TensorOperator3D;

/// Boundary data `g(x, t)` written into the output slice (one value per
/// variable, conserved variables for gas models).
pub type BoundaryFn = Arc<dyn Fn([f64; 3], f64, &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// `u_t + Σ a_m ∂_m u = Σ ∂_m (B_m ∂_m u)`.
    ConvectionDiffusion {
        a: [f64; 3],
        b: [f64; 3],
    },
    Euler(GasModel),
    NavierStokes(GasModel),
}

impl Model {
    pub fn nvar(&self) -> usize {
        match self {
            Model::ConvectionDiffusion { .. } => 1,
            _ => physics::NVAR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissipation {
    None,
    /// Upwind jump penalty for the scalar equation, local Lax–Friedrichs on
    /// the conserved-variable jump for gas models.
    Scalar,
}

/// Which element of an interface supplies the LDG state trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdgSwitch {
    /// State from the element on the first side of each connection (the
    /// one whose face points in the positive reference direction on the
    /// structured cube), viscous flux from the other.
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatConfig {
    pub dissipation: Dissipation,
    pub ldg_switch: LdgSwitch,
    /// Multiplies `(p + 1)² / 2` in the interior-penalty coefficient.
    pub ip_coefficient: f64,
}

impl SatConfig {
    pub fn scalar_default() -> Self {
        Self {
            dissipation: Dissipation::Scalar,
            ldg_switch: LdgSwitch::Plus,
            ip_coefficient: 0.0,
        }
    }

    pub fn gas_default() -> Self {
        Self {
            dissipation: Dissipation::Scalar,
            ldg_switch: LdgSwitch::Plus,
            ip_coefficient: 0.5,
        }
    }

    pub fn conservative() -> Self {
        Self {
            dissipation: Dissipation::None,
            ldg_switch: LdgSwitch::Plus,
            ip_coefficient: 0.0,
        }
    }
}

/// Source of the interface normals used by the neighbor coupling terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceMetricSource {
    Analytic,
    Volume,
}

impl FaceMetricSource {
    /// Optimized metrics are constrained against analytic face data; the
    /// other variants are coupled through their own face values.
    pub fn default_for(p: MetricProvenance) -> Self {
        match p {
            MetricProvenance::Optimized | MetricProvenance::Analytic => FaceMetricSource::Analytic,
            MetricProvenance::ThomasLombard => FaceMetricSource::Volume,
        }
    }
}

pub struct SemiDiscreteOperator {
    pub sbp: TensorOperator3D,
    pub mesh: HexMesh,
    pub volume: MetricSet,
    pub analytic: MetricSet,
    pub model: Model,
    pub sat: SatConfig,
    pub face_source: FaceMetricSource,
    normals: FaceNormals,
    boundary: Option<BoundaryFn>,
    /// Endpoint quadrature weight per direction (`M⁻¹B = 1/w` on faces).
    end_weight: [f64; 3],
}

impl SemiDiscreteOperator {
    pub fn new(
        mesh: HexMesh,
        sbp: TensorOperator3D,
        volume: MetricSet,
        analytic: MetricSet,
        model: Model,
        sat: SatConfig,
    ) -> Result<Self> {
        if volume.elements.len() != mesh.num_elements()
            || analytic.elements.len() != mesh.num_elements()
        {
            return Err(Error::SizeMismatch {
                expected: mesh.num_elements(),
                got: volume.elements.len().min(analytic.elements.len()),
            });
        }
        if analytic.provenance != MetricProvenance::Analytic {
            return Err(Error::InvalidArgument(
                "the coupling metric set must have analytic provenance".into(),
            ));
        }
        if !(sat.ip_coefficient >= 0.0) {
            return Err(Error::InvalidArgument(
                "interior-penalty coefficient must be non-negative".into(),
            ));
        }
        if let Model::ConvectionDiffusion { b, .. } = model {
            if b.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidArgument(
                    "diffusion coefficients must be non-negative".into(),
                ));
            }
        }
        let face_source = FaceMetricSource::default_for(volume.provenance);
        let normals = match face_source {
            FaceMetricSource::Analytic => face_normals(&mesh, &analytic)?,
            FaceMetricSource::Volume => face_normals(&mesh, &volume)?,
        };
        let end_weight = std::array::from_fn(|d| sbp.ops[d].weights[0]);
        Ok(Self {
            sbp,
            mesh,
            volume,
            analytic,
            model,
            sat,
            face_source,
            normals,
            boundary: None,
            end_weight,
        })
    }

    pub fn with_face_source(mut self, source: FaceMetricSource) -> Result<Self> {
        self.normals = match source {
            FaceMetricSource::Analytic => face_normals(&self.mesh, &self.analytic)?,
            FaceMetricSource::Volume => face_normals(&self.mesh, &self.volume)?,
        };
        self.face_source = source;
        Ok(self)
    }

    pub fn with_boundary(mut self, g: BoundaryFn) -> Self {
        self.boundary = Some(g);
        self
    }

    pub fn nvar(&self) -> usize {
        self.model.nvar()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.sbp.num_nodes()
    }

    pub fn len(&self) -> usize {
        self.mesh.num_elements() * self.nodes_per_element() * self.nvar()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn normals(&self) -> &FaceNormals {
        &self.normals
    }

    #[inline]
    pub(crate) fn face_factor(&self, face: usize) -> f64 {
        1.0 / self.end_weight[face_dir(face)]
    }

    pub(crate) fn boundary_state(
        &self,
        elem: usize,
        node: usize,
        t: f64,
        out: &mut [f64],
    ) -> Result<()> {
        match &self.boundary {
            Some(g) => {
                g(self.mesh.elements[elem].coords[node], t, out);
                Ok(())
            }
            None => Err(Error::MissingNeighbor {
                element: elem,
                face: usize::MAX,
            }),
        }
    }

    fn check_len(&self, q: &[f64], out: &[f64]) -> Result<()> {
        if q.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: q.len(),
            });
        }
        if out.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: out.len(),
            });
        }
        Ok(())
    }

    /// `J dq/dt` for the configured model.
    pub fn rhs(&self, q: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.check_len(q, out)?;
        if self.has_open_faces() && self.boundary.is_none() {
            return Err(Error::InvalidArgument(
                "mesh has boundary faces but no boundary data was supplied".into(),
            ));
        }
        match self.model {
            Model::ConvectionDiffusion { a, b } => {
                scalar::convection_rhs(self, a, q, t, out)?;
                if b.iter().any(|v| *v > 0.0) {
                    viscous::add_viscous(self, q, t, out)?;
                }
            }
            Model::Euler(gas) => euler::euler_rhs(self, &gas, q, t, out)?,
            Model::NavierStokes(gas) => {
                euler::euler_rhs(self, &gas, q, t, out)?;
                viscous::add_viscous(self, q, t, out)?;
            }
        }
        Ok(())
    }

    /// Upper bound on the spectral radius of the linearized operator at `q`:
    /// per node, the row-sum norm of each `D_ξl` times the wave speed along
    /// `a^l / J`, plus the matching diffusive term.
    pub fn spectral_radius_bound(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: q.len(),
            });
        }
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let dnorm: [f64; 3] = std::array::from_fn(|l| {
            let op = &self.sbp.ops[l];
            let m = op.n();
            (0..m)
                .map(|i| {
                    op.d[i * m..(i + 1) * m]
                        .iter()
                        .map(|v| v.abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        });
        let mut worst: f64 = 0.0;
        for (e, em) in self.volume.elements.iter().enumerate() {
            for k in 0..n {
                let qk = &q[(e * n + k) * nv..(e * n + k + 1) * nv];
                let (vel, c, nu) = match self.model {
                    Model::ConvectionDiffusion { a, b } => {
                        (a, 0.0, b.iter().cloned().fold(0.0, f64::max))
                    }
                    Model::Euler(gas) | Model::NavierStokes(gas) => {
                        let st: physics::State = qk.try_into().expect("five conserved variables");
                        let pr = physics::Prim::from_cons(&st, &gas).map_err(|err| err.at(e, k))?;
                        let nu = match self.model {
                            Model::NavierStokes(_) => {
                                gas.mu / pr.rho * (4.0f64 / 3.0).max(gas.gamma / gas.prandtl)
                            }
                            _ => 0.0,
                        };
                        (pr.u, pr.sound_speed(&gas), nu)
                    }
                };
                let (mut conv, mut diff) = (0.0, 0.0);
                for (l, dn) in dnorm.iter().enumerate() {
                    let al = em.row(l, k);
                    let norm = (al[0] * al[0] + al[1] * al[1] + al[2] * al[2]).sqrt();
                    let un = al[0] * vel[0] + al[1] * vel[1] + al[2] * vel[2];
                    conv += dn * (un.abs() + c * norm) / em.j[k];
                    diff += dn * norm / em.j[k];
                }
                worst = worst.max(conv + nu * diff * diff);
            }
        }
        Ok(worst)
    }

    /// `dq/dt`.
    pub fn time_derivative(&self, q: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.rhs(q, t, out)?;
        let n = self.nodes_per_element();
        let nv = self.nvar();
        out.par_chunks_mut(n * nv)
            .zip(self.volume.elements.par_iter())
            .for_each(|(o, em)| {
                for k in 0..n {
                    let inv = 1.0 / em.j[k];
                    for v in 0..nv {
                        o[k * nv + v] *= inv;
                    }
                }
            });
        Ok(())
    }

    fn has_open_faces(&self) -> bool {
        !self.mesh.boundary.is_empty()
    }

    /// Samples `f(x)` at every node.
    pub fn sample(&self, f: impl Fn([f64; 3], &mut [f64]) + Sync) -> Vec<f64> {
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(n * nv)
            .zip(self.mesh.elements.par_iter())
            .for_each(|(o, el)| {
                for k in 0..n {
                    f(el.coords[k], &mut o[k * nv..(k + 1) * nv]);
                }
            });
        out
    }

    /// `Σ 1ᵀ M J q_v` per variable.
    pub fn integrate(&self, q: &[f64]) -> Vec<f64> {
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let mut tot = vec![0.0; nv];
        for (e, em) in self.volume.elements.iter().enumerate() {
            for k in 0..n {
                let w = self.sbp.mass[k] * em.j[k];
                for v in 0..nv {
                    tot[v] += w * q[(e * n + k) * nv + v];
                }
            }
        }
        tot
    }

    /// `Σ 1ᵀ M r_v` for a Jacobian-weighted residual `r`.
    pub fn integrate_weighted(&self, r: &[f64]) -> Vec<f64> {
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let mut tot = vec![0.0; nv];
        for e in 0..self.mesh.num_elements() {
            for k in 0..n {
                for v in 0..nv {
                    tot[v] += self.sbp.mass[k] * r[(e * n + k) * nv + v];
                }
            }
        }
        tot
    }

    /// Total mathematical entropy `Σ 1ᵀ M J S(q)` (gas models) or the
    /// energy `½ Σ 1ᵀ M J u²` (scalar).
    pub fn total_entropy(&self, q: &[f64]) -> Result<f64> {
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let mut tot = 0.0;
        for (e, em) in self.volume.elements.iter().enumerate() {
            for k in 0..n {
                let w = self.sbp.mass[k] * em.j[k];
                let s = match self.model {
                    Model::ConvectionDiffusion { .. } => 0.5 * q[e * n + k].powi(2),
                    Model::Euler(g) | Model::NavierStokes(g) => {
                        let qs: [f64; 5] = q[(e * n + k) * nv..(e * n + k + 1) * nv]
                            .try_into()
                            .expect("five variables");
                        physics::entropy(&qs, &g).map_err(|x| x.at(e, k))?
                    }
                };
                tot += w * s;
            }
        }
        Ok(tot)
    }

    /// `Σ 1ᵀ M Wᵀ r` for a Jacobian-weighted residual `r` (the entropy or
    /// energy production rate).
    pub fn entropy_rate(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        let n = self.nodes_per_element();
        let nv = self.nvar();
        let mut tot = 0.0;
        for e in 0..self.mesh.num_elements() {
            for k in 0..n {
                let i = (e * n + k) * nv;
                let wk = match self.model {
                    Model::ConvectionDiffusion { .. } => q[i] * r[i],
                    Model::Euler(g) | Model::NavierStokes(g) => {
                        let qs: [f64; 5] = q[i..i + nv].try_into().expect("five variables");
                        let w = physics::entropy_vars(&qs, &g).map_err(|x| x.at(e, k))?;
                        (0..5).map(|v| w[v] * r[i + v]).sum()
                    }
                };
                tot += self.sbp.mass[k] * wk;
            }
        }
        Ok(tot)
    }
}

pub fn convdiff_rhs(op: &SemiDiscreteOperator, u: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    match op.model {
        Model::ConvectionDiffusion { .. } => op.rhs(u, t, out),
        _ => Err(Error::InvalidArgument(
            "operator is not a scalar model".into(),
        )),
    }
}

pub fn euler_rhs(op: &SemiDiscreteOperator, q: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    match op.model {
        Model::Euler(_) => op.rhs(q, t, out),
        _ => Err(Error::InvalidArgument(
            "operator is not an Euler model".into(),
        )),
    }
}

pub fn ns_rhs(op: &SemiDiscreteOperator, q: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    match op.model {
        Model::NavierStokes(_) => op.rhs(q, t, out),
        _ => Err(Error::InvalidArgument(
            "operator is not a Navier-Stokes model".into(),
        )),
    }
}

/// Integrates a uniform state for `duration` with the default controller
/// and returns the largest nodal deviation from it.
/// Step bound used by [`freestream_test`], relative to
/// [`SemiDiscreteOperator::spectral_radius_bound`].
pub const FREESTREAM_CFL: f64 = 1.0;

pub fn freestream_test(
    op: &SemiDiscreteOperator,
    state: &[f64],
    duration: f64,
    controller: &crate::time::StepController,
) -> Result<f64> {
    if state.len() != op.nvar() {
        return Err(Error::SizeMismatch {
            expected: op.nvar(),
            got: state.len(),
        });
    }
    let q0 = op.sample(|_, o| o.copy_from_slice(state));
    // a uniform state has a vanishing error estimate, so without a stability
    // bound the controller grows the step until roundoff is amplified
    let mut controller = controller.clone();
    let bound = op.spectral_radius_bound(&q0)?;
    if bound > 0.0 {
        controller.max_step = controller.max_step.min(FREESTREAM_CFL / bound);
    }
    let sol = crate::time::integrate(
        |t, y, dy| op.time_derivative(y, t, dy),
        &q0,
        (0.0, duration),
        &controller,
    )?;
    let nv = op.nvar();
    Ok(sol
        .y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - state[i % nv]).abs())
        .fold(0.0, f64::max))
}

/// Largest `|J dq/dt|` of a uniform state (no time integration).
pub fn freestream_residual(op: &SemiDiscreteOperator, state: &[f64]) -> Result<f64> {
    let q0 = op.sample(|_, o| o.copy_from_slice(state));
    let mut r = vec![0.0; q0.len()];
    op.rhs(&q0, 0.0, &mut r)?;
    Ok(r.iter().fold(0.0, |a, v| a.max(v.abs())))
}

/// What lies across a face node: a neighbor node or boundary data.
pub(crate) enum Trace {
    Neighbor { elem: usize, node: usize },
    Boundary,
}

pub(crate) fn for_each_face_node(
    op: &SemiDiscreteOperator,
    e: usize,
    mut f: impl FnMut(usize, usize, usize, Trace) -> Result<()>,
) -> Result<()> {
    for face in 0..NUM_FACES {
        let list = op.mesh.face_node_list(face);
        match &op.mesh.links[e][face] {
            crate::mesh::FaceLink::Boundary => {
                for (i, &k) in list.iter().enumerate() {
                    f(face, i, k, Trace::Boundary)?;
                }
            }
            crate::mesh::FaceLink::Interior { elem, nodes, .. } => {
                for (i, &k) in list.iter().enumerate() {
                    f(
                        face,
                        i,
                        k,
                        Trace::Neighbor {
                            elem: *elem,
                            node: nodes[i],
                        },
                    )?;
                }
            }
        }
    }
    Ok(())
}
