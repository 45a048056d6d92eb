//! Two-pass LDG viscous terms with interior penalty, in entropy variables
//! for the gas model and in `u` itself for the scalar model.

use rayon::prelude::*;

use super::{LdgSwitch, Model, SemiDiscreteOperator};
use crate::error::{Error, Result};
use crate::mesh::{face_dir, face_sign, FaceLink, NUM_FACES};
use crate::metrics::ElementMetrics;
use crate::physics::{entropy_vars, viscous_coefficient_matrices, viscous_flux, Prim, NVAR};
use crate::sbp::TensorOperator3D;

use super::euler::state_at;

/// `dst += scale · D_l src` for an interleaved field with `nv` variables.
pub(crate) fn add_derivative(
    sbp: &TensorOperator3D,
    l: usize,
    src: &[f64],
    nv: usize,
    scale: f64,
    dst: &mut [f64],
) {
    let d = &sbp.ops[l];
    let n1 = d.n();
    let stride = sbp.stride(l);
    for start in sbp.line_starts(l) {
        for i in 0..n1 {
            let ki = start + i * stride;
            for j in 0..n1 {
                let dij = scale * d.d_at(i, j);
                if dij == 0.0 {
                    continue;
                }
                let kj = start + j * stride;
                for v in 0..nv {
                    dst[ki * nv + v] += dij * src[kj * nv + v];
                }
            }
        }
    }
}

fn entropy_field(op: &SemiDiscreteOperator, q: &[f64]) -> Result<Vec<f64>> {
    match op.model {
        Model::ConvectionDiffusion { .. } => Ok(q.to_vec()),
        Model::Euler(g) | Model::NavierStokes(g) => {
            let n = op.nodes_per_element();
            let mut w = vec![0.0; q.len()];
            w.par_chunks_mut(n * NVAR)
                .enumerate()
                .try_for_each(|(e, we)| -> Result<()> {
                    for k in 0..n {
                        let i = (e * n + k) * NVAR;
                        let wk = entropy_vars(&state_at(q, i), &g).map_err(|x| x.at(e, k))?;
                        we[k * NVAR..(k + 1) * NVAR].copy_from_slice(&wk);
                    }
                    Ok(())
                })?;
            Ok(w)
        }
    }
}

fn boundary_w(
    op: &SemiDiscreteOperator,
    e: usize,
    k: usize,
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    op.boundary_state(e, k, t, out)?;
    if let Model::Euler(g) | Model::NavierStokes(g) = op.model {
        let qs = state_at(out, 0);
        let w = entropy_vars(&qs, &g).map_err(|x| x.at(e, k))?;
        out.copy_from_slice(&w);
    }
    Ok(())
}

/// Whether element `e` supplies the LDG state trace on `face`.
fn supplies_state(op: &SemiDiscreteOperator, e: usize, face: usize) -> bool {
    match &op.mesh.links[e][face] {
        FaceLink::Boundary => false,
        FaceLink::Interior { is_a, .. } => *is_a == (op.sat.ldg_switch == LdgSwitch::Plus),
    }
}

/// Viscous fluxes in the reference directions, `g[l]` at one node.
fn reference_flux(
    op: &SemiDiscreteOperator,
    em: &ElementMetrics,
    k: usize,
    q: &[f64],
    qi: usize,
    theta: [&[f64]; 3],
    nv: usize,
    out: &mut [[f64; NVAR]; 3],
) -> std::result::Result<(), String> {
    let j = em.j[k];
    // physical gradients ∂w/∂x_m = Σ_a a^a_m θ_a / J
    let mut grad = [[0.0; NVAR]; 3];
    for m in 0..3 {
        for a in 0..3 {
            let s = em.a(a, m)[k] / j;
            for v in 0..nv {
                grad[m][v] += s * theta[a][v];
            }
        }
    }
    let flux = match op.model {
        Model::ConvectionDiffusion { b, .. } => {
            let mut f = [[0.0; NVAR]; 3];
            for m in 0..3 {
                f[m][0] = b[m] * grad[m][0];
            }
            f
        }
        Model::NavierStokes(g) | Model::Euler(g) => {
            let pr = Prim::from_cons(&state_at(q, qi), &g).map_err(|x| x.0)?;
            viscous_flux(&pr, &g, &grad)
        }
    };
    for l in 0..3 {
        for v in 0..nv {
            out[l][v] = (0..3).map(|m| em.a(l, m)[k] * flux[m][v]).sum();
        }
    }
    Ok(())
}

/// Normal–normal coefficient block `Ĉ_ll` at a node (`nv × nv`, row-major).
fn normal_block(
    op: &SemiDiscreteOperator,
    em: &ElementMetrics,
    l: usize,
    k: usize,
    q: &[f64],
    qi: usize,
    nv: usize,
) -> std::result::Result<Vec<f64>, String> {
    match op.model {
        Model::ConvectionDiffusion { b, .. } => {
            let r = em.row(l, k);
            Ok(vec![
                (0..3).map(|m| r[m] * r[m] * b[m]).sum::<f64>() / em.j[k],
            ])
        }
        Model::NavierStokes(g) | Model::Euler(g) => {
            let metric = [em.row(0, k), em.row(1, k), em.row(2, k)];
            let c = viscous_coefficient_matrices(&state_at(q, qi), &g, &metric, em.j[k])
                .map_err(|x| x.0)?;
            let mut out = vec![0.0; nv * nv];
            for r in 0..nv {
                for s in 0..nv {
                    out[r * nv + s] = c[l][l][r][s];
                }
            }
            Ok(out)
        }
    }
}

pub(super) fn add_viscous(
    op: &SemiDiscreteOperator,
    q: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = op.nodes_per_element();
    let nv = op.nvar();
    let chunk = n * nv;
    let w = entropy_field(op, q)?;
    let sbp = &op.sbp;
    let metrics = &op.analytic;

    // pass 1: θ_a = D_a w + M⁻¹ Σ s_f B (w* − w)
    let mut theta: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; q.len()]);
    {
        let [t0, t1, t2] = &mut theta;
        t0.par_chunks_mut(chunk)
            .zip(t1.par_chunks_mut(chunk))
            .zip(t2.par_chunks_mut(chunk))
            .enumerate()
            .try_for_each(|(e, ((a0, a1), a2))| -> Result<()> {
                let we = &w[e * chunk..(e + 1) * chunk];
                let mut th = [a0, a1, a2];
                for (a, dst) in th.iter_mut().enumerate() {
                    add_derivative(sbp, a, we, nv, 1.0, dst);
                }
                let mut wb = vec![0.0; nv];
                for face in 0..NUM_FACES {
                    let dir = face_dir(face);
                    let c = face_sign(face) * op.face_factor(face);
                    let list = op.mesh.face_node_list(face);
                    match &op.mesh.links[e][face] {
                        FaceLink::Boundary => {
                            for &k in list {
                                boundary_w(op, e, k, t, &mut wb)?;
                                for v in 0..nv {
                                    th[dir][k * nv + v] += c * (wb[v] - we[k * nv + v]);
                                }
                            }
                        }
                        FaceLink::Interior { elem, nodes, .. } => {
                            if supplies_state(op, e, face) {
                                continue;
                            }
                            for (&k, &kn) in list.iter().zip(nodes) {
                                let base = (elem * n + kn) * nv;
                                for v in 0..nv {
                                    th[dir][k * nv + v] += c * (w[base + v] - we[k * nv + v]);
                                }
                            }
                        }
                    }
                }
                Ok(())
            })?;
    }

    // reference-direction viscous fluxes g_l
    let mut g: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; q.len()]);
    {
        let [g0, g1, g2] = &mut g;
        g0.par_chunks_mut(chunk)
            .zip(g1.par_chunks_mut(chunk))
            .zip(g2.par_chunks_mut(chunk))
            .enumerate()
            .try_for_each(|(e, ((b0, b1), b2))| -> Result<()> {
                let em = &metrics.elements[e];
                let mut buf = [[0.0; NVAR]; 3];
                for k in 0..n {
                    let i = (e * n + k) * nv;
                    let th = [
                        &theta[0][i..i + nv],
                        &theta[1][i..i + nv],
                        &theta[2][i..i + nv],
                    ];
                    reference_flux(op, em, k, q, i, th, nv, &mut buf).map_err(|reason| {
                        Error::InadmissibleState {
                            element: e,
                            node: k,
                            reason,
                        }
                    })?;
                    for v in 0..nv {
                        b0[k * nv + v] = buf[0][v];
                        b1[k * nv + v] = buf[1][v];
                        b2[k * nv + v] = buf[2][v];
                    }
                }
                Ok(())
            })?;
    }

    // pass 2: divergence and interface fluxes
    let sigma = op.sat.ip_coefficient * ((sbp.ops[0].degree + 1) as f64).powi(2) / 2.0;
    out.par_chunks_mut(chunk)
        .enumerate()
        .try_for_each(|(e, o)| -> Result<()> {
            let lo = e * chunk;
            for (l, gl) in g.iter().enumerate() {
                add_derivative(sbp, l, &gl[lo..lo + chunk], nv, 1.0, o);
            }
            let em = &metrics.elements[e];
            let we = &w[lo..lo + chunk];
            let mut wb = vec![0.0; nv];
            let mut gstar = vec![0.0; nv];
            let mut jump = vec![0.0; nv];
            let inadmissible = |k: usize| {
                move |reason: String| Error::InadmissibleState {
                    element: e,
                    node: k,
                    reason,
                }
            };
            for face in 0..NUM_FACES {
                let dir = face_dir(face);
                let s = face_sign(face);
                let c = op.face_factor(face);
                let list = op.mesh.face_node_list(face);
                let link = &op.mesh.links[e][face];
                let own_state = supplies_state(op, e, face);
                for (i, &k) in list.iter().enumerate() {
                    let own = lo + k * nv;
                    let gown = &g[dir][own..own + nv];
                    match link {
                        FaceLink::Boundary => {
                            boundary_w(op, e, k, t, &mut wb)?;
                            for v in 0..nv {
                                gstar[v] = s * gown[v];
                                jump[v] = we[k * nv + v] - wb[v];
                            }
                            if sigma > 0.0 {
                                let cb = normal_block(op, em, dir, k, q, own, nv)
                                    .map_err(inadmissible(k))?;
                                for r in 0..nv {
                                    let pen: f64 = (0..nv).map(|x| cb[r * nv + x] * jump[x]).sum();
                                    gstar[r] -= sigma * pen;
                                }
                            }
                        }
                        FaceLink::Interior {
                            elem,
                            face: nface,
                            nodes,
                            ..
                        } => {
                            let kn = nodes[i];
                            let nb = (elem * n + kn) * nv;
                            let ndir = face_dir(*nface);
                            let ns = face_sign(*nface);
                            for v in 0..nv {
                                gstar[v] = if own_state {
                                    -ns * g[ndir][nb + v]
                                } else {
                                    s * gown[v]
                                };
                                jump[v] = we[k * nv + v] - w[nb + v];
                            }
                            if sigma > 0.0 {
                                let ca = normal_block(op, em, dir, k, q, own, nv)
                                    .map_err(inadmissible(k))?;
                                let cn =
                                    normal_block(op, &metrics.elements[*elem], ndir, kn, q, nb, nv)
                                        .map_err(inadmissible(k))?;
                                for r in 0..nv {
                                    let pen: f64 = (0..nv)
                                        .map(|x| 0.5 * (ca[r * nv + x] + cn[r * nv + x]) * jump[x])
                                        .sum();
                                    gstar[r] -= sigma * pen;
                                }
                            }
                        }
                    }
                    for v in 0..nv {
                        o[k * nv + v] += c * (gstar[v] - s * gown[v]);
                    }
                }
            }
            Ok(())
        })
}
