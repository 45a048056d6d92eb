use rayon::prelude::*;

use super::{for_each_face_node, Dissipation, SemiDiscreteOperator, Trace};
use crate::error::Result;
use crate::physics::{chandrashekar_flux_prim, max_wave_speed, GasModel, Prim, State, NVAR};

pub(super) fn primitives(
    op: &SemiDiscreteOperator,
    gas: &GasModel,
    q: &[f64],
) -> Result<Vec<Prim>> {
    let n = op.nodes_per_element();
    let mut prims = vec![
        Prim {
            rho: 0.0,
            u: [0.0; 3],
            t: 0.0,
            p: 0.0,
        };
        q.len() / NVAR
    ];
    prims
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(e, pe)| -> Result<()> {
            for (k, p) in pe.iter_mut().enumerate() {
                let i = (e * n + k) * NVAR;
                *p = Prim::from_cons(&state_at(q, i), gas).map_err(|x| x.at(e, k))?;
            }
            Ok(())
        })?;
    Ok(prims)
}

#[inline]
pub(super) fn state_at(q: &[f64], i: usize) -> State {
    [q[i], q[i + 1], q[i + 2], q[i + 3], q[i + 4]]
}

/// Entropy-conservative two-point volume terms on tensor lines plus
/// interface SATs `−M⁻¹ B f*(q, q', n)`. The two-point diagonal and the
/// own-face flux term cancel exactly and are both omitted.
pub(super) fn euler_rhs(
    op: &SemiDiscreteOperator,
    gas: &GasModel,
    q: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = op.nodes_per_element();
    let prims = primitives(op, gas, q)?;
    let dissipate = op.sat.dissipation == Dissipation::Scalar;
    out.par_chunks_mut(n * NVAR)
        .enumerate()
        .try_for_each(|(e, o)| -> Result<()> {
            o.iter_mut().for_each(|v| *v = 0.0);
            let em = &op.volume.elements[e];
            let pe = &prims[e * n..(e + 1) * n];
            for l in 0..3 {
                let d = &op.sbp.ops[l];
                let n1 = d.n();
                let stride = op.sbp.stride(l);
                for start in op.sbp.line_starts(l) {
                    for i in 0..n1 {
                        let ki = start + i * stride;
                        let ai = em.row(l, ki);
                        for j in i + 1..n1 {
                            let kj = start + j * stride;
                            let aj = em.row(l, kj);
                            let nv = [
                                0.5 * (ai[0] + aj[0]),
                                0.5 * (ai[1] + aj[1]),
                                0.5 * (ai[2] + aj[2]),
                            ];
                            let f = chandrashekar_flux_prim(&pe[ki], &pe[kj], gas, nv);
                            let (dij, dji) = (2.0 * d.d_at(i, j), 2.0 * d.d_at(j, i));
                            for v in 0..NVAR {
                                o[ki * NVAR + v] -= dij * f[v];
                                o[kj * NVAR + v] -= dji * f[v];
                            }
                        }
                    }
                }
            }
            let mut gb = [0.0; NVAR];
            for_each_face_node(op, e, |face, i, k, trace| {
                let (pr, qr) = match trace {
                    Trace::Neighbor { elem, node } => (
                        prims[elem * n + node],
                        state_at(q, (elem * n + node) * NVAR),
                    ),
                    Trace::Boundary => {
                        op.boundary_state(e, k, t, &mut gb)?;
                        (Prim::from_cons(&gb, gas).map_err(|x| x.at(e, k))?, gb)
                    }
                };
                let nf = op.normals.get(e, face)[i];
                let mut fs = chandrashekar_flux_prim(&pe[k], &pr, gas, nf);
                if dissipate {
                    let lam = max_wave_speed(&pe[k], gas, nf).max(max_wave_speed(&pr, gas, nf));
                    let ql = state_at(q, (e * n + k) * NVAR);
                    for v in 0..NVAR {
                        fs[v] -= 0.5 * lam * (qr[v] - ql[v]);
                    }
                }
                let c = op.face_factor(face);
                for v in 0..NVAR {
                    o[k * NVAR + v] -= c * fs[v];
                }
                Ok(())
            })
        })
}
