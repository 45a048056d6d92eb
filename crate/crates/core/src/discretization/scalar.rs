use rayon::prelude::*;

use super::{for_each_face_node, Dissipation, SemiDiscreteOperator, Trace};
use crate::error::Result;
use crate::metrics::outward_normal;

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Split-form convection `−½ Σ_l (D_l β_l + β_l D_l) u` with contravariant
/// speeds `β_l = Σ_m a_m a^l_m`, plus interface and boundary SATs.
pub(super) fn convection_rhs(
    op: &SemiDiscreteOperator,
    a: [f64; 3],
    u: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = op.nodes_per_element();
    let upwind = op.sat.dissipation == Dissipation::Scalar;
    out.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(e, o)| -> Result<()> {
            let ue = &u[e * n..(e + 1) * n];
            let em = &op.volume.elements[e];
            o.iter_mut().for_each(|v| *v = 0.0);
            let mut bu = vec![0.0; n];
            let mut beta = vec![0.0; n];
            let mut d1 = vec![0.0; n];
            let mut d2 = vec![0.0; n];
            for l in 0..3 {
                for k in 0..n {
                    beta[k] = a[0] * em.a(l, 0)[k] + a[1] * em.a(l, 1)[k] + a[2] * em.a(l, 2)[k];
                    bu[k] = beta[k] * ue[k];
                }
                op.sbp.apply_dxi_into(l, &bu, &mut d1)?;
                op.sbp.apply_dxi_into(l, ue, &mut d2)?;
                for k in 0..n {
                    o[k] -= 0.5 * (d1[k] + beta[k] * d2[k]);
                }
            }
            let mut g = [0.0];
            for_each_face_node(op, e, |face, i, k, trace| {
                let other = match trace {
                    Trace::Neighbor { elem, node } => u[elem * n + node],
                    Trace::Boundary => {
                        op.boundary_state(e, k, t, &mut g)?;
                        g[0]
                    }
                };
                let an_vol = dot(a, outward_normal(em, face, k));
                let an = dot(a, op.normals.get(e, face)[i]);
                let mut s = 0.5 * an_vol * ue[k] - 0.5 * an * other;
                if upwind {
                    s -= 0.5 * an.abs() * (ue[k] - other);
                }
                o[k] += op.face_factor(face) * s;
                Ok(())
            })
        })
}
