//! Metric terms `a^l_m = J ∂ξ_l/∂x_m` in three flavors (analytic,
//! Thomas–Lombard curl form, GCL-constrained optimization) and discrete GCL
//! residuals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{face_dir, face_sign, mapping_jacobian, FaceLink, HexMesh, NUM_FACES};
use crate::sbp::TensorOperator3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricProvenance {
    Analytic,
    ThomasLombard,
    Optimized,
}

impl MetricProvenance {
    pub fn name(self) -> &'static str {
        match self {
            MetricProvenance::Analytic => "analytic",
            MetricProvenance::ThomasLombard => "thomas_lombard",
            MetricProvenance::Optimized => "optimized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "thomas_lombard" | "tl" => Ok(Self::ThomasLombard),
            "optimized" | "opt" => Ok(Self::Optimized),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric variant '{other}'"
            ))),
        }
    }
}

/// Nodal Jacobian and the nine metric fields of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMetrics {
    pub j: Vec<f64>,
    /// `a[(3 * l + m) * N + k]`, 0-based `l`, `m`.
    pub a: Vec<f64>,
}

impl ElementMetrics {
    pub fn zeros(n: usize) -> Self {
        Self {
            j: vec![0.0; n],
            a: vec![0.0; 9 * n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.j.len()
    }

    #[inline]
    pub fn a(&self, l: usize, m: usize) -> &[f64] {
        let n = self.j.len();
        &self.a[(3 * l + m) * n..(3 * l + m + 1) * n]
    }

    #[inline]
    pub fn a_mut(&mut self, l: usize, m: usize) -> &mut [f64] {
        let n = self.j.len();
        &mut self.a[(3 * l + m) * n..(3 * l + m + 1) * n]
    }

    /// Metric vector `(a^l_1, a^l_2, a^l_3)` at node `k`.
    #[inline]
    pub fn row(&self, l: usize, k: usize) -> [f64; 3] {
        let n = self.j.len();
        [
            self.a[3 * l * n + k],
            self.a[(3 * l + 1) * n + k],
            self.a[(3 * l + 2) * n + k],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub provenance: MetricProvenance,
    pub elements: Vec<ElementMetrics>,
}

impl MetricSet {
    pub fn max_abs_difference(&self, other: &MetricSet) -> f64 {
        self.elements
            .iter()
            .zip(&other.elements)
            .flat_map(|(a, b)| a.a.iter().zip(&b.a).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn analytic_metrics(mesh: &HexMesh, sbp: &TensorOperator3D) -> Result<MetricSet> {
    let elements = mesh
        .elements
        .par_iter()
        .enumerate()
        .map(|(e, el)| {
            let mj = mapping_jacobian(e, el, sbp)?;
            let n = sbp.num_nodes();
            let mut em = ElementMetrics::zeros(n);
            for k in 0..n {
                let jac = &mj.jac[k];
                let col = |l: usize| [jac[0][l], jac[1][l], jac[2][l]];
                for l in 0..3 {
                    let c = cross(col((l + 1) % 3), col((l + 2) % 3));
                    for m in 0..3 {
                        em.a[(3 * l + m) * n + k] = c[m];
                    }
                }
                em.j[k] = mj.det[k];
            }
            Ok(em)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSet {
        provenance: MetricProvenance::Analytic,
        elements,
    })
}

/// Symmetric curl-form metrics built from SBP derivatives of coordinate
/// products. The Jacobian is the analytic determinant.
pub fn thomas_lombard_metrics(mesh: &HexMesh, sbp: &TensorOperator3D) -> Result<MetricSet> {
    let elements = mesh
        .elements
        .par_iter()
        .enumerate()
        .map(|(e, el)| {
            let mj = mapping_jacobian(e, el, sbp)?;
            let n = sbp.num_nodes();
            let x: [Vec<f64>; 3] = std::array::from_fn(|m| el.coordinate(m));
            // dx[k][m] = D_k x_m
            let mut dx: Vec<Vec<f64>> = Vec::with_capacity(9);
            for k in 0..3 {
                for xm in &x {
                    dx.push(sbp.apply_dxi(k, xm)?);
                }
            }
            let mut em = ElementMetrics::zeros(n);
            em.j.copy_from_slice(&mj.det);
            for m in 0..3 {
                let (m1, m2) = ((m + 1) % 3, (m + 2) % 3);
                // u[k] = ½ (x_{m+1} D_k x_{m+2} - x_{m+2} D_k x_{m+1})
                let u: Vec<Vec<f64>> = (0..3)
                    .map(|k| {
                        (0..n)
                            .map(|i| {
                                0.5 * (x[m1][i] * dx[3 * k + m2][i] - x[m2][i] * dx[3 * k + m1][i])
                            })
                            .collect()
                    })
                    .collect();
                for l in 0..3 {
                    let (l1, l2) = ((l + 1) % 3, (l + 2) % 3);
                    let t1 = sbp.apply_dxi(l1, &u[l2])?;
                    let t2 = sbp.apply_dxi(l2, &u[l1])?;
                    let out = em.a_mut(l, m);
                    for i in 0..n {
                        out[i] = t1[i] - t2[i];
                    }
                }
            }
            Ok(em)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSet {
        provenance: MetricProvenance::ThomasLombard,
        elements,
    })
}

/// Outward scaled normals on every local face, one vector per face node in
/// the face's node-list order.
#[derive(Debug, Clone)]
pub struct FaceNormals {
    pub normals: Vec<[Vec<[f64; 3]>; NUM_FACES]>,
}

impl FaceNormals {
    #[inline]
    pub fn get(&self, elem: usize, face: usize) -> &[[f64; 3]] {
        &self.normals[elem][face]
    }
}

/// Outward normal `s_f a^{dir}` of `metrics` at an element node.
#[inline]
pub fn outward_normal(m: &ElementMetrics, face: usize, node: usize) -> [f64; 3] {
    let r = m.row(face_dir(face), node);
    let s = face_sign(face);
    [s * r[0], s * r[1], s * r[2]]
}

/// Interface normals from a metric set: the average of the two sides'
/// outward normals (own minus neighbor) on interior faces, the element's
/// own outward normal on boundary faces.
pub fn face_normals(mesh: &HexMesh, metrics: &MetricSet) -> Result<FaceNormals> {
    if metrics.elements.len() != mesh.num_elements() {
        return Err(Error::SizeMismatch {
            expected: mesh.num_elements(),
            got: metrics.elements.len(),
        });
    }
    let normals = (0..mesh.num_elements())
        .map(|e| {
            std::array::from_fn(|f| {
                let list = mesh.face_node_list(f);
                match &mesh.links[e][f] {
                    FaceLink::Boundary => list
                        .iter()
                        .map(|&k| outward_normal(&metrics.elements[e], f, k))
                        .collect(),
                    FaceLink::Interior {
                        elem, face, nodes, ..
                    } => list
                        .iter()
                        .zip(nodes)
                        .map(|(&k, &kn)| {
                            let a = outward_normal(&metrics.elements[e], f, k);
                            let b = outward_normal(&metrics.elements[*elem], *face, kn);
                            [
                                0.5 * (a[0] - b[0]),
                                0.5 * (a[1] - b[1]),
                                0.5 * (a[2] - b[2]),
                            ]
                        })
                        .collect(),
                }
            })
        })
        .collect();
    Ok(FaceNormals { normals })
}

/// `M = [Q_ξ1ᵀ, Q_ξ2ᵀ, Q_ξ3ᵀ]` (identical for every element) and its
/// SVD-based pseudo-inverse.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    pub m: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    pub rank: usize,
}

/// Dense 3D `Q_l` for direction `l` (0-based).
pub fn dense_q(sbp: &TensorOperator3D, l: usize) -> DMatrix<f64> {
    let n = sbp.num_nodes();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let ii = sbp.multi_index(i);
        let w: f64 = (0..3)
            .filter(|&d| d != l)
            .map(|d| sbp.ops[d].weights[ii[d]])
            .product();
        let op = &sbp.ops[l];
        for jl in 0..sbp.dims[l] {
            let mut jj = ii;
            jj[l] = jl;
            let j = sbp.index(jj[0], jj[1], jj[2]);
            q[(i, j)] = w * op.q_at(ii[l], jl);
        }
    }
    q
}

impl ConstraintMatrix {
    pub fn new(sbp: &TensorOperator3D) -> Result<Self> {
        let n = sbp.num_nodes();
        let mut m = DMatrix::zeros(n, 3 * n);
        for l in 0..3 {
            let q = dense_q(sbp, l);
            m.view_mut((0, l * n), (n, n)).copy_from(&q.transpose());
        }
        let svd = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
            .ok_or(Error::PseudoInverse { element: 0 })?;
        let u = svd.u.as_ref().ok_or(Error::PseudoInverse { element: 0 })?;
        let vt = svd
            .v_t
            .as_ref()
            .ok_or(Error::PseudoInverse { element: 0 })?;
        let smax = svd.singular_values.max();
        let cut = 1e-12 * smax;
        let mut pinv = DMatrix::zeros(3 * n, n);
        let mut rank = 0;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > cut {
                rank += 1;
                pinv += (vt.row(i).transpose() / s) * u.column(i).transpose();
            }
        }
        Ok(Self { m, pinv, rank })
    }
}

/// Per-element constrained least-squares data.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub m: DMatrix<f64>,
    pub c: [DVector<f64>; 3],
    pub target: [DVector<f64>; 3],
}

/// Right-hand sides `c_m = Σ_f B_f n_f,m` with `n_f` the interface normals
/// of the analytic metrics.
pub fn constraint_rhs(
    elem: usize,
    sbp: &TensorOperator3D,
    mesh: &HexMesh,
    normals: &FaceNormals,
) -> Result<[DVector<f64>; 3]> {
    let n = sbp.num_nodes();
    let mut c: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(n));
    for f in 0..NUM_FACES {
        let nf = normals.normals.get(elem).map(|v| &v[f]);
        let Some(nf) = nf else {
            return Err(Error::MissingNeighbor {
                element: elem,
                face: f,
            });
        };
        let list = mesh.face_node_list(f);
        if nf.len() != list.len() {
            return Err(Error::MissingNeighbor {
                element: elem,
                face: f,
            });
        }
        for (&k, nv) in list.iter().zip(nf) {
            let b = face_weight(sbp, f, k);
            for m in 0..3 {
                c[m][k] += b * nv[m];
            }
        }
    }
    Ok(c)
}

/// Product of the tangential quadrature weights at a face node.
#[inline]
pub fn face_weight(sbp: &TensorOperator3D, face: usize, node: usize) -> f64 {
    let ii = sbp.multi_index(node);
    let dir = face_dir(face);
    (0..3)
        .filter(|&d| d != dir)
        .map(|d| sbp.ops[d].weights[ii[d]])
        .product()
}

fn target_vector(em: &ElementMetrics, m: usize) -> DVector<f64> {
    let n = em.num_nodes();
    let mut t = DVector::zeros(3 * n);
    for l in 0..3 {
        t.rows_mut(l * n, n).copy_from_slice(em.a(l, m));
    }
    t
}

pub fn assemble_constraints(
    elem: usize,
    sbp: &TensorOperator3D,
    analytic: &MetricSet,
    mesh: &HexMesh,
) -> Result<ConstraintSystem> {
    let normals = face_normals(mesh, analytic)?;
    let cm = ConstraintMatrix::new(sbp)?;
    let c = constraint_rhs(elem, sbp, mesh, &normals)?;
    let em = &analytic.elements[elem];
    Ok(ConstraintSystem {
        m: cm.m,
        c,
        target: std::array::from_fn(|m| target_vector(em, m)),
    })
}

/// Minimum-norm correction of `targets` onto `M a_m = c_m`, element by
/// element. `analytic` supplies the face data.
pub fn optimized_metrics_from(
    mesh: &HexMesh,
    sbp: &TensorOperator3D,
    analytic: &MetricSet,
    targets: &MetricSet,
) -> Result<MetricSet> {
    let cm = ConstraintMatrix::new(sbp)?;
    let normals = face_normals(mesh, analytic)?;
    let n = sbp.num_nodes();
    let elements = targets
        .elements
        .par_iter()
        .enumerate()
        .map(|(e, em)| {
            let c = constraint_rhs(e, sbp, mesh, &normals)?;
            let mut out = em.clone();
            for m in 0..3 {
                let t = target_vector(em, m);
                let r = &cm.m * &t - &c[m];
                let a = t - &cm.pinv * r;
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::PseudoInverse { element: e });
                }
                for l in 0..3 {
                    out.a_mut(l, m).copy_from_slice(a.rows(l * n, n).as_slice());
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSet {
        provenance: MetricProvenance::Optimized,
        elements,
    })
}

pub fn optimized_metrics(
    mesh: &HexMesh,
    sbp: &TensorOperator3D,
    analytic: &MetricSet,
) -> Result<MetricSet> {
    optimized_metrics_from(mesh, sbp, analytic, analytic)
}

/// Builds the requested variant (analytic metrics are computed as needed).
pub fn build_metrics(
    mesh: &HexMesh,
    sbp: &TensorOperator3D,
    provenance: MetricProvenance,
    analytic: &MetricSet,
) -> Result<MetricSet> {
    match provenance {
        MetricProvenance::Analytic => Ok(analytic.clone()),
        MetricProvenance::ThomasLombard => thomas_lombard_metrics(mesh, sbp),
        MetricProvenance::Optimized => optimized_metrics(mesh, sbp, analytic),
    }
}

#[derive(Debug, Clone)]
pub struct GclReport {
    /// `Σ_l D_ξl a^l_m` per element and `m`.
    pub volume: Vec<[Vec<f64>; 3]>,
    /// `M a_m − c_m` per element and `m`, with `c_m` from analytic faces.
    pub constrained: Vec<[Vec<f64>; 3]>,
    /// Largest metric magnitude per element.
    pub scale: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl GclReport {
    pub fn volume_max(&self) -> f64 {
        self.volume
            .iter()
            .flatten()
            .map(|v| max_abs(v))
            .fold(0.0, f64::max)
    }

    pub fn constrained_max(&self) -> f64 {
        self.constrained
            .iter()
            .flatten()
            .map(|v| max_abs(v))
            .fold(0.0, f64::max)
    }

    /// Largest volume residual divided by its element's metric scale.
    pub fn volume_max_scaled(&self) -> f64 {
        self.volume
            .iter()
            .zip(&self.scale)
            .flat_map(|(r, s)| r.iter().map(move |v| max_abs(v) / s))
            .fold(0.0, f64::max)
    }

    pub fn constrained_max_scaled(&self) -> f64 {
        self.constrained
            .iter()
            .zip(&self.scale)
            .flat_map(|(r, s)| r.iter().map(move |v| max_abs(v) / s))
            .fold(0.0, f64::max)
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.iter().copied().fold(0.0, f64::max)
    }
}

pub fn gcl_residual(
    metrics: &MetricSet,
    analytic: &MetricSet,
    sbp: &TensorOperator3D,
    mesh: &HexMesh,
) -> Result<GclReport> {
    let normals = face_normals(mesh, analytic)?;
    let n = sbp.num_nodes();
    let qs: [DMatrix<f64>; 3] = std::array::from_fn(|l| dense_q(sbp, l).transpose());
    let mut volume = Vec::with_capacity(metrics.elements.len());
    let mut constrained = Vec::with_capacity(metrics.elements.len());
    let mut scale = Vec::with_capacity(metrics.elements.len());
    for (e, em) in metrics.elements.iter().enumerate() {
        let c = constraint_rhs(e, sbp, mesh, &normals)?;
        let mut vol: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
        let mut con: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
        for m in 0..3 {
            let mut r = DVector::from_column_slice(c[m].as_slice()) * -1.0;
            for l in 0..3 {
                let d = sbp.apply_dxi(l, em.a(l, m))?;
                for (o, v) in vol[m].iter_mut().zip(d) {
                    *o += v;
                }
                r += &qs[l] * DVector::from_column_slice(em.a(l, m));
            }
            con[m].copy_from_slice(r.as_slice());
        }
        volume.push(vol);
        constrained.push(con);
        scale.push(max_abs(&em.a).max(f64::MIN_POSITIVE));
    }
    Ok(GclReport {
        volume,
        constrained,
        scale,
    })
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_perturbed_cube;

    #[test]
    fn affine_metrics_are_scaled_identity() {
        let sbp = TensorOperator3D::lgl(2).unwrap();
        let mesh = build_perturbed_cube(&sbp, 2, 0.0).unwrap();
        let an = analytic_metrics(&mesh, &sbp).unwrap();
        let tl = thomas_lombard_metrics(&mesh, &sbp).unwrap();
        for em in &an.elements {
            for l in 0..3 {
                for m in 0..3 {
                    let e = if l == m { 0.25 } else { 0.0 };
                    assert!(em.a(l, m).iter().all(|v| (v - e).abs() < 1e-15));
                }
            }
        }
        assert!(an.max_abs_difference(&tl) < 1e-14);
    }

    #[test]
    fn constraint_rank_deficient_by_one() {
        for p in 1..=4 {
            let sbp = TensorOperator3D::lgl(p).unwrap();
            let cm = ConstraintMatrix::new(&sbp).unwrap();
            assert_eq!(cm.rank, sbp.num_nodes() - 1, "p = {p}");
        }
    }

    #[test]
    fn affine_optimization_is_identity() {
        let sbp = TensorOperator3D::lgl(3).unwrap();
        let mesh = build_perturbed_cube(&sbp, 2, 0.0).unwrap();
        let an = analytic_metrics(&mesh, &sbp).unwrap();
        let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
        assert!(an.max_abs_difference(&opt) < 1e-14);
    }

    #[test]
    fn provenance_parses() {
        assert_eq!(
            MetricProvenance::parse("tl").unwrap(),
            MetricProvenance::ThomasLombard
        );
        assert!(MetricProvenance::parse("nope").is_err());
    }
}
