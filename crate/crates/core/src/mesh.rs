//! Hexahedral meshes with polynomial element mappings and conforming face
//! connectivity.
//!
//! Local faces are numbered `2 * dir + side`, where `dir` is the 0-based
//! reference direction and `side = 0` is the `ξ_dir = -1` face. Outward
//! signs are `-1` for `side = 0` and `+1` for `side = 1`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sbp::{lagrange_basis, TensorOperator3D};

pub const NUM_FACES: usize = 6;
const FACE_KEY_TOL: f64 = 1e-10;
pub const WATERTIGHT_TOL: f64 = 1e-12;

/// Reference direction (0-based) normal to local face `face`.
#[inline]
pub fn face_dir(face: usize) -> usize {
    face / 2
}

/// Outward orientation of local face `face`: `-1` or `+1`.
#[inline]
pub fn face_sign(face: usize) -> f64 {
    if face % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Element node indices on a local face, ordered with the lower tangential
/// direction running fastest.
pub fn face_nodes(sbp: &TensorOperator3D, face: usize) -> Vec<usize> {
    let dir = face_dir(face);
    let fixed = if face % 2 == 0 { 0 } else { sbp.dims[dir] - 1 };
    let (t1, t2) = match dir {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = Vec::with_capacity(sbp.dims[t1] * sbp.dims[t2]);
    for j2 in 0..sbp.dims[t2] {
        for j1 in 0..sbp.dims[t1] {
            let mut idx = [0usize; 3];
            idx[dir] = fixed;
            idx[t1] = j1;
            idx[t2] = j2;
            out.push(sbp.index(idx[0], idx[1], idx[2]));
        }
    }
    out
}

/// Degree-`p` Lagrange interpolant of nodal physical coordinates.
#[derive(Debug, Clone)]
pub struct ElementMapping {
    pub degree: usize,
    /// Physical coordinates at the LGL nodes, element node order.
    pub coords: Vec<[f64; 3]>,
    ref_nodes: Vec<f64>,
    ref_bary: Vec<f64>,
}

impl ElementMapping {
    pub fn new(sbp: &TensorOperator3D, coords: Vec<[f64; 3]>) -> Result<Self> {
        if !sbp.is_uniform() {
            return Err(Error::InvalidArgument(
                "element mappings require the same node count in every direction".into(),
            ));
        }
        if coords.len() != sbp.num_nodes() {
            return Err(Error::SizeMismatch {
                expected: sbp.num_nodes(),
                got: coords.len(),
            });
        }
        Ok(Self {
            degree: sbp.ops[0].degree,
            coords,
            ref_nodes: sbp.ops[0].nodes.clone(),
            ref_bary: sbp.ops[0].bary.clone(),
        })
    }

    /// `X(ξ)` at an arbitrary reference point.
    pub fn evaluate(&self, xi: [f64; 3]) -> [f64; 3] {
        let n = self.ref_nodes.len();
        let b: Vec<Vec<f64>> = xi
            .iter()
            .map(|&x| lagrange_basis(&self.ref_nodes, &self.ref_bary, x))
            .collect();
        let mut out = [0.0; 3];
        for i3 in 0..n {
            for i2 in 0..n {
                let w23 = b[1][i2] * b[2][i3];
                if w23 == 0.0 {
                    continue;
                }
                for i1 in 0..n {
                    let w = b[0][i1] * w23;
                    let c = &self.coords[i1 + n * (i2 + n * i3)];
                    for m in 0..3 {
                        out[m] += w * c[m];
                    }
                }
            }
        }
        out
    }

    pub fn coordinate(&self, m: usize) -> Vec<f64> {
        self.coords.iter().map(|c| c[m]).collect()
    }
}

/// Nodewise `dX/dξ` (`jac[k][m][l] = ∂x_m/∂ξ_l`) and its determinant.
#[derive(Debug, Clone)]
pub struct MappingJacobian {
    pub jac: Vec<[[f64; 3]; 3]>,
    pub det: Vec<f64>,
}

/// Differentiates the nodal coordinates with the element's SBP operators,
/// which is exact for the degree-`p` geometric interpolant.
pub fn mapping_jacobian(
    element: usize,
    elem: &ElementMapping,
    sbp: &TensorOperator3D,
) -> Result<MappingJacobian> {
    if elem.degree > sbp.ops[0].degree {
        return Err(Error::InvalidArgument(format!(
            "geometric degree {} exceeds operator degree {}",
            elem.degree, sbp.ops[0].degree
        )));
    }
    let n = sbp.num_nodes();
    let mut jac = vec![[[0.0; 3]; 3]; n];
    for m in 0..3 {
        let xm = elem.coordinate(m);
        for l in 0..3 {
            let d = sbp.apply_dxi(l, &xm)?;
            for (k, v) in d.into_iter().enumerate() {
                jac[k][m][l] = v;
            }
        }
    }
    let det: Vec<f64> = jac.iter().map(det3).collect();
    if let Some((k, j)) = det.iter().enumerate().find(|(_, &j)| !(j > 0.0)) {
        return Err(Error::InvalidElement {
            element,
            reason: format!("non-positive Jacobian {j:e} at node {k}"),
        });
    }
    Ok(MappingJacobian { jac, det })
}

pub fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// A pair of matching faces.
///
/// `perm[i]` is the position in `face_b`'s node list of the node that
/// coincides with node `i` of `face_a`'s list. `orientation` is `+1` when
/// the two elements' normal reference axes point the same way across the
/// face (the usual `+1`/`-1` pairing) and `-1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceConnection {
    pub elem_a: usize,
    pub face_a: usize,
    pub elem_b: usize,
    pub face_b: usize,
    pub perm: Vec<usize>,
    pub orientation: f64,
    /// Rigid shift `x_b - x_a` for periodic pairings, zero otherwise.
    pub shift: [f64; 3],
}

impl FaceConnection {
    pub fn inverse_perm(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

/// What sits across a local face, as seen from one element.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceLink {
    Boundary,
    Interior {
        elem: usize,
        face: usize,
        /// Element node index in the neighbor for each own face node.
        nodes: Vec<usize>,
        connection: usize,
        /// True when this element is `elem_a` of the connection.
        is_a: bool,
    },
}

#[derive(Debug, Clone)]
pub struct HexMesh {
    pub elements: Vec<ElementMapping>,
    pub connections: Vec<FaceConnection>,
    pub boundary: Vec<(usize, usize)>,
    pub n1d: usize,
    pub links: Vec<[FaceLink; NUM_FACES]>,
    face_lists: Vec<Vec<usize>>,
}

type CornerKey = [[i64; 3]; 4];

fn quantize(x: [f64; 3]) -> [i64; 3] {
    [
        (x[0] / FACE_KEY_TOL).round() as i64,
        (x[1] / FACE_KEY_TOL).round() as i64,
        (x[2] / FACE_KEY_TOL).round() as i64,
    ]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl HexMesh {
    /// Builds connectivity by matching face corner keys, then derives node
    /// permutations from physical coordinates.
    pub fn from_elements(sbp: &TensorOperator3D, elements: Vec<ElementMapping>) -> Result<Self> {
        let face_lists: Vec<Vec<usize>> = (0..NUM_FACES).map(|f| face_nodes(sbp, f)).collect();
        let mut mesh = HexMesh {
            elements,
            connections: Vec::new(),
            boundary: Vec::new(),
            n1d: sbp.n1d(),
            links: Vec::new(),
            face_lists,
        };
        let candidates: Vec<(usize, usize)> = (0..mesh.elements.len())
            .flat_map(|e| (0..NUM_FACES).map(move |f| (e, f)))
            .collect();
        mesh.pair_faces(&candidates, [0.0; 3])?;
        mesh.rebuild_links();
        Ok(mesh)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.n1d * self.n1d * self.n1d
    }

    pub fn face_node_list(&self, face: usize) -> &[usize] {
        &self.face_lists[face]
    }

    fn corner_key(&self, e: usize, f: usize, shift: [f64; 3]) -> CornerKey {
        let list = &self.face_lists[f];
        let n = self.n1d;
        let corners = [0, n - 1, n * (n - 1), n * n - 1];
        let mut key: CornerKey =
            corners.map(|c| quantize(add(self.elements[e].coords[list[c]], shift)));
        key.sort();
        key
    }

    /// Pairs faces from `candidates` whose corners coincide once the
    /// `b` side is shifted by `-shift`; unmatched faces become boundary.
    fn pair_faces(&mut self, candidates: &[(usize, usize)], shift: [f64; 3]) -> Result<()> {
        let periodic = shift != [0.0; 3];
        let mut table: HashMap<CornerKey, Vec<(usize, usize)>> = HashMap::new();
        for &(e, f) in candidates {
            table
                .entry(self.corner_key(e, f, [0.0; 3]))
                .or_default()
                .push((e, f));
        }
        let mut matched = vec![false; candidates.len()];
        let index_of: HashMap<(usize, usize), usize> = candidates
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        let neg = [-shift[0], -shift[1], -shift[2]];
        for (ia, &(ea, fa)) in candidates.iter().enumerate() {
            if matched[ia] {
                continue;
            }
            let partner = if periodic {
                let key = self.corner_key(ea, fa, shift);
                table
                    .get(&key)
                    .and_then(|v| v.iter().copied().find(|c| !matched[index_of[c]]))
            } else {
                let key = self.corner_key(ea, fa, [0.0; 3]);
                table.get(&key).and_then(|v| {
                    v.iter()
                        .copied()
                        .find(|&c| c != (ea, fa) && !matched[index_of[&c]])
                })
            };
            let Some((eb, fb)) = partner else {
                continue;
            };
            let ib = index_of[&(eb, fb)];
            let la = &self.face_lists[fa];
            let lb = &self.face_lists[fb];
            let mut perm = Vec::with_capacity(la.len());
            for &ka in la {
                let xa = add(self.elements[ea].coords[ka], shift);
                let (best, d) = lb
                    .iter()
                    .enumerate()
                    .map(|(j, &kb)| (j, dist(xa, self.elements[eb].coords[kb])))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("face has nodes");
                if d > 1e-6 {
                    return Err(Error::InvalidArgument(format!(
                        "faces ({ea},{fa}) and ({eb},{fb}) share corners but not nodes"
                    )));
                }
                perm.push(best);
            }
            let mut seen = vec![false; perm.len()];
            for &j in &perm {
                if seen[j] {
                    return Err(Error::InvalidArgument(format!(
                        "face node matching between ({ea},{fa}) and ({eb},{fb}) is not a bijection"
                    )));
                }
                seen[j] = true;
            }
            matched[ia] = true;
            matched[ib] = true;
            self.connections.push(FaceConnection {
                elem_a: ea,
                face_a: fa,
                elem_b: eb,
                face_b: fb,
                perm,
                orientation: -face_sign(fa) * face_sign(fb),
                shift: neg.map(|v| -v),
            });
        }
        let mut boundary: Vec<(usize, usize)> = candidates
            .iter()
            .zip(&matched)
            .filter(|(_, &m)| !m)
            .map(|(&c, _)| c)
            .collect();
        if periodic {
            self.boundary.retain(|c| !candidates.contains(c));
            self.boundary.append(&mut boundary);
            self.boundary.sort();
        } else {
            self.boundary = boundary;
        }
        Ok(())
    }

    fn rebuild_links(&mut self) {
        let mut links: Vec<[FaceLink; NUM_FACES]> = (0..self.elements.len())
            .map(|_| std::array::from_fn(|_| FaceLink::Boundary))
            .collect();
        for (ci, c) in self.connections.iter().enumerate() {
            let la = &self.face_lists[c.face_a];
            let lb = &self.face_lists[c.face_b];
            let nodes_for_a: Vec<usize> = c.perm.iter().map(|&j| lb[j]).collect();
            let inv = c.inverse_perm();
            let nodes_for_b: Vec<usize> = inv.iter().map(|&i| la[i]).collect();
            links[c.elem_a][c.face_a] = FaceLink::Interior {
                elem: c.elem_b,
                face: c.face_b,
                nodes: nodes_for_a,
                connection: ci,
                is_a: true,
            };
            links[c.elem_b][c.face_b] = FaceLink::Interior {
                elem: c.elem_a,
                face: c.face_a,
                nodes: nodes_for_b,
                connection: ci,
                is_a: false,
            };
        }
        self.links = links;
    }

    /// Couples the boundary faces lying on `x_dir = lo` with those on
    /// `x_dir = lo + length` (periodic wrap in physical direction `dir`).
    pub fn make_periodic(&mut self, dir: usize, length: f64) -> Result<()> {
        let mut shift = [0.0; 3];
        shift[dir] = length;
        let candidates = self.boundary.clone();
        self.pair_faces(&candidates, shift)?;
        self.rebuild_links();
        Ok(())
    }

    /// Mesh dump: one block per element, nodal coordinates in element
    /// node order (`ξ1` fastest), 17 significant digits.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sbpgcl hex mesh");
        let _ = writeln!(s, "elements {}", self.elements.len());
        let _ = writeln!(s, "nodes_per_direction {}", self.n1d);
        for (e, el) in self.elements.iter().enumerate() {
            let _ = writeln!(s, "element {e}");
            for c in &el.coords {
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]);
            }
        }
        s
    }
}

/// Paired-node distances across interior faces.
#[derive(Debug, Clone)]
pub struct WatertightReport {
    pub max_distance: f64,
    /// `(connection index, max paired-node distance)` above tolerance.
    pub offending: Vec<(usize, f64)>,
    pub pass: bool,
}

pub fn check_watertight(mesh: &HexMesh) -> WatertightReport {
    let mut max_distance: f64 = 0.0;
    let mut offending = Vec::new();
    for (ci, c) in mesh.connections.iter().enumerate() {
        let la = mesh.face_node_list(c.face_a);
        let lb = mesh.face_node_list(c.face_b);
        let mut face_max: f64 = 0.0;
        for (i, &ka) in la.iter().enumerate() {
            let xa = add(mesh.elements[c.elem_a].coords[ka], c.shift);
            let xb = mesh.elements[c.elem_b].coords[lb[c.perm[i]]];
            face_max = face_max.max(dist(xa, xb));
        }
        if face_max > WATERTIGHT_TOL {
            offending.push((ci, face_max));
        }
        max_distance = max_distance.max(face_max);
    }
    WatertightReport {
        max_distance,
        pass: offending.is_empty(),
        offending,
    }
}

/// Displacement of the perturbed-cube mapping at an unperturbed point.
pub fn cube_perturbation(x: [f64; 3], eta: f64) -> [f64; 3] {
    let h = std::f64::consts::FRAC_PI_2;
    let (a, b, c) = (h * x[0], h * x[1], h * x[2]);
    let amp = 2.0 * eta / 15.0;
    [
        amp * a.cos() * (3.0 * b).cos() * (4.0 * c).sin(),
        amp * (4.0 * a).sin() * b.cos() * (3.0 * c).cos(),
        amp * (3.0 * a).cos() * (4.0 * b).sin() * c.cos(),
    ]
}

/// `[-1, 1]³` split into `cells³` hexahedra whose LGL nodes are moved by
/// the trigonometric perturbation of amplitude `2η/15`.
pub fn build_perturbed_cube(
    sbp: &TensorOperator3D,
    cells_per_dir: usize,
    eta: f64,
) -> Result<HexMesh> {
    if cells_per_dir == 0 {
        return Err(Error::InvalidArgument(
            "cells_per_dir must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!(
            "perturbation parameter must lie in [0, 1], got {eta}"
        )));
    }
    let h = 2.0 / cells_per_dir as f64;
    let mut elements = Vec::with_capacity(cells_per_dir.pow(3));
    for c3 in 0..cells_per_dir {
        for c2 in 0..cells_per_dir {
            for c1 in 0..cells_per_dir {
                let lo = [
                    -1.0 + c1 as f64 * h,
                    -1.0 + c2 as f64 * h,
                    -1.0 + c3 as f64 * h,
                ];
                let coords: Vec<[f64; 3]> = (0..sbp.num_nodes())
                    .map(|k| {
                        let r = sbp.reference_coords(k);
                        let xs = [
                            lo[0] + 0.5 * (r[0] + 1.0) * h,
                            lo[1] + 0.5 * (r[1] + 1.0) * h,
                            lo[2] + 0.5 * (r[2] + 1.0) * h,
                        ];
                        add(xs, cube_perturbation(xs, eta))
                    })
                    .collect();
                elements.push(ElementMapping::new(sbp, coords)?);
            }
        }
    }
    HexMesh::from_elements(sbp, elements)
}
