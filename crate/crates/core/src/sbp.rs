//! Diagonal-norm SBP operators on Legendre-Gauss-Lobatto nodes and their
//! matrix-free tensor-product extension to hexahedral elements.
//!
//! Node ordering inside an element is lexicographic with `ξ1` fastest:
//! node `(i1, i2, i3)` lives at `i1 + n1 * (i2 + n2 * i3)`. With this
//! ordering the dense three-dimensional operators are
//! `D_ξ1 = I ⊗ I ⊗ D`, `D_ξ2 = I ⊗ D ⊗ I` and `D_ξ3 = D ⊗ I ⊗ I`.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 200;

/// LGL nodes and quadrature weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodeSet1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre-Gauss-Lobatto nodes: the roots of `(1 - ξ²) P'_{n-1}(ξ)`.
///
/// Newton iteration on the Legendre three-term recurrence, seeded with
/// Chebyshev-Gauss-Lobatto points, followed by explicit symmetrization so
/// that `ξ_i = -ξ_{n-1-i}` holds bitwise.
pub fn lgl_nodes(n: usize) -> Result<NodeSet1D> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "LGL node count must be at least 2, got {n}"
        )));
    }
    let deg = n - 1;
    let mut x: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * j as f64 / deg as f64).cos())
        .collect();
    let mut p_deg = vec![0.0; n];

    for _ in 0..NEWTON_MAX_ITER {
        let mut max_change: f64 = 0.0;
        for (xi, pd) in x.iter_mut().zip(p_deg.iter_mut()) {
            let (p_n, p_nm1) = legendre_pair(deg, *xi);
            *pd = p_n;
            let step = (*xi * p_n - p_nm1) / (n as f64 * p_n);
            *xi -= step;
            max_change = max_change.max(step.abs());
        }
        if max_change <= NEWTON_TOL {
            break;
        }
    }
    for (xi, pd) in x.iter().zip(p_deg.iter_mut()) {
        *pd = legendre_pair(deg, *xi).0;
    }

    // Newton ran on descending Chebyshev seeds.
    x.reverse();
    p_deg.reverse();
    let mut weights: Vec<f64> = p_deg
        .iter()
        .map(|p| 2.0 / (deg as f64 * n as f64 * p * p))
        .collect();

    let xs = x.clone();
    let ws = weights.clone();
    for i in 0..n {
        x[i] = 0.5 * (xs[i] - xs[n - 1 - i]);
        weights[i] = 0.5 * (ws[i] + ws[n - 1 - i]);
    }
    x[0] = -1.0;
    x[n - 1] = 1.0;
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(NodeSet1D { nodes: x, weights })
}

/// `(P_deg(x), P_{deg-1}(x))` by the three-term recurrence.
fn legendre_pair(deg: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if deg == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=deg {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Barycentric weights `1 / Π_{k≠j} (x_j - x_k)`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, xk)| nodes[j] - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of all Lagrange basis polynomials at `x`.
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(k) = nodes.iter().position(|&xk| xk == x) {
        let mut out = vec![0.0; nodes.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(xk, wk)| wk / (x - xk))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

/// One-dimensional diagonal-norm SBP operator `D = P⁻¹ Q`, `Q + Qᵀ = E`.
///
/// All matrices are dense and row-major (`m[i * n + j]`).
#[derive(Debug, Clone)]
pub struct SbpOperator1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary: Vec<f64>,
    pub d: Vec<f64>,
    pub q: Vec<f64>,
    pub e: Vec<f64>,
}

impl SbpOperator1D {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn d_at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n() + j]
    }

    #[inline]
    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n() + j]
    }

    /// `out = D v` for a single line of nodes.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            out[i] = (0..n).map(|j| self.d[i * n + j] * v[j]).sum();
        }
    }

    /// Operator of degree `p` on `p + 1` LGL nodes.
    pub fn lgl(p: usize) -> Result<Self> {
        build_sbp_1d(&lgl_nodes(p + 1)?)
    }
}

/// Lagrange-interpolant differentiation matrix on the given nodes, with
/// `P = diag(weights)`, `Q = P D` and `E = diag(-1, 0, ..., 0, 1)`.
pub fn build_sbp_1d(nodes: &NodeSet1D) -> Result<SbpOperator1D> {
    let n = nodes.len();
    if n < 2 || nodes.weights.len() != n {
        return Err(Error::InvalidArgument(
            "node set needs at least two nodes and matching weights".into(),
        ));
    }
    if nodes.nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "nodes must be strictly increasing".into(),
        ));
    }
    if nodes.weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let x = &nodes.nodes;
    let bary = barycentric_weights(x);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (x[i] - x[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = nodes.weights[i] * d[i * n + j];
        }
    }
    let mut e = vec![0.0; n * n];
    e[0] = -1.0;
    e[n * n - 1] = 1.0;
    Ok(SbpOperator1D {
        degree: n - 1,
        nodes: x.clone(),
        weights: nodes.weights.clone(),
        bary,
        d,
        q,
        e,
    })
}

/// Tensor-product extension of 1D operators to a hexahedral element.
#[derive(Debug, Clone)]
pub struct TensorOperator3D {
    pub ops: [SbpOperator1D; 3],
    pub dims: [usize; 3],
    /// Diagonal of `M = P1 ⊗ P2 ⊗ P3` in element node order.
    pub mass: Vec<f64>,
}

impl TensorOperator3D {
    pub fn new(ops: [SbpOperator1D; 3]) -> Self {
        let dims = [ops[0].n(), ops[1].n(), ops[2].n()];
        let mut mass = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i3 in 0..dims[2] {
            for i2 in 0..dims[1] {
                for i1 in 0..dims[0] {
                    mass.push(ops[0].weights[i1] * ops[1].weights[i2] * ops[2].weights[i3]);
                }
            }
        }
        Self { ops, dims, mass }
    }

    /// Same operator in every direction.
    pub fn uniform(op: SbpOperator1D) -> Self {
        Self::new([op.clone(), op.clone(), op])
    }

    pub fn lgl(p: usize) -> Result<Self> {
        Ok(Self::uniform(SbpOperator1D::lgl(p)?))
    }

    pub fn num_nodes(&self) -> usize {
        self.dims.iter().product()
    }

    /// Nodes per direction when all three directions agree.
    pub fn n1d(&self) -> usize {
        self.dims[0]
    }

    pub fn is_uniform(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    #[inline]
    pub fn multi_index(&self, k: usize) -> [usize; 3] {
        let i1 = k % self.dims[0];
        let r = k / self.dims[0];
        [i1, r % self.dims[1], r / self.dims[1]]
    }

    /// Stride between consecutive nodes along direction `dir` (0-based).
    #[inline]
    pub fn stride(&self, dir: usize) -> usize {
        match dir {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }

    /// Reference coordinates of element node `k`.
    pub fn reference_coords(&self, k: usize) -> [f64; 3] {
        let [i1, i2, i3] = self.multi_index(k);
        [
            self.ops[0].nodes[i1],
            self.ops[1].nodes[i2],
            self.ops[2].nodes[i3],
        ]
    }

    /// `D_ξ(dir+1)` applied to a nodal scalar field; `dir` is 0-based.
    pub fn apply_dxi(&self, dir: usize, field: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_nodes()];
        self.apply_dxi_into(dir, field, &mut out)?;
        Ok(out)
    }

    /// Strided 1D applications along every line in direction `dir`.
    pub fn apply_dxi_into(&self, dir: usize, field: &[f64], out: &mut [f64]) -> Result<()> {
        let total = self.num_nodes();
        if dir > 2 {
            return Err(Error::InvalidArgument(format!(
                "direction must be 0, 1 or 2, got {dir}"
            )));
        }
        if field.len() != total {
            return Err(Error::SizeMismatch {
                expected: total,
                got: field.len(),
            });
        }
        if out.len() != total {
            return Err(Error::SizeMismatch {
                expected: total,
                got: out.len(),
            });
        }
        let op = &self.ops[dir];
        let n = op.n();
        let s = self.stride(dir);
        for base in self.line_starts(dir) {
            for i in 0..n {
                let row = &op.d[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (j, dij) in row.iter().enumerate() {
                    acc += dij * field[base + j * s];
                }
                out[base + i * s] = acc;
            }
        }
        Ok(())
    }

    /// First node index of every line of nodes running in direction `dir`.
    pub fn line_starts(&self, dir: usize) -> Vec<usize> {
        let [n1, n2, n3] = self.dims;
        let mut starts = Vec::new();
        match dir {
            0 => {
                for i3 in 0..n3 {
                    for i2 in 0..n2 {
                        starts.push(self.index(0, i2, i3));
                    }
                }
            }
            1 => {
                for i3 in 0..n3 {
                    for i1 in 0..n1 {
                        starts.push(self.index(i1, 0, i3));
                    }
                }
            }
            _ => {
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        starts.push(self.index(i1, i2, 0));
                    }
                }
            }
        }
        starts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_node() {
        assert!(matches!(lgl_nodes(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(lgl_nodes(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn two_nodes_are_endpoints() {
        let s = lgl_nodes(2).unwrap();
        assert_eq!(s.nodes, vec![-1.0, 1.0]);
        assert!((s.weights[0] - 1.0).abs() < 1e-15);
        assert!((s.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_nodes_simpson() {
        let s = lgl_nodes(3).unwrap();
        assert_eq!(s.nodes, vec![-1.0, 0.0, 1.0]);
        let expected = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (w, e) in s.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    /// Independent bisection on P'_4(x) = (35x³ - 15x)/2 ... derivative form.
    #[test]
    fn five_nodes_match_bisection_oracle() {
        // P_4 = (35x^4 - 30x^2 + 3)/8, P_4' = (140x^3 - 60x)/8, root x² = 3/7.
        let dp4 = |x: f64| (140.0 * x * x * x - 60.0 * x) / 8.0;
        let (mut lo, mut hi) = (0.3_f64, 0.9_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dp4(lo) * dp4(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - (3.0_f64 / 7.0).sqrt()).abs() < 1e-15);
        let s = lgl_nodes(5).unwrap();
        let expected = [-1.0, -root, 0.0, root, 1.0];
        for (x, e) in s.nodes.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15, "{x} vs {e}");
        }
    }

    #[test]
    fn quadrature_exactness() {
        for n in 2..=17 {
            let s = lgl_nodes(n).unwrap();
            for k in 0..=(2 * n - 3) {
                let quad: f64 = s
                    .nodes
                    .iter()
                    .zip(&s.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!(
                    (quad - exact).abs() < 1e-13,
                    "n={n} k={k}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn linear_operator_by_hand() {
        let op = SbpOperator1D::lgl(1).unwrap();
        let expected = [-0.5, 0.5, -0.5, 0.5];
        for (d, e) in op.d.iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_field_is_annihilated() {
        let t = TensorOperator3D::lgl(3).unwrap();
        let f = vec![2.5; t.num_nodes()];
        for dir in 0..3 {
            let d = t.apply_dxi(dir, &f).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn coordinate_field_gives_ones() {
        let t = TensorOperator3D::lgl(4).unwrap();
        let f: Vec<f64> = (0..t.num_nodes())
            .map(|k| t.reference_coords(k)[1])
            .collect();
        let d = t.apply_dxi(1, &f).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn size_mismatch_is_reported() {
        let t = TensorOperator3D::lgl(2).unwrap();
        let err = t.apply_dxi(0, &[1.0; 5]).unwrap_err();
        assert_eq!(
            err,
            Error::SizeMismatch {
                expected: 27,
                got: 5
            }
        );
    }

    #[test]
    fn lagrange_basis_interpolates_polynomials() {
        let op = SbpOperator1D::lgl(4).unwrap();
        let vals: Vec<f64> = op.nodes.iter().map(|x| x.powi(4) - x).collect();
        let x = 0.3217;
        let b = lagrange_basis(&op.nodes, &op.bary, x);
        let interp: f64 = b.iter().zip(&vals).map(|(a, v)| a * v).sum();
        assert!((interp - (x.powi(4) - x)).abs() < 1e-14);
    }
}
