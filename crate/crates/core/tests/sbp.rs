use nalgebra::DMatrix;
use proptest::prelude::*;

use sbpgcl::sbp::{SbpOperator1D, TensorOperator3D};

fn dense(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

/// Largest violation of the diagonal-norm SBP properties, relative to the
/// natural scale of each check.
fn definition_residual(op: &SbpOperator1D) -> (f64, f64, f64) {
    let n = op.n();
    let p = op.degree;
    // D x^k = k x^(k-1) for k <= p
    let mut acc: f64 = 0.0;
    for k in 0..=p {
        let xk: Vec<f64> = op.nodes.iter().map(|x| x.powi(k as i32)).collect();
        let mut dx = vec![0.0; n];
        op.apply(&xk, &mut dx);
        let scale = (k as f64).max(1.0);
        for (i, x) in op.nodes.iter().enumerate() {
            let exact = if k == 0 {
                0.0
            } else {
                k as f64 * x.powi(k as i32 - 1)
            };
            acc = acc.max((dx[i] - exact).abs() / scale);
        }
    }
    let q = dense(n, &op.q);
    let e = dense(n, &op.e);
    let sym = (&q + q.transpose() - e).abs().max();
    let min_w = op.weights.iter().cloned().fold(f64::INFINITY, f64::min);
    (acc, sym, min_w)
}

#[test]
fn lgl_operators_satisfy_sbp_definition_up_to_degree_16() {
    for p in 1..=16 {
        let op = SbpOperator1D::lgl(p).unwrap();
        let (acc, sym, min_w) = definition_residual(&op);
        let dnorm = op.d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(
            acc <= 1e-12 * dnorm.max(1.0),
            "p = {p}: accuracy residual {acc:e}"
        );
        assert!(sym <= 1e-12, "p = {p}: Q + Qᵀ − E = {sym:e}");
        assert!(min_w > 0.0, "p = {p}: non-positive weight");
        let total: f64 = op.weights.iter().sum();
        assert!((total - 2.0).abs() <= 1e-13);
    }
}

#[test]
fn tensor_derivative_matches_dense_kronecker_product() {
    let sbp = TensorOperator3D::lgl(3).unwrap();
    let n1 = sbp.n1d();
    let d = dense(n1, &sbp.ops[0].d);
    let id = DMatrix::<f64>::identity(n1, n1);
    // ξ1 runs fastest, so it is the last Kronecker factor
    let full = [
        id.kronecker(&id).kronecker(&d),
        id.kronecker(&d).kronecker(&id),
        d.kronecker(&id).kronecker(&id),
    ];
    let field: Vec<f64> = (0..sbp.num_nodes())
        .map(|k| {
            let x = sbp.reference_coords(k);
            (1.3 * x[0]).sin() * (0.7 * x[1] + 0.2).cos() + x[2].powi(3) * x[0]
        })
        .collect();
    let v = nalgebra::DVector::from_column_slice(&field);
    for (dir, m) in full.iter().enumerate() {
        let expect = m * &v;
        let got = sbp.apply_dxi(dir, &field).unwrap();
        for k in 0..field.len() {
            assert!((got[k] - expect[k]).abs() < 1e-13, "dir {dir}, node {k}");
        }
    }
}

#[test]
fn tensor_mass_is_kronecker_of_weights() {
    let sbp = TensorOperator3D::lgl(2).unwrap();
    let w = &sbp.ops[0].weights;
    for k in 0..sbp.num_nodes() {
        let [i, j, l] = sbp.multi_index(k);
        assert_eq!(sbp.mass[k], w[i] * w[j] * w[l]);
        assert_eq!(sbp.index(i, j, l), k);
    }
}

proptest! {
    #[test]
    fn tensor_derivative_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in 0u64..1000,
        dir in 0usize..3,
    ) {
        let sbp = TensorOperator3D::lgl(2).unwrap();
        let n = sbp.num_nodes();
        let f: Vec<f64> = (0..n).map(|k| ((k as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let g: Vec<f64> = (0..n).map(|k| ((k as u64 * 7 + seed * 3) % 13) as f64 - 6.0).collect();
        let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let df = sbp.apply_dxi(dir, &f).unwrap();
        let dg = sbp.apply_dxi(dir, &g).unwrap();
        let dc = sbp.apply_dxi(dir, &comb).unwrap();
        for k in 0..n {
            prop_assert!((dc[k] - a * df[k] - b * dg[k]).abs() < 1e-11);
        }
    }

    #[test]
    fn integration_by_parts_holds(seed in 0u64..1000, p in 1usize..8) {
        // uᵀ Q v + vᵀ Q u = u_N v_N − u_0 v_0
        let op = SbpOperator1D::lgl(p).unwrap();
        let n = op.n();
        let u: Vec<f64> = (0..n).map(|i| (((i as u64 + 1) * (seed + 3)) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..n).map(|i| (((i as u64 + 2) * (seed + 5)) % 7) as f64 - 3.0).collect();
        let q = dense(n, &op.q);
        let uq = nalgebra::DVector::from_column_slice(&u);
        let vq = nalgebra::DVector::from_column_slice(&v);
        let lhs = uq.dot(&(&q * &vq)) + vq.dot(&(&q * &uq));
        let rhs = u[n - 1] * v[n - 1] - u[0] * v[0];
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()));
    }
}
