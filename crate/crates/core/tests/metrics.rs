use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbpgcl::mesh::{build_perturbed_cube, mapping_jacobian, HexMesh};
use sbpgcl::metrics::*;
use sbpgcl::sbp::TensorOperator3D;

fn setup(p: usize, cells: usize, eta: f64) -> (TensorOperator3D, HexMesh, MetricSet) {
    let sbp = TensorOperator3D::lgl(p).unwrap();
    let mesh = build_perturbed_cube(&sbp, cells, eta).unwrap();
    let an = analytic_metrics(&mesh, &sbp).unwrap();
    (sbp, mesh, an)
}

/// Equality-constrained least squares through the KKT system, with the
/// redundant constraint row removed.
fn kkt_oracle(m: &DMatrix<f64>, c: &DVector<f64>, t: &DVector<f64>) -> DVector<f64> {
    let (nr, nc) = m.shape();
    // the left null vector of M is the constant vector, so every row is a
    // combination of the others and any one of them can be dropped
    let rows: Vec<usize> = (0..nr - 1).collect();
    let k = rows.len();
    let mut kkt = DMatrix::zeros(nc + k, nc + k);
    let mut rhs = DVector::zeros(nc + k);
    kkt.view_mut((0, 0), (nc, nc)).fill_with_identity();
    for (ri, &r) in rows.iter().enumerate() {
        for j in 0..nc {
            kkt[(nc + ri, j)] = m[(r, j)];
            kkt[(j, nc + ri)] = m[(r, j)];
        }
        rhs[nc + ri] = c[r];
    }
    rhs.rows_mut(0, nc).copy_from(t);
    let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
    sol.rows(0, nc).into_owned()
}

#[test]
fn adjugate_identity_on_perturbed_elements() {
    let (sbp, mesh, an) = setup(3, 3, 1.0);
    for (e, el) in mesh.elements.iter().enumerate() {
        let mj = mapping_jacobian(e, el, &sbp).unwrap();
        let em = &an.elements[e];
        for k in 0..sbp.num_nodes() {
            let j = mj.det[k];
            for l in 0..3 {
                let row = em.row(l, k);
                for kk in 0..3 {
                    let s: f64 = (0..3).map(|m| row[m] * mj.jac[k][m][kk]).sum();
                    let expect = if l == kk { j } else { 0.0 };
                    assert!((s - expect).abs() <= 1e-12 * j.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn thomas_lombard_satisfies_volume_gcl() {
    for p in [2, 3, 4] {
        let (sbp, mesh, an) = setup(p, 3, 1.0);
        let tl = thomas_lombard_metrics(&mesh, &sbp).unwrap();
        let r = gcl_residual(&tl, &an, &sbp, &mesh).unwrap();
        assert!(
            r.volume_max_scaled() <= 1e-12,
            "p={p}: {}",
            r.volume_max_scaled()
        );
        if p == 2 {
            let diff = tl.max_abs_difference(&an);
            println!("p=2 TL vs analytic max difference: {diff:e}");
            assert!(diff > 1e-8);
        }
    }
}

#[test]
fn analytic_metrics_violate_gcl_on_curved_mesh() {
    let (sbp, mesh, an) = setup(2, 3, 1.0);
    let r = gcl_residual(&an, &an, &sbp, &mesh).unwrap();
    assert!(r.volume_max() > 1e-8);
    assert!(r.constrained_max() > 1e-8);
}

#[test]
fn analytic_metrics_on_affine_mesh_have_zero_residual() {
    let (sbp, mesh, an) = setup(3, 3, 0.0);
    let r = gcl_residual(&an, &an, &sbp, &mesh).unwrap();
    assert!(r.volume_max() < 1e-13);
    assert!(r.constrained_max() < 1e-13);
}

#[test]
fn optimization_closes_constraints() {
    for p in [2, 3, 4] {
        let (sbp, mesh, an) = setup(p, 3, 1.0);
        let before = gcl_residual(&an, &an, &sbp, &mesh).unwrap();
        let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
        let after = gcl_residual(&opt, &an, &sbp, &mesh).unwrap();
        assert!(before.constrained_max() > 1e-8);
        assert!(
            after.constrained_max_scaled() <= 1e-11,
            "p={p}: {}",
            after.constrained_max_scaled()
        );
    }
}

#[test]
fn optimized_matches_kkt_oracle() {
    let (sbp, mesh, an) = setup(2, 3, 1.0);
    let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
    let n = sbp.num_nodes();
    for e in [0, 13, 26] {
        let cs = assemble_constraints(e, &sbp, &an, &mesh).unwrap();
        for m in 0..3 {
            let x = kkt_oracle(&cs.m, &cs.c[m], &cs.target[m]);
            for l in 0..3 {
                let got = opt.elements[e].a(l, m);
                for k in 0..n {
                    assert!((got[k] - x[l * n + k]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn affine_constraints_hold_for_target() {
    let (sbp, mesh, an) = setup(2, 3, 0.0);
    let cs = assemble_constraints(4, &sbp, &an, &mesh).unwrap();
    for m in 0..3 {
        let r = &cs.m * &cs.target[m] - &cs.c[m];
        assert!(r.amax() < 1e-14);
    }
}

#[test]
fn curved_target_violates_constraints() {
    let (sbp, mesh, an) = setup(2, 3, 1.0);
    let worst = (0..27)
        .map(|e| {
            let cs = assemble_constraints(e, &sbp, &an, &mesh).unwrap();
            (0..3)
                .map(|m| (&cs.m * &cs.target[m] - &cs.c[m]).amax())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-8);
}

#[test]
fn identity_element_rhs_matches_dense_boundary_operator() {
    let sbp = TensorOperator3D::lgl(3).unwrap();
    let mesh = build_perturbed_cube(&sbp, 1, 0.0).unwrap();
    let an = analytic_metrics(&mesh, &sbp).unwrap();
    let cs = assemble_constraints(0, &sbp, &an, &mesh).unwrap();
    let n = sbp.num_nodes();
    // E_l = Q_l + Q_lᵀ
    for m in 0..3 {
        let mut expect = DVector::zeros(n);
        for l in 0..3 {
            let q = dense_q(&sbp, l);
            let e = &q + q.transpose();
            expect += e * DVector::from_column_slice(an.elements[0].a(l, m));
        }
        assert!((&expect - &cs.c[m]).amax() < 1e-14);
    }
}

#[test]
fn optimization_is_idempotent() {
    let (sbp, mesh, an) = setup(2, 2, 1.0);
    let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
    let again = optimized_metrics_from(&mesh, &sbp, &an, &opt).unwrap();
    assert!(opt.max_abs_difference(&again) < 1e-12);
}

#[test]
fn optimum_is_closest_feasible_point() {
    let (sbp, mesh, an) = setup(2, 2, 1.0);
    let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
    let cm = ConstraintMatrix::new(&sbp).unwrap();
    let n = sbp.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // projector onto null(M)
    let proj = DMatrix::identity(3 * n, 3 * n) - &cm.pinv * &cm.m;
    for e in [0, 5] {
        for m in 0..3 {
            let mut t = DVector::zeros(3 * n);
            let mut a = DVector::zeros(3 * n);
            for l in 0..3 {
                t.rows_mut(l * n, n).copy_from_slice(an.elements[e].a(l, m));
                a.rows_mut(l * n, n)
                    .copy_from_slice(opt.elements[e].a(l, m));
            }
            let base = (&a - &t).norm();
            for _ in 0..100 {
                let raw = DVector::from_fn(3 * n, |_, _| rng.gen_range(-1.0..1.0));
                let delta = &proj * raw * 1e-3;
                assert!((&cm.m * &delta).amax() < 1e-12);
                assert!((&a + &delta - &t).norm() >= base * (1.0 - 1e-14));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn correction_is_linear(alpha in -3.0f64..3.0) {
        let (sbp, mesh, an) = setup(2, 1, 0.8);
        let opt = optimized_metrics(&mesh, &sbp, &an).unwrap();
        let mut scaled = an.clone();
        for em in &mut scaled.elements {
            em.a.iter_mut().for_each(|v| *v *= alpha);
        }
        let scaled_opt = optimized_metrics_from(&mesh, &sbp, &scaled, &scaled).unwrap();
        let n = sbp.num_nodes();
        let got = &scaled_opt.elements[0].a;
        let base = &opt.elements[0].a;
        for i in 0..9 * n {
            prop_assert!((got[i] - alpha * base[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_are_linear_in_metrics(alpha in -2.0f64..2.0) {
        let (sbp, mesh, an) = setup(2, 1, 0.6);
        let zero = {
            let mut z = an.clone();
            z.elements.iter_mut().for_each(|em| em.a.iter_mut().for_each(|v| *v = 0.0));
            z
        };
        let mut scaled = an.clone();
        scaled.elements.iter_mut().for_each(|em| em.a.iter_mut().for_each(|v| *v *= alpha));
        // with zero face data the constrained residual is M a, linear in a
        let r1 = gcl_residual(&an, &zero, &sbp, &mesh).unwrap();
        let r2 = gcl_residual(&scaled, &zero, &sbp, &mesh).unwrap();
        for m in 0..3 {
            for (x, y) in r1.volume[0][m].iter().zip(&r2.volume[0][m]) {
                prop_assert!((alpha * x - y).abs() < 1e-12);
            }
            for (x, y) in r1.constrained[0][m].iter().zip(&r2.constrained[0][m]) {
                prop_assert!((alpha * x - y).abs() < 1e-12);
            }
        }
    }
}
