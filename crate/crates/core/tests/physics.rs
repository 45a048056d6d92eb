use proptest::prelude::*;

use sbpgcl::physics::*;

fn gas() -> GasModel {
    GasModel::new(1.4, 1.0 / (1.4 * 0.25), 0.72, 1.0 / 1000.0).unwrap()
}

prop_compose! {
    fn admissible()(rho in 0.2f64..3.0, u1 in -2.0f64..2.0, u2 in -2.0f64..2.0,
                    u3 in -2.0f64..2.0, t in 0.3f64..3.0) -> [f64; 5] {
        [rho, u1, u2, u3, t]
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #[test]
    fn prim_round_trip(w in admissible()) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let back = cons_to_prim(&q, &g).unwrap();
        for i in 0..5 {
            prop_assert!(rel(back[i], w[i]) < 1e-14);
        }
    }

    #[test]
    fn ideal_gas_and_enthalpy(w in admissible()) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let p = pressure(&q, &g).unwrap();
        prop_assert!(rel(p, w[0] * g.r * w[4]) < 1e-14);
        let h = (q[4] + p) / q[0];
        let u2 = w[1] * w[1] + w[2] * w[2] + w[3] * w[3];
        prop_assert!(rel(h, g.cp() * w[4] + 0.5 * u2) < 1e-13);
    }

    #[test]
    fn entropy_vars_match_finite_differences(w in admissible()) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let wv = entropy_vars(&q, &g).unwrap();
        let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * qn;
        for i in 0..5 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let fd = (entropy(&qp, &g).unwrap() - entropy(&qm, &g).unwrap()) / (2.0 * h);
            prop_assert!((fd - wv[i]).abs() <= 1e-7 * wv[i].abs().max(1.0), "{} {} {}", i, fd, wv[i]);
        }
        prop_assert!(wv[4] < 0.0);
        let p = pressure(&q, &g).unwrap();
        // W5 = −1/T = −ρR/P
        prop_assert!(rel(wv[4], -q[0] * g.r / p) < 1e-14);
    }

    #[test]
    fn entropy_vars_invert(w in admissible()) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let back = entropy_vars_to_cons(&entropy_vars(&q, &g).unwrap(), &g).unwrap();
        for i in 0..5 {
            prop_assert!(rel(back[i], q[i]) < 1e-12);
        }
    }

    #[test]
    fn chandrashekar_consistent(w in admissible(), n in prop::array::uniform3(-1.0f64..1.0)) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let f = chandrashekar_flux(&q, &q, &g, n).unwrap();
        let mut e = [0.0; 5];
        for m in 0..3 {
            let fm = euler_flux(&q, &g, m).unwrap();
            for v in 0..5 {
                e[v] += n[m] * fm[v];
            }
        }
        for v in 0..5 {
            prop_assert!((f[v] - e[v]).abs() < 1e-12 * (1.0 + e[v].abs()));
        }
    }

    #[test]
    fn chandrashekar_entropy_conservative(wl in admissible(), wr in admissible(),
                                          n in prop::array::uniform3(-1.0f64..1.0)) {
        let g = gas();
        let (ql, qr) = (prim_to_cons(&wl, &g), prim_to_cons(&wr, &g));
        let f = chandrashekar_flux(&ql, &qr, &g, n).unwrap();
        let (vl, vr) = (entropy_vars(&ql, &g).unwrap(), entropy_vars(&qr, &g).unwrap());
        let lhs: f64 = (0..5).map(|i| (vl[i] - vr[i]) * f[i]).sum();
        let (pl, pr) = (entropy_potential(&ql, &g), entropy_potential(&qr, &g));
        let rhs: f64 = (0..3).map(|m| n[m] * (pl[m] - pr[m])).sum();
        let scale: f64 = (0..5).map(|i| (vl[i] - vr[i]).abs() * f[i].abs()).sum::<f64>() + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn chandrashekar_symmetric(wl in admissible(), wr in admissible(),
                               n in prop::array::uniform3(-1.0f64..1.0)) {
        let g = gas();
        let (ql, qr) = (prim_to_cons(&wl, &g), prim_to_cons(&wr, &g));
        let a = chandrashekar_flux(&ql, &qr, &g, n).unwrap();
        let b = chandrashekar_flux(&qr, &ql, &g, n).unwrap();
        for v in 0..5 {
            prop_assert!((a[v] - b[v]).abs() <= 1e-14 * a[v].abs().max(1.0));
        }
    }

    #[test]
    fn log_mean_is_a_mean(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let l = log_mean(a, b);
        prop_assert!(l >= a.min(b) * (1.0 - 1e-14) && l <= a.max(b) * (1.0 + 1e-14));
        prop_assert!((l - log_mean(b, a)).abs() <= 1e-15 * l);
    }

    #[test]
    fn stress_form_oracle(w in admissible(), gw in prop::array::uniform3(prop::array::uniform5(-1.0f64..1.0))) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = viscous_coefficient_matrices(&q, &g, &id, 1.0).unwrap();
        // independent oracle: velocity and temperature gradients by the
        // quotient rule applied to u_i = W_{i+1}/(−W5), T = −1/W5
        let wv = entropy_vars(&q, &g).unwrap();
        let mut du = [[0.0; 3]; 3];
        let mut dt = [0.0; 3];
        for j in 0..3 {
            dt[j] = gw[j][4] / (wv[4] * wv[4]);
            for i in 0..3 {
                du[i][j] = -gw[j][i + 1] / wv[4] + wv[i + 1] * gw[j][4] / (wv[4] * wv[4]);
            }
        }
        let div = du[0][0] + du[1][1] + du[2][2];
        for m in 0..3 {
            let mut f = [0.0; 5];
            for j in 0..3 {
                for r in 0..5 {
                    for k in 0..5 {
                        f[r] += c[m][j][r][k] * gw[j][k];
                    }
                }
            }
            let mut expect = [0.0; 5];
            for i in 0..3 {
                let tau = g.mu * (du[i][m] + du[m][i]) - if i == m { 2.0 / 3.0 * g.mu * div } else { 0.0 };
                expect[i + 1] = tau;
                expect[4] += tau * w[i + 1];
            }
            expect[4] += g.kappa() * dt[m];
            for r in 0..5 {
                prop_assert!((f[r] - expect[r]).abs() <= 1e-10 * expect[r].abs().max(g.mu));
            }
        }
    }

    #[test]
    fn curvilinear_blocks_symmetric_psd(w in admissible(),
                                        a in prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0))) {
        let g = gas();
        let q = prim_to_cons(&w, &g);
        let c = viscous_coefficient_matrices(&q, &g, &a, 0.7).unwrap();
        let scale = c.iter().flatten().flatten().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut big = nalgebra::DMatrix::zeros(15, 15);
        for l in 0..3 {
            for b in 0..3 {
                for r in 0..5 {
                    for k in 0..5 {
                        prop_assert!((c[l][b][r][k] - c[b][l][k][r]).abs() <= 1e-12 * scale.max(1e-300));
                        big[(5 * l + r, 5 * b + k)] = c[l][b][r][k];
                    }
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(big);
        prop_assert!(eig.eigenvalues.min() >= -1e-12 * scale);
    }
}

#[test]
fn vortex_center_state_flux_is_evaluable() {
    let g = gas();
    let q = prim_to_cons(&[0.7985, 1.0, 0.0, 1.0, 0.91393], &g);
    let p = pressure(&q, &g).unwrap();
    let f = euler_flux(&q, &g, 0).unwrap();
    let h = (q[4] + p) / q[0];
    assert!((f[4] - q[1] * h).abs() < 1e-14);
}

#[test]
fn gas_model_validation() {
    assert!(GasModel::new(1.0, 1.0, 0.72, 0.1).is_err());
    assert!(GasModel::new(1.4, -1.0, 0.72, 0.1).is_err());
    let g = GasModel::new(1.4, 2.0, 0.5, 0.1).unwrap();
    assert!((g.cp() - 7.0).abs() < 1e-14);
    assert!((g.kappa() - 1.4).abs() < 1e-14);
}
