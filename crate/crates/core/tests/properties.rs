use bendkit::bending::rigidity::numerical_nullity;
use bendkit::bending::{build_b_from, pointwise_constraint_kernel};
use bendkit::calculus::{diff, path_integrate, Order};
use bendkit::config::GateConfig;
use bendkit::hypersurface::HypersurfaceSample;
use bendkit::io::{to_json, FieldRecord};
use bendkit::pde::{solve_goursat, GoursatProblem};
use bendkit::registry::{build_example, Resolution};
use bendkit::report::{Report, Status};
use bendkit::{make_grid, Dir, OneForm2, ScalarField};
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use std::sync::OnceLock;

fn clifford() -> &'static HypersurfaceSample {
    static HYP: OnceLock<HypersurfaceSample> = OnceLock::new();
    HYP.get_or_init(|| build_example("clifford", Resolution { nu: 17, nv: 17, ns: 5 }).unwrap().hyp)
}

fn coeffs() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-2.0f64..2.0)
}

fn quadratic(c: [f64; 6]) -> impl Fn(f64, f64, f64) -> f64 {
    move |u, v, _| c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stencils_are_exact_on_quadratics(c in coeffs(), n in 5usize..20) {
        let g = make_grid((-0.7, 0.4), (0.1, 1.3), n, n + 3).unwrap();
        let f: ScalarField = ScalarField::sample(&g, quadratic(c));
        let fu = diff(&f, Dir::U, Order::First).unwrap();
        let fuv = diff(&f, Dir::V, Order::Mixed(Dir::U)).unwrap();
        let fvv = diff(&f, Dir::V, Order::Second).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            prop_assert!((fu.get(idx) - (c[1] + 2.0 * c[3] * u + c[4] * v)).abs() < 1e-9);
            prop_assert!((fuv.get(idx) - c[4]).abs() < 1e-8);
            prop_assert!((fvv.get(idx) - 2.0 * c[5]).abs() < 1e-8);
        }
    }

    #[test]
    fn gradients_integrate_back(c in coeffs(), bi in 0usize..9, bj in 0usize..9) {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 9, 9).unwrap();
        let f: ScalarField = ScalarField::sample(&g, quadratic(c));
        let omega = OneForm2::new(diff(&f, Dir::U, Order::First).unwrap(), diff(&f, Dir::V, Order::First).unwrap()).unwrap();
        let back: ScalarField = path_integrate(&omega, (bi, bj), None).unwrap();
        let offset = f.at(bi, bj, 0);
        for idx in 0..g.len() {
            prop_assert!((back.get(idx) + offset - f.get(idx)).abs() < 1e-9);
        }
    }

    #[test]
    fn goursat_is_linear_in_the_data(s in -3.0f64..3.0, m in 0.0f64..2.0) {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 17, 17).unwrap();
        let solve = |k: f64| {
            let prob = GoursatProblem::from_fns(ScalarField::constant(&g, m), |u| k * (1.0 + u.sin()), |v| k * (1.0 + v * v)).unwrap();
            solve_goursat(&prob).unwrap()
        };
        let (one, scaled) = (solve(1.0), solve(s));
        for (a, b) in one.values().iter().zip(scaled.values()) {
            prop_assert!((s * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn field_records_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 25)) {
        let g = make_grid((0.0, 1.0), (-1.0, 0.0), 5, 5).unwrap();
        let f = ScalarField::new(g, values).unwrap();
        let text = to_json(&FieldRecord::scalar(&f)).unwrap();
        let back: FieldRecord = serde_json::from_str(&text).unwrap();
        let back = back.to_scalar().unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn bending_tensor_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let hyp = clifford();
        let nb = hyp.grid.base().len();
        let d1: Vec<Matrix2<f64>> = (0..nb).map(|i| Matrix2::new(1.0, 0.0, 0.0, -1.0) * (1.0 + 0.01 * i as f64)).collect();
        let d2: Vec<Matrix2<f64>> = (0..nb).map(|i| Matrix2::new(0.5, 0.0, 0.0, -0.5) * (i % 7) as f64).collect();
        let mix: Vec<Matrix2<f64>> = d1.iter().zip(&d2).map(|(x, y)| x * a + y * b).collect();
        let (b1, _) = build_b_from(hyp, &d1).unwrap();
        let (b2, _) = build_b_from(hyp, &d2).unwrap();
        let (bm, _) = build_b_from(hyp, &mix).unwrap();
        for i in 0..bm.len() {
            let want = b1[i] * a + b2[i] * b;
            prop_assert!((bm[i] - want).norm() <= 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn pointwise_kernel_ignores_row_scaling(k in 0usize..5, s in 1e-3f64..1e3) {
        let hyp = clifford();
        let idx = (k * 37) % hyp.len();
        let a = bendkit::bending::rigidity::orthonormal_shape(hyp, idx).unwrap();
        let (p, q) = (pointwise_constraint_kernel(&a).unwrap(), pointwise_constraint_kernel(&(&a * s)).unwrap());
        prop_assert_eq!(p.dim(), q.dim());
        prop_assert_eq!(p.dim(), 2);
    }

    #[test]
    fn nullity_is_scale_invariant(mut sv in prop::collection::vec(1e-12f64..1.0, 2..12), s in 1e-6f64..1e6) {
        sv.sort_by(f64::total_cmp);
        let scaled: Vec<f64> = sv.iter().map(|x| x * s).collect();
        prop_assert_eq!(numerical_nullity(&sv).0, numerical_nullity(&scaled).0);
    }

    #[test]
    fn report_status_follows_the_gate(value in 0.0f64..2.0, gate in 0.0f64..2.0) {
        let mut r = Report::new("prop", "0", None);
        r.gated("x", value, gate).unwrap();
        let want = if value <= gate { Status::Pass } else { Status::Fail };
        prop_assert_eq!(r.residuals["x"].status, want);
        prop_assert_eq!(r.passed(), value <= gate);
    }

    #[test]
    fn gate_overrides_apply_to_every_parameter(t in 0.0f64..2.0, lib in 1e-9f64..1.0, scale in 0.1f64..10.0) {
        let mut g = GateConfig { scale, ..GateConfig::default() };
        let name = format!("iif@t={t}");
        prop_assert!((g.apply(&name, lib) - lib * scale).abs() <= 1e-15 * lib * scale);
        g.overrides.insert("iif".into(), 0.5);
        prop_assert_eq!(g.apply(&name, lib), 0.5);
        prop_assert!((g.apply("var", lib) - lib * scale).abs() <= 1e-15 * lib * scale);
    }
}

#[test]
fn orthonormal_shape_has_rank_two() {
    let hyp = clifford();
    let a: DMatrix<f64> = bendkit::bending::rigidity::orthonormal_shape(hyp, 0).unwrap();
    assert_eq!(a.nrows(), 3);
    let sv = a.singular_values();
    assert_eq!(sv.iter().filter(|&&x| x > 1e-8 * sv.max()).count(), 2);
}
