use dynclt::cylinder::{
    combine, conditional, conditional_future, conditional_past, expectation, inner_product, koopman, koopman_inverse,
    koopman_pow, l2_norm, lift, project_sk, transfer, CombineOp,
};
use dynclt::{build_shift, CylinderFunction, Sidedness, TransitionModel};
use proptest::prelude::*;

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4).prop_flat_map(|m| {
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, m), m).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / s).collect()
                })
                .collect()
        })
    })
}

fn model_and_functions(
    offsets: std::ops::RangeInclusive<i64>,
) -> impl Strategy<Value = (Vec<Vec<f64>>, CylinderFunction, CylinderFunction)> {
    rows_strategy().prop_flat_map(move |rows| {
        let m = rows.len();
        let table = move |offsets: std::ops::RangeInclusive<i64>| {
            (offsets, 1usize..=3).prop_flat_map(move |(a, len)| {
                prop::collection::vec(-2.0f64..2.0, m.pow(len as u32))
                    .prop_map(move |v| CylinderFunction::new(m, a, len, v).unwrap())
            })
        };
        (Just(rows), table(offsets.clone()), table(offsets.clone()))
    })
}

fn distance(model: &TransitionModel, f: &CylinderFunction, h: &CylinderFunction) -> f64 {
    l2_norm(model, &combine(model, f, h, CombineOp::Sub, 1.0, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_inverts_koopman((rows, f, _h) in model_and_functions(0..=2)) {
        let model = build_shift(&rows, Sidedness::OneSided).unwrap();
        let back = transfer(&model, &koopman(&f)).unwrap();
        prop_assert!(distance(&model, &back, &f) <= 1e-12);
    }

    #[test]
    fn transfer_is_the_adjoint((rows, f, h) in model_and_functions(0..=2)) {
        let model = build_shift(&rows, Sidedness::OneSided).unwrap();
        let lhs = inner_product(&model, &koopman(&f), &h).unwrap();
        let rhs = inner_product(&model, &f, &transfer(&model, &h).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn inverse_koopman_is_the_adjoint_on_two_sided((rows, f, h) in model_and_functions(-2..=2)) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let lhs = inner_product(&model, &koopman(&f), &h).unwrap();
        let rhs = inner_product(&model, &f, &koopman_inverse(&model, &h).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn koopman_preserves_expectation((rows, f, _h) in model_and_functions(-2..=2)) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        prop_assert!((expectation(&model, &koopman(&f)) - expectation(&model, &f)).abs() <= 1e-14);
    }

    #[test]
    fn tower_property((rows, f, _h) in model_and_functions(-2..=2), j in -3i64..3, k in -3i64..3) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let (lo, hi) = (j.min(k), j.max(k));
        // Increasing filtration: F_lo is inside F_hi.
        let nested = conditional_past(&model, &conditional_past(&model, &f, hi).unwrap(), lo).unwrap();
        prop_assert!(distance(&model, &nested, &conditional_past(&model, &f, lo).unwrap()) <= 1e-12);
        // Decreasing filtration: G_hi is inside G_lo.
        let nested = conditional_future(&model, &conditional_future(&model, &f, lo).unwrap(), hi).unwrap();
        prop_assert!(distance(&model, &nested, &conditional_future(&model, &f, hi).unwrap()) <= 1e-12);
        prop_assert!((expectation(&model, &conditional_past(&model, &f, lo).unwrap()) - expectation(&model, &f)).abs() <= 1e-12);
    }

    #[test]
    fn conditioning_commutes_with_the_shift((rows, f, _h) in model_and_functions(-2..=2), n in 1i64..=3) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let lhs = conditional_past(&model, &koopman_pow(&f, n), n).unwrap();
        let rhs = koopman_pow(&conditional_past(&model, &f, 0).unwrap(), n);
        prop_assert!(distance(&model, &lhs, &rhs) <= 1e-12);
        let lhs = conditional_future(&model, &koopman_pow(&f, n), n).unwrap();
        let rhs = koopman_pow(&conditional_future(&model, &f, 0).unwrap(), n);
        prop_assert!(distance(&model, &lhs, &rhs) <= 1e-12);
        let one = model.with_sidedness(Sidedness::OneSided);
        let g = f.shifted(-f.offset());
        let lhs = conditional(&one, &koopman_pow(&g, n), n).unwrap();
        let rhs = koopman_pow(&conditional(&one, &g, 0).unwrap(), n);
        prop_assert!(distance(&one, &lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn structural_condition_holds((rows, f, _h) in model_and_functions(0..=2)) {
        let model = build_shift(&rows, Sidedness::OneSided).unwrap();
        let lhs = conditional(&model, &koopman(&transfer(&model, &f).unwrap()), 1).unwrap();
        let rhs = conditional(&model, &f, 1).unwrap();
        prop_assert!(distance(&model, &lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn block_projection_is_orthogonal_to_the_past((rows, f, h) in model_and_functions(-2..=2), k in -2i64..=2) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let p = project_sk(&model, &h, k).unwrap();
        let past = conditional_past(&model, &f, k).unwrap();
        prop_assert!(inner_product(&model, &p, &past).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn lifting_and_canonical_forms_preserve_values((rows, f, _h) in model_and_functions(-2..=2)) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let wide = lift(&model, &f, f.offset() - 1, f.end() + 1).unwrap();
        prop_assert!(distance(&model, &wide, &f) == 0.0);
        prop_assert!(distance(&model, &wide.canonical(), &f) <= 1e-12);
    }

    #[test]
    fn combine_is_bilinear((rows, f, h) in model_and_functions(-2..=2), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let model = build_shift(&rows, Sidedness::TwoSided).unwrap();
        let s = combine(&model, &f, &h, CombineOp::Add, a, b).unwrap();
        let lhs = expectation(&model, &s);
        let rhs = a * expectation(&model, &f) + b * expectation(&model, &h);
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}
