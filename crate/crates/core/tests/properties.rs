use bohmfield_core::{
    build_k_operator, eval_term, inner, spectral_sqrt, summation_by_parts_residual, Complex64, FieldConfig, LabelFunction,
    Leaf, ModeBasis,
};
use proptest::prelude::*;

fn leaf_strategy() -> impl Strategy<Value = Leaf> {
    (2usize..12, 0.1f64..1.0, prop::collection::vec(-0.45f64..0.45, 24)).prop_map(|(half, dx, tilt)| {
        let n = 2 * half;
        let mut times = vec![0.0; n];
        for i in 1..n {
            times[i] = times[i - 1] + tilt[i] * dx;
        }
        // close the loop with a space-like last edge
        let drift = times[n - 1] / n as f64;
        for (i, t) in times.iter_mut().enumerate() {
            *t -= drift * i as f64;
        }
        Leaf::from_time_profile(dx, &times).expect("space-like by construction")
    })
}

fn field_on(leaf: &Leaf, values: &[f64]) -> Vec<f64> {
    values.iter().cycle().take(leaf.len()).copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts_holds(leaf in leaf_strategy(), values in prop::collection::vec(-2.0f64..2.0, 24)) {
        let phi = field_on(&leaf, &values);
        let scale = 1.0 + leaf.gradient_energy(&phi).unwrap();
        prop_assert!(summation_by_parts_residual(&phi, &leaf).unwrap() < 1e-13 * scale);
    }

    #[test]
    fn k_is_self_adjoint_in_measure(leaf in leaf_strategy(), mass in 0.1f64..3.0,
                                   f in prop::collection::vec(-1.0f64..1.0, 24),
                                   g in prop::collection::vec(-1.0f64..1.0, 24)) {
        let k = build_k_operator(&leaf, mass).unwrap();
        let (f, g) = (field_on(&leaf, &f), field_on(&leaf, &g));
        let a = inner(&f, &k.apply(&g).unwrap(), &leaf).unwrap();
        let b = inner(&k.apply(&f).unwrap(), &g, &leaf).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn basis_is_orthonormal_and_roots_square(leaf in leaf_strategy(), mass in 0.1f64..3.0) {
        let k = build_k_operator(&leaf, mass).unwrap();
        let (root, basis) = spectral_sqrt(&k).unwrap();
        prop_assert!(basis.orthonormality_residual() < 1e-12);
        let square = root.matrix() * root.matrix();
        prop_assert!((square - k.matrix()).norm() < 1e-10 * k.matrix().norm());
        prop_assert!(basis.frequencies().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(basis.frequencies()[0] >= mass - 1e-12);
    }

    #[test]
    fn field_round_trip(leaf in leaf_strategy(), values in prop::collection::vec(-3.0f64..3.0, 24)) {
        let basis = ModeBasis::for_leaf(&leaf, 1.0).unwrap();
        let field = FieldConfig::from_sites(&basis, field_on(&leaf, &values)).unwrap();
        prop_assert!(field.round_trip_residual(&basis).unwrap() < 1e-10);
    }

    #[test]
    fn two_label_term_matches_site_space_form(leaf in leaf_strategy(),
                                             chi in prop::collection::vec(-1.0f64..1.0, 24),
                                             h1 in prop::collection::vec(-1.0f64..1.0, 24),
                                             h2 in prop::collection::vec(-1.0f64..1.0, 24)) {
        // Psi_2 / Psi_0 = 2 <chi, R h1> <chi, R h2> - <h1, R h2>, R = K^{1/2}
        let k = build_k_operator(&leaf, 1.0).unwrap();
        let (root, basis) = spectral_sqrt(&k).unwrap();
        let (chi, h1, h2) = (field_on(&leaf, &chi), field_on(&leaf, &h1), field_on(&leaf, &h2));
        let (rh1, rh2) = (root.apply(&h1).unwrap(), root.apply(&h2).unwrap());
        let want = 2.0 * inner(&chi, &rh1, &leaf).unwrap() * inner(&chi, &rh2, &leaf).unwrap()
            - inner(&h1, &rh2, &leaf).unwrap();
        let complex = |v: &[f64]| v.iter().map(|x| Complex64::new(*x, 0.0)).collect::<Vec<_>>();
        let labels = [
            LabelFunction::from_sites(&basis, &complex(&h1)).unwrap(),
            LabelFunction::from_sites(&basis, &complex(&h2)).unwrap(),
        ];
        let got = eval_term(&labels, &basis, &FieldConfig::from_sites(&basis, chi).unwrap()).unwrap();
        prop_assert!((got - want).norm() < 1e-10 * (1.0 + want.abs()));
    }
}

#[test]
fn dispersion_error_quarters_with_spacing() {
    let length = 32.0;
    let k = 2.0 * std::f64::consts::PI * 3.0 / length;
    let exact = 1.0 + k * k;
    let errors: Vec<f64> = [0.5, 0.25, 0.125]
        .iter()
        .map(|dx| {
            let sites = (length / dx) as usize;
            let basis = ModeBasis::for_leaf(&Leaf::flat(sites, *dx).unwrap(), 1.0).unwrap();
            let w = basis.frequencies()[5];
            (exact - w * w).abs()
        })
        .collect();
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}
