use adaclust_core::numopt::{minimize_box, minimize_scalar_bounded, Box, BoxOptions};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // Sums of shifted cosines are smooth and usually multimodal on the box.
    #[test]
    fn scalar_result_is_feasible_and_never_worse(
        c in prop::collection::vec(-3.0f64..3.0, 3),
        lo in -5.0f64..0.0,
        width in 0.1f64..10.0,
        t in 0.0f64..1.0,
    ) {
        let hi = lo + width;
        let x0 = lo + t * width;
        let f = |x: f64| c[0] * (x).cos() + c[1] * (2.0 * x + 1.0).cos() + 0.1 * c[2] * x * x;
        let df = |x: f64| -c[0] * x.sin() - 2.0 * c[1] * (2.0 * x + 1.0).sin() + 0.2 * c[2] * x;
        let m = minimize_scalar_bounded(f, df, lo, hi, x0).unwrap();
        prop_assert!(m.x >= lo && m.x <= hi);
        prop_assert!(m.f <= f(x0));
        prop_assert_eq!(m.f, f(m.x));
    }

    #[test]
    fn box_result_is_feasible_and_never_worse(
        centre in prop::collection::vec(-4.0f64..4.0, 4),
        scale in prop::collection::vec(0.1f64..10.0, 4),
        x0 in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let bounds = Box::new(vec![-2.0; 4], vec![2.0; 4]).unwrap();
        let f = |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..4 {
                let d = x[i] - centre[i];
                s += scale[i] * d * d + 0.3 * (x[i] * x[(i + 1) % 4]).sin();
            }
            s
        };
        let m = minimize_box(f, None, &bounds, &x0, BoxOptions::default()).unwrap();
        prop_assert!(bounds.contains(&m.x));
        prop_assert!(m.f <= f(&x0));
    }
}
