use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn count() -> FamilySpec {
    FamilySpec::for_kind(AttributeKind::NonNegativeDiscrete).unwrap()
}
fn real() -> FamilySpec {
    FamilySpec::for_kind(AttributeKind::RealContinuous).unwrap()
}
fn tweedie() -> FamilySpec {
    FamilySpec::for_kind(AttributeKind::PositiveContinuous).unwrap()
}
fn tweedie_nonneg() -> FamilySpec {
    FamilySpec::for_kind(AttributeKind::NonNegativeContinuous).unwrap()
}

#[test]
fn divergence_examples() {
    assert_eq!(count().divergence(0.0, 2.0, 0.0).unwrap(), 2.0);
    // 5 ln 2 − 3 ln 3, evaluated independently
    assert_relative_eq!(
        count().divergence(2.0, 1.0, 1.0).unwrap(),
        0.169_899_036_795_397_2,
        max_relative = 1e-12
    );
    assert_eq!(real().divergence(3.0, 1.0, 0.0).unwrap(), 2.0);
    assert_relative_eq!(
        real().divergence(0.0, 1.0, 1.0).unwrap(),
        0.346_573_590_279_972_6,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        tweedie().divergence(2.0, 1.0, 0.0).unwrap(),
        0.306_852_819_440_054_6,
        max_relative = 1e-12
    );
    assert_relative_eq!(tweedie().divergence(2.0, 1.0, -1.0).unwrap(), 0.25, max_relative = 1e-12);
}

#[test]
fn divergence_domain_errors() {
    assert!(matches!(count().divergence(-1.0, 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(count().divergence(1.0, 0.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(count().divergence(1.0, 1.0, -0.5), Err(Error::Domain(_))));
    assert!(matches!(tweedie().divergence(0.0, 1.0, -1.0), Err(Error::Domain(_))));
    assert!(matches!(tweedie().divergence(1.0, 1.0, 2.5), Err(Error::Domain(_))));
    assert!(matches!(real().divergence(f64::NAN, 1.0, 0.0), Err(Error::Domain(_))));
    // x = 0 is in C for the non-negative Tweedie domain
    assert_relative_eq!(tweedie_nonneg().divergence(0.0, 2.0, 1.0).unwrap(), 2.0);
}

#[test]
fn variance_examples() {
    assert_eq!(count().variance(3.0, 1.0).unwrap(), 12.0);
    assert_eq!(real().variance(5.0, 0.0).unwrap(), 1.0);
    assert_relative_eq!(tweedie().variance(2.0, -1.0).unwrap(), 8.0, max_relative = 1e-14);
    assert!(tweedie().variance(-1.0, 0.0).is_err());
    assert_relative_eq!(count().edm_variance(2.0, 0.5, 1.0).unwrap(), 3.0);
}

#[test]
fn dalpha_examples() {
    for fam in [count(), real(), tweedie()] {
        assert_eq!(fam.divergence_dalpha(1.7, 1.7, 0.3).unwrap(), 0.0);
    }
    for alpha in [0.0, 0.4, 3.0] {
        assert_eq!(real().variance_dalpha(2.0, alpha).unwrap(), 4.0);
    }
    let h = 1e-6;
    let fd = (count().divergence(2.0, 1.0, 1.0 + h).unwrap()
        - count().divergence(2.0, 1.0, 1.0 - h).unwrap())
        / (2.0 * h);
    assert_relative_eq!(count().divergence_dalpha(2.0, 1.0, 1.0).unwrap(), fd, max_relative = 1e-5);
}

#[test]
fn log_density_examples() {
    // exact inverse-Gaussian density at its mode-ish point
    assert_relative_eq!(
        tweedie().log_density(1.0, 1.0, 1.0, -1.0).unwrap(),
        -0.918_938_533_204_672_7,
        max_relative = 1e-12
    );
    for kappa in [0.1, 1.0, 7.0] {
        assert_relative_eq!(
            real().log_density(2.5, 2.5, kappa, 0.0).unwrap(),
            -0.5 * (2.0 * PI * kappa).ln(),
            max_relative = 1e-12
        );
    }
    let poisson = count().log_density(2.0, 2.0, 1.0, 0.0).unwrap();
    assert_relative_eq!(poisson, -1.342_587_463_398_274_6, max_relative = 1e-10);
    // saddle-point vs exact Poisson pmf: close, not equal
    assert!((poisson - (-1.306_852_819_440_054_6_f64)).abs() < 0.05);
}

#[test]
fn log_density_boundary_handling() {
    assert!(matches!(tweedie().log_density(0.0, 1.0, 1.0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(real().log_density(0.0, 1.0, 0.0, 0.0), Err(Error::Domain(_))));
    // zero in the non-negative Tweedie domain uses the discrete form
    let fam = tweedie_nonneg();
    let kappa: f64 = 0.5;
    let alpha: f64 = 0.5;
    let mu: f64 = 2.0;
    let v = (kappa / 3.0).powf(2.0 - alpha);
    let expected = 0.5 * (kappa / (2.0 * PI * v)).ln() - (kappa * mu).powf(alpha) / alpha / kappa;
    assert_relative_eq!(fam.log_density(0.0, mu, kappa, alpha).unwrap(), expected, max_relative = 1e-12);
}

#[test]
fn discrete_form_reduces_to_scaled_alpha() {
    // d(κx, κμ | α)/κ = d(x, μ | ακ) for the count class
    let fam = count();
    for &(x, mu, kappa, alpha) in &[(3.0, 2.0, 0.5, 1.0), (0.0, 4.0, 2.0, 0.3), (7.0, 1.5, 1.7, 2.0)] {
        let lhs = kernels::divergence(fam.class, kappa * x, kappa * mu, alpha) / kappa;
        let rhs = kernels::divergence(fam.class, x, mu, alpha * kappa);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }
}

#[test]
fn mean_value_examples() {
    assert_eq!(count().mean_value_map(0.0, 0.0).unwrap(), 1.0);
    for theta in [-2.0, 0.0, 3.5] {
        assert_eq!(real().mean_value_map(theta, 0.0).unwrap(), theta);
    }
    assert_relative_eq!(tweedie().mean_value_map(1.0, 1.0).unwrap(), std::f64::consts::E, max_relative = 1e-14);
    assert!(count().mean_value_map(1.0, 1.0).is_err()); // θ must be < −ln α = 0
    assert!(real().mean_value_map(2.0, 1.0).is_err()); // |θ| < π/2
}

#[test]
fn saddle_point_constant_follows_support() {
    assert_eq!(count().saddle_point_constant(), 1.0 / 3.0);
    let positive = FamilySpec::for_kind(AttributeKind::PositiveDiscrete).unwrap();
    assert_eq!(positive.saddle_point_constant(), 0.0);
    assert!(positive.discrete);
    assert!(!tweedie().discrete);
    assert!(FamilySpec::for_kind(AttributeKind::UnitInterval).is_err());
}

#[test]
fn table_domains() {
    assert_eq!((count().alpha_lo, count().alpha_hi), (0.0, MORRIS_ALPHA_MAX));
    assert_eq!((real().alpha_lo, real().alpha_hi), (0.0, MORRIS_ALPHA_MAX));
    assert_eq!((tweedie().alpha_lo, tweedie().alpha_hi), (TWEEDIE_ALPHA_MIN, 2.0));
    assert_eq!(tweedie_nonneg().alpha_hi, 1.0);
    assert!(tweedie_nonneg().alpha_lo > 0.0);
}

fn family_strategy() -> impl Strategy<Value = (FamilySpec, f64)> {
    prop_oneof![
        (0.0..50.0f64).prop_map(|a| (count(), a)),
        (0.0..50.0f64).prop_map(|a| (real(), a)),
        (-5.0..2.0f64).prop_map(|a| (tweedie(), a)),
    ]
}

fn point(fam: &FamilySpec, raw: f64) -> f64 {
    if fam.positive_mean() {
        0.05 + raw.abs()
    } else {
        raw
    }
}

proptest! {
    #[test]
    fn mean_value_roundtrip((fam, alpha) in family_strategy(), raw in -20.0..20.0f64) {
        let mu = point(&fam, raw);
        let theta = fam.natural_parameter(mu, alpha).unwrap();
        let back = fam.natural_parameter(fam.mean_value_map(theta, alpha).unwrap(), alpha).unwrap();
        prop_assert!((back - theta).abs() <= 1e-10 * theta.abs().max(1e-300), "{} vs {}", back, theta);
    }

    #[test]
    fn variance_is_derivative_of_inverse_mean_map((fam, alpha) in family_strategy(), raw in -10.0..10.0f64) {
        let mu = point(&fam, raw);
        let h = 1e-5 * mu.abs().max(1.0);
        let lo = if fam.positive_mean() { (mu - h).max(mu * 0.5) } else { mu - h };
        let hi = mu + h;
        let slope = (fam.natural_parameter(hi, alpha).unwrap() - fam.natural_parameter(lo, alpha).unwrap()) / (hi - lo);
        let v = fam.variance(mu, alpha).unwrap();
        prop_assert!((slope * v - 1.0).abs() < 1e-4, "slope {} v {}", slope, v);
    }
}

proptest! {
    #[test]
    fn tweedie_fdf_matches_kernels(x in 1e-3f64..1e3, y in 1e-3f64..1e3, alpha in -20.0f64..2.0) {
        prop_assume!(kernels::tweedie_fast_alpha(alpha));
        let (d, g) = kernels::tweedie_fdf(x / y, (x / y).ln(), y.powf(alpha), y.ln(), alpha);
        let d_ref = kernels::divergence(FamilyClass::Tweedie, x, y, alpha);
        let g_ref = kernels::divergence_dalpha(FamilyClass::Tweedie, x, y, alpha);
        prop_assert!((d - d_ref).abs() <= 1e-9 * (1.0 + d_ref.abs()));
        prop_assert!((g - g_ref).abs() <= 1e-9 * (1.0 + g_ref.abs()));
    }
}

proptest! {
    #[test]
    fn morris_split_matches_kernels(x in 0.0f64..50.0, y in 1e-3f64..50.0, alpha in 0.0f64..10.0, real in any::<bool>()) {
        let class = if real { FamilyClass::MorrisReal } else { FamilyClass::MorrisCount };
        let x = if real { x - 25.0 } else { x.floor() };
        let y = if real { y - 25.0 } else { y };
        let (a, b, da, db) = kernels::morris_mean_terms(class, y, alpha);
        let (c, dc) = kernels::morris_value_terms(class, x, alpha);
        let d_ref = kernels::divergence(class, x, y, alpha);
        let g_ref = kernels::divergence_dalpha(class, x, y, alpha);
        let scale = 1.0 + a.abs() + (x * b).abs() + c.abs();
        prop_assert!((a + x * b + c - d_ref).abs() <= 1e-12 * scale, "{} vs {}", a + x * b + c, d_ref);
        let gscale = 1.0 + da.abs() + (x * db).abs() + dc.abs();
        prop_assert!((da + x * db + dc - g_ref).abs() <= 1e-12 * gscale);
    }
}
