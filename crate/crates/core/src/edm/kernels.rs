//! Unchecked divergence, variance and mean-value kernels.
//!
//! Callers validate domains first; these functions assume x ∈ C, y ∈ int(C)
//! and α inside the family's hyper-parameter domain.

use super::special::{
    atan_sqrt_rel, atan_sqrt_rel_prime, exprel, exprel_prime, log1p_rel, log1p_rel_prime, tan_rel,
};
use super::FamilyClass;

/// Distance below which α snaps to a closed-form limiting branch.
pub const BRANCH_TOL: f64 = 1e-12;

#[inline]
fn near(alpha: f64, point: f64) -> bool {
    (alpha - point).abs() < BRANCH_TOL
}

#[inline]
pub fn divergence(class: FamilyClass, x: f64, y: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => morris_count(x, y, alpha),
        FamilyClass::MorrisReal => morris_real(x, y, alpha),
        FamilyClass::Tweedie => tweedie(x, y, alpha),
    }
}

#[inline]
pub fn divergence_dalpha(class: FamilyClass, x: f64, y: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => morris_count_dalpha(x, y, alpha),
        FamilyClass::MorrisReal => morris_real_dalpha(x, y, alpha),
        FamilyClass::Tweedie => tweedie_dalpha(x, y, alpha),
    }
}

#[inline]
pub fn variance(class: FamilyClass, x: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => x * (1.0 + alpha * x),
        FamilyClass::MorrisReal => 1.0 + alpha * x * x,
        FamilyClass::Tweedie => {
            if near(alpha, 2.0) {
                1.0
            } else {
                x.powf(2.0 - alpha)
            }
        }
    }
}

#[inline]
pub fn variance_dalpha(class: FamilyClass, x: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount | FamilyClass::MorrisReal => x * x,
        FamilyClass::Tweedie => -x.ln() * x.powf(2.0 - alpha),
    }
}

/// ln υ(x | α), evaluated without forming υ so tiny or huge x stay finite.
#[inline]
pub fn log_variance(class: FamilyClass, x: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => x.ln() + (alpha * x).ln_1p(),
        FamilyClass::MorrisReal => (alpha * x * x).ln_1p(),
        FamilyClass::Tweedie => {
            if near(alpha, 2.0) {
                0.0
            } else {
                (2.0 - alpha) * x.ln()
            }
        }
    }
}

#[inline]
pub fn log_variance_dalpha(class: FamilyClass, x: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => x / (1.0 + alpha * x),
        FamilyClass::MorrisReal => {
            let x2 = x * x;
            x2 / (1.0 + alpha * x2)
        }
        FamilyClass::Tweedie => -x.ln(),
    }
}

// (1/α + x) ln((αy+1)/(αx+1)) + x ln(x/y), written through ln(1+z)/z so the
// α → 0 limit is smooth.
fn morris_count(x: f64, y: f64, alpha: f64) -> f64 {
    if near(alpha, 0.0) {
        return if x == 0.0 { y } else { y - x + x * (x / y).ln() };
    }
    let ay = alpha * y;
    if x == 0.0 {
        return y * log1p_rel(ay);
    }
    let ax = alpha * x;
    y * log1p_rel(ay) - x * log1p_rel(ax) + x * (ay.ln_1p() - ax.ln_1p()) + x * (x / y).ln()
}

fn morris_count_dalpha(x: f64, y: f64, alpha: f64) -> f64 {
    let ay = alpha * y;
    if x == 0.0 {
        return y * y * log1p_rel_prime(ay);
    }
    let ax = alpha * x;
    y * y * log1p_rel_prime(ay) - x * x * log1p_rel_prime(ax)
        + x * (y / (1.0 + ay) - x / (1.0 + ax))
}

// (1/2α)(2√α x (atan(√α x) − atan(√α y)) + ln((1+αy²)/(1+αx²)))
fn morris_real(x: f64, y: f64, alpha: f64) -> f64 {
    if near(alpha, 0.0) {
        let diff = x - y;
        return 0.5 * diff * diff;
    }
    let wx = alpha * x * x;
    let wy = alpha * y * y;
    x * (x * atan_sqrt_rel(wx) - y * atan_sqrt_rel(wy))
        + 0.5 * (y * y * log1p_rel(wy) - x * x * log1p_rel(wx))
}

fn morris_real_dalpha(x: f64, y: f64, alpha: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    let wx = alpha * x2;
    let wy = alpha * y2;
    x * (x * x2 * atan_sqrt_rel_prime(wx) - y * y2 * atan_sqrt_rel_prime(wy))
        + 0.5 * (y2 * y2 * log1p_rel_prime(wy) - x2 * x2 * log1p_rel_prime(wx))
}

// d(x, y | α) = y^α D(x/y | α) with
// D(t | α) = (t^α − 1 − α(t − 1)) / (α(α − 1)).
// Near α = 0 we expand around t^α = e^{α ln t}; near α = 1 around t·t^{α−1}.
fn tweedie(x: f64, y: f64, alpha: f64) -> f64 {
    if near(alpha, 0.0) {
        let t = x / y;
        return t - t.ln() - 1.0;
    }
    if near(alpha, 1.0) {
        return if x == 0.0 { y } else { x * (x / y).ln() + y - x };
    }
    if near(alpha, 2.0) {
        let diff = x - y;
        return 0.5 * diff * diff;
    }
    if x == 0.0 {
        return y.powf(alpha) / alpha;
    }
    y.powf(alpha) * tweedie_unit(x / y, alpha)
}

#[inline]
fn tweedie_unit(t: f64, alpha: f64) -> f64 {
    let u = t.ln();
    if alpha.abs() <= (alpha - 1.0).abs() {
        (u * exprel(alpha * u) - (t - 1.0)) / (alpha - 1.0)
    } else {
        (t * u * exprel((alpha - 1.0) * u) - (t - 1.0)) / alpha
    }
}

fn tweedie_dalpha(x: f64, y: f64, alpha: f64) -> f64 {
    let ln_y = y.ln();
    let y_a = (alpha * ln_y).exp();
    if x == 0.0 {
        return y_a * (ln_y / alpha - 1.0 / (alpha * alpha));
    }
    let t = x / y;
    let u = t.ln();
    let (d, d_prime) = if alpha.abs() <= (alpha - 1.0).abs() {
        let denom = alpha - 1.0;
        let d = (u * exprel(alpha * u) - (t - 1.0)) / denom;
        (d, (u * u * exprel_prime(alpha * u) - d) / denom)
    } else {
        let beta = alpha - 1.0;
        let d = (t * u * exprel(beta * u) - (t - 1.0)) / alpha;
        (d, (t * u * u * exprel_prime(beta * u) - d) / alpha)
    };
    y_a * (ln_y * d + d_prime)
}

/// Mean-value mapping τ(θ | α).
pub fn mean_value(class: FamilyClass, theta: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => {
            let e = theta.exp();
            e / (1.0 - alpha * e)
        }
        FamilyClass::MorrisReal => {
            if near(alpha, 0.0) {
                theta
            } else {
                theta * tan_rel(alpha.sqrt() * theta)
            }
        }
        FamilyClass::Tweedie => {
            if near(alpha, 2.0) {
                theta + 1.0
            } else {
                (theta * log1p_rel((alpha - 1.0) * theta)).exp()
            }
        }
    }
}

/// Inverse mean-value mapping τ⁻¹(μ | α).
pub fn natural_parameter(class: FamilyClass, mu: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => (mu / (1.0 + alpha * mu)).ln(),
        FamilyClass::MorrisReal => mu * atan_sqrt_rel(alpha * mu * mu),
        FamilyClass::Tweedie => {
            if near(alpha, 2.0) {
                mu - 1.0
            } else {
                let l = mu.ln();
                l * exprel((alpha - 1.0) * l)
            }
        }
    }
}

/// Tweedie divergence and its α-derivative from precomputed pieces:
/// `t = x/y`, `u = ln t`, `y_a = y^α`, `ln_y = ln y`. Valid away from the
/// α ∈ {0, 1, 2} snap points and for x > 0.
#[inline]
pub fn tweedie_fdf(t: f64, u: f64, y_a: f64, ln_y: f64, alpha: f64) -> (f64, f64) {
    let (z, scale, lead, denom) = if alpha.abs() <= (alpha - 1.0).abs() {
        (alpha * u, 1.0, u, alpha - 1.0)
    } else {
        ((alpha - 1.0) * u, t, t * u, alpha)
    };
    let em1 = z.exp_m1();
    let rel = if z.abs() < 1e-3 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        em1 / z
    };
    let rel_prime = if z.abs() < 0.5 {
        exprel_prime(z)
    } else {
        ((em1 + 1.0) * (z - 1.0) + 1.0) / (z * z)
    };
    let d = (lead * rel - (t - 1.0)) / denom;
    let d_prime = (scale * u * u * rel_prime - d) / denom;
    (y_a * d, y_a * (ln_y * d + d_prime))
}

/// True when [`tweedie_fdf`] applies at this α.
#[inline]
pub fn tweedie_fast_alpha(alpha: f64) -> bool {
    !(near(alpha, 0.0) || near(alpha, 1.0) || near(alpha, 2.0))
}

/// Morris divergences split as d(x, y) = A(y) + x·B(y) + C(x). Returns
/// (A, B, ∂A/∂α, ∂B/∂α) for the mean-side terms.
#[inline]
pub fn morris_mean_terms(class: FamilyClass, y: f64, alpha: f64) -> (f64, f64, f64, f64) {
    match class {
        FamilyClass::MorrisCount => {
            let ay = alpha * y;
            (
                y * log1p_rel(ay),
                ay.ln_1p() - y.ln(),
                y * y * log1p_rel_prime(ay),
                y / (1.0 + ay),
            )
        }
        FamilyClass::MorrisReal => {
            let y2 = y * y;
            let wy = alpha * y2;
            (
                0.5 * y2 * log1p_rel(wy),
                -y * atan_sqrt_rel(wy),
                0.5 * y2 * y2 * log1p_rel_prime(wy),
                -y * y2 * atan_sqrt_rel_prime(wy),
            )
        }
        FamilyClass::Tweedie => unreachable!("Tweedie divergences are not split"),
    }
}

/// Observation-side term C(x) of the Morris split and ∂C/∂α.
#[inline]
pub fn morris_value_terms(class: FamilyClass, x: f64, alpha: f64) -> (f64, f64) {
    match class {
        FamilyClass::MorrisCount => {
            if x == 0.0 {
                return (0.0, 0.0);
            }
            let ax = alpha * x;
            let x2 = x * x;
            (
                -x * log1p_rel(ax) - x * ax.ln_1p() + x * x.ln(),
                -x2 * log1p_rel_prime(ax) - x2 / (1.0 + ax),
            )
        }
        FamilyClass::MorrisReal => {
            let x2 = x * x;
            let wx = alpha * x2;
            (
                x2 * atan_sqrt_rel(wx) - 0.5 * x2 * log1p_rel(wx),
                x2 * x2 * (atan_sqrt_rel_prime(wx) - 0.5 * log1p_rel_prime(wx)),
            )
        }
        FamilyClass::Tweedie => unreachable!("Tweedie divergences are not split"),
    }
}
