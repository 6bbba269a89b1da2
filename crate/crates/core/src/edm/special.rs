//! Relative-error special functions used by the divergence kernels.
//!
//! Each helper removes a removable singularity at zero so the divergences and
//! their α-derivatives stay smooth through the named branch points.

const EXPREL_PRIME: [f64; 18] = {
    let mut c = [0.0; 18];
    let mut fact = 2.0;
    let mut k = 1;
    while k <= 18 {
        c[k - 1] = k as f64 / fact;
        fact *= (k + 2) as f64;
        k += 1;
    }
    c
};

const LOG1P_REL_PRIME: [f64; 20] = {
    let mut c = [0.0; 20];
    let mut k = 1;
    while k <= 20 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[k - 1] = sign * k as f64 / (k + 1) as f64;
        k += 1;
    }
    c
};

const ATAN_SQRT_REL_PRIME: [f64; 24] = {
    let mut c = [0.0; 24];
    let mut k = 1;
    while k <= 24 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[k - 1] = sign * k as f64 / (2 * k + 1) as f64;
        k += 1;
    }
    c
};

/// Σ c[i] z^i.
#[inline]
fn horner(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * z + ci)
}

/// `expm1(z) / z`, equal to 1 at z = 0.
#[inline]
pub fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        z.exp_m1() / z
    }
}

/// Derivative of [`exprel`]: `(e^z (z - 1) + 1) / z^2`.
#[inline]
pub fn exprel_prime(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // sum_{k>=1} k z^{k-1} / (k+1)!
        horner(&EXPREL_PRIME, z)
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// `ln(1 + z) / z`, equal to 1 at z = 0. Requires z > -1.
#[inline]
pub fn log1p_rel(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 + z * (-0.5 + z * (1.0 / 3.0 + z * (-0.25 + z / 5.0)))
    } else {
        z.ln_1p() / z
    }
}

/// Derivative of [`log1p_rel`]: `(z / (1 + z) - ln(1 + z)) / z^2`.
#[inline]
pub fn log1p_rel_prime(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // sum_{k>=1} (-1)^k k z^{k-1} / (k+1)
        horner(&LOG1P_REL_PRIME, z)
    } else {
        (z / (1.0 + z) - z.ln_1p()) / (z * z)
    }
}

/// `atan(sqrt(w)) / sqrt(w)` for w >= 0, equal to 1 at w = 0.
#[inline]
pub fn atan_sqrt_rel(w: f64) -> f64 {
    if w < 1e-3 {
        1.0 + w * (-1.0 / 3.0 + w * (0.2 + w * (-1.0 / 7.0 + w / 9.0)))
    } else {
        let s = w.sqrt();
        s.atan() / s
    }
}

/// Derivative of [`atan_sqrt_rel`] with respect to w.
#[inline]
pub fn atan_sqrt_rel_prime(w: f64) -> f64 {
    if w < 0.1 {
        // sum_{k>=1} (-1)^k k w^{k-1} / (2k+1)
        horner(&ATAN_SQRT_REL_PRIME, w)
    } else {
        (1.0 / (1.0 + w) - atan_sqrt_rel(w)) / (2.0 * w)
    }
}

/// `tan(z) / z`, equal to 1 at z = 0.
#[inline]
pub fn tan_rel(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z * z / 3.0
    } else {
        z.tan() / z
    }
}
