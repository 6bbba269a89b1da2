//! Parametrized families of steep exponential dispersion models.
//!
//! Three classes are supported, each indexed by a scalar hyper-parameter α
//! that selects the topology of an attribute:
//!
//! | class          | variance υ(x\|α) | members                                  |
//! |----------------|------------------|------------------------------------------|
//! | `MorrisCount`  | x(1 + αx)        | Poisson (α = 0), negative binomial (α = 1) |
//! | `MorrisReal`   | 1 + αx²          | Gaussian (α = 0), hyperbolic secant (α = 1) |
//! | `Tweedie`      | x^(2−α)          | inverse-Gaussian (−1), gamma (0), Poisson (1), Gaussian (2) |
//!
//! Densities are evaluated through the saddle-point approximation and are
//! always returned in the log domain.

pub(crate) mod kernels;
pub mod special;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kernels::BRANCH_TOL;

/// Observed support of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    NonNegativeDiscrete,
    PositiveDiscrete,
    RealContinuous,
    NonNegativeContinuous,
    PositiveContinuous,
    /// Values strictly inside (0, 1). Mapped to `RealContinuous` through the
    /// logit transform before any family is attached.
    UnitInterval,
}

impl AttributeKind {
    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            AttributeKind::NonNegativeDiscrete | AttributeKind::PositiveDiscrete
        )
    }

    /// Whether every value admissible for `self` is admissible for `other`.
    pub fn is_subset_of(self, other: AttributeKind) -> bool {
        use AttributeKind::*;
        if self == other {
            return true;
        }
        match other {
            RealContinuous => true,
            NonNegativeContinuous => matches!(
                self,
                NonNegativeDiscrete | PositiveDiscrete | PositiveContinuous | UnitInterval
            ),
            PositiveContinuous => matches!(self, PositiveDiscrete | UnitInterval),
            NonNegativeDiscrete => self == PositiveDiscrete,
            PositiveDiscrete | UnitInterval => false,
        }
    }

    /// The kind actually modelled once transforms are applied.
    pub fn modelled(self) -> AttributeKind {
        match self {
            AttributeKind::UnitInterval => AttributeKind::RealContinuous,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyClass {
    MorrisCount,
    MorrisReal,
    Tweedie,
}

/// One parametrized class together with its working α-domain and support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub class: FamilyClass,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub support: AttributeKind,
    pub discrete: bool,
}

/// Working upper bound for the unbounded Morris α-domains.
pub const MORRIS_ALPHA_MAX: f64 = 1e3;
/// Working lower bound for the Tweedie positive-support α-domain.
pub const TWEEDIE_ALPHA_MIN: f64 = -20.0;
/// Working lower bound for the half-open Tweedie non-negative α-domain (0, 1].
pub const TWEEDIE_NONNEG_ALPHA_MIN: f64 = 1e-6;

impl FamilySpec {
    /// Family assignment by data type.
    pub fn for_kind(kind: AttributeKind) -> Result<FamilySpec> {
        use AttributeKind::*;
        let (class, lo, hi) = match kind {
            NonNegativeDiscrete | PositiveDiscrete => {
                (FamilyClass::MorrisCount, 0.0, MORRIS_ALPHA_MAX)
            }
            RealContinuous => (FamilyClass::MorrisReal, 0.0, MORRIS_ALPHA_MAX),
            NonNegativeContinuous => (FamilyClass::Tweedie, TWEEDIE_NONNEG_ALPHA_MIN, 1.0),
            PositiveContinuous => (FamilyClass::Tweedie, TWEEDIE_ALPHA_MIN, 2.0),
            UnitInterval => {
                return Err(Error::domain(
                    "unit-interval attributes must be logit-transformed before modelling",
                ))
            }
        };
        Ok(FamilySpec {
            class,
            alpha_lo: lo,
            alpha_hi: hi,
            support: kind,
            discrete: kind.is_discrete(),
        })
    }

    /// Gaussian family with α pinned to 0, used by the GMM baseline.
    pub fn gaussian() -> FamilySpec {
        FamilySpec {
            class: FamilyClass::MorrisReal,
            alpha_lo: 0.0,
            alpha_hi: 0.0,
            support: AttributeKind::RealContinuous,
            discrete: false,
        }
    }

    /// The constant c in the discrete saddle-point form.
    pub fn saddle_point_constant(&self) -> f64 {
        match self.support {
            AttributeKind::NonNegativeDiscrete | AttributeKind::NonNegativeContinuous => 1.0 / 3.0,
            _ => 0.0,
        }
    }

    pub fn is_alpha_fixed(&self) -> bool {
        self.alpha_hi <= self.alpha_lo
    }

    pub fn contains_alpha(&self, alpha: f64) -> bool {
        alpha.is_finite() && alpha >= self.alpha_lo - BRANCH_TOL && alpha <= self.alpha_hi + BRANCH_TOL
    }

    /// Named member used to start α searches: Poisson, Gaussian, gamma, or
    /// Poisson for the non-negative Tweedie domain.
    pub fn initial_alpha(&self) -> f64 {
        let named: f64 = match (self.class, self.support) {
            (FamilyClass::Tweedie, AttributeKind::NonNegativeContinuous) => 1.0,
            _ => 0.0,
        };
        named.clamp(self.alpha_lo, self.alpha_hi)
    }

    /// Whether the mean parameter must be strictly positive.
    pub fn positive_mean(&self) -> bool {
        !matches!(self.class, FamilyClass::MorrisReal)
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if self.contains_alpha(alpha) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "alpha {alpha} outside [{}, {}] for {:?}",
                self.alpha_lo, self.alpha_hi, self.class
            )))
        }
    }

    /// Whether x lies in the convex support C for the given α.
    pub fn in_support(&self, x: f64, alpha: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.class {
            FamilyClass::MorrisReal => true,
            FamilyClass::MorrisCount => x >= 0.0,
            FamilyClass::Tweedie => {
                if x > 0.0 {
                    true
                } else {
                    x == 0.0 && alpha > 0.0 && alpha <= 1.0 + BRANCH_TOL
                }
            }
        }
    }

    /// Whether μ lies in the interior of C (the mean domain Ω).
    pub fn in_mean_domain(&self, mu: f64) -> bool {
        mu.is_finite() && (!self.positive_mean() || mu > 0.0)
    }

    fn check_pair(&self, x: f64, y: f64, alpha: f64) -> Result<()> {
        self.check_alpha(alpha)?;
        if !self.in_support(x, alpha) {
            return Err(Error::domain(format!(
                "x = {x} outside the convex support of {:?} at alpha {alpha}",
                self.class
            )));
        }
        if !self.in_mean_domain(y) {
            return Err(Error::domain(format!(
                "mean {y} outside the interior of the support of {:?}",
                self.class
            )));
        }
        Ok(())
    }

    /// Unit Bregman divergence d_φ(x, y | α).
    pub fn divergence(&self, x: f64, y: f64, alpha: f64) -> Result<f64> {
        self.check_pair(x, y, alpha)?;
        Ok(kernels::divergence(self.class, x, y, alpha))
    }

    /// ∂d_φ(x, y | α)/∂α.
    pub fn divergence_dalpha(&self, x: f64, y: f64, alpha: f64) -> Result<f64> {
        self.check_pair(x, y, alpha)?;
        Ok(kernels::divergence_dalpha(self.class, x, y, alpha))
    }

    /// Unit variance function υ(x | α).
    pub fn variance(&self, x: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        if !self.in_mean_domain(x) {
            return Err(Error::domain(format!(
                "variance argument {x} outside the mean domain of {:?}",
                self.class
            )));
        }
        Ok(kernels::variance(self.class, x, alpha))
    }

    /// ∂υ(x | α)/∂α.
    pub fn variance_dalpha(&self, x: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        if !self.in_mean_domain(x) {
            return Err(Error::domain(format!(
                "variance argument {x} outside the mean domain of {:?}",
                self.class
            )));
        }
        Ok(kernels::variance_dalpha(self.class, x, alpha))
    }

    /// Variance of the EDM with mean μ and dispersion κ: κ·υ(μ | α).
    pub fn edm_variance(&self, mu: f64, kappa: f64, alpha: f64) -> Result<f64> {
        Ok(kappa * self.variance(mu, alpha)?)
    }

    /// Whether the discrete saddle-point form applies at x.
    #[inline]
    pub fn uses_discrete_form(&self, x: f64) -> bool {
        self.discrete || (self.support == AttributeKind::NonNegativeContinuous && x == 0.0)
    }

    /// Saddle-point log-density log p(x | μ, κ, α).
    pub fn log_density(&self, x: f64, mu: f64, kappa: f64, alpha: f64) -> Result<f64> {
        self.check_pair(x, mu, alpha)?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("dispersion {kappa} must be positive")));
        }
        let value = self.log_density_unchecked(x, mu, kappa, alpha);
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::domain(format!(
                "log-density degenerate at x = {x} for {:?} (alpha {alpha})",
                self.class
            )));
        }
        Ok(value)
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: f64, mu: f64, kappa: f64, alpha: f64) -> f64 {
        self.log_normalizer_unchecked(x, kappa, alpha) - self.scaled_divergence_unchecked(x, mu, kappa, alpha)
    }

    /// The per-observation part of the log-density that does not depend on μ,
    /// i.e. the saddle-point normalizer.
    #[inline]
    pub(crate) fn log_normalizer_unchecked(&self, x: f64, kappa: f64, alpha: f64) -> f64 {
        if self.uses_discrete_form(x) {
            let c = self.saddle_point_constant();
            let lv = kernels::log_variance(self.class, kappa * (x + c), alpha);
            0.5 * (kappa.ln() - (2.0 * PI).ln() - lv)
        } else {
            let lv = kernels::log_variance(self.class, x, alpha);
            -0.5 * ((2.0 * PI * kappa).ln() + lv)
        }
    }

    /// The μ-dependent part of the log-density (a negative scaled divergence).
    #[inline]
    pub(crate) fn scaled_divergence_unchecked(&self, x: f64, mu: f64, kappa: f64, alpha: f64) -> f64 {
        if self.uses_discrete_form(x) {
            kernels::divergence(self.class, kappa * x, kappa * mu, alpha) / kappa
        } else {
            kernels::divergence(self.class, x, mu, alpha) / kappa
        }
    }

    /// ∂/∂α of [`Self::log_normalizer_unchecked`].
    #[inline]
    pub(crate) fn log_normalizer_dalpha_unchecked(&self, x: f64, kappa: f64, alpha: f64) -> f64 {
        let arg = if self.uses_discrete_form(x) {
            kappa * (x + self.saddle_point_constant())
        } else {
            x
        };
        -0.5 * kernels::log_variance_dalpha(self.class, arg, alpha)
    }

    /// ∂/∂α of [`Self::scaled_divergence_unchecked`].
    #[inline]
    pub(crate) fn scaled_divergence_dalpha_unchecked(
        &self,
        x: f64,
        mu: f64,
        kappa: f64,
        alpha: f64,
    ) -> f64 {
        if self.uses_discrete_form(x) {
            kernels::divergence_dalpha(self.class, kappa * x, kappa * mu, alpha) / kappa
        } else {
            kernels::divergence_dalpha(self.class, x, mu, alpha) / kappa
        }
    }

    /// ∂ log p(x | μ, κ, α)/∂α.
    pub fn log_density_dalpha(&self, x: f64, mu: f64, kappa: f64, alpha: f64) -> Result<f64> {
        self.check_pair(x, mu, alpha)?;
        Ok(self.log_normalizer_dalpha_unchecked(x, kappa, alpha)
            - self.scaled_divergence_dalpha_unchecked(x, mu, kappa, alpha))
    }

    /// Mean-value mapping τ(θ | α).
    pub fn mean_value_map(&self, theta: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        if !self.in_natural_domain(theta, alpha) {
            return Err(Error::domain(format!(
                "theta {theta} outside the natural parameter domain of {:?} at alpha {alpha}",
                self.class
            )));
        }
        Ok(kernels::mean_value(self.class, theta, alpha))
    }

    /// Inverse mean-value mapping τ⁻¹(μ | α).
    pub fn natural_parameter(&self, mu: f64, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        if !self.in_mean_domain(mu) {
            return Err(Error::domain(format!(
                "mean {mu} outside the mean domain of {:?}",
                self.class
            )));
        }
        Ok(kernels::natural_parameter(self.class, mu, alpha))
    }

    /// Whether θ lies in int(Θ) for the given α.
    pub fn in_natural_domain(&self, theta: f64, alpha: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self.class {
            FamilyClass::MorrisCount => alpha <= 0.0 || theta < -alpha.ln(),
            FamilyClass::MorrisReal => {
                alpha <= 0.0 || theta.abs() < std::f64::consts::FRAC_PI_2 / alpha.sqrt()
            }
            FamilyClass::Tweedie => {
                (alpha - 2.0).abs() < BRANCH_TOL
                    || (alpha - 1.0).abs() < BRANCH_TOL
                    || (alpha - 1.0) * theta + 1.0 > 0.0
            }
        }
    }
}

#[cfg(test)]
mod tests;
