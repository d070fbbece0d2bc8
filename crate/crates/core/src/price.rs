//! Mid-price dynamics.
//!
//! Both models have a Gaussian transition law whose mean is affine in the
//! starting price, `E[S(xi) | S(t) = s] = phi * s + (1 - phi) * mu` with
//! `phi = decay(t, xi)`. The quote engine relies on that structure to evaluate
//! expectations of `sinh`/`cosh` of the directional bet in closed form.

use crate::error::{check_time, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceModel {
    /// Arithmetic Brownian motion `dS = sigma dW`.
    Martingale { sigma: f64 },
    /// Mean-reverting `dS = a (mu - S) dt + sigma dW`.
    OrnsteinUhlenbeck { sigma: f64, reversion: f64, mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub mean: f64,
    pub var: f64,
}

impl GaussianLaw {
    /// `E[sinh(X)]` for `X ~ N(mean, var)`.
    pub fn expected_sinh(&self) -> f64 {
        self.mean.sinh() * (0.5 * self.var).exp()
    }

    /// `E[cosh(X)]` for `X ~ N(mean, var)`.
    pub fn expected_cosh(&self) -> f64 {
        self.mean.cosh() * (0.5 * self.var).exp()
    }
}

impl PriceModel {
    pub fn martingale(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return domain(format!("sigma must be > 0, got {sigma}"));
        }
        Ok(Self::Martingale { sigma })
    }

    pub fn ornstein_uhlenbeck(sigma: f64, reversion: f64, mean: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return domain(format!("sigma must be > 0, got {sigma}"));
        }
        if !(reversion > 0.0) {
            return domain(format!("mean-reversion speed must be > 0, got {reversion}"));
        }
        if !mean.is_finite() {
            return domain("long-run mean must be finite");
        }
        Ok(Self::OrnsteinUhlenbeck { sigma, reversion, mean })
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Self::Martingale { sigma } | Self::OrnsteinUhlenbeck { sigma, .. } => sigma,
        }
    }

    pub fn is_martingale(&self) -> bool {
        matches!(self, Self::Martingale { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Martingale { .. } => "martingale",
            Self::OrnsteinUhlenbeck { .. } => "ou",
        }
    }

    /// Weight `phi` of the current price in the conditional mean at `xi`.
    pub(crate) fn decay(&self, t: f64, xi: f64) -> f64 {
        match *self {
            Self::Martingale { .. } => 1.0,
            Self::OrnsteinUhlenbeck { reversion, .. } => (-reversion * (xi - t)).exp(),
        }
    }

    /// Level the conditional mean is pulled towards (unused by the martingale).
    pub(crate) fn anchor(&self) -> f64 {
        match *self {
            Self::Martingale { .. } => 0.0,
            Self::OrnsteinUhlenbeck { mean, .. } => mean,
        }
    }

    pub fn expected_terminal(&self, t: f64, s: f64, horizon: f64) -> Result<f64> {
        check_time(t, horizon)?;
        Ok(match *self {
            Self::Martingale { .. } => s,
            Self::OrnsteinUhlenbeck { mean, .. } => {
                let phi = self.decay(t, horizon);
                s * phi + mean * (1.0 - phi)
            }
        })
    }

    /// Directional bet `E[S(T)] - s`.
    pub fn directional_bet(&self, t: f64, s: f64, horizon: f64) -> Result<f64> {
        check_time(t, horizon)?;
        Ok(self.bet_unchecked(t, s, horizon))
    }

    pub(crate) fn bet_unchecked(&self, t: f64, s: f64, horizon: f64) -> f64 {
        match *self {
            Self::Martingale { .. } => 0.0,
            Self::OrnsteinUhlenbeck { mean, .. } => (mean - s) * (1.0 - self.decay(t, horizon)),
        }
    }

    /// Law of `S(xi)` given `S(t) = s`.
    pub fn transition_law(&self, t: f64, s: f64, xi: f64) -> Result<GaussianLaw> {
        if !(xi >= t) {
            return domain(format!("transition end {xi} precedes start {t}"));
        }
        Ok(match *self {
            Self::Martingale { sigma } => GaussianLaw { mean: s, var: sigma * sigma * (xi - t) },
            Self::OrnsteinUhlenbeck { sigma, reversion, mean } => {
                let phi = self.decay(t, xi);
                GaussianLaw {
                    mean: s * phi + mean * (1.0 - phi),
                    // 1 - e^{-2a tau} via expm1 keeps precision for short steps.
                    var: sigma * sigma * -(-2.0 * reversion * (xi - t)).exp_m1() / (2.0 * reversion),
                }
            }
        })
    }

    /// Deterministic part of one Euler-Maruyama step.
    pub(crate) fn drifted(&self, s: f64, dt: f64) -> f64 {
        match *self {
            Self::Martingale { .. } => s,
            Self::OrnsteinUhlenbeck { reversion, mean, .. } => s + reversion * (mean - s) * dt,
        }
    }

    /// Euler-Maruyama step driven by the standard-normal draw `gaussian`.
    pub fn step(&self, s: f64, dt: f64, gaussian: f64) -> f64 {
        self.drifted(s, dt) + self.sigma() * (dt.sqrt() * gaussian)
    }
}
