//! Rate function of the exit problem on the unit ball (interval `[-1, 1]`)
//! and the exponential bound it implies for `|u - u_R|`.
//!
//! `I_∞(x, t) = t L((1 - |x|) / t)` is the Lax-Oleinik value of
//! `∂_t I + H(∇I) = 0` in `(-1, 1)`, `I = 0` on the boundary and
//! `I(·, 0) = +∞`. Queries at `t = 0` are rejected instead of returning `+∞`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::legendre::conjugate;

fn check_query(x: f64, t: f64) -> Result<()> {
    if !(x.abs() <= 1.0) {
        return Err(Error::invalid("x", format!("must lie in [-1, 1], got {x}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `I_∞(x, t)`.
pub fn rate(k: &Kernel, x: f64, t: f64) -> Result<f64> {
    check_query(x, t)?;
    let dist = 1.0 - x.abs();
    if dist == 0.0 {
        return Ok(0.0);
    }
    Ok(t * conjugate(k, dist / t)?.value)
}

/// `I^A = min(A, I_∞)`.
pub fn rate_capped(k: &Kernel, x: f64, t: f64, cap: f64) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::invalid("A", format!("cap must be positive, got {cap}")));
    }
    check_query(x, t)?;
    if x.abs() == 1.0 {
        return Ok(0.0);
    }
    Ok(cap.min(rate(k, x, t)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundPrediction {
    #[serde(rename = "R")]
    pub r: f64,
    pub theta: f64,
    pub t_phys: f64,
    /// `R · I_∞(θ, t/R)`.
    pub exponent: f64,
    /// `exp(-exponent)`.
    pub bound: f64,
    /// `((1-θ)R/η) ln((1-θ)R/t)` for kernels supported in `[-η, η]`.
    pub asymptotic_exponent: Option<f64>,
}

/// Predicted `sup_{|x| <= θR} |u - u_R|(t) <= exp(-R I_∞(θ, t/R))`, without
/// the unquantified `o(1) R` slack.
pub fn bound(k: &Kernel, r: f64, theta: f64, t_phys: f64) -> Result<BoundPrediction> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("R", format!("must be positive, got {r}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid("theta", format!("must lie in (0, 1), got {theta}")));
    }
    if !(t_phys > 0.0 && t_phys.is_finite()) {
        return Err(Error::invalid("t", format!("must be positive, got {t_phys}")));
    }
    let exponent = r * rate(k, theta, t_phys / r)?;
    let asymptotic_exponent = k.is_compact().then(|| {
        let d = (1.0 - theta) * r;
        d / k.support_radius() * (d / t_phys).ln()
    });
    Ok(BoundPrediction {
        r,
        theta,
        t_phys,
        exponent,
        bound: (-exponent).exp(),
        asymptotic_exponent,
    })
}
