//! Legendre-Fenchel transform `L(q) = sup_p { p q - H(p) }`.
//!
//! `H` is even and strictly convex, so `H'` is strictly increasing and the
//! supremum is attained at the unique root of `H'(p) = q`. The root is found
//! by Newton's method on `H' - q` (derivative `H''`) inside a bisection
//! bracket that is grown geometrically from `p = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{domain, h_value, HamiltonianEval};
use crate::kernel::{Family, Kernel};
use crate::par::Execution;

const MAX_DOUBLINGS: usize = 1000;
const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LegendrePoint {
    pub q: f64,
    /// Maximizer `p₀(q)`; satisfies `p₀ q >= 0`.
    pub p0: f64,
    pub value: f64,
    pub iterations: usize,
    /// `|H'(p₀) - q|`.
    pub residual: f64,
    /// The supremum was approached at the edge of the finiteness domain of
    /// `H` rather than attained at an interior stationary point.
    pub at_boundary: bool,
}

pub fn conjugate(k: &Kernel, q: f64) -> Result<LegendrePoint> {
    if !q.is_finite() {
        return Err(Error::invalid("q", format!("must be finite, got {q}")));
    }
    if q == 0.0 {
        return Ok(LegendrePoint {
            q,
            p0: 0.0,
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            at_boundary: false,
        });
    }
    // solve for |q|, mirror afterwards (H is even)
    let target = q.abs();
    let p_max = domain(k).p_max;
    let cap = if p_max.is_finite() {
        p_max * (1.0 - 1e-12)
    } else {
        f64::INFINITY
    };
    let fail = |reason: String| Error::Conjugate { q, reason };
    let eval = |p: f64| {
        h_value(k, p).map_err(|e| match e {
            Error::Quadrature { .. } | Error::Overflow { .. } | Error::Domain { .. } => {
                fail(format!("H failed at p = {p}: {e}"))
            }
            other => other,
        })
    };
    let tol = RESIDUAL_TOL * target.max(1.0);

    let mut lo = 0.0;
    let mut hi = 1.0f64.min(0.5 * p_max);
    let mut at_hi = eval(hi)?;
    let mut iterations = 0;
    let mut doublings = 0;
    while at_hi.deriv < target {
        if hi >= cap {
            let value = hi * target - at_hi.value;
            return Ok(LegendrePoint {
                q,
                p0: q.signum() * hi,
                value,
                iterations,
                residual: target - at_hi.deriv,
                at_boundary: true,
            });
        }
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(fail(format!("no bracket after {MAX_DOUBLINGS} doublings")));
        }
        lo = hi;
        hi = if p_max.is_finite() {
            (0.5 * (hi + p_max)).min(cap)
        } else {
            2.0 * hi
        };
        at_hi = eval(hi)?;
        iterations += 1;
    }

    let mut cur: HamiltonianEval = at_hi;
    loop {
        let f = cur.deriv - target;
        if f.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(fail(format!(
                "no convergence in {MAX_ITERATIONS} iterations (residual {:e})",
                f.abs()
            )));
        }
        if f > 0.0 {
            hi = cur.p;
        } else {
            lo = cur.p;
        }
        let newton = cur.p - f / cur.second;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        cur = eval(next)?;
        iterations += 1;
    }

    let value = (cur.p * target - cur.value).max(0.0);
    Ok(LegendrePoint {
        q,
        p0: q.signum() * cur.p,
        value,
        iterations,
        residual: (cur.deriv - target).abs(),
        at_boundary: false,
    })
}

pub fn conjugate_many(k: &Kernel, qs: &[f64], exec: Execution) -> Result<Vec<LegendrePoint>> {
    exec.try_map(qs, |&q| conjugate(k, q))
}

/// Predicted large-`q` shape of `L` for a kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LawForm {
    /// `q ln q / η` (compact support of radius η).
    QLogQ { eta: f64 },
    /// `q (ln q)^((α-1)/α)`.
    QLogPower { alpha: f64 },
    /// `2 q (ln q)^(1/2)`.
    GaussianLaw,
    /// `q`.
    Linear,
}

impl LawForm {
    pub fn for_kernel(k: &Kernel) -> Self {
        match k.family() {
            Family::Gaussian => LawForm::GaussianLaw,
            Family::StretchedExp { alpha } => LawForm::QLogPower { alpha: *alpha },
            Family::CriticalExp => LawForm::Linear,
            _ => LawForm::QLogQ {
                eta: k.support_radius(),
            },
        }
    }

    pub fn eval(&self, q: f64) -> f64 {
        let l = q.ln();
        match *self {
            LawForm::QLogQ { eta } => q * l / eta,
            LawForm::QLogPower { alpha } => q * l.powf((alpha - 1.0) / alpha),
            LawForm::GaussianLaw => 2.0 * q * l.sqrt(),
            LawForm::Linear => q,
        }
    }

    /// Limit of `L(q) / f(q)`. For the stretched exponential this is
    /// `c(α)^{-(α-1)/α}` with `c(α) = α^{-1/(α-1)} (1 - 1/α)`, from
    /// `ln q ~ c(α) p₀^{α/(α-1)}` and `L ~ p₀ q`.
    pub fn limit_constant(&self) -> f64 {
        match *self {
            LawForm::QLogPower { alpha } => {
                let c = alpha.powf(-1.0 / (alpha - 1.0)) * (1.0 - 1.0 / alpha);
                c.powf(-(alpha - 1.0) / alpha)
            }
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LawSample {
    pub q: f64,
    pub l: f64,
    pub law: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticLaw {
    pub family: String,
    pub form: LawForm,
    /// Expected limit of the ratio; `None` when only two-sided bounds are known.
    pub limit_constant: Option<f64>,
    pub samples: Vec<LawSample>,
}

impl AsymptoticLaw {
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }

    /// `|r_{k+1} - c| < |r_k - c|` for each of the last `n` consecutive pairs.
    pub fn drifts_toward_limit(&self, n: usize) -> bool {
        let Some(c) = self.limit_constant else {
            return false;
        };
        let r = self.ratios();
        if r.len() < n + 1 {
            return false;
        }
        r.windows(2)
            .rev()
            .take(n)
            .all(|w| (w[1] - c).abs() < (w[0] - c).abs())
    }
}

fn check_probes(q_list: &[f64]) -> Result<()> {
    if q_list.is_empty() {
        return Err(Error::invalid("q_list", "empty"));
    }
    if q_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("q_list", "must be strictly increasing"));
    }
    if !(q_list[0] >= std::f64::consts::E) {
        return Err(Error::invalid("q_list", "probes must satisfy q >= e so that ln q >= 1"));
    }
    Ok(())
}

pub fn asymptotic_ratio(k: &Kernel, q_list: &[f64], exec: Execution) -> Result<AsymptoticLaw> {
    check_probes(q_list)?;
    let form = LawForm::for_kernel(k);
    let points = conjugate_many(k, q_list, exec)?;
    let samples = points
        .iter()
        .map(|pt| {
            let law = form.eval(pt.q);
            LawSample {
                q: pt.q,
                l: pt.value,
                law,
                ratio: pt.value / law,
            }
        })
        .collect();
    Ok(AsymptoticLaw {
        family: k.label(),
        form,
        limit_constant: if k.is_singular() {
            None
        } else {
            Some(form.limit_constant())
        },
        samples,
    })
}

/// Two-sided `q ln q` bounds for `|y|^{-1-α} 1_{[-1,1]}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub alpha: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub samples: Vec<LawSample>,
}

pub fn sandwich_check(alpha: f64, q_list: &[f64], exec: Execution) -> Result<Sandwich> {
    let k = Kernel::singular_compact(alpha)?;
    let law = asymptotic_ratio(&k, q_list, exec)?;
    let (c_lo, c_hi) = law
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.ratio), hi.max(s.ratio)));
    Ok(Sandwich {
        alpha,
        c_lo,
        c_hi,
        samples: law.samples,
    })
}
