//! The jump Hamiltonian `H(p) = ∫ (e^{p y} - 1) J(y) dy` and its first two
//! derivatives.
//!
//! Closed forms are used for the uniform, Gaussian and critical exponential
//! kernels; everything else goes through adaptive Gauss-Kronrod on the half
//! line, using the evenness of `J`:
//!
//! ```text
//! H(p)   = 2 ∫_0^∞ (cosh(p y) - 1) J(y) dy
//! H'(p)  = 2 ∫_0^∞ y sinh(p y) J(y) dy
//! H''(p) = 2 ∫_0^∞ y² cosh(p y) J(y) dy
//! ```
//!
//! Kernels singular at the origin use the compensated Hamiltonian
//! `∫ (e^{p y} - 1 - p y 1_{|y|<1}) J(y) dy` (see [`h_value_levy`]). For an
//! even kernel the compensating term integrates to zero, so both definitions
//! agree wherever the uncompensated integral exists.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Family, Kernel};
use crate::quadrature::{integrate_panels, Integral, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// Which evaluation route to take.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Closed form when one exists, quadrature otherwise.
    #[default]
    Auto,
    ForceQuadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianEval {
    pub p: f64,
    pub value: f64,
    pub deriv: f64,
    pub second: f64,
    pub method: Method,
    pub quad_error_estimate: f64,
}

/// `{p : H(p) < ∞} = (-p_max, p_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianDomain {
    pub p_max: f64,
}

impl HamiltonianDomain {
    pub fn contains(&self, p: f64) -> bool {
        p.abs() < self.p_max
    }
}

pub fn domain(k: &Kernel) -> HamiltonianDomain {
    let p_max = match k.family() {
        Family::CriticalExp => 1.0,
        Family::Custom(t) => t.decay_rate.unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    };
    HamiltonianDomain { p_max }
}

/// `H(p)` and derivatives, choosing a closed form where available. Kernels
/// singular at the origin are routed to [`h_value_levy`].
pub fn h_value(k: &Kernel, p: f64) -> Result<HamiltonianEval> {
    h_value_with(k, p, Mode::Auto)
}

pub fn h_value_with(k: &Kernel, p: f64, mode: Mode) -> Result<HamiltonianEval> {
    check_domain(k, p)?;
    if k.is_singular() {
        return h_value_levy(k, p);
    }
    let eval = match (mode, closed_form(k, p)) {
        (Mode::Auto, Some(cf)) => cf,
        _ => quadrature(k, p)?,
    };
    finite(eval)
}

fn check_domain(k: &Kernel, p: f64) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::invalid("p", format!("must be finite, got {p}")));
    }
    let d = domain(k);
    if d.contains(p) {
        Ok(())
    } else {
        Err(Error::Domain { p, p_max: d.p_max })
    }
}

fn finite(e: HamiltonianEval) -> Result<HamiltonianEval> {
    if e.value.is_finite() && e.deriv.is_finite() && e.second.is_finite() {
        Ok(e)
    } else {
        Err(Error::Overflow { p: e.p })
    }
}

fn closed_form(k: &Kernel, p: f64) -> Option<HamiltonianEval> {
    let (value, deriv, second) = match k.family() {
        Family::UniformCompact { eta } => {
            let (v, d, s) = sinhc_family(eta * p);
            (v, eta * d, eta * eta * s)
        }
        Family::Gaussian => {
            let g = (0.5 * p * p).exp();
            ((0.5 * p * p).exp_m1(), p * g, (1.0 + p * p) * g)
        }
        Family::CriticalExp => {
            let m = (1.0 - p) * (1.0 + p);
            (p * p / m, 2.0 * p / (m * m), (2.0 + 6.0 * p * p) / (m * m * m))
        }
        _ => return None,
    };
    Some(HamiltonianEval {
        p,
        value,
        deriv,
        second,
        method: Method::ClosedForm,
        quad_error_estimate: 0.0,
    })
}

/// `(sinh x / x - 1, d/dx, d²/dx²)`, by series near the origin.
fn sinhc_family(x: f64) -> (f64, f64, f64) {
    if x.abs() < 1.0 {
        // sinh x / x - 1 = Σ_{k≥1} x^{2k} / (2k+1)!
        let (mut v, mut d, mut s) = (0.0, 0.0, 0.0);
        let x2 = x * x;
        // fact = 1/(2k+1)!, pw = x^{2k-2}
        let mut fact = 1.0 / 6.0;
        let mut pw = 1.0;
        for k in 1..30 {
            let kk = k as f64;
            v += pw * x2 * fact;
            d += 2.0 * kk * pw * x * fact;
            s += 2.0 * kk * (2.0 * kk - 1.0) * pw * fact;
            pw *= x2;
            fact /= (2.0 * kk + 2.0) * (2.0 * kk + 3.0);
            if pw * fact < 1e-18 * s.abs() {
                break;
            }
        }
        (v, d, s)
    } else {
        let (sh, ch) = (x.sinh(), x.cosh());
        (
            sh / x - 1.0,
            (x * ch - sh) / (x * x),
            (x * x * sh - 2.0 * x * ch + 2.0 * sh) / (x * x * x),
        )
    }
}

/// Nats below the peak of `p y + ln J(y)` at which infinite tails are cut.
const TAIL_DROP: f64 = 40.0;

/// Upper integration limit for infinite-support kernels at slope `a >= 0`.
fn truncation_point(k: &Kernel, a: f64) -> (f64, f64) {
    let log_integrand = |y: f64| a * y + k.log_density(y) + 2.0 * (1.0 + y).ln();
    let peak = k.tilted_peak(a);
    let mut top = log_integrand(peak).max(log_integrand(1.0));
    let mut step = 1.0;
    loop {
        let y = peak + step;
        let g = log_integrand(y);
        top = top.max(g);
        if g < top - TAIL_DROP {
            return (peak, y);
        }
        step *= 2.0;
    }
}

fn quadrature(k: &Kernel, p: f64) -> Result<HamiltonianEval> {
    let a = p.abs();
    let breaks: Vec<f64> = if k.is_compact() {
        let r = k.support_radius();
        let mut b = vec![0.0];
        if let Family::Custom(t) = k.family() {
            b.extend(t.points().map(|(y, _)| y).filter(|&y| y > 0.0 && y < r));
        }
        b.push(r);
        b
    } else {
        let (peak, end) = truncation_point(k, a);
        if peak > 0.0 {
            vec![0.0, peak, end]
        } else {
            vec![0.0, end]
        }
    };
    // Written as e^{a y + ln J} times bounded factors so that neither the
    // hyperbolic functions nor the density over/underflow on their own.
    let integrand = |y: f64| {
        let tilt = (a * y + k.log_density(y)).exp();
        let m1 = -(-a * y).exp_m1();
        let m2 = -(-2.0 * a * y).exp_m1();
        [tilt * m1 * m1, y * tilt * m2, y * y * tilt * (2.0 - m2)]
    };
    let r: Integral<3> = integrate_panels(integrand, &breaks, &Tolerance::default())?;
    Ok(HamiltonianEval {
        p,
        value: r.value[0],
        deriv: p.signum() * r.value[1],
        second: r.value[2],
        method: Method::Quadrature,
        quad_error_estimate: r.max_error(),
    })
}

/// `e^x - 1 - x`, switching to its Taylor series for `|x| < 1e-4`.
pub fn exp_corrected(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

/// Compensated Hamiltonian `∫ (e^{p y} - 1 - p y 1_{|y|<1}) J(y) dy` for
/// kernels with `J(y) ~ c |y|^{-1-s}` at the origin, `0 < s < 2`.
///
/// On `|y| < δ` the kernel is replaced by its power law and the integrand is
/// integrated term by term; the rest uses dyadic Gauss-Kronrod panels.
pub fn h_value_levy(k: &Kernel, p: f64) -> Result<HamiltonianEval> {
    check_domain(k, p)?;
    let s = k.singularity_order();
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::UnsupportedKernel {
            family: k.tag().into(),
            reason: "compensated Hamiltonian needs singularity order in (0, 2)".into(),
        });
    }
    if !k.is_compact() {
        return Err(Error::UnsupportedKernel {
            family: k.tag().into(),
            reason: "compensated Hamiltonian is implemented for compactly supported kernels".into(),
        });
    }
    let r = k.support_radius();
    let a = p.abs();

    let (delta, coeff) = match k.family() {
        // exact power law on the whole support
        Family::SingularCompact { .. } => {
            let d = if a > 0.0 { r.min(0.5 / a) } else { r };
            (d, 1.0)
        }
        _ => {
            let d = if a > 0.0 { (1e-3 * r).min(0.5 / a) } else { 1e-3 * r };
            (d, k.density(d) * d.powf(1.0 + s))
        }
    };

    let (near, near_err) = levy_near_origin(a, delta, s, coeff);

    let mut breaks = vec![delta];
    let mut y = 2.0 * delta;
    while y < r {
        breaks.push(y);
        y *= 2.0;
    }
    if delta < r {
        breaks.push(r);
    }
    let far: Integral<3> = if breaks.len() >= 2 {
        integrate_panels(
            |y: f64| {
                let j = k.density(y);
                [
                    (exp_corrected(a * y) + exp_corrected(-a * y)) * j,
                    2.0 * y * (a * y).sinh() * j,
                    2.0 * y * y * (a * y).cosh() * j,
                ]
            },
            &breaks,
            &Tolerance::default(),
        )?
    } else {
        Integral {
            value: [0.0; 3],
            error: [0.0; 3],
            evaluations: 0,
        }
    };

    finite(HamiltonianEval {
        p,
        value: near[0] + far.value[0],
        deriv: p.signum() * (near[1] + far.value[1]),
        second: near[2] + far.value[2],
        method: Method::Quadrature,
        quad_error_estimate: far.max_error().max(near_err),
    })
}

/// Term-by-term integrals over `(0, δ)` of the symmetrized integrands against
/// `c y^{-1-s}`:
/// value `Σ_{k even ≥ 2} 2c a^k δ^{k-s} / (k! (k-s))`,
/// first `Σ_{k odd} 2c a^k δ^{k+1-s} / (k! (k+1-s))`,
/// second `Σ_{k even ≥ 0} 2c a^k δ^{k+2-s} / (k! (k+2-s))`.
fn levy_near_origin(a: f64, delta: f64, s: f64, c: f64) -> ([f64; 3], f64) {
    let mut out = [0.0; 3];
    // term = a^k δ^k / k!
    let mut term = 1.0;
    let ad = a * delta;
    let mut last = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        if k % 2 == 0 {
            if k >= 2 {
                out[0] += term * delta.powf(-s) / (kf - s);
            }
            out[2] += term * delta.powf(2.0 - s) / (kf + 2.0 - s);
        } else {
            out[1] += term * delta.powf(1.0 - s) / (kf + 1.0 - s);
        }
        last = term;
        term *= ad / (kf + 1.0);
        if term < 1e-18 && k > 2 {
            break;
        }
    }
    for v in out.iter_mut() {
        *v *= 2.0 * c;
    }
    (out, 2.0 * c * last * delta.powf(-s) * 1e-16)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    fn all_kernels() -> Vec<Kernel> {
        vec![
            Kernel::uniform(1.0).unwrap(),
            Kernel::uniform(2.0).unwrap(),
            Kernel::polynomial(),
            Kernel::gaussian(),
            Kernel::stretched_exp(2.0).unwrap(),
            Kernel::stretched_exp(1.5).unwrap(),
            Kernel::critical_exp(),
            Kernel::singular_compact(0.5).unwrap(),
            Kernel::singular_compact(1.5).unwrap(),
        ]
    }

    #[test]
    fn zero_at_origin() {
        for k in all_kernels() {
            let e = h_value(&k, 0.0).unwrap();
            assert_eq!(e.value, 0.0, "{k}");
            assert_eq!(e.deriv, 0.0, "{k}");
            assert!(e.second > 0.0, "{k}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let g = h_value(&Kernel::gaussian(), 1.0).unwrap();
        assert_eq!(g.method, Method::ClosedForm);
        assert!(rel(g.value, 0.5f64.exp() - 1.0) < 1e-15);
        assert!((g.value - 0.648721).abs() < 1e-6);

        let u = h_value(&Kernel::uniform(1.0).unwrap(), 2.0).unwrap();
        assert!((u.value - 0.813_430_203_923_509_4).abs() < 1e-14);

        let c = h_value(&Kernel::critical_exp(), 0.5).unwrap();
        assert!(rel(c.value, 1.0 / 3.0) < 1e-15);
    }

    #[test]
    fn stretched_gaussian_oracle() {
        // ∫ (e^{py} - 1) e^{-y²} dy = √π (e^{p²/4} - 1)
        let k = Kernel::stretched_exp(2.0).unwrap();
        let sp = std::f64::consts::PI.sqrt();
        for p in [0.01, 0.3, 1.0, 4.0, 12.0, -7.0] {
            let e = h_value(&k, p).unwrap();
            assert_eq!(e.method, Method::Quadrature);
            let g = (p * p / 4.0).exp();
            assert!(rel(e.value, sp * (p * p / 4.0).exp_m1()) < 1e-9, "p={p}");
            assert!(rel(e.deriv, sp * 0.5 * p * g) < 1e-9, "p={p}");
            assert!(rel(e.second, sp * (0.5 + p * p / 4.0) * g) < 1e-9, "p={p}");
        }
    }

    #[test]
    fn quadrature_reproduces_closed_forms() {
        for k in [Kernel::uniform(1.0).unwrap(), Kernel::uniform(3.0).unwrap(), Kernel::gaussian(), Kernel::critical_exp()] {
            for p in [0.1, 0.5, 1.0, 2.0, 5.0, 1e-3, 0.999] {
                if !domain(&k).contains(p) {
                    continue;
                }
                let cf = h_value(&k, p).unwrap();
                let q = h_value_with(&k, p, Mode::ForceQuadrature).unwrap();
                assert_eq!(q.method, Method::Quadrature);
                assert!(rel(q.value, cf.value) < 1e-8, "{k} p={p}: {} vs {}", q.value, cf.value);
                assert!(rel(q.deriv, cf.deriv) < 1e-8, "{k} p={p}");
                assert!(rel(q.second, cf.second) < 1e-8, "{k} p={p}");
            }
        }
    }

    #[test]
    fn sinhc_series_matches_direct_at_switch() {
        let (a, b, c) = sinhc_family(0.999_999_999);
        let (x, y, z) = sinhc_family(1.0);
        assert!(rel(a, x) < 1e-8 && rel(b, y) < 1e-8 && rel(c, z) < 1e-8);
    }

    #[test]
    fn critical_domain() {
        let k = Kernel::critical_exp();
        assert_eq!(domain(&k).p_max, 1.0);
        assert!(matches!(h_value(&k, 1.0), Err(Error::Domain { p_max, .. }) if p_max == 1.0));
        assert!(matches!(h_value(&k, -1.5), Err(Error::Domain { .. })));
        assert_eq!(domain(&Kernel::uniform(1.0).unwrap()).p_max, f64::INFINITY);
        assert_eq!(domain(&Kernel::gaussian()).p_max, f64::INFINITY);
    }

    #[test]
    fn overflow_is_reported() {
        let k = Kernel::uniform(1.0).unwrap();
        assert!(matches!(h_value(&k, 800.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn exp_corrected_switch_is_continuous() {
        let series = |x: f64| x * x / 2.0 + x * x * x / 6.0 + x.powi(4) / 24.0;
        let below = exp_corrected(0.999_999e-4);
        let above = exp_corrected(1.000_001e-4);
        assert!(above > below);
        assert!(rel(below, series(0.999_999e-4)) < 1e-13);
        assert!(rel(above, series(1.000_001e-4)) < 1e-10);
        assert_eq!(exp_corrected(0.0), 0.0);
    }

    // Brute-force oracle: composite Simpson on [ε, 1] after y = t^4, plus the
    // analytic leading term (py)²/2·|y|^{-1-α} on (0, ε).
    fn levy_oracle(alpha: f64, p: f64) -> f64 {
        let eps = 1e-6f64;
        let lead = p * p * eps.powf(2.0 - alpha) / (2.0 - alpha);
        let m = 4.0;
        let t0 = eps.powf(1.0 / m);
        let n = 200_000;
        let h = (1.0 - t0) / n as f64;
        let f = |t: f64| {
            let y = t.powf(m);
            2.0 * ((p * y).cosh() - 1.0) * y.powf(-1.0 - alpha) * m * t.powf(m - 1.0)
        };
        let mut s = f(t0) + f(1.0);
        for i in 1..n {
            s += f(t0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        lead + s * h / 3.0
    }

    #[test]
    fn levy_matches_brute_force() {
        for alpha in [0.5, 1.5] {
            let k = Kernel::singular_compact(alpha).unwrap();
            for p in [1.0, 3.0, 20.0] {
                let e = h_value_levy(&k, p).unwrap();
                let o = levy_oracle(alpha, p);
                assert!(rel(e.value, o) < 1e-7, "alpha={alpha} p={p}: {} vs {o}", e.value);
                assert!(e.value > 0.0);
                let m = h_value_levy(&k, -p).unwrap();
                assert_eq!(m.value, e.value);
                assert_eq!(m.deriv, -e.deriv);
            }
            assert_eq!(h_value_levy(&k, 0.0).unwrap().value, 0.0);
        }
    }

    #[test]
    fn levy_derivatives_by_differences() {
        let k = Kernel::singular_compact(0.5).unwrap();
        for p in [0.3, 0.9, 2.0, 7.0] {
            let h = 1e-5;
            let e = h_value_levy(&k, p).unwrap();
            let fd = (h_value_levy(&k, p + h).unwrap().value - h_value_levy(&k, p - h).unwrap().value) / (2.0 * h);
            assert!((fd - e.deriv).abs() < 1e-6f64.max(1e-4 * e.deriv.abs()), "p={p}");
            let fd2 = (h_value_levy(&k, p + h).unwrap().deriv - h_value_levy(&k, p - h).unwrap().deriv) / (2.0 * h);
            assert!((fd2 - e.second).abs() < 1e-6f64.max(1e-4 * e.second.abs()), "p={p}");
        }
    }

    #[test]
    fn levy_rejects_regular_kernels() {
        assert!(matches!(
            h_value_levy(&Kernel::gaussian(), 1.0),
            Err(Error::UnsupportedKernel { .. })
        ));
    }

    #[test]
    fn custom_triangle_matches_closed_form() {
        // J = 1 - |y| on [-1,1]: H(p) = 2(cosh p - 1)/p² - 1
        let k = Kernel::custom(&[(0.0, 1.0), (1.0, 0.0)], 1.0, 0.0, None).unwrap();
        for p in [0.5, 2.0, 6.0] {
            let e = h_value(&k, p).unwrap();
            let exact = 2.0 * (p.cosh() - 1.0) / (p * p) - 1.0;
            assert!(rel(e.value, exact) < 1e-9, "p={p}");
        }
    }
}
