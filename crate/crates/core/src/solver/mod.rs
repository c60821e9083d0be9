//! Dirichlet problem `u_t = ∫_{[-R,R]} J(x - y) u(y) dy - m u` on a uniform
//! grid, zero outside, by trapezoid convolution and explicit time stepping.
//!
//! Besides `u_R` itself, [`complement`] integrates `v_R = 1 - u_R` for
//! `u₀ ≡ 1` directly, as the solution of `v' = A v + g`, `v(0) = 0`, with `g`
//! the rate of jumping out of the grid. All terms are nonnegative, so `v_R`
//! keeps full relative precision down to the underflow threshold, where the
//! `u` form loses everything below `1e-16`.

mod convolve;
mod grid;
pub mod io;
mod stencil;
mod step;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::ratefn::{bound, BoundPrediction};

pub use convolve::{convolve, convolve_with, Convolution, Generator};
pub use grid::{Field, Grid};
pub use stencil::Stencil;
pub use step::AdaptiveStats;

use step::System;

/// Lower bound on the number of fixed steps. The generator is bounded, so
/// stability alone would allow `dt = 1/(2 mass)`, but each RK4 step only
/// propagates mass four kernel widths; resolving an `e^{-300}` tail needs
/// far more stages than stability does.
pub const MIN_STEPS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeStep {
    /// `dt = min(0.1/(2 mass), T/MIN_STEPS)`, rounded so that `T/dt` is whole.
    Default,
    Fixed(f64),
    Adaptive { rtol: f64, atol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveConfig {
    pub t_final: f64,
    pub step: TimeStep,
    pub convolution: Convolution,
}

impl SolveConfig {
    pub fn new(t_final: f64) -> Self {
        SolveConfig {
            t_final,
            step: TimeStep::Default,
            convolution: Convolution::Direct,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.step = TimeStep::Fixed(dt);
        self
    }

    pub fn adaptive(mut self, rtol: f64, atol: f64) -> Self {
        self.step = TimeStep::Adaptive { rtol, atol };
        self
    }

    pub fn with_convolution(mut self, c: Convolution) -> Self {
        self.convolution = c;
        self
    }

    pub fn validate(&self, k: &Kernel) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("T", format!("must be positive, got {}", self.t_final)));
        }
        match self.step {
            TimeStep::Default => {}
            TimeStep::Fixed(dt) => {
                let max = 0.9 / k.mass();
                if !(dt > 0.0) {
                    return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
                }
                if dt > max {
                    return Err(Error::invalid(
                        "dt",
                        format!("{dt} exceeds the stability limit {max} (0.9 of 2/(2 mass))"),
                    ));
                }
            }
            TimeStep::Adaptive { rtol, atol } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(Error::invalid(
                        "rtol/atol",
                        format!("tolerances must be positive, got ({rtol}, {atol})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fixed step size and count, or `None` for the adaptive integrator.
    pub fn schedule(&self, k: &Kernel) -> Result<Option<(f64, usize)>> {
        self.validate(k)?;
        let t = self.t_final;
        let steps = match self.step {
            TimeStep::Adaptive { .. } => return Ok(None),
            TimeStep::Default => ((t * 2.0 * k.mass() / 0.1 - 1e-9).ceil() as usize).max(MIN_STEPS),
            TimeStep::Fixed(dt) => ((t / dt - 1e-9).ceil() as usize).max(1),
        };
        Ok(Some((t / steps as f64, steps)))
    }
}

fn run(
    k: &Kernel,
    gen: &mut Generator,
    source: Option<&[f64]>,
    u: &mut [f64],
    limit: f64,
    cfg: &SolveConfig,
    observe: &mut dyn FnMut(f64, &[f64]),
) -> Result<()> {
    let mut sys = System { gen, source };
    observe(0.0, u);
    match cfg.schedule(k)? {
        Some((dt, steps)) => step::rk4(&mut sys, u, dt, steps, limit, observe),
        None => {
            let TimeStep::Adaptive { rtol, atol } = cfg.step else {
                unreachable!()
            };
            let dt0 = cfg.t_final / MIN_STEPS as f64;
            step::dopri5(&mut sys, u, cfg.t_final, rtol, atol, dt0, limit, observe).map(|_| ())
        }
    }
}

/// `u_R(T)` from `u0`.
pub fn integrate(k: &Kernel, u0: &Field, cfg: &SolveConfig) -> Result<Field> {
    integrate_observed(k, u0, cfg, |_, _| {})
}

/// As [`integrate`], calling `observe(t, u)` at `t = 0` and after every accepted step.
pub fn integrate_observed(
    k: &Kernel,
    u0: &Field,
    cfg: &SolveConfig,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<Field> {
    cfg.validate(k)?;
    let mut gen = Generator::new(k, u0.grid, cfg.convolution)?;
    let mut u = u0.values.clone();
    let limit = 10.0 * u0.sup_norm().max(f64::MIN_POSITIVE);
    run(k, &mut gen, None, &mut u, limit, cfg, &mut observe)?;
    Field::new(u0.grid, u, cfg.t_final)
}

/// `v_R(T) = 1 - u_R(T)` for `u₀ ≡ 1`, solved directly.
pub fn complement(k: &Kernel, grid: Grid, cfg: &SolveConfig) -> Result<Field> {
    complement_observed(k, grid, cfg, |_, _| {})
}

pub fn complement_observed(
    k: &Kernel,
    grid: Grid,
    cfg: &SolveConfig,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<Field> {
    cfg.validate(k)?;
    let mut gen = Generator::new(k, grid, cfg.convolution)?;
    let g = gen.exterior_rates();
    let mut v = vec![0.0; grid.n()];
    run(k, &mut gen, Some(&g), &mut v, 10.0, cfg, &mut observe)?;
    Field::new(grid, v, cfg.t_final)
}

/// One explicit Euler step `u + dt (C u - m_h u)`.
pub fn euler_step(k: &Kernel, u: &Field, dt: f64) -> Result<Field> {
    let mut gen = Generator::new(k, u.grid, Convolution::Direct)?;
    let mut v = u.values.clone();
    step::euler(&mut System { gen: &mut gen, source: None }, &mut v, dt);
    Field::new(u.grid, v, u.time + dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub field: Field,
    /// `bound(k, R + margin, R/(R + margin), T)`; `None` when exact.
    pub proxy_error: Option<BoundPrediction>,
}

/// Whole-line solution restricted to the grid of `u0`.
///
/// `u₀ ≡ 1` gives the constant field exactly. Otherwise the problem is solved
/// on a grid enlarged by `margin` with the same spacing and `u0` extended by
/// zero, so the answer is itself a bounded-domain proxy.
pub fn reference_solution(k: &Kernel, u0: &Field, cfg: &SolveConfig, margin: f64) -> Result<Reference> {
    if !(margin > 0.0) {
        return Err(Error::invalid("margin", format!("must be positive, got {margin}")));
    }
    cfg.validate(k)?;
    if u0.values.iter().all(|&v| v == 1.0) {
        return Ok(Reference {
            field: Field::new(u0.grid, u0.values.clone(), cfg.t_final)?,
            proxy_error: None,
        });
    }
    let big = u0.grid.enlarged(margin)?;
    let off = big.center() - u0.grid.center();
    let mut ext = vec![0.0; big.n()];
    ext[off..off + u0.grid.n()].copy_from_slice(&u0.values);
    let sol = integrate(k, &Field::new(big, ext, 0.0)?, cfg)?;
    let values = sol.values[off..off + u0.grid.n()].to_vec();
    let r = u0.grid.r();
    Ok(Reference {
        field: Field::new(u0.grid, values, cfg.t_final)?,
        proxy_error: Some(bound(k, big.r(), r / big.r(), cfg.t_final)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Kernel, Grid) {
        // support 8 on a 3-node grid with h = 1
        (Kernel::uniform(8.0).unwrap(), Grid::new(1.0, 3).unwrap())
    }

    #[test]
    fn euler_step_by_hand() {
        let (k, g) = toy();
        let u = Field::new(g, vec![0.3, 1.0, 0.6], 0.0).unwrap();
        let dt = 0.01;
        let out = euler_step(&k, &u, dt).unwrap();
        // J = 1/16 at every node offset, weights (½, 1, ½), lattice mass
        // 1/16 + 2 (7/16 + 1/32) = 1
        let j = 1.0 / 16.0;
        let conv = j * (0.5 * 0.3 + 1.0 + 0.5 * 0.6);
        for (i, &ui) in [0.3, 1.0, 0.6].iter().enumerate() {
            let expect = ui + dt * (conv - ui);
            assert!((out.values[i] - expect).abs() <= 1e-14, "{i}");
        }
    }

    #[test]
    fn zero_stays_zero() {
        let k = Kernel::gaussian();
        let g = Grid::new(5.0, 101).unwrap();
        let out = integrate(&k, &Field::constant(g, 0.0), &SolveConfig::new(0.5)).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schedule_defaults() {
        let k = Kernel::uniform(1.0).unwrap();
        assert_eq!(SolveConfig::new(0.1).schedule(&k).unwrap(), Some((0.1 / 128.0, 128)));
        let (dt, n) = SolveConfig::new(20.0).schedule(&k).unwrap().unwrap();
        assert_eq!(n, 400);
        assert!((dt - 0.05).abs() < 1e-15);
        let (dt, n) = SolveConfig::new(0.1).with_dt(0.03).schedule(&k).unwrap().unwrap();
        assert_eq!(n, 4);
        assert!((dt - 0.025).abs() < 1e-15);
        assert!(SolveConfig::new(0.1).with_dt(1.0).validate(&k).is_err());
        assert!(SolveConfig::new(0.0).validate(&k).is_err());
        assert!(SolveConfig::new(0.1).adaptive(0.0, 1e-9).validate(&k).is_err());
    }

    #[test]
    fn ones_solution_tiny_deficit_and_bounded() {
        let k = Kernel::uniform(1.0).unwrap();
        let g = Grid::default_for(&k, 10.0).unwrap();
        let cfg = SolveConfig::new(0.1);
        let mut ok = true;
        let u = integrate_observed(&k, &Field::constant(g, 1.0), &cfg, |_, u| {
            ok &= u.iter().all(|&v| (0.0..=1.0).contains(&v));
        })
        .unwrap();
        assert!(ok);
        let v = complement(&k, g, &cfg).unwrap();
        let mid = g.center();
        assert!(v.values[mid] > 0.0 && v.values[mid] < 1e-20);
        // both forms agree where u carries information
        for i in 0..g.n() {
            assert!((1.0 - u.values[i] - v.values[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn complement_matches_adaptive() {
        let k = Kernel::critical_exp();
        let g = Grid::with_spacing(4.0, 0.05).unwrap();
        let cfg = SolveConfig::new(0.3);
        let a = complement(&k, g, &cfg).unwrap();
        let b = complement(&k, g, &cfg.adaptive(1e-10, 1e-300)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-7 * x.abs(), "{x} {y}");
        }
    }

    #[test]
    fn maximum_principle_and_comparison() {
        let k = Kernel::polynomial();
        let g = Grid::with_spacing(3.0, 0.05).unwrap();
        let u0 = Field::from_fn(g, |x| (0.5 + 0.5 * (3.0 * x).sin()).max(0.0) * (-x * x / 4.0).exp());
        let v0 = Field::new(g, u0.values.iter().map(|v| v + 0.3).collect(), 0.0).unwrap();
        let cfg = SolveConfig::new(1.0);
        let top = u0.max();
        let mut ok = true;
        let u = integrate_observed(&k, &u0, &cfg, |_, u| {
            ok &= u.iter().all(|&x| x >= 0.0 && x <= top);
        })
        .unwrap();
        assert!(ok);
        let v = integrate(&k, &v0, &cfg).unwrap();
        assert!(u.values.iter().zip(&v.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn monotone_in_r_and_decaying_in_t() {
        let k = Kernel::gaussian();
        let h = 1.0 / 16.0;
        let small = Grid::with_spacing(4.0, h).unwrap();
        let large = Grid::with_spacing(6.0, h).unwrap();
        let cfg = SolveConfig::new(0.5);
        let vs = complement(&k, small, &cfg).unwrap();
        let vl = complement(&k, large, &cfg).unwrap();
        let off = large.center() - small.center();
        for i in 0..small.n() {
            assert!(vl.values[i + off] <= vs.values[i], "{i}");
        }
        let mut prev: Option<Vec<f64>> = None;
        let mut ok = true;
        integrate_observed(&k, &Field::constant(small, 1.0), &cfg, |_, u| {
            if let Some(p) = &prev {
                ok &= u.iter().zip(p).all(|(a, b)| a <= b);
            }
            prev = Some(u.to_vec());
        })
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn reference_examples() {
        let k = Kernel::uniform(1.0).unwrap();
        let g = Grid::with_spacing(3.0, 1.0 / 16.0).unwrap();
        let cfg = SolveConfig::new(0.5);
        let ones = reference_solution(&k, &Field::constant(g, 1.0), &cfg, 2.0).unwrap();
        assert!(ones.field.values.iter().all(|&v| v == 1.0));
        assert!(ones.proxy_error.is_none());
        let zeros = reference_solution(&k, &Field::constant(g, 0.0), &cfg, 2.0).unwrap();
        assert!(zeros.field.values.iter().all(|&v| v == 0.0));
        assert!(reference_solution(&k, &Field::constant(g, 0.0), &cfg, 0.0).is_err());

        let bump = Field::from_fn(g, |x| if x.abs() < 1.0 { 1.0 } else { 0.0 });
        let mut prev = vec![f64::NEG_INFINITY; g.n()];
        for margin in [0.5, 1.0, 2.0, 4.0] {
            let r = reference_solution(&k, &bump, &cfg, margin).unwrap();
            assert!(r.field.values.iter().zip(&prev).all(|(a, b)| a >= b));
            let p = r.proxy_error.unwrap();
            assert!(p.bound > 0.0 && p.bound < 1.0);
            prev = r.field.values;
        }
    }

    #[test]
    fn instability_is_reported() {
        let k = Kernel::gaussian();
        let g = Grid::new(2.0, 41).unwrap();
        let mut gen = Generator::new(&k, g, Convolution::Direct).unwrap();
        let src = vec![1e3; g.n()];
        let mut u = vec![1.0; g.n()];
        let mut sys = System { gen: &mut gen, source: Some(&src) };
        let r = step::rk4(&mut sys, &mut u, 0.01, 10, 10.0, &mut |_, _| {});
        assert!(matches!(r, Err(Error::Instability { .. })));
    }
}
