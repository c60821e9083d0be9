use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

use super::grid::{Field, Grid};
use super::stencil::Stencil;

/// How the trapezoid sum `h Σ_j w_j J(x_i - x_j) f_j` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Convolution {
    /// Banded direct sum. Exact up to roundoff relative to each term, which
    /// matters for the deviation solve where values span hundreds of decades.
    #[default]
    Direct,
    /// Circular FFT on a padded buffer. Errors are absolute (about 1e-16 times
    /// the largest value), so tiny values are not resolved.
    FastTransform,
}

impl std::str::FromStr for Convolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Convolution::Direct),
            "fft" | "fast" | "fasttransform" => Ok(Convolution::FastTransform),
            other => Err(Error::invalid(
                "convolution",
                format!("expected direct or fft, got {other:?}"),
            )),
        }
    }
}

struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl FftPlan {
    fn new(stencil: &Stencil, n: usize) -> Self {
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        // symmetric circular layout: c[m] = c[len - m] = J(m h), |m| < n
        let mut spectrum = vec![Complex::new(0.0, 0.0); len];
        for m in 0..n {
            let v = stencil.get(m);
            spectrum[m].re = v;
            if m > 0 {
                spectrum[len - m].re = v;
            }
        }
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        forward.process_with_scratch(&mut spectrum, &mut scratch);
        FftPlan {
            len,
            forward,
            inverse,
            spectrum,
            buf: vec![Complex::new(0.0, 0.0); len],
            scratch,
        }
    }
}

/// The interior part of the generator on a fixed grid, precomputed once.
///
/// With `m_h` the lattice mass of the sampled kernel, the semi-discrete
/// Dirichlet problem is `u' = C u - m_h u`, where `C` is the trapezoid
/// convolution restricted to the grid. Using `m_h` rather than the exact mass
/// makes constants on the whole lattice exactly stationary, so the discrete
/// maximum principle holds without an `O(h²)` drift.
pub struct Generator {
    grid: Grid,
    stencil: Stencil,
    band: usize,
    method: Convolution,
    fft: Option<FftPlan>,
    weighted: Vec<f64>,
}

impl Generator {
    pub fn new(k: &Kernel, grid: Grid, method: Convolution) -> Result<Self> {
        let stencil = Stencil::new(k, &grid)?;
        let band = stencil.band(grid.n() - 1);
        let fft = (method == Convolution::FastTransform).then(|| FftPlan::new(&stencil, grid.n()));
        Ok(Generator {
            grid,
            stencil,
            band,
            method,
            fft,
            weighted: vec![0.0; grid.n()],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn method(&self) -> Convolution {
        self.method
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// `m_h`.
    pub fn lattice_mass(&self) -> f64 {
        self.stencil.lattice_mass()
    }

    /// Rate at which node `i` jumps out of the grid: `m_h - (C 1)_i`.
    pub fn exterior_rates(&self) -> Vec<f64> {
        let n = self.grid.n();
        (0..n)
            .map(|i| self.stencil.exterior_mass(i) + self.stencil.exterior_mass(n - 1 - i))
            .collect()
    }

    /// `out = C f`.
    pub fn convolve_into(&mut self, f: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        assert_eq!(f.len(), n);
        assert_eq!(out.len(), n);
        for (i, (w, v)) in self.weighted.iter_mut().zip(f).enumerate() {
            *w = self.grid.weight(i) * v;
        }
        let h = self.grid.h();
        match self.method {
            Convolution::Direct => {
                let k = self.stencil.samples();
                let wf = &self.weighted;
                let band = self.band;
                for (i, o) in out.iter_mut().enumerate() {
                    let lo = i.saturating_sub(band);
                    let hi = (i + band).min(n - 1);
                    let left: f64 = wf[lo..=i].iter().rev().zip(k).map(|(a, b)| a * b).sum();
                    let right: f64 = wf[i + 1..=hi].iter().zip(&k[1..]).map(|(a, b)| a * b).sum();
                    *o = h * (left + right);
                }
            }
            Convolution::FastTransform => {
                let plan = self.fft.as_mut().expect("fft plan");
                for (b, w) in plan.buf.iter_mut().zip(self.weighted.iter().chain(std::iter::repeat(&0.0))) {
                    *b = Complex::new(*w, 0.0);
                }
                plan.forward.process_with_scratch(&mut plan.buf, &mut plan.scratch);
                for (b, s) in plan.buf.iter_mut().zip(&plan.spectrum) {
                    *b *= s;
                }
                plan.inverse.process_with_scratch(&mut plan.buf, &mut plan.scratch);
                let scale = h / plan.len as f64;
                for (o, b) in out.iter_mut().zip(&plan.buf) {
                    *o = b.re * scale;
                }
            }
        }
        if let (Some((m, _)), Some(c)) = (self.stencil.edge(), self.stencil.edge_correction()) {
            if m < n {
                out[m] += c * f[0];
                out[n - 1 - m] += c * f[n - 1];
            }
        }
    }

    /// `out = C u - m_h u`.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        self.convolve_into(u, out);
        let m = self.lattice_mass();
        for (o, v) in out.iter_mut().zip(u) {
            *o -= m * v;
        }
    }
}

/// `(J * f)(x_i) ≈ h Σ_j w_j J(x_i - x_j) f_j` with zero extension outside the grid.
pub fn convolve(k: &Kernel, f: &Field) -> Result<Field> {
    convolve_with(k, f, Convolution::Direct)
}

pub fn convolve_with(k: &Kernel, f: &Field, method: Convolution) -> Result<Field> {
    let mut g = Generator::new(k, f.grid, method)?;
    let mut out = vec![0.0; f.grid.n()];
    g.convolve_into(&f.values, &mut out);
    Ok(Field {
        grid: f.grid,
        values: out,
        time: f.time,
    })
}
