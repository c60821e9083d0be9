use crate::error::{Error, Result};
use crate::kernel::Kernel;

use super::grid::Grid;

/// Offsets beyond this many nodes are dropped from infinite-support kernels.
const MAX_TAIL: usize = 10_000_000;

/// Kernel sampled at node offsets `m h`, `m = 0, 1, ...`.
///
/// A compact kernel whose support radius falls on a node gets half its inner
/// limit there (the midpoint of the jump), which keeps the trapezoid rule
/// second order for discontinuous kernels.
#[derive(Clone, Debug)]
pub struct Stencil {
    h: f64,
    samples: Vec<f64>,
    // suffix[m] = Σ_{m' >= m} samples[m']
    suffix: Vec<f64>,
    edge: Option<(usize, f64)>,
}

impl Stencil {
    pub fn new(k: &Kernel, grid: &Grid) -> Result<Self> {
        if k.is_singular() {
            return Err(Error::UnsupportedKernel {
                family: k.tag().into(),
                reason: "kernels singular at the origin need the compensated generator; only their Hamiltonian is implemented".into(),
            });
        }
        let h = grid.h();
        if k.is_compact() && h > k.support_radius() / 8.0 {
            return Err(Error::Resolution {
                h,
                max_h: k.support_radius() / 8.0,
            });
        }
        let mut samples = Vec::with_capacity(grid.n());
        let sample = |m: usize| {
            let y = m as f64 * h;
            if k.is_compact() {
                let r = k.support_radius();
                if (y - r).abs() <= 1e-9 * h {
                    return 0.5 * k.edge_value();
                }
            }
            k.density(y)
        };
        let mut edge = None;
        if k.is_compact() {
            let m = (k.support_radius() / h).round();
            if (m * h - k.support_radius()).abs() <= 1e-9 * h && k.edge_value() != 0.0 {
                edge = Some((m as usize, k.edge_value()));
            }
        }
        let mut m = 0;
        loop {
            let v = sample(m);
            let past_support = m as f64 * h > k.support_radius() + h;
            if (v == 0.0 && (past_support || !k.is_compact()) && m > 0) || m >= MAX_TAIL {
                break;
            }
            samples.push(v);
            m += 1;
        }
        // conv needs offsets up to n - 1 even if they are zero
        if samples.len() < grid.n() {
            samples.resize(grid.n(), 0.0);
        }
        let mut suffix = vec![0.0; samples.len() + 1];
        for i in (0..samples.len()).rev() {
            suffix[i] = suffix[i + 1] + samples[i];
        }
        Ok(Stencil { h, samples, suffix, edge })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `samples[m] = J(m h)` (with the edge convention).
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, m: usize) -> f64 {
        self.samples.get(m).copied().unwrap_or(0.0)
    }

    /// Largest offset with a nonzero sample, capped at `limit`.
    pub fn band(&self, limit: usize) -> usize {
        let end = self.samples.len().min(limit + 1);
        self.samples[..end]
            .iter()
            .rposition(|&v| v != 0.0)
            .unwrap_or(0)
    }

    /// Trapezoid mass of the kernel over the whole lattice, `h Σ_{m∈Z} J(m h)`.
    pub fn lattice_mass(&self) -> f64 {
        self.h * (self.samples[0] + 2.0 * self.suffix[1])
    }

    /// Offset and one-sided value of a support edge that falls on a node.
    pub fn edge(&self) -> Option<(usize, f64)> {
        self.edge
    }

    /// `h (J(d h)/2 + Σ_{m > d} J(m h))`: the trapezoid mass of jumps from a
    /// node at distance `d h` from one end of the grid to outside it.
    ///
    /// When the support edge sits exactly on the grid end (`d h = η`) the
    /// window lies entirely inside and the result is `0`; see
    /// [`Stencil::edge_correction`].
    pub fn exterior_mass(&self, d: usize) -> f64 {
        if d >= self.samples.len() {
            return 0.0;
        }
        if self.edge.is_some_and(|(m, _)| m == d) {
            return self.h * self.suffix[d + 1];
        }
        self.h * (0.5 * self.samples[d] + self.suffix[d + 1])
    }

    /// Extra weight for an end node seen from distance `η`.
    ///
    /// The domain end contributes with trapezoid weight `1/2` and the kernel
    /// sample there is the jump midpoint `J(η⁻)/2`, giving `J(η⁻)/4`. But the
    /// integrand on `[x_i - η, R]` is smooth up to both ends, so the right
    /// weight is `J(η⁻)/2`; without this the error is `O(h)` at `|x| = R - η`.
    pub fn edge_correction(&self) -> Option<f64> {
        self.edge.map(|(_, e)| 0.25 * self.h * e)
    }
}
