use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Uniform grid on `[-R, R]` with an odd number of nodes, so `x = 0` is a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    #[serde(rename = "R")]
    r: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(r: f64, n: usize) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("R", format!("must be positive, got {r}")));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::invalid("n", format!("need an odd node count >= 3, got {n}")));
        }
        Ok(Grid {
            r,
            n,
            h: 2.0 * r / (n - 1) as f64,
        })
    }

    /// Finest grid with spacing at most `h`.
    pub fn with_spacing(r: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        let half = (r / h - 1e-9).ceil().max(1.0) as usize;
        Grid::new(r, 2 * half + 1)
    }

    /// Default resolution: `h <= min(η/16, R/512)` for compact kernels (snapped
    /// so the support radius falls on a node when possible), `R/1024` otherwise.
    pub fn default_for(k: &Kernel, r: f64) -> Result<Self> {
        if !k.is_compact() {
            return Grid::new(r, 2 * 1024 + 1);
        }
        let eta = k.support_radius();
        let target = (eta / 16.0).min(r / 512.0);
        let first = (r / target - 1e-9).ceil().max(1.0) as usize;
        let aligned = (first..=2 * first).find(|&half| {
            let m = eta * half as f64 / r;
            (m - m.round()).abs() <= 1e-9 * m.max(1.0)
        });
        Grid::new(r, 2 * aligned.unwrap_or(first) + 1)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Index of the centre node `x = 0`.
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        let m = self.center();
        if i == 0 {
            -self.r
        } else if i == self.n - 1 {
            self.r
        } else {
            (i as f64 - m as f64) * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i` (without the factor `h`).
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5
        } else {
            1.0
        }
    }

    /// Index range of nodes with `|x| <= radius`.
    pub fn inner(&self, radius: f64) -> std::ops::RangeInclusive<usize> {
        let m = self.center();
        let k = ((radius / self.h) + 1e-9).floor() as usize;
        let k = k.min(m);
        (m - k)..=(m + k)
    }

    /// Same spacing, extended by at least `margin` on each side.
    pub fn enlarged(&self, margin: f64) -> Result<Self> {
        let extra = (margin / self.h - 1e-9).ceil().max(0.0) as usize;
        let half = self.center() + extra;
        Ok(Grid {
            r: half as f64 * self.h,
            n: 2 * half + 1,
            h: self.h,
        })
    }
}

/// Samples on a [`Grid`] at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(
                "values",
                format!("length {} does not match grid size {}", values.len(), grid.n()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite sample {v}")));
        }
        Ok(Field { grid, values, time })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n()],
            time: 0.0,
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Self {
        Field {
            grid,
            values: (0..grid.n()).map(|i| f(grid.x(i))).collect(),
            time: 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Value at the node nearest to `x`.
    pub fn at(&self, x: f64) -> f64 {
        let i = ((x + self.grid.r()) / self.grid.h()).round();
        let i = (i.max(0.0) as usize).min(self.grid.n() - 1);
        self.values[i]
    }
}
