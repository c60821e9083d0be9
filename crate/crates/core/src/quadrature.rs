//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Integrands here are vector valued (`[f64; N]`) so that a function and its
//! moments can share the same sample points and the same subdivision tree.
//! The interval with the largest error estimate is bisected until every
//! component meets `max(abs, rel * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

impl<const N: usize> Integral<N> {
    fn zero() -> Self {
        Integral {
            value: [0.0; N],
            error: [0.0; N],
            evaluations: 0,
        }
    }

    /// Sum of two integrals over adjacent ranges.
    pub fn join(mut self, other: Self) -> Self {
        for i in 0..N {
            self.value[i] += other.value[i];
            self.error[i] += other.error[i];
        }
        self.evaluations += other.evaluations;
        self
    }

    pub fn max_error(&self) -> f64 {
        self.error.iter().copied().fold(0.0, f64::max)
    }
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    // largest per-component error relative to its own tolerance
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        value[i] = k[i] * half;
        error[i] = ((k[i] - g[i]) * half).abs();
    }
    (value, error)
}

/// Integrates `f` over `[a, b]` (finite, `a <= b`).
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if a == b {
        return Ok(Integral::zero());
    }
    debug_assert!(a < b && a.is_finite() && b.is_finite());

    let target = |v: &[f64; N], i: usize| tol.abs.max(tol.rel * v[i].abs());
    let priority = |err: &[f64; N], v: &[f64; N]| {
        (0..N)
            .map(|i| err[i] / target(v, i))
            .fold(0.0, f64::max)
    };

    let (value, error) = kronrod(&f, a, b);
    let mut evaluations = 15;
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value,
        error,
        priority: priority(&error, &value),
    });

    let converged = |v: &[f64; N], e: &[f64; N]| (0..N).all(|i| e[i] <= target(v, i));

    while !converged(&total, &total_err) {
        if heap.len() >= tol.max_intervals {
            let (worst, requested) = (0..N)
                .map(|i| (total_err[i], target(&total, i)))
                .max_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)))
                .unwrap_or((f64::NAN, 0.0));
            return Err(Error::Quadrature {
                estimate: worst,
                requested,
            });
        }
        let seg = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // interval can no longer be split in f64; accept what we have
            heap.push(Segment {
                priority: 0.0,
                ..seg
            });
            if heap.iter().all(|s| s.priority == 0.0) {
                break;
            }
            continue;
        }
        let (lv, le) = kronrod(&f, seg.a, mid);
        let (rv, re) = kronrod(&f, mid, seg.b);
        evaluations += 30;
        for i in 0..N {
            total[i] += lv[i] + rv[i] - seg.value[i];
            total_err[i] += le[i] + re[i] - seg.error[i];
        }
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: lv,
            error: le,
            priority: priority(&le, &lv),
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: rv,
            error: re,
            priority: priority(&re, &rv),
        });
    }

    // Re-sum from the leaves; the running total accumulates rounding.
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for s in heap.iter() {
        for i in 0..N {
            value[i] += s.value[i];
            error[i] += s.error[i];
        }
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Integrates over consecutive panels `[p0, p1], [p1, p2], ...`.
pub fn integrate_panels<const N: usize, F>(f: F, breaks: &[f64], tol: &Tolerance) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let mut acc = Integral::zero();
    for w in breaks.windows(2) {
        acc = acc.join(integrate(&f, w[0], w[1], tol)?);
    }
    Ok(acc)
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let r = integrate(|x| [f(x)], a, b, tol)?;
    Ok((r.value[0], r.error[0]))
}
