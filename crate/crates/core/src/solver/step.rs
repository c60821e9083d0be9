use crate::error::{Error, Result};

use super::convolve::Generator;

/// Right-hand side `u' = A u + s` where `A` is the discrete generator and `s`
/// an optional constant source.
pub(crate) struct System<'a> {
    pub gen: &'a mut Generator,
    pub source: Option<&'a [f64]>,
}

impl System<'_> {
    fn eval(&mut self, u: &[f64], out: &mut [f64]) {
        self.gen.apply(u, out);
        if let Some(s) = self.source {
            for (o, v) in out.iter_mut().zip(s) {
                *o += v;
            }
        }
    }
}

fn axpy(out: &mut [f64], u: &[f64], terms: &[(f64, &[f64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut v = u[i];
        for (c, k) in terms {
            v += c * k[i];
        }
        *o = v;
    }
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check(u: &[f64], limit: f64, time: f64) -> Result<()> {
    let norm = sup(u);
    if !norm.is_finite() || norm > limit {
        return Err(Error::Instability { norm, limit, time });
    }
    Ok(())
}

/// Explicit Euler, kept for hand-checkable tests.
pub(crate) fn euler(sys: &mut System, u: &mut [f64], dt: f64) {
    let mut k = vec![0.0; u.len()];
    sys.eval(u, &mut k);
    for (v, d) in u.iter_mut().zip(&k) {
        *v += dt * d;
    }
}

/// Classical RK4 with `steps` equal steps of size `dt`.
pub(crate) fn rk4(
    sys: &mut System,
    u: &mut [f64],
    dt: f64,
    steps: usize,
    limit: f64,
    observe: &mut dyn FnMut(f64, &[f64]),
) -> Result<()> {
    let n = u.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for s in 0..steps {
        sys.eval(u, &mut k1);
        axpy(&mut tmp, u, &[(0.5 * dt, &k1)]);
        sys.eval(&tmp, &mut k2);
        axpy(&mut tmp, u, &[(0.5 * dt, &k2)]);
        sys.eval(&tmp, &mut k3);
        axpy(&mut tmp, u, &[(dt, &k3)]);
        sys.eval(&tmp, &mut k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let t = (s + 1) as f64 * dt;
        check(u, limit, t)?;
        observe(t, u);
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub last_dt: f64,
}

/// Dormand-Prince 5(4) with the usual mixed error norm
/// `max_i |err_i| / (atol + rtol max(|u_i|, |u_new_i|))`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dopri5(
    sys: &mut System,
    u: &mut [f64],
    t_final: f64,
    rtol: f64,
    atol: f64,
    dt0: f64,
    limit: f64,
    observe: &mut dyn FnMut(f64, &[f64]),
) -> Result<AdaptiveStats> {
    let n = u.len();
    let mut ks: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut tmp = vec![0.0; n];
    let mut t = 0.0;
    let mut dt = dt0.min(t_final);
    let mut stats = AdaptiveStats { accepted: 0, rejected: 0, last_dt: dt };
    sys.eval(u, &mut ks[0]);
    while t < t_final {
        if t + dt > t_final {
            dt = t_final - t;
        }
        for s in 1..7 {
            let (done, rest) = ks.split_at_mut(s);
            for i in 0..n {
                let mut v = u[i];
                for (a, k) in A[s].iter().zip(done.iter()) {
                    v += dt * a * k[i];
                }
                tmp[i] = v;
            }
            sys.eval(&tmp, &mut rest[0]);
        }
        // FSAL: tmp holds the fifth-order solution, ks[6] its derivative
        let mut err = 0.0f64;
        for i in 0..n {
            let e: f64 = dt * (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>();
            let scale = atol + rtol * u[i].abs().max(tmp[i].abs());
            err = err.max(e.abs() / scale);
        }
        if err <= 1.0 {
            t += dt;
            u.copy_from_slice(&tmp);
            let last = ks[6].clone();
            ks[0].copy_from_slice(&last);
            stats.accepted += 1;
            stats.last_dt = dt;
            check(u, limit, t)?;
            observe(t, u);
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        dt *= factor;
        if dt < 1e-14 * t_final.max(1.0) {
            return Err(Error::Instability {
                norm: sup(u),
                limit,
                time: t,
            });
        }
    }
    Ok(stats)
}
