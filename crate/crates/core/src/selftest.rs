//! Randomized invariant suites, runnable from the command line.
//!
//! Each suite draws its cases from a seeded generator, so a run is
//! reproducible from `(name, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{domain, h_value};
use crate::kernel::Kernel;
use crate::legendre::conjugate;
use crate::ratefn::rate;
use crate::solver::{complement, integrate, integrate_observed, Field, Grid, SolveConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// First failure, if any.
    pub detail: Option<String>,
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(msg());
            }
        }
    }

    fn error(&mut self, e: Error) {
        self.check(false, || e.to_string());
    }
}

type SuiteFn = fn(&mut ChaCha8Rng, &mut Tally) -> Result<()>;

const SUITES: &[(&str, SuiteFn)] = &[
    ("convexity", convexity),
    ("evenness", evenness),
    ("monotone_gradient", monotone_gradient),
    ("fenchel_young", fenchel_young),
    ("biconjugacy", biconjugacy),
    ("comparison", comparison),
    ("maximum_principle", maximum_principle),
    ("domain_monotonicity", domain_monotonicity),
    ("l_over_r_monotone", l_over_r_monotone),
    ("rate_boundary_zero", rate_boundary_zero),
    ("rate_monotone_t", rate_monotone_t),
    ("rate_monotone_x", rate_monotone_x),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteResult> {
    let (name, f) = SUITES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid("suite", format!("unknown suite {name:?}; known: {}", suite_names().join(", "))))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    if let Err(e) = f(&mut rng, &mut tally) {
        tally.error(e);
    }
    Ok(SuiteResult {
        name,
        passed: tally.failures == 0 && tally.checks > 0,
        checks: tally.checks,
        failures: tally.failures,
        detail: tally.first,
    })
}

pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(n, _)| run_suite(n, seed).expect("registered suite"))
        .collect()
}

fn hamiltonian_kernels() -> Vec<Kernel> {
    vec![
        Kernel::uniform(1.0).unwrap(),
        Kernel::polynomial(),
        Kernel::gaussian(),
        Kernel::stretched_exp(1.5).unwrap(),
        Kernel::critical_exp(),
        Kernel::singular_compact(0.5).unwrap(),
        Kernel::singular_compact(1.5).unwrap(),
    ]
}

fn solver_kernels() -> Vec<Kernel> {
    vec![
        Kernel::uniform(1.0).unwrap(),
        Kernel::polynomial(),
        Kernel::gaussian(),
        Kernel::critical_exp(),
    ]
}

fn draw_p(rng: &mut ChaCha8Rng, k: &Kernel) -> f64 {
    let lim = domain(k).p_max.min(6.0) * 0.95;
    rng.gen_range(-lim..lim)
}

fn draw_q(rng: &mut ChaCha8Rng) -> f64 {
    let mag = 10f64.powf(rng.gen_range(-2.0..4.0));
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}

fn convexity(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..8 {
            let (a, b) = (draw_p(rng, &k), draw_p(rng, &k));
            let (ha, hb, hm) = (h_value(&k, a)?.value, h_value(&k, b)?.value, h_value(&k, 0.5 * (a + b))?.value);
            let avg = 0.5 * (ha + hb);
            t.check(hm <= avg + 1e-9 * scale(avg), || format!("{k}: H not convex on [{a}, {b}]"));
            let (qa, qb) = (draw_q(rng), draw_q(rng));
            let (la, lb, lm) = (conjugate(&k, qa)?.value, conjugate(&k, qb)?.value, conjugate(&k, 0.5 * (qa + qb))?.value);
            let avg = 0.5 * (la + lb);
            t.check(lm <= avg + 1e-9 * scale(avg), || format!("{k}: L not convex on [{qa}, {qb}]"));
        }
    }
    Ok(())
}

fn evenness(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..8 {
            let p = draw_p(rng, &k);
            let (a, b) = (h_value(&k, p)?.value, h_value(&k, -p)?.value);
            t.check((a - b).abs() <= 1e-12 * scale(a), || format!("{k}: H({p}) = {a} vs H(-p) = {b}"));
            let q = draw_q(rng);
            let (a, b) = (conjugate(&k, q)?.value, conjugate(&k, -q)?.value);
            t.check((a - b).abs() <= 1e-12 * scale(a), || format!("{k}: L({q}) = {a} vs L(-q) = {b}"));
        }
    }
    Ok(())
}

fn monotone_gradient(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..8 {
            let (a, b) = (draw_p(rng, &k), draw_p(rng, &k));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (da, db) = (h_value(&k, lo)?.deriv, h_value(&k, hi)?.deriv);
            t.check(db >= da - 1e-10 * scale(da), || format!("{k}: H'({lo}) = {da} > H'({hi}) = {db}"));
            t.check(h_value(&k, hi)?.second >= 0.0, || format!("{k}: H''({hi}) < 0"));
        }
    }
    Ok(())
}

fn fenchel_young(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let ks = hamiltonian_kernels();
    for i in 0..200 {
        let k = &ks[i % ks.len()];
        let (p, q) = (draw_p(rng, k), draw_q(rng));
        let gap = h_value(k, p)?.value + conjugate(k, q)?.value - p * q;
        t.check(gap >= -1e-9 * scale(p * q), || format!("{k}: H({p}) + L({q}) - pq = {gap}"));
    }
    Ok(())
}

/// `sup_q (p q - L(q))` by golden section on the concave objective.
fn biconjugate(k: &Kernel, p: f64) -> Result<f64> {
    // both sides are even, and for p >= 0 the sup is over q >= 0
    let p = p.abs();
    let f = |q: f64| -> Result<f64> { Ok(p * q - conjugate(k, q)?.value) };
    let (mut a, mut b) = (0.0, 2.0 * h_value(k, p)?.deriv + 1.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-10 * scale(b) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(fc.max(fd))
}

fn biconjugacy(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..3 {
            let p = draw_p(rng, &k).clamp(-3.0, 3.0);
            let h = h_value(&k, p)?.value;
            let hh = biconjugate(&k, p)?;
            t.check((h - hh).abs() <= 1e-6 * scale(h), || format!("{k}: H({p}) = {h}, H**(p) = {hh}"));
        }
    }
    Ok(())
}

fn random_datum(rng: &mut ChaCha8Rng, g: Grid) -> Field {
    let (a, b, c) = (rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0), rng.gen_range(0.2..1.0));
    Field::from_fn(g, |x| c * (0.5 + 0.5 * (a * x + b).sin()))
}

fn comparison(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in solver_kernels() {
        let g = Grid::with_spacing(3.0, 1.0 / 16.0)?;
        let u0 = random_datum(rng, g);
        let v0 = Field::new(g, u0.values.iter().map(|v| v + 0.3).collect(), 0.0)?;
        let cfg = SolveConfig::new(0.5);
        let (u, v) = (integrate(&k, &u0, &cfg)?, integrate(&k, &v0, &cfg)?);
        let worst = u.values.iter().zip(&v.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        t.check(worst <= 0.0, || format!("{k}: u - v reaches {worst}"));
    }
    Ok(())
}

fn maximum_principle(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in solver_kernels() {
        let g = Grid::with_spacing(3.0, 1.0 / 16.0)?;
        let u0 = random_datum(rng, g);
        let top = u0.max();
        let mut bad = None;
        integrate_observed(&k, &u0, &SolveConfig::new(0.5), |time, u| {
            if bad.is_none() {
                if let Some(v) = u.iter().find(|&&v| v < 0.0 || v > top) {
                    bad = Some(format!("{k}: value {v} outside [0, {top}] at t = {time}"));
                }
            }
        })?;
        t.check(bad.is_none(), || bad.unwrap_or_default());
    }
    Ok(())
}

fn domain_monotonicity(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in solver_kernels() {
        let h = 1.0 / 16.0;
        let r1 = rng.gen_range(2.0..4.0f64).round();
        let (g1, g2) = (Grid::with_spacing(r1, h)?, Grid::with_spacing(r1 + 1.0, h)?);
        let cfg = SolveConfig::new(0.3);
        let (v1, v2) = (complement(&k, g1, &cfg)?, complement(&k, g2, &cfg)?);
        let off = g2.center() - g1.center();
        let ok = (0..g1.n()).all(|i| v2.values[i + off] <= v1.values[i]);
        t.check(ok, || format!("{k}: 1 - u_R not decreasing in R at R = {r1}"));
    }
    Ok(())
}

fn l_over_r_monotone(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..6 {
            let c = 10f64.powf(rng.gen_range(-1.0..2.0));
            let r1 = 10f64.powf(rng.gen_range(-1.0..2.0));
            let r2 = r1 * rng.gen_range(1.01..10.0);
            let a = conjugate(&k, c * r1)?.value / r1;
            let b = conjugate(&k, c * r2)?.value / r2;
            t.check(b >= a - 1e-10 * scale(a), || format!("{k}: L({c} r)/r drops from {a} to {b} between r = {r1} and {r2}"));
        }
    }
    Ok(())
}

fn rate_boundary_zero(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        let time = 10f64.powf(rng.gen_range(-3.0..1.0));
        for x in [-1.0, 1.0] {
            let v = rate(&k, x, time)?;
            t.check(v == 0.0, || format!("{k}: I({x}, {time}) = {v}"));
        }
    }
    Ok(())
}

fn rate_monotone_t(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..4 {
            let x = rng.gen_range(-0.99..0.99);
            let t1 = 10f64.powf(rng.gen_range(-3.0..1.0));
            let t2 = t1 * rng.gen_range(1.01..10.0);
            let (a, b) = (rate(&k, x, t1)?, rate(&k, x, t2)?);
            t.check(b <= a + 1e-10 * scale(a), || format!("{k}: I({x}, t) grows from {a} to {b} for t {t1} -> {t2}"));
        }
    }
    Ok(())
}

fn rate_monotone_x(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for k in hamiltonian_kernels() {
        for _ in 0..4 {
            let time = 10f64.powf(rng.gen_range(-3.0..1.0));
            let (a, b) = (rng.gen_range(0.0..1.0f64), rng.gen_range(0.0..1.0f64));
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let (ia, ib) = (rate(&k, sign * near, time)?, rate(&k, -sign * far, time)?);
            t.check(ib <= ia + 1e-10 * scale(ia), || format!("{k}: I grows with |x| from {near} to {far} at t = {time}"));
        }
    }
    Ok(())
}
