//! Jump densities `J`.
//!
//! All kernels are one-dimensional, non-negative and even. Built-in families
//! are kept exactly as written (no renormalization): `StretchedExp` has mass
//! `2 Γ(1 + 1/α)`, and the solver works with the generator
//! `∫ (u(y) - u(x)) J(x - y) dy`, which coincides with `J * u - u` for unit
//! mass. A kernel of mass `c` is equivalent to a unit-mass kernel run with
//! time rescaled by `c`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `1/(2η)` on `|y| < η`.
    UniformCompact { eta: f64 },
    /// `-(3/32)(y - 2)(y + 2)` on `[-2, 2]`.
    PolynomialCompact,
    /// Standard normal density.
    Gaussian,
    /// `exp(-|y|^α)`, `α > 1`, unnormalized.
    StretchedExp { alpha: f64 },
    /// `exp(-|y|) / 2`.
    CriticalExp,
    /// `|y|^(-1-α)` on `[-1, 1]`, `0 < α < 2`.
    SingularCompact { alpha: f64 },
    /// Linear interpolation of a user table.
    Custom(Arc<CustomTable>),
}

/// Tabulated kernel on `y >= 0`, evaluated at `|y|`.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomTable {
    ys: Vec<f64>,
    values: Vec<f64>,
    /// Exponential decay rate of the tail if known; bounds where `H` is finite.
    pub decay_rate: Option<f64>,
}

impl CustomTable {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ys.iter().copied().zip(self.values.iter().copied())
    }

    fn interpolate(&self, y: f64) -> f64 {
        let ys = &self.ys;
        if y <= ys[0] {
            return self.values[0];
        }
        let last = ys.len() - 1;
        if y >= ys[last] {
            return self.values[last];
        }
        // first index with ys[i] > y
        let i = ys.partition_point(|&t| t <= y);
        let (y0, y1) = (ys[i - 1], ys[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (y - y0) / (y1 - y0)
    }

    /// Exact integral of the interpolant over the whole line, restricted to
    /// `|y| <= support`.
    fn mass(&self, support: f64) -> f64 {
        let mut knots: Vec<(f64, f64)> = vec![(0.0, self.interpolate(0.0))];
        knots.extend(self.points().filter(|&(y, _)| y > 0.0 && y < support));
        if support.is_finite() {
            knots.push((support, self.interpolate(support)));
        }
        let half: f64 = knots
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum();
        2.0 * half
    }
}

/// A jump density with its declared support, singularity order and mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    family: Family,
    support_radius: f64,
    singularity_order: f64,
    mass: f64,
}

impl Kernel {
    pub fn uniform(eta: f64) -> Result<Self> {
        positive("eta", eta)?;
        Ok(Kernel {
            family: Family::UniformCompact { eta },
            support_radius: eta,
            singularity_order: 0.0,
            mass: 1.0,
        })
    }

    pub fn polynomial() -> Self {
        Kernel {
            family: Family::PolynomialCompact,
            support_radius: 2.0,
            singularity_order: 0.0,
            mass: 1.0,
        }
    }

    pub fn gaussian() -> Self {
        Kernel {
            family: Family::Gaussian,
            support_radius: f64::INFINITY,
            singularity_order: 0.0,
            mass: 1.0,
        }
    }

    pub fn stretched_exp(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("stretched exponent must exceed 1, got {alpha}")));
        }
        Ok(Kernel {
            family: Family::StretchedExp { alpha },
            support_radius: f64::INFINITY,
            singularity_order: 0.0,
            mass: 2.0 * libm::tgamma(1.0 + 1.0 / alpha),
        })
    }

    pub fn critical_exp() -> Self {
        Kernel {
            family: Family::CriticalExp,
            support_radius: f64::INFINITY,
            singularity_order: 0.0,
            mass: 1.0,
        }
    }

    pub fn singular_compact(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid("alpha", format!("Lévy order must lie in (0, 2), got {alpha}")));
        }
        Ok(Kernel {
            family: Family::SingularCompact { alpha },
            support_radius: 1.0,
            singularity_order: alpha,
            mass: f64::INFINITY,
        })
    }

    /// Builds a tabulated kernel. Rows with `y < 0` are folded onto `|y|` and
    /// must agree with the mirrored rows.
    pub fn custom(
        rows: &[(f64, f64)],
        support_radius: f64,
        singularity_order: f64,
        decay_rate: Option<f64>,
    ) -> Result<Self> {
        positive("support", support_radius)?;
        if !support_radius.is_finite() {
            return Err(Error::invalid("support", "tabulated kernels need a finite support radius"));
        }
        if !(singularity_order >= 0.0 && singularity_order < 2.0) {
            return Err(Error::invalid("singularity", "order must lie in [0, 2)"));
        }
        if let Some(d) = decay_rate {
            positive("decay", d)?;
        }
        let mut half: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        for &(y, v) in rows {
            if !y.is_finite() || !v.is_finite() || v < 0.0 {
                return Err(Error::invalid("table", format!("bad row ({y}, {v})")));
            }
            half.push((y.abs(), v));
        }
        half.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(half.len());
        for (y, v) in half {
            match merged.last() {
                Some(&(py, pv)) if py == y => {
                    if (pv - v).abs() > 1e-12 * pv.abs().max(v.abs()).max(1e-300) {
                        return Err(Error::invalid(
                            "table",
                            format!("asymmetric values at |y| = {y}: {pv} vs {v}"),
                        ));
                    }
                }
                _ => merged.push((y, v)),
            }
        }
        if merged.len() < 2 {
            return Err(Error::invalid("table", "need at least two distinct |y| values"));
        }
        let table = CustomTable {
            ys: merged.iter().map(|r| r.0).collect(),
            values: merged.iter().map(|r| r.1).collect(),
            decay_rate,
        };
        let mass = if singularity_order > 0.0 {
            f64::INFINITY
        } else {
            table.mass(support_radius)
        };
        if !(mass > 0.0) {
            return Err(Error::invalid("table", "kernel has zero mass"));
        }
        Ok(Kernel {
            family: Family::Custom(Arc::new(table)),
            support_radius,
            singularity_order,
            mass,
        })
    }

    /// Loads a two-column `y,J` CSV whose first line is
    /// `# support=<r> singularity=<s>` (optionally `decay=<rate>`).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let header = text
            .lines()
            .next()
            .and_then(|l| l.trim().strip_prefix('#'))
            .ok_or_else(|| parse_err("first line must be `# support=<r> singularity=<s>`".into()))?;
        let (mut support, mut singularity, mut decay) = (None, 0.0, None);
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value in header, got `{tok}`")))?;
            let v: f64 = parse_real(v).ok_or_else(|| parse_err(format!("bad number for {k}: `{v}`")))?;
            match k {
                "support" => support = Some(v),
                "singularity" => singularity = v,
                "decay" => decay = Some(v),
                _ => return Err(parse_err(format!("unknown header key `{k}`"))),
            }
        }
        let support = support.ok_or_else(|| parse_err("header lacks support=<r>".into()))?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            if rec.len() != 2 {
                return Err(parse_err(format!("row {}: expected 2 columns", line + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(y), Ok(v)) => rows.push((y, v)),
                // a textual column header such as `y,J`
                _ if rows.is_empty() => continue,
                _ => return Err(parse_err(format!("row {}: not numeric", line + 1))),
            }
        }
        Kernel::custom(&rows, support, singularity, decay)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn singularity_order(&self) -> f64 {
        self.singularity_order
    }

    pub fn is_singular(&self) -> bool {
        self.singularity_order > 0.0
    }

    pub fn is_compact(&self) -> bool {
        self.support_radius.is_finite()
    }

    /// `∫ J`, `+∞` for kernels singular at the origin.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Short family tag, e.g. `uniform`.
    pub fn tag(&self) -> &'static str {
        match self.family {
            Family::UniformCompact { .. } => "uniform",
            Family::PolynomialCompact => "polynomial",
            Family::Gaussian => "gaussian",
            Family::StretchedExp { .. } => "stretched",
            Family::CriticalExp => "critical",
            Family::SingularCompact { .. } => "singular",
            Family::Custom(_) => "custom",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.family {
            Family::UniformCompact { eta } => vec![("eta", *eta)],
            Family::StretchedExp { alpha } | Family::SingularCompact { alpha } => vec![("alpha", *alpha)],
            Family::Custom(t) => {
                let mut p = vec![("support", self.support_radius), ("singularity", self.singularity_order)];
                if let Some(d) = t.decay_rate {
                    p.push(("decay", d));
                }
                p
            }
            _ => Vec::new(),
        }
    }

    /// `J(y)`. Fails at `y = 0` for kernels singular at the origin.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if self.is_singular() && y == 0.0 {
            return Err(Error::invalid(
                "y",
                format!("{} kernel is singular at the origin", self.tag()),
            ));
        }
        Ok(self.density(y))
    }

    /// `J(y)` without the origin check (returns `+∞` there for singular kernels).
    pub fn density(&self, y: f64) -> f64 {
        let a = y.abs();
        if a > self.support_radius {
            return 0.0;
        }
        match &self.family {
            Family::UniformCompact { eta } => {
                if a < *eta {
                    0.5 / eta
                } else {
                    0.0
                }
            }
            Family::PolynomialCompact => {
                if a < 2.0 {
                    -(3.0 / 32.0) * (a - 2.0) * (a + 2.0)
                } else {
                    0.0
                }
            }
            Family::Gaussian => (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Family::StretchedExp { alpha } => (-a.powf(*alpha)).exp(),
            Family::CriticalExp => 0.5 * (-a).exp(),
            Family::SingularCompact { alpha } => {
                if a == 0.0 {
                    f64::INFINITY
                } else {
                    a.powf(-1.0 - alpha)
                }
            }
            Family::Custom(t) => t.interpolate(a),
        }
    }

    /// `lim J(y)` as `|y|` increases to the support radius (0 for infinite support).
    pub fn edge_value(&self) -> f64 {
        if !self.is_compact() {
            return 0.0;
        }
        let r = self.support_radius;
        match &self.family {
            Family::UniformCompact { eta } => 0.5 / eta,
            Family::PolynomialCompact => 0.0,
            Family::SingularCompact { .. } => 1.0,
            Family::Custom(t) => t.interpolate(r),
            _ => self.density(r),
        }
    }

    /// `ln J(y)` for `y > 0` inside the support, used to place quadrature
    /// truncation points for infinite-support kernels.
    pub(crate) fn log_density(&self, y: f64) -> f64 {
        match &self.family {
            Family::Gaussian => -0.5 * y * y - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            Family::StretchedExp { alpha } => -y.powf(*alpha),
            Family::CriticalExp => -y - std::f64::consts::LN_2,
            _ => self.density(y).ln(),
        }
    }

    /// Location `y >= 0` of the maximum of `p y + ln J(y)` for `p >= 0`.
    pub(crate) fn tilted_peak(&self, p: f64) -> f64 {
        match &self.family {
            Family::Gaussian => p,
            Family::StretchedExp { alpha } => (p / alpha).powf(1.0 / (alpha - 1.0)),
            Family::CriticalExp => 0.0,
            _ if self.is_compact() => self.support_radius,
            _ => 0.0,
        }
    }

    /// Human readable label such as `uniform(eta=1)`.
    pub fn label(&self) -> String {
        let params = self.params();
        if params.is_empty() {
            self.tag().to_string()
        } else {
            let inner: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{}({})", self.tag(), inner.join(","))
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for Kernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        t => t.parse().ok(),
    }
}

/// Parses `family[:key=value,...]`, e.g. `uniform:eta=1`, `stretched:alpha=2`,
/// `singular:alpha=0.5`, `custom:path=kernel.csv`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut kv = Vec::new();
        for tok in rest.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::invalid("kernel", format!("expected key=value, got `{tok}`")))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| -> Result<Option<f64>> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| {
                    parse_real(v).ok_or_else(|| Error::invalid("kernel", format!("bad number for {key}: `{v}`")))
                })
                .transpose()
        };
        let require = |key: &str| -> Result<f64> {
            get(key)?.ok_or_else(|| Error::invalid("kernel", format!("`{name}` needs {key}=<value>")))
        };
        if name == "fractional" {
            return Err(Error::UnsupportedKernel {
                family: "fractional".into(),
                reason: "|y|^(-1-α) on the whole line has H(p) = +∞ for every p ≠ 0".into(),
            });
        }
        let allowed: &[&str] = match name {
            "uniform" => &["eta"],
            "stretched" | "singular" => &["alpha"],
            "custom" => &["path"],
            _ => &[],
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid("kernel", format!("`{name}` takes no parameter `{k}`")));
        }
        match name {
            "uniform" => Kernel::uniform(get("eta")?.unwrap_or(1.0)),
            "polynomial" => Ok(Kernel::polynomial()),
            "gaussian" => Ok(Kernel::gaussian()),
            "stretched" => Kernel::stretched_exp(require("alpha")?),
            "critical" => Ok(Kernel::critical_exp()),
            "singular" => Kernel::singular_compact(require("alpha")?),
            "custom" => {
                let path = kv
                    .iter()
                    .find(|(k, _)| k == "path")
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| Error::invalid("kernel", "`custom` needs path=<file>"))?;
                Kernel::from_csv(Path::new(&path))
            }
            other => Err(Error::invalid(
                "kernel",
                format!("unknown family `{other}` (uniform, polynomial, gaussian, stretched, critical, singular, custom)"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<Kernel> {
        vec![
            Kernel::uniform(1.0).unwrap(),
            Kernel::uniform(2.5).unwrap(),
            Kernel::polynomial(),
            Kernel::gaussian(),
            Kernel::stretched_exp(2.0).unwrap(),
            Kernel::stretched_exp(3.5).unwrap(),
            Kernel::critical_exp(),
            Kernel::singular_compact(0.5).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        let u = Kernel::uniform(1.0).unwrap();
        assert_eq!(u.eval(0.5).unwrap(), 0.5);
        assert_eq!(u.eval(2.0).unwrap(), 0.0);
        assert_eq!(Kernel::polynomial().eval(0.0).unwrap(), 0.375);
        assert_eq!(Kernel::polynomial().eval(2.5).unwrap(), 0.0);
    }

    #[test]
    fn singular_kernel_rejects_origin() {
        let k = Kernel::singular_compact(0.5).unwrap();
        assert!(matches!(k.eval(0.0), Err(Error::Invalid { .. })));
        assert_eq!(k.eval(0.25).unwrap(), 0.25f64.powf(-1.5));
        assert_eq!(k.eval(1.5).unwrap(), 0.0);
    }

    #[test]
    fn mass_examples() {
        assert_eq!(Kernel::uniform(1.0).unwrap().mass(), 1.0);
        let m = Kernel::stretched_exp(2.0).unwrap().mass();
        assert!((m - std::f64::consts::PI.sqrt()).abs() < 1e-13, "{m}");
        assert_eq!(Kernel::singular_compact(0.5).unwrap().mass(), f64::INFINITY);
    }

    #[test]
    fn symmetry_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in builtins() {
            let r = k.support_radius().min(20.0);
            for _ in 0..1000 {
                let y: f64 = rng.gen_range(-r..r);
                if y == 0.0 {
                    continue;
                }
                assert_eq!(k.eval(y).unwrap(), k.eval(-y).unwrap(), "{k} at {y}");
                assert!(k.eval(y).unwrap() >= 0.0);
            }
        }
    }

    // Composite trapezoid over the support, endpoints as one-sided limits.
    fn trapezoid_mass(k: &Kernel, n: usize) -> f64 {
        let r = if k.is_compact() { k.support_radius() } else { 60.0 };
        let h = 2.0 * r / n as f64;
        let mut s = 0.5 * (k.edge_value() + k.edge_value());
        for i in 1..n {
            s += k.density(-r + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn mass_matches_trapezoid() {
        for k in builtins().into_iter().filter(|k| !k.is_singular()) {
            let q = trapezoid_mass(&k, 400_000);
            assert!(((q - k.mass()) / k.mass()).abs() < 1e-8, "{k}: {q} vs {}", k.mass());
        }
    }

    #[test]
    fn levy_second_moment() {
        // ∫_{-1}^{1} y² |y|^{-1-α} dy = 2/(2-α); integrate y^{1-α} with the
        // substitution y = s^m to remove the endpoint singularity.
        for alpha in [0.5, 1.0, 1.5] {
            let k = Kernel::singular_compact(alpha).unwrap();
            let m = 4.0;
            let n = 200_000;
            let h = 1.0 / n as f64;
            let mut s = 0.0;
            for i in 1..=n {
                let w = if i == n { 0.5 } else { 1.0 };
                let t = i as f64 * h;
                let y = t.powf(m);
                s += w * y * y * k.density(y) * m * t.powf(m - 1.0);
            }
            let moment = 2.0 * s * h;
            let exact = 2.0 / (2.0 - alpha);
            assert!(((moment - exact) / exact).abs() < 1e-6, "alpha={alpha}: {moment} vs {exact}");
        }
    }

    #[test]
    fn parses_specs() {
        assert_eq!("uniform:eta=2".parse::<Kernel>().unwrap(), Kernel::uniform(2.0).unwrap());
        assert_eq!("uniform".parse::<Kernel>().unwrap(), Kernel::uniform(1.0).unwrap());
        assert_eq!("gaussian".parse::<Kernel>().unwrap().tag(), "gaussian");
        assert!(matches!("stretched".parse::<Kernel>(), Err(Error::Invalid { .. })));
        assert!(matches!("stretched:alpha=1".parse::<Kernel>(), Err(Error::Invalid { .. })));
        assert!(matches!("gaussian:eta=1".parse::<Kernel>(), Err(Error::Invalid { .. })));
        assert!(matches!("fractional:alpha=1".parse::<Kernel>(), Err(Error::UnsupportedKernel { .. })));
        assert!(matches!("singular:alpha=2".parse::<Kernel>(), Err(Error::Invalid { .. })));
        assert_eq!(Kernel::stretched_exp(2.0).unwrap().label(), "stretched(alpha=2)");
    }

    #[test]
    fn custom_table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.csv");
        // triangle kernel 1 - |y| on [-1, 1], unit mass
        std::fs::write(&path, "# support=1 singularity=0\ny,J\n-1,0\n-0.5,0.5\n0,1\n0.5,0.5\n1,0\n").unwrap();
        let k = Kernel::from_csv(&path).unwrap();
        assert_eq!(k.tag(), "custom");
        assert!((k.mass() - 1.0).abs() < 1e-15);
        assert!((k.eval(0.25).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(k.eval(-0.25).unwrap(), k.eval(0.25).unwrap());
        assert_eq!(k.eval(1.2).unwrap(), 0.0);

        let spec = format!("custom:path={}", path.display());
        assert_eq!(spec.parse::<Kernel>().unwrap(), k);
    }

    #[test]
    fn custom_table_rejects_asymmetry_and_bad_header() {
        assert!(Kernel::custom(&[(0.0, 1.0), (0.5, 0.4), (-0.5, 0.6), (1.0, 0.0)], 1.0, 0.0, None).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        std::fs::write(&path, "0,1\n1,0\n").unwrap();
        assert!(matches!(Kernel::from_csv(&path), Err(Error::Parse { .. })));
    }
}
