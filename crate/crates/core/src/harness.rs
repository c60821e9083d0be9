//! Convergence studies: how fast `u_R → u` as the domain grows.
//!
//! For each `R` the deviation `v_R = u - u_R` is solved directly (see
//! [`solver::complement`]), its sup over `|x| <= θR` gives `E(R) = -ln sup`,
//! and the rescaled profile `I_R^A(x) = -(1/R) ln(v_R(Rx) + e^{-RA})` is
//! compared with the rate function.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::par::Execution;
use crate::ratefn::bound;
use crate::solver::io::format_number as num;
use crate::solver::{self, Field, Grid, SolveConfig};

/// Deviations are floored here before taking logs.
pub const FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum InitialDatum {
    /// `u₀ ≡ 1`; the whole-line solution is exactly `1`.
    Ones,
    /// Indicator of `[-radius, radius]`; compared against an enlarged-domain proxy.
    Indicator { radius: f64 },
}

impl std::str::FromStr for InitialDatum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ones" {
            return Ok(InitialDatum::Ones);
        }
        if let Some(rest) = s.strip_prefix("indicator:radius=") {
            let radius: f64 = rest
                .parse()
                .map_err(|_| Error::invalid("u0", format!("bad radius {rest:?}")))?;
            if radius > 0.0 {
                return Ok(InitialDatum::Indicator { radius });
            }
        }
        Err(Error::invalid(
            "u0",
            format!("expected ones or indicator:radius=<r>, got {s:?}"),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub kernel: Kernel,
    pub r_list: Vec<f64>,
    pub theta: f64,
    pub t_phys: f64,
    /// Common spacing; per-`R` default resolution when `None`.
    pub h: Option<f64>,
    pub dt: Option<f64>,
    /// Cap `A` of the rescaled profiles.
    pub cap: f64,
    pub initial: InitialDatum,
    pub output_dir: Option<PathBuf>,
    pub exec: Execution,
}

impl StudyConfig {
    pub fn new(kernel: Kernel, r_list: Vec<f64>, theta: f64, t_phys: f64) -> Self {
        StudyConfig {
            kernel,
            r_list,
            theta,
            t_phys,
            h: None,
            dt: None,
            cap: 10.0,
            initial: InitialDatum::Ones,
            output_dir: None,
            exec: Execution::best(),
        }
    }

    /// Settings from a flat `key=value` file (`#` starts a comment).
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kernel = None;
        let mut r_list = None;
        let mut theta = None;
        let mut t = None;
        let mut rest = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, val) = (key.trim(), val.trim());
            match key {
                "kernel" => kernel = Some(val.parse::<Kernel>()?),
                "R" | "R_list" => r_list = Some(parse_list(val)?),
                "theta" => theta = Some(parse_num("theta", val)?),
                "t" | "t_phys" => t = Some(parse_num("t", val)?),
                _ => rest.push((key.to_string(), val.to_string())),
            }
        }
        let mut cfg = StudyConfig::new(
            kernel.ok_or_else(|| Error::invalid("kernel", "missing"))?,
            r_list.ok_or_else(|| Error::invalid("R", "missing"))?,
            theta.ok_or_else(|| Error::invalid("theta", "missing"))?,
            t.ok_or_else(|| Error::invalid("t", "missing"))?,
        );
        for (k, v) in rest {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        StudyConfig::from_kv(&fs::read_to_string(path)?)
    }

    /// Sets one key; the same names as the config file.
    pub fn set(&mut self, key: &str, val: &str) -> Result<()> {
        match key {
            "kernel" => self.kernel = val.parse()?,
            "R" | "R_list" => self.r_list = parse_list(val)?,
            "theta" => self.theta = parse_num("theta", val)?,
            "t" | "t_phys" => self.t_phys = parse_num("t", val)?,
            "h" => self.h = Some(parse_num("h", val)?),
            "dt" => self.dt = Some(parse_num("dt", val)?),
            "A" | "cap" => self.cap = parse_num("A", val)?,
            "u0" => self.initial = val.parse()?,
            "output" | "out" | "output_dir" => self.output_dir = Some(PathBuf::from(val)),
            "parallel" => {
                self.exec = match val {
                    "true" | "1" | "yes" => Execution::Parallel,
                    "false" | "0" | "no" => Execution::Sequential,
                    _ => return Err(Error::invalid("parallel", format!("expected a boolean, got {val:?}"))),
                }
            }
            other => return Err(Error::invalid(other, "unknown study setting")),
        }
        Ok(())
    }

    fn grid(&self, r: f64) -> Result<Grid> {
        match self.h {
            Some(h) => Grid::with_spacing(r, h),
            None => Grid::default_for(&self.kernel, r),
        }
    }

    fn solve_config(&self) -> SolveConfig {
        let c = SolveConfig::new(self.t_phys);
        match self.dt {
            Some(dt) => c.with_dt(dt),
            None => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_list.is_empty() {
            return Err(Error::invalid("R", "empty list"));
        }
        if self.r_list.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("R", "entries must be positive"));
        }
        if self.r_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("R", "must be strictly increasing"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.t_phys > 0.0 && self.t_phys.is_finite()) {
            return Err(Error::invalid("t", format!("must be positive, got {}", self.t_phys)));
        }
        if !(self.cap > 0.0) {
            return Err(Error::invalid("A", format!("must be positive, got {}", self.cap)));
        }
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(Error::invalid("h", format!("must be positive, got {h}")));
            }
        }
        if self.kernel.is_singular() {
            return Err(Error::UnsupportedKernel {
                family: self.kernel.tag().into(),
                reason: "the time-domain solver needs a kernel bounded at the origin".into(),
            });
        }
        let h0 = self.grid(self.r_list[0])?.h();
        if self.theta * self.r_list[0] < 10.0 * h0 {
            return Err(Error::invalid(
                "theta",
                format!("θ·R_min = {} is below 10 h = {}", self.theta * self.r_list[0], 10.0 * h0),
            ));
        }
        self.solve_config().validate(&self.kernel)
    }
}

fn parse_num(field: &str, val: &str) -> Result<f64> {
    val.trim()
        .parse()
        .map_err(|_| Error::invalid(field, format!("not a number: {val:?}")))
}

fn parse_list(val: &str) -> Result<Vec<f64>> {
    val.split(',').map(|v| parse_num("R", v)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfilePoint {
    /// Rescaled position `x/R`.
    pub x: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub sup_err: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub predicted_exponent: f64,
    /// `(E - predicted_exponent) / R`.
    pub slack: f64,
    pub floored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationReport {
    pub kernel: String,
    pub theta: f64,
    pub t: f64,
    pub rows: Vec<StudyRow>,
    pub profile_files: Vec<PathBuf>,
    /// Least-squares `c` in `E(R) ≈ predicted(R) + c R` over unfloored rows.
    pub fitted_slack: Option<f64>,
    pub proxy_reference: bool,
    #[serde(skip)]
    pub cap: f64,
    #[serde(skip)]
    pub profiles: Vec<Vec<ProfilePoint>>,
    #[serde(skip)]
    pub deviations: Vec<Field>,
}

impl DeviationReport {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("R,sup_err,E,predicted_exponent,slack,floored\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                num(r.r),
                num(r.sup_err),
                num(r.e),
                num(r.predicted_exponent),
                num(r.slack),
                r.floored
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `I_R^A(x/R) = -(1/R) ln(max(v, FLOOR) + e^{-RA})` at nodes with `|x| <= θR`.
pub fn extract_rate_profile(v: &Field, theta: f64, cap: f64) -> Result<Vec<ProfilePoint>> {
    if !(cap > 0.0) {
        return Err(Error::invalid("A", format!("must be positive, got {cap}")));
    }
    let g = v.grid;
    let r = g.r();
    let shift = (-r * cap).exp();
    Ok(g.inner(theta * r)
        .map(|i| ProfilePoint {
            x: g.x(i) / r,
            value: -(v.values[i].max(FLOOR) + shift).ln() / r,
        })
        .collect())
}

/// Solves for `v_R` with `u₀ ≡ 1` and returns its rescaled profile.
pub fn rate_profile(k: &Kernel, grid: Grid, t_phys: f64, theta: f64, cap: f64) -> Result<Vec<ProfilePoint>> {
    let v = solver::complement(k, grid, &SolveConfig::new(t_phys))?;
    extract_rate_profile(&v, theta, cap)
}

/// `c = Σ R (E - p) / Σ R²`.
pub fn fit_slack(rows: &[StudyRow]) -> Option<f64> {
    let used: Vec<_> = rows.iter().filter(|r| !r.floored).collect();
    if used.is_empty() {
        return None;
    }
    let num: f64 = used.iter().map(|r| r.r * (r.e - r.predicted_exponent)).sum();
    let den: f64 = used.iter().map(|r| r.r * r.r).sum();
    Some(num / den)
}

fn deviation(cfg: &StudyConfig, r: f64, margin: f64) -> Result<Field> {
    let grid = cfg.grid(r)?;
    let sc = cfg.solve_config();
    match cfg.initial {
        InitialDatum::Ones => solver::complement(&cfg.kernel, grid, &sc),
        InitialDatum::Indicator { radius } => {
            let u0 = Field::from_fn(grid, |x| if x.abs() <= radius { 1.0 } else { 0.0 });
            let reference = solver::reference_solution(&cfg.kernel, &u0, &sc, margin)?;
            let u = solver::integrate(&cfg.kernel, &u0, &sc)?;
            let d = reference.field.values.iter().zip(&u.values).map(|(a, b)| (a - b).abs()).collect();
            Field::new(grid, d, sc.t_final)
        }
    }
}

pub fn run_study(cfg: &StudyConfig) -> Result<DeviationReport> {
    cfg.validate()?;
    let margin = 2.0 * cfg.r_list.last().copied().unwrap_or(0.0);
    let fields = cfg.exec.try_map(&cfg.r_list, |&r| deviation(cfg, r, margin))?;
    let mut rows = Vec::with_capacity(fields.len());
    let mut profiles = Vec::with_capacity(fields.len());
    for (&r, v) in cfg.r_list.iter().zip(&fields) {
        let raw = v.grid.inner(cfg.theta * r).map(|i| v.values[i]).fold(0.0, f64::max);
        let floored = raw < FLOOR;
        let sup_err = raw.max(FLOOR);
        let e = -sup_err.ln();
        let predicted = bound(&cfg.kernel, r, cfg.theta, cfg.t_phys)?.exponent;
        rows.push(StudyRow {
            r,
            sup_err,
            e,
            predicted_exponent: predicted,
            slack: (e - predicted) / r,
            floored,
        });
        profiles.push(extract_rate_profile(v, cfg.theta, cfg.cap)?);
    }
    let mut report = DeviationReport {
        kernel: cfg.kernel.label(),
        theta: cfg.theta,
        t: cfg.t_phys,
        fitted_slack: fit_slack(&rows),
        rows,
        profile_files: Vec::new(),
        proxy_reference: cfg.initial != InitialDatum::Ones,
        cap: cfg.cap,
        profiles,
        deviations: fields,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&mut report, dir)?;
    }
    Ok(report)
}

/// Writes `report.json`, `rows.csv` and one `profile_R<R>.csv` per row.
pub fn write_outputs(report: &mut DeviationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.profile_files.clear();
    for (row, profile) in report.rows.iter().zip(&report.profiles) {
        let path = dir.join(format!("profile_R{}.csv", row.r));
        let mut s = format!(
            "# R={} t={} kernel={} A={}\nx,I\n",
            num(row.r),
            num(report.t),
            report.kernel,
            num(report.cap)
        );
        for p in profile {
            let _ = writeln!(s, "{},{}", num(p.x), num(p.value));
        }
        fs::write(&path, s)?;
        report.profile_files.push(path);
    }
    fs::write(dir.join("rows.csv"), report.rows_csv())?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StudyConfig {
        let mut c = StudyConfig::new(Kernel::uniform(1.0).unwrap(), vec![4.0, 6.0], 0.8, 0.1);
        c.h = Some(1.0 / 16.0);
        c
    }

    #[test]
    fn kv_config_round_trip() {
        let c = StudyConfig::from_kv(
            "# study\nkernel = uniform:eta=1\nR = 10,15,20\ntheta=0.8\nt=0.1\nh=0.0625\nA=5\n",
        )
        .unwrap();
        assert_eq!(c.r_list, vec![10.0, 15.0, 20.0]);
        assert_eq!(c.h, Some(0.0625));
        assert_eq!(c.cap, 5.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_names_the_field() {
        let bad = |text: &str, field: &str| {
            let err = StudyConfig::from_kv(text).and_then(|c| c.validate().map(|_| c)).unwrap_err();
            assert!(err.to_string().contains(field), "{err} lacks {field}");
        };
        bad("kernel=gaussian\nR=10,5\ntheta=0.8\nt=0.1", "R");
        bad("kernel=gaussian\nR=10\ntheta=1.2\nt=0.1", "theta");
        bad("kernel=gaussian\nR=10\ntheta=0.8\nt=-1", "t");
        bad("kernel=gaussian\nR=10\ntheta=0.8", "t");
        bad("kernel=gaussian\nR=10\ntheta=0.8\nt=0.1\nbogus=1", "bogus");
        bad("kernel=gaussian\nR=1\ntheta=0.5\nt=0.1\nh=0.1", "theta");
        assert!(matches!(
            StudyConfig::from_kv("kernel=singular:alpha=1\nR=10\ntheta=0.8\nt=0.1").unwrap().validate(),
            Err(Error::UnsupportedKernel { .. })
        ));
    }

    #[test]
    fn profile_shift_algebra() {
        let g = Grid::new(10.0, 41).unwrap();
        let a = 2.0;
        let ones = extract_rate_profile(&Field::constant(g, 1.0), 0.8, a).unwrap();
        assert!(ones.iter().all(|p| p.value.abs() < 1e-8));
        let v = Field::constant(g, (-10.0 * a).exp());
        let prof = extract_rate_profile(&v, 0.8, a).unwrap();
        for p in &prof {
            assert!((p.value - (a - 2f64.ln() / 10.0)).abs() < 1e-12);
        }
        assert!(extract_rate_profile(&v, 0.8, 0.0).is_err());
    }

    #[test]
    fn slack_fit() {
        let row = |r: f64, e: f64, p: f64, floored| StudyRow {
            r,
            sup_err: (-e).exp(),
            e,
            predicted_exponent: p,
            slack: (e - p) / r,
            floored,
        };
        let rows = [row(10.0, 12.0, 10.0, false), row(20.0, 24.0, 20.0, false), row(40.0, 690.0, 80.0, true)];
        assert!((fit_slack(&rows).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(fit_slack(&rows[2..]), None);
    }

    #[test]
    fn small_study_is_monotone_and_symmetric() {
        let rep = run_study(&small()).unwrap();
        assert!(rep.rows[0].e < rep.rows[1].e);
        for prof in &rep.profiles {
            let n = prof.len();
            for i in 0..n {
                assert!((prof[i].value - prof[n - 1 - i].value).abs() < 1e-8);
                assert!(prof[i].value <= 10.0 + 1e-12);
            }
        }
        let js: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        for key in ["kernel", "theta", "t", "rows", "profile_files"] {
            assert!(js.get(key).is_some(), "{key}");
        }
        for key in ["R", "sup_err", "E", "predicted_exponent", "slack", "floored"] {
            assert!(js["rows"][0].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn outputs_are_deterministic() {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut texts = Vec::new();
        for (d, exec) in dirs.iter().zip([Execution::Sequential, Execution::Parallel]) {
            let mut c = small();
            c.output_dir = Some(d.path().to_path_buf());
            c.exec = exec;
            let rep = run_study(&c).unwrap();
            assert_eq!(rep.profile_files.len(), 2);
            let mut all = fs::read_to_string(d.path().join("rows.csv")).unwrap();
            for p in &rep.profile_files {
                all += &fs::read_to_string(p).unwrap();
            }
            texts.push(all);
        }
        assert_eq!(texts[0], texts[1]);
    }

    #[test]
    fn indicator_study_uses_proxy() {
        let mut c = small();
        c.initial = "indicator:radius=2".parse().unwrap();
        let rep = run_study(&c).unwrap();
        assert!(rep.proxy_reference);
        assert!(rep.rows.iter().all(|r| r.sup_err > 0.0 && r.sup_err <= 1.0));
    }
}
