//! Field snapshots as CSV: a `# R=.. t=.. kernel=.. h=.. dt=..` line, then `x,u`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

use super::grid::{Field, Grid};

/// Shortest round-trip text for `v`, in scientific notation outside
/// `[1e-4, 1e16)` so tiny deviations do not print as hundreds of zeros.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Header metadata of a field dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHeader {
    pub r: f64,
    pub t: f64,
    pub kernel: String,
    pub h: f64,
    /// `None` for adaptive runs.
    pub dt: Option<f64>,
}

pub fn write_field<W: Write>(w: W, field: &Field, k: &Kernel, dt: Option<f64>) -> Result<()> {
    let mut w = w;
    let dt = dt.map_or("adaptive".to_string(), format_number);
    writeln!(
        w,
        "# R={} t={} kernel={} h={} dt={}",
        format_number(field.grid.r()),
        format_number(field.time),
        k.label(),
        format_number(field.grid.h()),
        dt
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["x", "u"]).map_err(csv_err)?;
    for (i, v) in field.values.iter().enumerate() {
        csv.write_record([format_number(field.grid.x(i)), format_number(*v)])
            .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_field(path: &Path, field: &Field, k: &Kernel, dt: Option<f64>) -> Result<()> {
    let f = File::create(path)?;
    write_field(std::io::BufWriter::new(f), field, k, dt)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        path: Default::default(),
        message: e.to_string(),
    }
}

fn parse_header(line: &str, path: &Path) -> Result<FieldHeader> {
    let bad = |m: String| Error::Parse {
        path: path.to_path_buf(),
        message: m,
    };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("missing '# R=.. t=..' header".into()))?;
    let (mut r, mut t, mut kernel, mut h, mut dt) = (None, None, None, None, None);
    for item in body.split_whitespace() {
        let (key, val) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header item {item:?}")))?;
        let num = || val.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
        match key {
            "R" => r = Some(num()?),
            "t" => t = Some(num()?),
            "h" => h = Some(num()?),
            "kernel" => kernel = Some(val.to_string()),
            "dt" => dt = Some(if val == "adaptive" { None } else { Some(num()?) }),
            // kernel labels contain '=' inside parentheses and no spaces
            _ if kernel.is_some() => {}
            _ => return Err(bad(format!("unknown header key {key:?}"))),
        }
    }
    Ok(FieldHeader {
        r: r.ok_or_else(|| bad("header lacks R".into()))?,
        t: t.ok_or_else(|| bad("header lacks t".into()))?,
        kernel: kernel.ok_or_else(|| bad("header lacks kernel".into()))?,
        h: h.ok_or_else(|| bad("header lacks h".into()))?,
        dt: dt.ok_or_else(|| bad("header lacks dt".into()))?,
    })
}

pub fn load_field(path: &Path) -> Result<(FieldHeader, Field)> {
    let p = path.to_path_buf();
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = parse_header(first.trim(), path)?;
    let mut csv = csv::Reader::from_reader(reader);
    let mut values = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: p.clone(),
            message: e.to_string(),
        })?;
        let u = rec
            .get(1)
            .ok_or_else(|| Error::Parse {
                path: p.clone(),
                message: "row lacks u".into(),
            })?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse {
                path: p.clone(),
                message: e.to_string(),
            })?;
        values.push(u);
    }
    let grid = Grid::new(header.r, values.len())?;
    let field = Field::new(grid, values, header.t)?;
    Ok((header, field))
}
