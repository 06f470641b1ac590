//! Versioned CSV files. Every file starts with `# tipctl <schema> v1`,
//! optionally followed by more `#` lines, then a header row. Floats are
//! written in their shortest round-trip form so `read(write(x)) == x`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{io_error, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// One row type of a CSV schema.
pub trait Record: Sized {
    const SCHEMA: &'static str;
    const COLUMNS: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self>;
}

pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn parse_err(column: &str, value: &str, reason: impl ToString) -> Error {
    Error::Parse { column: column.to_string(), value: value.to_string(), reason: reason.to_string() }
}

pub fn parse_f64(column: &str, value: &str) -> Result<f64> {
    value.trim().parse().map_err(|e| parse_err(column, value, e))
}

pub fn parse_opt(column: &str, value: &str) -> Result<Option<f64>> {
    if value.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(column, value).map(Some)
    }
}

pub fn parse_u64(column: &str, value: &str) -> Result<u64> {
    value.trim().parse().map_err(|e| parse_err(column, value, e))
}

fn header_line(schema: &str) -> String {
    format!("# tipctl {schema} v{FORMAT_VERSION}")
}

/// Writes `records` with the schema line and any extra comment lines.
pub fn write_records<R: Record, W: Write>(mut out: W, comments: &[String], records: &[R]) -> Result<()> {
    let io = io_error("<output>");
    let mut head = header_line(R::SCHEMA);
    for c in comments {
        head.push_str("\n# ");
        head.push_str(c);
    }
    head.push('\n');
    out.write_all(head.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::COLUMNS)?;
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.flush().map_err(io_error("<output>"))?;
    Ok(())
}

/// Reads records, checking the schema line and the header row.
pub fn read_records<R: Record, I: Read>(input: I) -> Result<Vec<R>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_error("<input>"))?;
    let expected = header_line(R::SCHEMA);
    if first.trim_end() != expected {
        return Err(Error::Schema { expected, found: first.trim_end().to_string() });
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(R::COLUMNS.iter().copied()) {
        return Err(Error::Schema { expected: R::COLUMNS.join(","), found: header.iter().collect::<Vec<_>>().join(",") });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let fields: Vec<&str> = row.iter().collect();
        out.push(R::from_fields(&fields)?);
    }
    Ok(out)
}

pub fn write_file<R: Record>(path: &Path, comments: &[String], records: &[R]) -> Result<()> {
    let f = File::create(path).map_err(io_error(path))?;
    write_records(std::io::BufWriter::new(f), comments, records)
}

pub fn read_file<R: Record>(path: &Path) -> Result<Vec<R>> {
    read_records(File::open(path).map_err(io_error(path))?)
}

macro_rules! float_record {
    ($(#[$meta:meta])* $name:ident, $schema:literal, { $($field:ident : $col:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name {
            $(pub $field: f64,)+
        }

        impl Record for $name {
            const SCHEMA: &'static str = $schema;
            const COLUMNS: &'static [&'static str] = &[$($col),+];

            fn to_fields(&self) -> Vec<String> {
                vec![$(fmt_f64(self.$field)),+]
            }

            fn from_fields(fields: &[&str]) -> Result<Self> {
                let mut it = fields.iter();
                Ok(Self {
                    $($field: parse_f64($col, it.next().copied().unwrap_or(""))?,)+
                })
            }
        }
    };
}

float_record!(
    /// Critical rate for one `ε`.
    CriticalRateRow, "critical-rate", {
    epsilon: "epsilon", rho: "rho", r_c_asymptotic: "r_c_asymptotic", r_c_numeric: "r_c_numeric", bracket: "bracket_width"
});
float_record!(
    /// Critical ramp speed for one `λmax`.
    CriticalSpeedRow, "critical-speed", {
    lambda_max: "lambda_max", rho_c: "rho_c", rho_c_numeric: "rho_c_numeric", rho_max_c1: "rho_max_c1", rho_max_rate: "rho_max_rate"
});
float_record!(
    /// Connecting orbit sample.
    OrbitRow, "orbit", { t: "t", x: "x", c1: "c1" }
);
float_record!(
    /// Normal-form orbit sample.
    NormalFormRow, "normal-form", { r: "r", mu: "mu", z: "z" }
);
float_record!(
    /// Largest normal-form rate with a tracking orbit.
    ThresholdRow, "normal-form-threshold", { r_star: "r_star", tol: "tol" }
);
float_record!(
    /// Density sample.
    DensityRow, "density", { y: "y", p: "P" }
);
float_record!(
    /// Eigenvalue of one mode at one time.
    SpectrumRow, "spectrum", { t: "t", k: "k", gamma: "gamma" }
);
float_record!(
    /// Escape probabilities of the three density methods for one cell.
    ProbabilityRow, "probability", { rho: "rho", d: "D", p_m: "P_M", p_p: "P_P", p_j: "P_J" }
);
float_record!(
    /// First-order eigenvalue and flux at one time.
    RateRow, "rates", { t: "t", gamma1: "gamma1", flux: "J" }
);
float_record!(
    /// Signed error of one method against the reference, in percentage points.
    ErrorRow, "error", { rho: "rho", d: "D", err_pp: "err_pp" }
);

/// A point of the `(μ, y)` phase plane on a named curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub curve: String,
    pub mu: f64,
    pub y: f64,
}

impl Record for PhaseRow {
    const SCHEMA: &'static str = "phase-plane";
    const COLUMNS: &'static [&'static str] = &["curve", "mu", "y"];

    fn to_fields(&self) -> Vec<String> {
        vec![self.curve.clone(), fmt_f64(self.mu), fmt_f64(self.y)]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(Self {
            curve: f.first().unwrap_or(&"").to_string(),
            mu: parse_f64("mu", f.get(1).unwrap_or(&""))?,
            y: parse_f64("y", f.get(2).unwrap_or(&""))?,
        })
    }
}

/// One Monte-Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    pub rho: f64,
    pub d: f64,
    pub p: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub method: String,
}

impl Record for SimulationRow {
    const SCHEMA: &'static str = "simulate";
    const COLUMNS: &'static [&'static str] = &["rho", "D", "p", "stderr", "n_paths", "method"];

    fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.rho),
            fmt_f64(self.d),
            fmt_f64(self.p),
            fmt_f64(self.stderr),
            self.n_paths.to_string(),
            self.method.clone(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let g = |i: usize| *f.get(i).unwrap_or(&"");
        Ok(Self {
            rho: parse_f64("rho", g(0))?,
            d: parse_f64("D", g(1))?,
            p: parse_f64("p", g(2))?,
            stderr: parse_f64("stderr", g(3))?,
            n_paths: parse_u64("n_paths", g(4))?,
            method: g(5).to_string(),
        })
    }
}

/// One cell of a sweep for one method. `p` is empty when the cell failed,
/// and `flag` then carries the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub d: f64,
    pub p: Option<f64>,
    pub stderr: Option<f64>,
    pub flag: String,
}

impl Record for SweepRow {
    const SCHEMA: &'static str = "sweep";
    const COLUMNS: &'static [&'static str] = &["rho", "D", "p", "stderr", "flag"];

    fn to_fields(&self) -> Vec<String> {
        vec![fmt_f64(self.rho), fmt_f64(self.d), fmt_opt(self.p), fmt_opt(self.stderr), self.flag.clone()]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let g = |i: usize| *f.get(i).unwrap_or(&"");
        Ok(Self {
            rho: parse_f64("rho", g(0))?,
            d: parse_f64("D", g(1))?,
            p: parse_opt("p", g(2))?,
            stderr: parse_opt("stderr", g(3))?,
            flag: g(4).to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, -0.0, 1.0 / 3.0, 1e-300, 5e-324, 0.1 + 0.2, 1e20, -2.5e-7, f64::MAX] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[], &[OrbitRow { t: 0.0, x: 1.0, c1: 2.0 }]).unwrap();
        assert!(matches!(read_records::<DensityRow, _>(&buf[..]), Err(Error::Schema { .. })));
        let rows: Vec<OrbitRow> = read_records(&buf[..]).unwrap();
        assert_eq!(rows.len(), 1);
    }
}
