//! Headered CSV tables. Floats are written with Rust's shortest round-trip
//! formatting so a write/read cycle is lossless.

use std::io::{Read, Write};
use std::path::Path;

use crate::curve::DecayCurve;
use crate::fitkit::StimEchoSurface;
use crate::relaxation::{T1Point, T1Series};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based file line of each row, for error reporting.
    pub lines: Vec<usize>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new(), lines: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.lines.push(self.rows.len() + 2);
        self.rows.push(row);
    }

    /// Index of the first header whose name matches one of `names`.
    pub fn column(&self, names: &[&str]) -> Option<usize> {
        self.headers.iter().position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.column(names).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{}` (have {})", names[0], self.headers.join(",")),
        })
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Reads a CSV with a header row. Blank lines and `#` comments are skipped.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse { line: 1, message: "empty header".into() });
    }
    let mut table = Table { headers, rows: Vec::new(), lines: Vec::new() };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != table.headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", table.headers.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(&table.headers) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("column `{name}`: `{field}` is not a number") })?;
            row.push(v);
        }
        table.rows.push(row);
        table.lines.push(line);
    }
    Ok(table)
}

pub fn write_table<W: Write>(writer: W, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Decay curve: `abscissa_s,amplitude[,stderr]`.
pub fn read_curve_csv(path: &Path) -> Result<DecayCurve> {
    let t = read_table(open(path)?)?;
    let x = t.require(&["abscissa_s", "t_s", "time_s", "x"])?;
    let y = t.require(&["amplitude", "y", "signal"])?;
    let s = t.column(&["stderr", "sigma"]);
    if t.rows.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    for (row, &line) in t.rows.iter().zip(&t.lines) {
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse { line, message: "non-finite value".into() });
        }
    }
    DecayCurve::new(t.col(x), t.col(y), s.map(|j| t.col(j)))
}

pub fn write_curve_csv(path: &Path, curve: &DecayCurve) -> Result<()> {
    let mut t = Table::new(&["abscissa_s", "amplitude", "stderr"]);
    for i in 0..curve.len() {
        t.push(vec![curve.abscissa[i], curve.amplitude[i], curve.stderr[i]]);
    }
    write_table(std::fs::File::create(path)?, &t)
}

/// T1 data: `temperature_K,rate_Hz[,sigma_Hz]`, or `T1_s[,T1_sigma_s]` in
/// place of the rate columns. `field` is in tesla.
pub fn read_t1_csv(path: &Path, field: f64) -> Result<T1Series> {
    let t = read_table(open(path)?)?;
    let temp = t.require(&["temperature_K", "T_K", "temperature"])?;
    let rate = t.column(&["rate_Hz", "rate"]);
    let t1 = t.column(&["T1_s", "t1"]);
    let mut points = Vec::with_capacity(t.rows.len());
    for (row, &line) in t.rows.iter().zip(&t.lines) {
        let (r, s) = match (rate, t1) {
            (Some(j), _) => (row[j], t.column(&["sigma_Hz", "sigma"]).map(|k| row[k]).unwrap_or(0.0)),
            (None, Some(j)) => {
                let r = 1.0 / row[j];
                let s = t.column(&["T1_sigma_s", "sigma_s"]).map(|k| row[k] * r * r).unwrap_or(0.0);
                (r, s)
            }
            _ => return Err(Error::Parse { line: 1, message: "need a `rate_Hz` or `T1_s` column".into() }),
        };
        if !(row[temp] > 0.0) || !(r > 0.0) || !r.is_finite() || !(s >= 0.0) {
            return Err(Error::Parse { line, message: "temperature, rate and sigma must be positive, sigma ≥ 0".into() });
        }
        points.push(T1Point { temperature: row[temp], rate: r, sigma: s });
    }
    let series = T1Series { points, site: None, isotope: None, field, orientation: None };
    series.validate()?;
    Ok(series)
}

/// Stimulated-echo surface: `tau_s,tw_s,amplitude`, one row per point.
pub fn read_stim_echo_csv(path: &Path) -> Result<Vec<StimEchoSurface>> {
    let t = read_table(open(path)?)?;
    let tau = t.require(&["tau_s", "tau"])?;
    let tw = t.require(&["tw_s", "tw", "t_w_s"])?;
    let y = t.require(&["amplitude", "y", "signal"])?;
    let mut out: Vec<StimEchoSurface> = Vec::new();
    for (row, &line) in t.rows.iter().zip(&t.lines) {
        if !(row[tau] > 0.0) || !(row[tw] >= 0.0) || !row[y].is_finite() {
            return Err(Error::Parse { line, message: "tau must be > 0, tw ≥ 0, amplitude finite".into() });
        }
        match out.iter_mut().find(|s| s.tau == row[tau]) {
            Some(s) => s.points.push((row[tw], row[y])),
            None => out.push(StimEchoSurface { tau: row[tau], points: vec![(row[tw], row[y])] }),
        }
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_reports_line() {
        let text = "abscissa_s,amplitude\n0,1\n# note\n1e-6,0.5\n2e-6,abc\n";
        match read_table(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("amplitude"));
            }
            other => panic!("{other:?}"),
        }
        let ragged = "a,b\n1,2\n3\n";
        assert!(matches!(read_table(ragged.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn lossless_round_trip() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![0.1 + 0.2, 1.0 / 3.0]);
        t.push(vec![6.02214076e23, -1.5e-300]);
        let mut buf = Vec::new();
        write_table(&mut buf, &t).unwrap();
        let back = read_table(buf.as_slice()).unwrap();
        assert_eq!(back.rows, t.rows);
    }
}
