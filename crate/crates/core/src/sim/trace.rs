use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column layout of a trace. `x*`, `v*` and `u*` are 1-based; gain entries
/// are `Khat_<row>_<col>` with 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLayout {
    pub state: usize,
    pub inputs: usize,
    pub gain_rows: usize,
    pub gain_cols: usize,
    pub with_delta: bool,
}

impl TraceLayout {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.state).map(|i| format!("x{i}")));
        h.extend((1..=self.state).map(|i| format!("xm{i}")));
        h.push("e_norm".into());
        h.push("ev_norm".into());
        h.extend((1..=self.inputs).map(|i| format!("v{i}_raw")));
        h.extend((1..=self.inputs).map(|i| format!("v{i}_app")));
        h.extend((1..=self.inputs).map(|i| format!("u{i}")));
        h.push("alpha".into());
        let gains = |name: &str, h: &mut Vec<String>| {
            for r in 0..self.gain_rows {
                for c in 0..self.gain_cols {
                    h.push(format!("{name}_{r}_{c}"));
                }
            }
        };
        gains("Khat", &mut h);
        if self.with_delta {
            gains("Kdelta", &mut h);
        }
        h
    }

    pub fn width(&self) -> usize {
        1 + 2 * self.state + 2 + 3 * self.inputs + 1 + self.gain_rows * self.gain_cols * (1 + self.with_delta as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace<T: Scalar> {
    header: Vec<String>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> SimTrace<T> {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn with_capacity(header: Vec<String>, rows: usize) -> Self {
        Self {
            header,
            rows: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, row: Vec<T>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(crate::error::dim_err("SimTrace::push", self.header.len(), row.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        let j = self.index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Indices of columns whose name starts with `prefix`, in header order.
    pub fn indices_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }

    /// CSV with every value in `{:.16e}`, which round-trips `f64` exactly.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Data(format!("csv write failed: {e}"));
        out.write_record(&self.header).map_err(io)?;
        let mut buf = Vec::with_capacity(self.header.len());
        for r in &self.rows {
            buf.clear();
            buf.extend(r.iter().map(|v| format!("{:.16e}", v.as_f64())));
            out.write_record(&buf).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Data(format!("csv write failed: {e}")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut v = Vec::new();
        self.write_csv(&mut v).expect("writing to memory cannot fail");
        String::from_utf8(v).expect("csv is ascii")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

impl SimTrace<f64> {
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let bad = |e: csv::Error| Error::Data(format!("csv parse failed: {e}"));
        let header: Vec<String> = rd.headers().map_err(bad)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Data("trace has no header".into()));
        }
        let mut tr = SimTrace::new(header);
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(bad)?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
            tr.push(row)?;
        }
        Ok(tr)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
