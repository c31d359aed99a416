//! Telemetry CSV: a mandatory header whose first column is `t` (seconds),
//! followed by one column per signal. Decimal point, comma separator, UTF-8.
//!
//! Written values use 17 significant digits (`{:.16e}`), which reproduces
//! every `f64` exactly on reading.
//!
//! Line numbers in parse errors count data rows: the first row after the
//! header is line 1.

use crate::error::{invalid, Error, Result};
use crate::signals::Signal;

/// Relative tolerance on sample-interval uniformity.
const DT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    names: Vec<String>,
    signals: Vec<Signal>,
}

impl TelemetryRecord {
    pub fn new(names: Vec<String>, signals: Vec<Signal>) -> Result<Self> {
        if names.len() != signals.len() {
            return Err(invalid("column names and signals differ in count"));
        }
        if names.is_empty() {
            return Err(invalid("a record needs at least one signal column"));
        }
        if let Some(first) = signals.first() {
            if signals.iter().any(|s| !s.same_geometry(first)) {
                return Err(invalid(
                    "all columns must share length, sampling interval and start time",
                ));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if n == "t" || names[..i].contains(n) {
                return Err(invalid(format!("duplicate or reserved column name {n:?}")));
            }
        }
        Ok(TelemetryRecord { names, signals })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn dt(&self) -> f64 {
        self.signals[0].dt()
    }

    pub fn t0(&self) -> f64 {
        self.signals[0].t0()
    }

    pub fn len(&self) -> usize {
        self.signals[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Signal> {
        self.index_of(name)
            .map(|i| &self.signals[i])
            .ok_or_else(|| invalid(format!("no column named {name:?}")))
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_csv(text: &str) -> Result<TelemetryRecord> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(0, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(parse_error(0, "header must start with the time column `t`"));
    }
    if header.len() < 2 {
        return Err(parse_error(0, "header names no signal columns"));
    }

    let width = header.len();
    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width - 1];
    for (row, record) in reader.records().enumerate() {
        let line = row + 1;
        let record = record.map_err(|e| parse_error(line, e.to_string()))?;
        if record.len() != width {
            return Err(parse_error(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut values = record.iter().enumerate().map(|(col, cell)| {
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("column {:?}: not a number: {cell:?}", header[col])))
        });
        let t = values.next().expect("width >= 2")?;
        match times.len() {
            0 => {}
            1 => {
                if !(t > times[0]) {
                    return Err(parse_error(line, "time must increase"));
                }
            }
            n => {
                let dt = times[1] - times[0];
                let step = t - times[n - 1];
                if (step - dt).abs() > DT_TOLERANCE * dt {
                    return Err(parse_error(line, format!("non-uniform sampling: step {step} vs {dt}")));
                }
            }
        }
        times.push(t);
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v?);
        }
    }
    if times.len() < 2 {
        return Err(parse_error(times.len(), "a record needs at least two rows"));
    }
    let t0 = times[0];
    let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    let signals = columns
        .into_iter()
        .map(|samples| Signal::with_start(samples, dt, t0))
        .collect::<Result<Vec<_>>>()?;
    TelemetryRecord::new(header[1..].to_vec(), signals)
}

pub fn write_csv(record: &TelemetryRecord) -> String {
    let mut out = String::from("t");
    for n in record.names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let first = &record.signals()[0];
    for i in 0..record.len() {
        out.push_str(&format!("{:.16e}", first.time(i)));
        for s in record.signals() {
            out.push_str(&format!(",{:.16e}", s.samples()[i]));
        }
        out.push('\n');
    }
    out
}
