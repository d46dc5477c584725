//! Finite state traces and their CSV wire format.

use std::fmt::Write as _;

/// A partial trajectory: samples `x_0 .. x_{t2}`, all sharing one dimension.
/// `dt` is metadata only; indices are discrete time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    samples: Vec<Vec<f64>>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("a trace must contain at least one sample")]
    Empty,
    #[error("sample {index} has dimension {got}, expected {expected}")]
    RaggedSample { index: usize, expected: usize, got: usize },
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
    #[error("trace CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

impl Trace {
    pub fn new(samples: Vec<Vec<f64>>, dt: f64) -> Result<Trace, TraceError> {
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        if !(dt > 0.0) {
            return Err(TraceError::BadDt(dt));
        }
        let n = samples[0].len();
        for (index, s) in samples.iter().enumerate() {
            if s.len() != n {
                return Err(TraceError::RaggedSample { index, expected: n, got: s.len() });
            }
        }
        Ok(Trace { samples, dt })
    }

    /// State dimension n.
    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Last time index t2 = len - 1.
    pub fn last_index(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.samples[t]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Drops trailing samples so the trace ends at `t2`. Shortening is the
    /// only supported truncation; there is no implicit padding.
    pub fn truncated(&self, t2: usize) -> Trace {
        Trace {
            samples: self.samples[..=t2.min(self.last_index())].to_vec(),
            dt: self.dt,
        }
    }

    /// Parses the `t,x1,...,xn` CSV format. Time indices must be the
    /// integers `0, 1, 2, ...` in order.
    pub fn from_csv(text: &str, dt: f64) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or(TraceError::Empty)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(TraceError::Csv {
                line: 1,
                msg: format!("expected header 't,x1,...,xn', got {header:?}"),
            });
        }
        let n = cols.len() - 1;
        let mut samples = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(TraceError::Csv {
                    line: lineno + 1,
                    msg: format!("expected {} fields, got {}", n + 1, fields.len()),
                });
            }
            let t: i64 = fields[0].parse().map_err(|_| TraceError::Csv {
                line: lineno + 1,
                msg: format!("bad time index {:?}", fields[0]),
            })?;
            if t != samples.len() as i64 {
                return Err(TraceError::Csv {
                    line: lineno + 1,
                    msg: format!("time index {t} out of order (expected {})", samples.len()),
                });
            }
            let mut x = Vec::with_capacity(n);
            for f in &fields[1..] {
                x.push(f.parse().map_err(|_| TraceError::Csv {
                    line: lineno + 1,
                    msg: format!("bad value {f:?}"),
                })?);
            }
            samples.push(x);
        }
        Trace::new(samples, dt)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, x) in self.samples.iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}
