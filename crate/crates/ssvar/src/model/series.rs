use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two equally long, finite channels sampled on a common clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateSeries {
    y: Vec<f64>,
    x: Vec<f64>,
    sample_rate: Option<f64>,
}

impl BivariateSeries {
    pub fn new(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::Shape(format!(
                "channel lengths differ: y has {}, x has {}",
                y.len(),
                x.len()
            )));
        }
        if let Some(i) = y.iter().chain(x.iter()).position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self {
            y,
            x,
            sample_rate: None,
        })
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Self {
        self.sample_rate = Some(hz);
        self
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    /// Sub-series `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let end = start + len;
        if end > self.n_samples() {
            return Err(Error::Length {
                needed: end,
                available: self.n_samples(),
            });
        }
        Ok(Self {
            y: self.y[start..end].to_vec(),
            x: self.x[start..end].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    /// Reads two comma-separated numeric columns `y,x`, one row per sample.
    /// A first line that does not parse as numbers is treated as a header.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut y = Vec::new();
        let mut x = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut fields = trimmed.split(',').map(str::trim);
            let (a, b) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected exactly two columns",
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    y.push(a);
                    x.push(b);
                }
                _ if lineno == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: non-numeric value",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(y, x)
    }

    /// Writes `y,x` with a header line; values use the shortest round-trip
    /// representation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,x")?;
        for (a, b) in self.y.iter().zip(&self.x) {
            writeln!(w, "{a:?},{b:?}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatch_and_nan() {
        assert!(BivariateSeries::new(vec![1.0], vec![]).is_err());
        assert!(BivariateSeries::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(BivariateSeries::new(vec![1.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let with = "y,x\n1.0,2.0\n3,4\n";
        let without = "1.0, 2.0\n\n3,4\n";
        let a = BivariateSeries::read_csv(with.as_bytes()).unwrap();
        let b = BivariateSeries::read_csv(without.as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.y(), &[1.0, 3.0]);
        assert_eq!(a.x(), &[2.0, 4.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(BivariateSeries::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(BivariateSeries::read_csv("1,2\nfoo,3\n".as_bytes()).is_err());
        assert!(BivariateSeries::read_csv("1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = BivariateSeries::new(vec![0.1, 1.0 / 3.0, -2e-300], vec![1e10, -0.0, 7.25]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = BivariateSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }
}
