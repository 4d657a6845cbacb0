//! Synthetic test data and delimiter-separated observation files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Normalized multivariate sigmoid `1 / (1 + exp(-16 (‖x‖² / P - 1/2)))`.
pub fn sigmoid(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    1.0 / (1.0 + (-16.0 * (r2 - 0.5)).exp())
}

/// Scattered observations in raw coordinates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub dim: usize,
    pub points: Vec<f64>,
    pub responses: Vec<f64>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// `n` uniform points on `[0,1]^P` with `y = f_P(x) + N(0, σ²)`.
pub fn generate(dim: usize, n: usize, noise: f64, seed: u64) -> Result<Observations> {
    if dim == 0 {
        return Err(CliError::Config("dimension must be at least 1".into()));
    }
    if n == 0 {
        return Err(CliError::Config("need at least one data point".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Config(format!("noise level must be finite and non-negative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    let normal = Normal::new(0.0, noise).map_err(|e| CliError::Config(e.to_string()))?;
    let responses = (0..n)
        .map(|i| {
            let clean = sigmoid(&points[i * dim..(i + 1) * dim]);
            if noise > 0.0 {
                clean + normal.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();
    Ok(Observations { dim, points, responses })
}

fn detect_delimiter(first_line: &str) -> u8 {
    [b',', b'\t', b';']
        .into_iter()
        .find(|d| first_line.as_bytes().contains(d))
        .unwrap_or(b',')
}

/// Reads rows of `P` coordinates followed by one response. A first row
/// that does not parse as numbers is taken as a header. Comma, tab and
/// semicolon delimiters are recognised from the first line.
pub fn read_observations(path: &Path, dim: Option<usize>) -> Result<Observations> {
    let (columns, rows) = read_table(path)?;
    let width = columns;
    if width < 2 {
        return Err(CliError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "need at least one coordinate column and a response column".into(),
        });
    }
    if let Some(p) = dim {
        if p + 1 != width {
            return Err(CliError::Malformed {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected {} columns for dimension {p}, found {width}", p + 1),
            });
        }
    }
    let p = width - 1;
    let mut points = Vec::with_capacity(rows.len() * p);
    let mut responses = Vec::with_capacity(rows.len());
    for (_, row) in rows {
        points.extend_from_slice(&row[..p]);
        responses.push(row[p]);
    }
    Ok(Observations { dim: p, points, responses })
}

/// One parsed row with its 1-based line number.
pub type Row = (u64, Vec<f64>);

/// Reads a numeric table, returning the column count and its rows.
pub fn read_table(path: &Path) -> Result<(usize, Vec<Row>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(detect_delimiter(first))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let malformed = |line: u64, message: String| CliError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut width = None;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header row
                width = Some(record.len());
                continue;
            }
            Err(_) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(malformed(line, format!("cannot parse {bad:?} as a number")));
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(malformed(line, format!("non-finite value {bad}")));
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(malformed(line, format!("expected {w} fields, found {}", values.len())));
            }
            None => width = Some(values.len()),
            _ => {}
        }
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(malformed(1, "no data rows".into()));
    }
    Ok((width.unwrap_or(0), rows))
}

pub fn write_observations(path: &Path, obs: &Observations) -> Result<()> {
    let mut header: Vec<String> = (1..=obs.dim).map(|p| format!("x{p}")).collect();
    header.push("y".into());
    let rows = (0..obs.len()).map(|i| {
        let mut r = obs.point(i).to_vec();
        r.push(obs.responses[i]);
        r
    });
    write_table(path, &header, rows)
}

pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Affine map of one coordinate onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScaling {
    pub lower: f64,
    pub upper: f64,
}

impl AxisScaling {
    pub fn unit() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        let t = (x - self.lower) / (self.upper - self.lower);
        // undo rounding right at the ends so boundary points stay inside
        if x == self.upper {
            1.0
        } else if x == self.lower {
            0.0
        } else {
            t
        }
    }

    pub fn invert(&self, t: f64) -> f64 {
        self.lower + t * (self.upper - self.lower)
    }
}

/// Per-column bounding box of the observations.
pub fn fit_scaling(obs: &Observations) -> Result<Vec<AxisScaling>> {
    (0..obs.dim)
        .map(|p| {
            let (lo, hi) = (0..obs.len())
                .map(|i| obs.points[i * obs.dim + p])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !(hi > lo) {
                return Err(CliError::Config(format!(
                    "coordinate column {} is constant, cannot scale it to [0, 1]",
                    p + 1
                )));
            }
            Ok(AxisScaling { lower: lo, upper: hi })
        })
        .collect()
}

pub fn scale_points(points: &[f64], scaling: &[AxisScaling]) -> Vec<f64> {
    let p = scaling.len();
    points
        .iter()
        .enumerate()
        .map(|(k, &x)| scaling[k % p].apply(x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_corner() {
        assert!((sigmoid(&[0.5f64.sqrt()]) - 0.5).abs() < 1e-14);
        assert!((sigmoid(&[0.5f64.sqrt(), 0.5f64.sqrt()]) - 0.5).abs() < 1e-14);
        let want = 1.0 / (1.0 + (-8.0f64).exp());
        assert!((sigmoid(&[1.0]) - want).abs() < 1e-15);
        assert!((sigmoid(&[1.0]) - 0.99966).abs() < 1e-5);
    }

    #[test]
    fn noiseless_generation_is_exact() {
        let obs = generate(3, 50, 0.0, 9).unwrap();
        for i in 0..obs.len() {
            assert_eq!(obs.responses[i], sigmoid(obs.point(i)));
            assert!(obs.point(i).iter().all(|v| (0.0..1.0).contains(v)));
        }
        assert_eq!(obs, generate(3, 50, 0.0, 9).unwrap());
        assert_ne!(obs, generate(3, 50, 0.0, 10).unwrap());
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        assert!(generate(0, 10, 0.1, 1).is_err());
        assert!(generate(2, 0, 0.1, 1).is_err());
        assert!(generate(2, 10, -0.1, 1).is_err());
    }

    #[test]
    fn scaling_round_trip() {
        let s = AxisScaling { lower: -2.0, upper: 6.0 };
        assert_eq!(s.apply(-2.0), 0.0);
        assert_eq!(s.apply(6.0), 1.0);
        assert_eq!(s.apply(2.0), 0.5);
        assert_eq!(s.invert(0.25), 0.0);
    }
}
