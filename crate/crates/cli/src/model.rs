use std::path::Path;

use mgspline_core::bspline::SplineSpace1D;
use mgspline_core::operator::predict as spline_predict;
use serde::{Deserialize, Serialize};

use crate::data::{scale_points, AxisScaling};
use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "mgspline-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted tensor-product spline on the unit cube together with the map
/// from raw coordinates onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub level: u32,
    pub degrees: Vec<usize>,
    pub lambda: f64,
    pub scaling: Vec<AxisScaling>,
    /// First axis varies slowest.
    pub coefficients: Vec<f64>,
}

impl Model {
    pub fn new(level: u32, degrees: Vec<usize>, lambda: f64, scaling: Vec<AxisScaling>, coefficients: Vec<f64>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            dim: degrees.len(),
            level,
            degrees,
            lambda,
            scaling,
            coefficients,
        }
    }

    pub fn spaces(&self) -> Result<Vec<SplineSpace1D>> {
        self.degrees
            .iter()
            .map(|&q| SplineSpace1D::new(0.0, 1.0, self.level, q).map_err(CliError::from))
            .collect()
    }

    fn check(&self, path: &Path) -> Result<()> {
        let bad = |message: String| CliError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message,
        };
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(bad(format!("unsupported model format {} v{}", self.format, self.version)));
        }
        if self.degrees.len() != self.dim || self.scaling.len() != self.dim {
            return Err(bad("degree and scaling lists must have one entry per axis".into()));
        }
        let k: usize = self.spaces()?.iter().map(SplineSpace1D::dimension).product();
        if k != self.coefficients.len() {
            return Err(bad(format!("expected {k} coefficients, found {}", self.coefficients.len())));
        }
        Ok(())
    }

    /// Evaluates at row-major raw coordinates.
    pub fn predict(&self, points: &[f64]) -> Result<Vec<f64>> {
        let scaled = scale_points(points, &self.scaling);
        Ok(spline_predict(&self.spaces()?, &self.coefficients, &scaled)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| CliError::Malformed {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        model.check(path)?;
        Ok(model)
    }
}

/// One coefficient per line in `{:e}` notation, which round-trips exactly.
pub fn write_coefficients(path: &Path, coefficients: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(coefficients.len() * 24);
    for c in coefficients {
        text.push_str(&format!("{c:e}\n"));
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| CliError::Malformed {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                message: format!("cannot parse {:?} as a number", l.trim()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_file_round_trips_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let values = vec![0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0];
        write_coefficients(&path, &values).unwrap();
        assert_eq!(read_coefficients(&path).unwrap(), values);
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let k = 5 * 5;
        let coefs: Vec<f64> = (0..k).map(|i| (i as f64).sin() / 7.0).collect();
        let m = Model::new(1, vec![3, 3], 0.5, vec![AxisScaling::unit(); 2], coefs);
        m.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap(), m);
    }

    #[test]
    fn wrong_coefficient_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        Model::new(1, vec![3], 0.5, vec![AxisScaling::unit()], vec![0.0; 4])
            .save(&path)
            .unwrap();
        assert!(matches!(Model::load(&path), Err(CliError::Malformed { .. })));
    }

    #[test]
    fn constant_model_predicts_constant() {
        let m = Model::new(2, vec![2, 3], 1.0, vec![AxisScaling { lower: -1.0, upper: 3.0 }; 2], vec![2.5; 6 * 7]);
        let out = m.predict(&[-1.0, 3.0, 0.0, 1.7, 3.0, -1.0]).unwrap();
        for v in out {
            assert!((v - 2.5).abs() < 1e-13);
        }
    }
}
