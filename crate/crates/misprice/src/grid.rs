//! Uniform density grids over log mispricing.

use crate::error::{Error, Result};
use crate::kernel::FeeBand;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Shape of a uniform grid: bounds plus an odd node count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, n_points: usize) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidParams(format!(
                "grid needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "grid needs an odd node count >= 3, got {n_points}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            n_points,
        })
    }

    /// Symmetric grid `[-halfwidth, halfwidth]`.
    pub fn symmetric(halfwidth: f64, n_points: usize) -> Result<Self> {
        Self::new(-halfwidth, halfwidth, n_points)
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.n_points - 1) as f64
    }

    /// Node position as a convex combination of the bounds. This form is
    /// endpoint-exact and, on a symmetric grid, exactly mirror-symmetric:
    /// `node(n-1-j) == -node(j)` in floating point, so band edges landing
    /// on nodes are treated identically on both sides.
    pub fn node(&self, j: usize) -> f64 {
        let m = (self.n_points - 1) as f64;
        (self.lower * (m - j as f64) + self.upper * j as f64) / m
    }

    /// The grid must extend strictly beyond both effective band edges.
    pub fn covers_band(&self, band: &FeeBand) -> bool {
        self.lower < band.lower() && self.upper > band.upper()
    }
}

/// A density sampled on a uniform grid.
///
/// Values are nonnegative and, after [`DensityGrid::normalize`], carry a
/// unit trapezoid integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub lower: f64,
    pub upper: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_points {
            return Err(Error::InvalidParams(format!(
                "expected {} values, got {}",
                spec.n_points,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParams(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            lower: spec.lower,
            upper: spec.upper,
            values,
        })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            lower: spec.lower,
            upper: spec.upper,
            values: vec![0.0; spec.n_points],
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            lower: self.lower,
            upper: self.upper,
            n_points: self.values.len(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.n_points() - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.spec().node(j)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(move |j| self.node(j))
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    /// Scale to unit trapezoid integral; returns the normalization
    /// constant that was divided out.
    pub fn normalize(&mut self) -> Result<f64> {
        let total = self.integral();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate(format!(
                "cannot normalize density with integral {total}"
            )));
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(total)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            return 0.0;
        }
        let step = self.step();
        let pos = (x - self.lower) / step;
        let i = (pos.floor() as usize).min(self.n_points() - 2);
        let alpha = pos - i as f64;
        self.values[i] * (1.0 - alpha) + self.values[i + 1] * alpha
    }

    pub fn same_grid(&self, other: &DensityGrid) -> bool {
        self.lower == other.lower
            && self.upper == other.upper
            && self.n_points() == other.n_points()
    }

    pub fn check_same_grid(&self, other: &DensityGrid) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}] x {} vs [{}, {}] x {}",
                self.lower,
                self.upper,
                self.n_points(),
                other.lower,
                other.upper,
                other.n_points()
            )))
        }
    }

    /// Write the density as `x,density` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,density")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", format_float(self.node(j)), format_float(*v))?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read a density from `x,density` CSV, recovering the uniform grid.
    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(&path)?);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let bad = || Error::Config(format!("bad density row at line {}", lineno + 1));
            let x: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let v: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 3 {
            return Err(Error::Config("density file has fewer than 3 rows".into()));
        }
        let spec = GridSpec::new(xs[0], *xs.last().unwrap(), xs.len())?;
        let step = spec.step();
        for (j, x) in xs.iter().enumerate() {
            if (x - spec.node(j)).abs() > 1e-9 * step.max(1e-12) {
                return Err(Error::Config(format!(
                    "density grid is not uniform near row {}",
                    j + 2
                )));
            }
        }
        DensityGrid::new(spec, vs)
    }
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    (interior + 0.5 * (values[0] + values[values.len() - 1])) * step
}

/// Full-precision float formatting that round-trips through parse.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if s.parse::<f64>() != Ok(v) {
        s = format!("{v:e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(0.0, 0.0, 5).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 4).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 1).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 5).is_ok());
    }

    #[test]
    fn normalize_gives_unit_integral() {
        let spec = GridSpec::symmetric(1.0, 101).unwrap();
        let values: Vec<f64> = (0..101).map(|j| (j as f64 / 100.0) + 0.5).collect();
        let mut grid = DensityGrid::new(spec, values).unwrap();
        grid.normalize().unwrap();
        assert_relative_eq!(grid.integral(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let spec = GridSpec::new(0.0, 1.0, 5).unwrap();
        let grid = DensityGrid::new(spec, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(grid.interpolate(0.5), 2.0);
        assert_relative_eq!(grid.interpolate(0.375), 1.5);
        assert_eq!(grid.interpolate(-0.1), 0.0);
        assert_eq!(grid.interpolate(1.1), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let spec = GridSpec::symmetric(0.006, 11).unwrap();
        let values: Vec<f64> = (0..11).map(|j| (j as f64) * 0.37 + 0.001).collect();
        let grid = DensityGrid::new(spec, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        grid.save_csv(&path).unwrap();
        let back = DensityGrid::load_csv(&path).unwrap();
        assert_eq!(grid, back);
    }
}
