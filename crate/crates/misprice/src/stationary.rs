//! Stationary density of the clamped chain by function iteration.
//!
//! Each iteration evaluates `f_{k+1}(x_j) = int q(x0, x_j) f_k(x0) dx0`
//! on every grid node with one 15-point Gauss-Kronrod panel per grid
//! cell and `f_k` linearly interpolated between nodes, then renormalizes
//! to a unit trapezoid integral. Under constant drift and volatility the
//! kernel depends only on the lag `x_j - x0`, and the GK abscissas of a
//! uniform grid land on a fixed lattice of lags; the kernel is therefore
//! tabulated once per solve and each iteration reduces to two discrete
//! cross-correlations plus point-mass terms for the clamped tails.
//! Node evaluations are data-parallel with a fixed per-node summation
//! order, so results do not depend on the thread count.

use crate::error::{Error, Result};
use crate::grid::{trapezoid, DensityGrid, GridSpec};
use crate::kernel::{log_increment_density, FeeBand, ModelParams};
use crate::quadrature::{GK15_NODES, GK15_WEIGHTS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// Grid nodes, odd and >= 3. 201 suffices for exploration; table
    /// reproduction uses 801.
    pub n_points: usize,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Early stop once the L1 distance of successive densities falls
    /// below this.
    pub l1_tolerance: f64,
    /// Explicit grid half-width in log units; `None` picks
    /// [`auto_halfwidth`].
    pub grid_halfwidth: Option<f64>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            n_points: 201,
            max_iterations: 1000,
            l1_tolerance: 1e-10,
            grid_halfwidth: None,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 || self.n_points % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "n_points must be odd and >= 3, got {}",
                self.n_points
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max_iterations must be >= 1".into()));
        }
        if !(self.l1_tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "l1_tolerance must be > 0, got {}",
                self.l1_tolerance
            )));
        }
        Ok(())
    }
}

/// Per-iteration convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// L1 distance between successive normalized densities, one entry
    /// per completed iteration.
    pub l1_distances: Vec<f64>,
    /// Mass lost off the grid before renormalization, per iteration.
    pub truncation_losses: Vec<f64>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Normalization constant of the final iteration.
    pub final_norm: f64,
    /// Whether the L1 tolerance was reached before the cap.
    pub converged: bool,
}

impl ConvergenceTrace {
    /// Write the trace as `iteration,l1_distance,truncation_loss` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,l1_distance,truncation_loss")?;
        for (k, (d, t)) in self
            .l1_distances
            .iter()
            .zip(self.truncation_losses.iter())
            .enumerate()
        {
            writeln!(out, "{},{},{}", k + 1, d, t)?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Initial guess shape for the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Initializer {
    /// Indicator of the effective band, normalized.
    Window,
    /// Unit mass on the center node.
    DiracAtZero,
}

/// Default half-width: covers the band twice over and six combined
/// one-step standard deviations beyond the band edge. With jumps
/// active the grid must also reach the landing zone of a single jump
/// event regardless of how rare jumps are — the profit integrands
/// weight exactly that far tail — so the jump-event spread enters
/// unweighted by q.
pub fn auto_halfwidth(params: &ModelParams, band: &FeeBand) -> f64 {
    let edge = band.upper().max(-band.lower());
    let mut half = (2.0 * edge).max(edge + 6.0 * params.combined_step_std());
    if params.jump_prob_q > 0.0 {
        let event_std = (params.sigma_step * params.sigma_step
            + params.jump_std * params.jump_std)
            .sqrt();
        half = half.max(edge + params.jump_mean.abs() + 6.0 * event_std);
    }
    half
}

/// Grid used by [`solve_stationary`] for the given settings.
pub fn solver_grid(
    params: &ModelParams,
    band: &FeeBand,
    settings: &SolveSettings,
) -> Result<GridSpec> {
    settings.validate()?;
    let halfwidth = settings
        .grid_halfwidth
        .unwrap_or_else(|| auto_halfwidth(params, band));
    let spec = GridSpec::symmetric(halfwidth, settings.n_points)?;
    if !spec.covers_band(band) {
        return Err(Error::BandOutsideGrid {
            lo: band.lower(),
            hi: band.upper(),
            grid_lo: spec.lower,
            grid_hi: spec.upper,
        });
    }
    Ok(spec)
}

/// Window (or Dirac) initial density on `spec`, normalized.
pub fn initial_density(band: &FeeBand, spec: GridSpec) -> Result<DensityGrid> {
    initial_density_with(band, spec, Initializer::Window)
}

pub fn initial_density_with(
    band: &FeeBand,
    spec: GridSpec,
    init: Initializer,
) -> Result<DensityGrid> {
    if !spec.covers_band(band) {
        return Err(Error::BandOutsideGrid {
            lo: band.lower(),
            hi: band.upper(),
            grid_lo: spec.lower,
            grid_hi: spec.upper,
        });
    }
    let mut grid = DensityGrid::zeros(spec);
    match init {
        Initializer::Window => {
            for j in 0..spec.n_points {
                let x = spec.node(j);
                if band.contains(x) {
                    grid.values[j] = 1.0;
                }
            }
        }
        Initializer::DiracAtZero => {
            grid.values[spec.n_points / 2] = 1.0;
        }
    }
    grid.normalize()?;
    Ok(grid)
}

/// How a grid cell relates to the effective band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Inside,
    Below,
    Above,
    /// A band edge cuts through the cell; GK abscissas are clamped
    /// individually.
    Straddle,
}

/// Kernel tables reused across iterations of one solve.
struct IterationKernel {
    spec: GridSpec,
    p: f64,
    /// Raw kernel values on the lag lattice: `k[(d + offset) * 15 + m] =
    /// h(step * (d - alpha_m))` with `d = j - i`.
    k: Vec<f64>,
    /// Folded kernels weighting the left/right node of each cell.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Increment density from each band edge to each node.
    h_upper: Vec<f64>,
    h_lower: Vec<f64>,
    cell_kinds: Vec<CellKind>,
    /// GK abscissa positions within a cell, as fractions of the cell.
    alphas: [f64; 15],
    upper_edge: f64,
    lower_edge: f64,
}

impl IterationKernel {
    fn build(spec: GridSpec, params: &ModelParams, band: &FeeBand) -> Self {
        let n = spec.n_points;
        let step = spec.step();
        let offset = n - 2;
        let lags = 2 * n - 2;

        let mut alphas = [0.0; 15];
        for (m, g) in GK15_NODES.iter().enumerate() {
            alphas[m] = 0.5 * (1.0 + g);
        }

        let mut k = vec![0.0; lags * 15];
        for d in 0..lags {
            let lag_index = d as isize - offset as isize;
            for (m, alpha) in alphas.iter().enumerate() {
                let arg = step * (lag_index as f64 - alpha);
                k[d * 15 + m] = log_increment_density(arg, params).exp();
            }
        }

        let half = 0.5 * step;
        let mut a = vec![0.0; lags];
        let mut b = vec![0.0; lags];
        for d in 0..lags {
            let mut acc_a = 0.0;
            let mut acc_b = 0.0;
            for (m, alpha) in alphas.iter().enumerate() {
                let w = GK15_WEIGHTS[m] * k[d * 15 + m];
                acc_a += w * (1.0 - alpha);
                acc_b += w * alpha;
            }
            a[d] = half * acc_a;
            b[d] = half * acc_b;
        }

        let upper_edge = band.upper();
        let lower_edge = band.lower();
        let h_upper: Vec<f64> = (0..n)
            .map(|j| log_increment_density(spec.node(j) - upper_edge, params).exp())
            .collect();
        let h_lower: Vec<f64> = (0..n)
            .map(|j| log_increment_density(spec.node(j) - lower_edge, params).exp())
            .collect();

        let cell_kinds = (0..n - 1)
            .map(|i| {
                let left = spec.node(i);
                let right = spec.node(i + 1);
                if left >= lower_edge && right <= upper_edge {
                    CellKind::Inside
                } else if right <= lower_edge {
                    CellKind::Below
                } else if left >= upper_edge {
                    CellKind::Above
                } else {
                    CellKind::Straddle
                }
            })
            .collect();

        Self {
            spec,
            p: params.arrival_prob_p,
            k,
            a,
            b,
            h_upper,
            h_lower,
            cell_kinds,
            alphas,
            upper_edge,
            lower_edge,
        }
    }

    /// One unnormalized application of the transition kernel.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.spec.n_points;
        let step = self.spec.step();
        let half = 0.5 * step;
        let offset = n - 2;

        // Mass of cells whose abscissas all clamp to one edge; GK of the
        // linear interpolant equals the trapezoid cell mass.
        let mut mass_above = 0.0;
        let mut mass_below = 0.0;
        let mut straddles: Vec<usize> = Vec::new();
        let mut inside_lo = usize::MAX;
        let mut inside_hi = 0usize;
        for (i, kind) in self.cell_kinds.iter().enumerate() {
            match kind {
                CellKind::Above => mass_above += half * (f[i] + f[i + 1]),
                CellKind::Below => mass_below += half * (f[i] + f[i + 1]),
                CellKind::Straddle => straddles.push(i),
                CellKind::Inside => {
                    inside_lo = inside_lo.min(i);
                    inside_hi = inside_hi.max(i + 1);
                }
            }
        }
        let has_inside = inside_lo != usize::MAX;
        let p = self.p;

        let eval_node = |j: usize| -> f64 {
            // Clamped branch: identity over in-band cells, edge point
            // masses for fully outside cells, per-abscissa clamping where
            // an edge cuts a cell.
            let mut clamped = 0.0;
            if has_inside {
                let mut acc = 0.0;
                for i in inside_lo..inside_hi {
                    let d = j + offset - i;
                    acc += self.a[d] * f[i] + self.b[d] * f[i + 1];
                }
                clamped += acc;
            }
            for &i in &straddles {
                let d = j + offset - i;
                let mut acc = 0.0;
                for (m, alpha) in self.alphas.iter().enumerate() {
                    let x0 = self.spec.node(i) + step * alpha;
                    let hval = if x0 > self.upper_edge {
                        self.h_upper[j]
                    } else if x0 < self.lower_edge {
                        self.h_lower[j]
                    } else {
                        self.k[d * 15 + m]
                    };
                    let fhat = f[i] * (1.0 - alpha) + f[i + 1] * alpha;
                    acc += GK15_WEIGHTS[m] * hval * fhat;
                }
                clamped += half * acc;
            }
            clamped += self.h_upper[j] * mass_above + self.h_lower[j] * mass_below;

            if p == 1.0 {
                return clamped;
            }

            // Free branch: plain convolution over every cell.
            let mut free = 0.0;
            for i in 0..n - 1 {
                let d = j + offset - i;
                free += self.a[d] * f[i] + self.b[d] * f[i + 1];
            }
            (1.0 - p) * free + p * clamped
        };

        let mut out = vec![0.0; n];
        if n >= 256 {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(j, slot)| *slot = eval_node(j));
        } else {
            for (j, slot) in out.iter_mut().enumerate() {
                *slot = eval_node(j);
            }
        }
        out
    }
}

fn check_finite(values: &[f64], spec: &GridSpec) -> Result<()> {
    for (j, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                node: j,
                x: spec.node(j),
                value: *v,
            });
        }
    }
    Ok(())
}

/// One normalized iteration of the density map. Builds the kernel tables
/// for a single application; [`solve_stationary`] amortizes them across
/// iterations.
pub fn iterate_once(
    f_k: &DensityGrid,
    params: &ModelParams,
    band: &FeeBand,
) -> Result<DensityGrid> {
    params.validate()?;
    let spec = f_k.spec();
    let kernel = IterationKernel::build(spec, params, band);
    let raw = kernel.apply(&f_k.values);
    check_finite(&raw, &spec)?;
    let mut next = DensityGrid {
        lower: f_k.lower,
        upper: f_k.upper,
        values: raw,
    };
    next.normalize()?;
    Ok(next)
}

/// Trapezoid L1 distance between two densities on the same grid.
pub fn l1_distance(f: &DensityGrid, g: &DensityGrid) -> Result<f64> {
    f.check_same_grid(g)?;
    let diffs: Vec<f64> = f
        .values
        .iter()
        .zip(g.values.iter())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(trapezoid(&diffs, f.step()))
}

/// Iterate the density map from the window initializer until the L1
/// tolerance or the iteration cap is hit. Hitting the cap is reported in
/// the trace, not as an error; some parameter corners converge slowly.
pub fn solve_stationary(
    params: &ModelParams,
    band: &FeeBand,
    settings: &SolveSettings,
) -> Result<(DensityGrid, ConvergenceTrace)> {
    params.validate()?;
    let spec = solver_grid(params, band, settings)?;
    let mut current = initial_density(band, spec)?;
    let kernel = IterationKernel::build(spec, params, band);

    let mut l1_distances = Vec::new();
    let mut truncation_losses = Vec::new();
    let mut final_norm = 1.0;
    let mut converged = false;

    for _ in 0..settings.max_iterations {
        let raw = kernel.apply(&current.values);
        check_finite(&raw, &spec)?;
        let mut next = DensityGrid {
            lower: current.lower,
            upper: current.upper,
            values: raw,
        };
        let norm = next.normalize()?;
        final_norm = norm;
        truncation_losses.push(1.0 - norm);
        let dist = l1_distance(&next, &current)?;
        l1_distances.push(dist);
        current = next;
        if dist < settings.l1_tolerance {
            converged = true;
            break;
        }
    }

    let trace = ConvergenceTrace {
        iterations: l1_distances.len(),
        l1_distances,
        truncation_losses,
        final_norm,
        converged,
    };
    Ok((current, trace))
}
