//! Headline quantities derived from a stationary density: trade-region
//! probability, expected arbitrage profit and volume, transaction
//! counts, and the CEX-spread mixture fit.
//!
//! Profit and volume use the CPMM rebalancing closed forms for a
//! symmetric band; the CFMM generalization covers invariants
//! `x^theta y^(1-theta) = L` and reduces to the CPMM form at
//! `theta = 0.5`. All tail integrals are trapezoid sums on the density
//! grid with the cell containing a band edge split by linear
//! interpolation.

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::kernel::{FeeBand, ModelParams};
use serde::{Deserialize, Serialize};

/// Pool description in quote units.
///
/// `mid_price_w` and `liquidity_l` are only needed for CFMM exponents
/// other than 0.5; when both are present they must be consistent with
/// `tvl = 2 L sqrt(W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    /// Total value locked in quote units.
    pub tvl: f64,
    /// AMM fee in basis points (descriptive; computations use the band).
    pub gamma_bp: f64,
    /// CFMM exponent in (0, 1); 0.5 for a CPMM.
    pub theta: f64,
    /// External mid price W in quote units per base unit.
    pub mid_price_w: Option<f64>,
    /// Invariant constant L.
    pub liquidity_l: Option<f64>,
}

impl PoolSpec {
    pub fn cpmm(tvl: f64, gamma_bp: f64) -> Result<Self> {
        let pool = Self {
            tvl,
            gamma_bp,
            theta: 0.5,
            mid_price_w: None,
            liquidity_l: None,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tvl > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tvl must be > 0, got {}",
                self.tvl
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "theta must be in (0, 1), got {}",
                self.theta
            )));
        }
        if let (Some(w), Some(l)) = (self.mid_price_w, self.liquidity_l) {
            if !(w > 0.0 && l > 0.0) {
                return Err(Error::InvalidParams(
                    "mid_price_w and liquidity_l must be positive".into(),
                ));
            }
            let implied = 2.0 * l * w.sqrt();
            if (implied - self.tvl).abs() > 1e-9 * self.tvl.abs() {
                return Err(Error::InvalidParams(format!(
                    "tvl {} inconsistent with 2*L*sqrt(W) = {implied}",
                    self.tvl
                )));
            }
        }
        Ok(())
    }

    /// `L * W^theta`, the scale of the CFMM profit formula. A CPMM can
    /// fall back to `tvl / 2 = L * sqrt(W)` without explicit L and W.
    pub fn cfmm_scale(&self) -> Result<f64> {
        match (self.mid_price_w, self.liquidity_l) {
            (Some(w), Some(l)) => Ok(l * w.powf(self.theta)),
            _ if self.theta == 0.5 => Ok(0.5 * self.tvl),
            _ => Err(Error::InvalidParams(
                "theta != 0.5 needs explicit mid_price_w and liquidity_l".into(),
            )),
        }
    }
}

/// Arbitrage activity summary, per step and per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbReport {
    /// Stationary mass outside the band.
    pub trade_probability: f64,
    /// Expected arbitrageur profit per chain step, quote units.
    pub profit_per_step: f64,
    /// Expected arbitrage volume per chain step, quote units.
    pub volume_per_step: f64,
    /// Profit per day: `profit_per_step * 86400 / step_seconds`.
    pub daily_profit: f64,
    /// Volume per day.
    pub daily_volume: f64,
    /// Expected upper-tail (buy-base-on-DEX) transactions per day.
    pub expected_count_up: f64,
    /// Expected lower-tail transactions per day.
    pub expected_count_down: f64,
}

/// Integral of `f(t) g(t)` over `[edge, f.upper]` by trapezoid rule,
/// with the cell containing `edge` split by linear interpolation.
fn upper_tail_integral<G: Fn(f64) -> f64>(f: &DensityGrid, edge: f64, g: G) -> f64 {
    if edge >= f.upper {
        return 0.0;
    }
    let lo = edge.max(f.lower);
    let step = f.step();
    let n = f.n_points();
    let pos = (lo - f.lower) / step;
    let k = (pos.floor() as usize).min(n - 2);
    let first_full = k + 1;
    let mut acc = 0.0;
    let x_next = f.node(first_full);
    if x_next > lo {
        let f_edge = f.interpolate(lo);
        acc += (x_next - lo) * 0.5 * (f_edge * g(lo) + f.values[first_full] * g(x_next));
    }
    for i in first_full..n - 1 {
        let (xa, xb) = (f.node(i), f.node(i + 1));
        acc += (xb - xa) * 0.5 * (f.values[i] * g(xa) + f.values[i + 1] * g(xb));
    }
    acc
}

/// Integral of `f(t) g(t)` over `[f.lower, edge]`, mirroring
/// [`upper_tail_integral`].
fn lower_tail_integral<G: Fn(f64) -> f64>(f: &DensityGrid, edge: f64, g: G) -> f64 {
    if edge <= f.lower {
        return 0.0;
    }
    let hi = edge.min(f.upper);
    let step = f.step();
    let n = f.n_points();
    let pos = (hi - f.lower) / step;
    let mut k = (pos.floor() as usize).min(n - 1);
    if f.node(k) > hi {
        k = k.saturating_sub(1);
    }
    // Full cells run up to node k, then a partial piece [node(k), hi].
    let mut acc = 0.0;
    for i in 0..k {
        let (xa, xb) = (f.node(i), f.node(i + 1));
        acc += (xb - xa) * 0.5 * (f.values[i] * g(xa) + f.values[i + 1] * g(xb));
    }
    let xk = f.node(k);
    if hi > xk {
        let f_edge = f.interpolate(hi);
        acc += (hi - xk) * 0.5 * (f.values[k] * g(xk) + f_edge * g(hi));
    }
    acc
}

fn check_band_in_grid(f_star: &DensityGrid, band: &FeeBand) -> Result<()> {
    if f_star.spec().covers_band(band) {
        Ok(())
    } else {
        Err(Error::BandOutsideGrid {
            lo: band.lower(),
            hi: band.upper(),
            grid_lo: f_star.lower,
            grid_hi: f_star.upper,
        })
    }
}

/// Stationary probability of sitting outside the effective band.
pub fn trade_region_mass(f_star: &DensityGrid, band: &FeeBand) -> Result<f64> {
    check_band_in_grid(f_star, band)?;
    let up = upper_tail_integral(f_star, band.upper(), |_| 1.0);
    let down = lower_tail_integral(f_star, band.lower(), |_| 1.0);
    Ok(up + down)
}

/// Stationary probability of sitting inside the effective band;
/// complements [`trade_region_mass`] exactly under the shared edge
/// splitting.
pub fn in_band_mass(f_star: &DensityGrid, band: &FeeBand) -> Result<f64> {
    check_band_in_grid(f_star, band)?;
    let up_from_lower = upper_tail_integral(f_star, band.lower(), |_| 1.0);
    let up_from_upper = upper_tail_integral(f_star, band.upper(), |_| 1.0);
    Ok(up_from_lower - up_from_upper)
}

/// Per-event arbitrageur profit per unit TVL for a pre-clamp state `t`
/// above the symmetric effective edge `gamma`.
pub fn event_profit_upper(t: f64, gamma: f64) -> f64 {
    (0.5 * gamma).exp() * ((0.5 * (t - gamma)).cosh() - 1.0)
}

/// Mirror of [`event_profit_upper`] for `t` below `-gamma`.
pub fn event_profit_lower(t: f64, gamma: f64) -> f64 {
    (-0.5 * gamma).exp() * ((0.5 * (t + gamma)).cosh() - 1.0)
}

/// Per-event gross quote volume per unit TVL for `t` above `gamma`.
pub fn event_volume_upper(t: f64, gamma: f64) -> f64 {
    (0.5 * gamma).exp() - (-0.5 * t + gamma).exp()
}

/// Per-event gross quote volume per unit TVL for `t` below `-gamma`,
/// written so the integrand is nonnegative on its domain.
pub fn event_volume_lower(t: f64, gamma: f64) -> f64 {
    (-0.5 * t - gamma).exp() - (-0.5 * gamma).exp()
}

/// Expected arbitrageur profit per step for a CPMM:
/// `TVL * p * [e^{g/2} int_g (cosh((t-g)/2) - 1) f* dt + e^{-g/2}
/// int_{-g} (cosh((t+g)/2) - 1) f* dt]`. Requires a symmetric band.
pub fn expected_profit_cpmm(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
    pool: &PoolSpec,
) -> Result<f64> {
    pool.validate()?;
    check_band_in_grid(f_star, band)?;
    let gamma = band.symmetric_edge()?;
    let up = upper_tail_integral(f_star, gamma, |t| event_profit_upper(t, gamma));
    let down = lower_tail_integral(f_star, -gamma, |t| event_profit_lower(t, gamma));
    Ok(pool.tvl * params.arrival_prob_p * (up + down))
}

/// Expected arbitrage trading volume per step for a CPMM, quote units.
pub fn expected_volume_cpmm(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
    pool: &PoolSpec,
) -> Result<f64> {
    pool.validate()?;
    check_band_in_grid(f_star, band)?;
    let gamma = band.symmetric_edge()?;
    let up = upper_tail_integral(f_star, gamma, |t| event_volume_upper(t, gamma));
    let down = lower_tail_integral(f_star, -gamma, |t| event_volume_lower(t, gamma));
    Ok(pool.tvl * params.arrival_prob_p * (up + down))
}

/// Dimensionless CFMM profit integral: the expected profit per step
/// divided by `L * W^theta`.
pub fn arb_integral_cfmm(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
    theta: f64,
) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "theta must be in (0, 1), got {theta}"
        )));
    }
    check_band_in_grid(f_star, band)?;
    let gamma = band.symmetric_edge()?;
    let c1 = (theta / (1.0 - theta)).powf(1.0 - theta);
    let c2 = ((1.0 - theta) / theta).powf(theta);
    let upper = |t: f64| {
        c1 * ((t * (1.0 - theta)).exp() - (gamma * (1.0 - theta)).exp())
            + c2 * ((gamma - t * theta).exp() - (gamma * (1.0 - theta)).exp())
    };
    let lower = |t: f64| {
        c1 * ((t * (1.0 - theta)).exp() - (gamma * (theta - 1.0)).exp())
            + c2 * ((-t * theta - gamma).exp() - (gamma * (theta - 1.0)).exp())
    };
    let up = upper_tail_integral(f_star, gamma, upper);
    let down = lower_tail_integral(f_star, -gamma, lower);
    Ok(params.arrival_prob_p * (up + down))
}

/// Expected arbitrageur profit per step for a CFMM with exponent
/// `pool.theta`: `L * W^theta * ARB`. Agrees with
/// [`expected_profit_cpmm`] at `theta = 0.5`.
pub fn expected_profit_cfmm(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
    pool: &PoolSpec,
) -> Result<f64> {
    pool.validate()?;
    let arb = arb_integral_cfmm(f_star, band, params, pool.theta)?;
    Ok(pool.cfmm_scale()? * arb)
}

/// Expected arbitrage transactions per day in each direction:
/// `p * tail mass * steps_per_day`. The upper tail corresponds to
/// buying base on the DEX.
pub fn expected_counts(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    check_band_in_grid(f_star, band)?;
    let steps = params.steps_per_day();
    let p = params.arrival_prob_p;
    let up = upper_tail_integral(f_star, band.upper(), |_| 1.0);
    let down = lower_tail_integral(f_star, band.lower(), |_| 1.0);
    Ok((p * up * steps, p * down * steps))
}

/// Full per-step and per-day activity report for a symmetric band.
pub fn arb_report(
    f_star: &DensityGrid,
    band: &FeeBand,
    params: &ModelParams,
    pool: &PoolSpec,
) -> Result<ArbReport> {
    let trade_probability = trade_region_mass(f_star, band)?;
    let profit_per_step = expected_profit_cpmm(f_star, band, params, pool)?;
    let volume_per_step = expected_volume_cpmm(f_star, band, params, pool)?;
    let steps = params.steps_per_day();
    let (expected_count_up, expected_count_down) = expected_counts(f_star, band, params)?;
    Ok(ArbReport {
        trade_probability,
        profit_per_step,
        volume_per_step,
        daily_profit: profit_per_step * steps,
        daily_volume: volume_per_step * steps,
        expected_count_up,
        expected_count_down,
    })
}

/// Result of the simplex-constrained mixture fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    /// One weight per component, nonnegative, summing to one.
    pub weights: Vec<f64>,
    /// Euclidean norm of the residual at the optimum.
    pub residual_norm: f64,
    /// Set when several weight vectors attain the optimum; the
    /// lexicographically smallest is returned.
    pub degenerate: bool,
}

/// Least-squares weights `min || sum_g w_g f_g - hist ||_2` over the
/// simplex, solved exactly by enumerating active sets (component counts
/// are small in practice).
pub fn spread_mixture_fit(
    components: &[(f64, DensityGrid)],
    empirical_hist: &DensityGrid,
) -> Result<MixtureFit> {
    let k = components.len();
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "mixture fit needs at least 2 components, got {k}"
        )));
    }
    if k > 20 {
        return Err(Error::Unsupported(format!(
            "active-set enumeration supports at most 20 components, got {k}"
        )));
    }
    for (_, f) in components {
        empirical_hist.check_same_grid(f)?;
    }

    let dot = |a: &DensityGrid, b: &DensityGrid| -> f64 {
        a.values
            .iter()
            .zip(b.values.iter())
            .map(|(x, y)| x * y)
            .sum()
    };
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = dot(&components[i].1, &components[j].1);
        }
        rhs[i] = dot(&components[i].1, empirical_hist);
    }
    let yy = dot(empirical_hist, empirical_hist);

    // The KKT system mixes Gram entries with unit constraint rows; bring
    // the Gram block to O(1) so pivoting sees comparable scales. The
    // weight solution is unchanged (the multiplier absorbs the factor).
    let gram_scale = (0..k)
        .map(|i| gram[i][i])
        .fold(f64::MIN_POSITIVE, f64::max);

    let objective = |w: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..k {
            for j in 0..k {
                quad += w[i] * gram[i][j] * w[j];
            }
            quad -= 2.0 * w[i] * rhs[i];
        }
        quad + yy
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut degenerate = false;
    let scale = yy.max(1.0);

    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        // Equality-constrained least squares on the support via the KKT
        // system [[G_S, 1], [1^T, 0]] [w; lambda] = [b_S; 1].
        let dim = s + 1;
        let mut m = vec![vec![0.0; dim + 1]; dim];
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                m[r][c] = gram[i][j] / gram_scale;
            }
            m[r][s] = 1.0;
            m[r][dim] = rhs[i] / gram_scale;
        }
        for c in 0..s {
            m[s][c] = 1.0;
        }
        m[s][dim] = 1.0;
        let sol = match solve_dense(&mut m) {
            Some(sol) => sol,
            None => continue, // singular support, e.g. duplicated components
        };
        if sol[..s].iter().any(|w| *w < -1e-10) {
            continue;
        }
        let mut w = vec![0.0; k];
        for (r, &i) in support.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        let total: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= total;
        }
        let obj = objective(&w);
        match &mut best {
            None => best = Some((obj, w)),
            Some((best_obj, best_w)) => {
                if obj < *best_obj - 1e-12 * scale {
                    *best_obj = obj;
                    *best_w = w;
                    degenerate = false;
                } else if (obj - *best_obj).abs() <= 1e-12 * scale {
                    // A tie only counts as degenerate when the optimum is
                    // attained by a materially different weight vector,
                    // not by the same vertex reached from another support.
                    let same = w
                        .iter()
                        .zip(best_w.iter())
                        .all(|(a, b)| (a - b).abs() <= 1e-9);
                    if !same {
                        degenerate = true;
                        if lexicographically_less(&w, best_w) {
                            *best_obj = obj;
                            *best_w = w;
                        }
                    }
                }
            }
        }
    }

    let (obj, weights) =
        best.ok_or_else(|| Error::Degenerate("no feasible mixture weights found".into()))?;
    Ok(MixtureFit {
        weights,
        residual_norm: obj.max(0.0).sqrt(),
        degenerate,
    })
}

fn lexicographically_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on an augmented matrix;
/// returns `None` when the system is singular.
fn solve_dense(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = m.len();
    let mut max_entry = 0.0f64;
    for row in m.iter() {
        for v in &row[..n] {
            max_entry = max_entry.max(v.abs());
        }
    }
    if max_entry == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() < 1e-12 * max_entry {
            return None;
        }
        m.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for c in col..=n {
                m[row][c] -= factor * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::kernel::{DailyModel, NoiseLaw};
    use crate::quadrature::gk15_panels;
    use crate::stationary::{solve_stationary, SolveSettings};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_params(step_seconds: f64, q: f64) -> ModelParams {
        DailyModel {
            mu_daily: 0.00125,
            sigma_daily: 0.05,
            q_step: q,
            jump_mean_daily: -0.2035,
            jump_std_daily: 0.1952,
            p: 1.0,
            step_seconds,
            noise: NoiseLaw::Gaussian,
        }
        .to_step()
        .unwrap()
    }

    fn truncated_gaussian(spec: GridSpec, mean: f64, sd: f64) -> DensityGrid {
        let mut g = DensityGrid::zeros(spec);
        for j in 0..spec.n_points {
            let z = (spec.node(j) - mean) / sd;
            g.values[j] = (-0.5 * z * z).exp();
        }
        g.normalize().unwrap();
        g
    }

    #[test]
    fn trade_region_of_in_band_density_is_zero() {
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.006, 201).unwrap();
        let mut f = DensityGrid::zeros(spec);
        for j in 0..spec.n_points {
            if spec.node(j).abs() < 0.002 {
                f.values[j] = 1.0;
            }
        }
        f.normalize().unwrap();
        assert_abs_diff_eq!(trade_region_mass(&f, &band).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tail_and_band_mass_sum_to_one() {
        let band = FeeBand::new(0.0031, 0.0028, 0.00013).unwrap();
        let spec = GridSpec::symmetric(0.009, 301).unwrap();
        let f = truncated_gaussian(spec, 4e-4, 2.6e-3);
        let tails = trade_region_mass(&f, &band).unwrap();
        let inside = in_band_mass(&f, &band).unwrap();
        assert_relative_eq!(tails + inside, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn band_outside_grid_is_rejected() {
        let band = FeeBand::symmetric_bp(300.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.006, 201).unwrap();
        let f = truncated_gaussian(spec, 0.0, 2e-3);
        assert!(matches!(
            trade_region_mass(&f, &band),
            Err(Error::BandOutsideGrid { .. })
        ));
    }

    #[test]
    fn trade_region_12s_30bp_matches_reference() {
        // sigma = 5% daily, mu = sigma^2/2, dt = 12 s, q = 0, p = 1.
        let params = reference_params(12.0, 0.0);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 801,
            max_iterations: 2000,
            l1_tolerance: 1e-12,
            grid_halfwidth: Some(0.006),
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let mass = trade_region_mass(&f_star, &band).unwrap();
        assert_abs_diff_eq!(mass, 0.123, epsilon = 0.005);
    }

    #[test]
    fn profit_and_volume_vanish_inside_band() {
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.006, 201).unwrap();
        let mut f = DensityGrid::zeros(spec);
        for j in 0..spec.n_points {
            if spec.node(j).abs() < 0.0015 {
                f.values[j] = 1.0;
            }
        }
        f.normalize().unwrap();
        let params = reference_params(12.0, 0.0);
        let pool = PoolSpec::cpmm(1.0, 30.0).unwrap();
        assert_eq!(
            expected_profit_cpmm(&f, &band, &params, &pool).unwrap(),
            0.0
        );
        assert_eq!(
            expected_volume_cpmm(&f, &band, &params, &pool).unwrap(),
            0.0
        );
    }

    #[test]
    fn asymmetric_band_rejected_by_profit_formulas() {
        let band = FeeBand::new(0.003, 0.002, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.01, 201).unwrap();
        let f = truncated_gaussian(spec, 0.0, 2e-3);
        let params = reference_params(12.0, 0.0);
        let pool = PoolSpec::cpmm(1.0, 30.0).unwrap();
        assert!(expected_profit_cpmm(&f, &band, &params, &pool).is_err());
        assert!(expected_volume_cpmm(&f, &band, &params, &pool).is_err());
    }

    #[test]
    fn cfmm_at_half_theta_equals_cpmm() {
        let params = reference_params(12.0, 0.2);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 401,
            max_iterations: 300,
            l1_tolerance: 1e-11,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let pool = PoolSpec::cpmm(2.0, 30.0).unwrap();
        let cpmm = expected_profit_cpmm(&f_star, &band, &params, &pool).unwrap();
        let cfmm = expected_profit_cfmm(&f_star, &band, &params, &pool).unwrap();
        assert_relative_eq!(cpmm, cfmm, max_relative = 1e-9);
    }

    #[test]
    fn cfmm_matches_fine_quadrature_oracle() {
        // theta = 0.3 on a synthetic truncated-Gaussian density, checked
        // against direct high-resolution quadrature of the integrand
        // with interpolated density values.
        let theta: f64 = 0.3;
        // Fine grid: the implementation is a trapezoid sum, which sits
        // O(step^2) from the oracle's exact quadrature.
        let spec = GridSpec::symmetric(0.02, 8001).unwrap();
        let f = truncated_gaussian(spec, 1e-3, 4e-3);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let params = reference_params(12.0, 0.0);
        let gamma = band.upper();
        let c1 = (theta / (1.0 - theta)).powf(1.0 - theta);
        let c2 = ((1.0 - theta) / theta).powf(theta);
        let upper = gk15_panels(
            |t| {
                let g = c1 * ((t * (1.0 - theta)).exp() - (gamma * (1.0 - theta)).exp())
                    + c2 * ((gamma - t * theta).exp() - (gamma * (1.0 - theta)).exp());
                g * f.interpolate(t)
            },
            gamma,
            f.upper,
            4000,
        );
        let lower = gk15_panels(
            |t| {
                let g = c1 * ((t * (1.0 - theta)).exp() - (gamma * (theta - 1.0)).exp())
                    + c2 * ((-t * theta - gamma).exp() - (gamma * (theta - 1.0)).exp());
                g * f.interpolate(t)
            },
            f.lower,
            -gamma,
            4000,
        );
        let oracle = upper + lower;
        let got = arb_integral_cfmm(&f, &band, &params, theta).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-6);
    }

    #[test]
    fn volume_dominates_profit_near_band() {
        // Tail mass within 2*gamma of the edges: the linear volume
        // integrand beats the quadratic profit integrand there.
        let params = reference_params(12.0, 0.0);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.009, 401).unwrap();
        let f = truncated_gaussian(spec, 0.0, 2.5e-3);
        let pool = PoolSpec::cpmm(1.0, 30.0).unwrap();
        let profit = expected_profit_cpmm(&f, &band, &params, &pool).unwrap();
        let volume = expected_volume_cpmm(&f, &band, &params, &pool).unwrap();
        assert!(volume >= profit, "volume {volume} < profit {profit}");
    }

    #[test]
    fn volume_integrands_are_nonnegative_on_their_domains() {
        let gamma = 0.003;
        let mut t = gamma;
        while t < 0.2 {
            assert!(event_volume_upper(t, gamma) >= 0.0, "upper at {t}");
            assert!(event_volume_lower(-t, gamma) >= 0.0, "lower at {}", -t);
            t += 1e-4;
        }
    }

    #[test]
    fn report_scales_linearly_in_tvl_and_p() {
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.009, 301).unwrap();
        let f = truncated_gaussian(spec, 0.0, 2.5e-3);
        let params = reference_params(12.0, 0.0);
        let mut half_p = params;
        half_p.arrival_prob_p = 0.5;
        let pool1 = PoolSpec::cpmm(1.0, 30.0).unwrap();
        let pool2 = PoolSpec::cpmm(2.0, 30.0).unwrap();

        let base = arb_report(&f, &band, &params, &pool1).unwrap();
        let doubled_tvl = arb_report(&f, &band, &params, &pool2).unwrap();
        let halved_p = arb_report(&f, &band, &half_p, &pool1).unwrap();

        assert_relative_eq!(doubled_tvl.profit_per_step, 2.0 * base.profit_per_step);
        assert_relative_eq!(doubled_tvl.daily_volume, 2.0 * base.daily_volume);
        assert_relative_eq!(halved_p.profit_per_step, 0.5 * base.profit_per_step);
        assert_relative_eq!(halved_p.expected_count_up, 0.5 * base.expected_count_up);
        assert_relative_eq!(
            base.daily_profit,
            base.profit_per_step * 7200.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn counts_follow_tail_mass_arithmetic() {
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.009, 301).unwrap();
        let f = truncated_gaussian(spec, 0.0, 2.5e-3);
        let params = reference_params(12.0, 0.0);
        let up_mass = upper_tail_integral(&f, band.upper(), |_| 1.0);
        let (up, down) = expected_counts(&f, &band, &params).unwrap();
        assert_relative_eq!(up, up_mass * 7200.0, max_relative = 1e-12);
        assert!(down > 0.0);

        // p = 1, upper tail mass 0.061, dt = 12 s -> about 439 per day.
        assert_abs_diff_eq!(0.061 * 7200.0, 439.0, epsilon = 0.5);
    }

    #[test]
    fn zero_tail_masses_give_zero_counts() {
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let spec = GridSpec::symmetric(0.006, 201).unwrap();
        let mut f = DensityGrid::zeros(spec);
        for j in 0..spec.n_points {
            if spec.node(j).abs() < 0.001 {
                f.values[j] = 1.0;
            }
        }
        f.normalize().unwrap();
        let params = reference_params(12.0, 0.0);
        let (up, down) = expected_counts(&f, &band, &params).unwrap();
        assert_eq!((up, down), (0.0, 0.0));
    }

    #[test]
    fn mixture_fit_recovers_exact_member() {
        let spec = GridSpec::symmetric(0.01, 201).unwrap();
        let comps: Vec<(f64, DensityGrid)> = [1e-3, 2e-3, 3e-3]
            .iter()
            .map(|sd| (*sd, truncated_gaussian(spec, 0.0, *sd)))
            .collect();
        let hist = comps[1].1.clone();
        let fit = spread_mixture_fit(&comps, &hist).unwrap();
        assert_abs_diff_eq!(fit.weights[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.weights[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.weights[2], 0.0, epsilon = 1e-6);
        assert!(!fit.degenerate);
    }

    #[test]
    fn mixture_fit_flags_identical_components() {
        let spec = GridSpec::symmetric(0.01, 101).unwrap();
        let a = truncated_gaussian(spec, 0.0, 2e-3);
        let comps = vec![(0.0, a.clone()), (1.0, a.clone())];
        let fit = spread_mixture_fit(&comps, &a).unwrap();
        assert!(fit.degenerate);
        // Lexicographically smallest optimum puts the weight on the
        // later component.
        assert_abs_diff_eq!(fit.weights[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.weights[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mixture_fit_rejects_bad_inputs() {
        let spec = GridSpec::symmetric(0.01, 101).unwrap();
        let a = truncated_gaussian(spec, 0.0, 2e-3);
        assert!(spread_mixture_fit(&[(0.0, a.clone())], &a).is_err());
        let other = truncated_gaussian(GridSpec::symmetric(0.01, 51).unwrap(), 0.0, 2e-3);
        assert!(spread_mixture_fit(&[(0.0, a.clone()), (1.0, other)], &a).is_err());
    }

    #[test]
    fn pool_spec_consistency_check() {
        assert!(PoolSpec::cpmm(86e6, 30.0).is_ok());
        let mut bad = PoolSpec::cpmm(100.0, 30.0).unwrap();
        bad.mid_price_w = Some(4.0);
        bad.liquidity_l = Some(10.0); // 2*10*sqrt(4) = 40 != 100
        assert!(bad.validate().is_err());
        let mut good = PoolSpec::cpmm(40.0, 30.0).unwrap();
        good.mid_price_w = Some(4.0);
        good.liquidity_l = Some(10.0);
        assert!(good.validate().is_ok());
        assert_relative_eq!(good.cfmm_scale().unwrap(), 20.0);
    }
}
