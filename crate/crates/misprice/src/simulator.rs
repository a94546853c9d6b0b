//! Seeded Monte Carlo oracle for the clamped mispricing chain.
//!
//! Replays the chain step by step: an arbitrageur arrives with
//! probability `p` and pulls an out-of-band state to the nearest edge
//! (booking the same per-event profit and volume closed forms the
//! estimators integrate), then the state moves by drift, noise, and an
//! optional jump. Visited states accumulate into a histogram aligned
//! with a density grid, so the law of large numbers connects sample
//! averages to stationary integrals.
//!
//! The generator is ChaCha8, a counter-based stream cipher RNG: one
//! explicit seed fully determines the path, independent of platform and
//! thread count.

use crate::error::{Error, Result};
use crate::estimators::{
    event_profit_lower, event_profit_upper, event_volume_lower, event_volume_upper,
};
use crate::grid::{trapezoid, DensityGrid, GridSpec};
use crate::kernel::{FeeBand, ModelParams, NoiseDensity};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Mispricing magnitude beyond which the simulation aborts; |x| = 1 is
/// a 172% price ratio, far outside any sane regime.
const STATE_LIMIT: f64 = 1.0;

/// Extended controls for [`simulate_chain_opts`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n_steps: u64,
    pub seed: u64,
    /// Steps discarded before statistics accumulate; the chain forgets
    /// its initializer geometrically fast.
    pub burn_in: u64,
    pub initial_state: f64,
}

impl SimOptions {
    pub fn new(n_steps: u64, seed: u64) -> Self {
        Self {
            n_steps,
            seed,
            burn_in: 10_000.min(n_steps / 10),
            initial_state: 0.0,
        }
    }
}

/// Monte Carlo outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Normalized histogram of post-step states on the requested grid.
    /// Node-centered bins; out-of-grid visits clip into the end bins so
    /// counts are conserved.
    pub empirical_density: DensityGrid,
    /// Mean per-step arbitrageur profit per unit TVL.
    pub realized_profit_per_step: f64,
    /// Mean per-step gross volume per unit TVL.
    pub realized_volume_per_step: f64,
    /// Batch-means standard error of the profit mean (batches absorb
    /// the chain's short-range correlation).
    pub profit_std_error: f64,
    pub volume_std_error: f64,
    /// Fraction of accumulated steps with the state above the band.
    pub tail_frequency_upper: f64,
    /// Fraction below the band.
    pub tail_frequency_lower: f64,
    /// Fraction of steps where an arriving arbitrageur clamped.
    pub clamp_frequency: f64,
    /// Steps contributing to statistics (after burn-in).
    pub accumulated_steps: u64,
    pub seed: u64,
}

/// Simulate with default burn-in and a zero initial state.
pub fn simulate_chain(
    params: &ModelParams,
    band: &FeeBand,
    n_steps: u64,
    seed: u64,
    bins: GridSpec,
) -> Result<SimResult> {
    simulate_chain_opts(params, band, bins, SimOptions::new(n_steps, seed))
}

pub fn simulate_chain_opts(
    params: &ModelParams,
    band: &FeeBand,
    bins: GridSpec,
    opts: SimOptions,
) -> Result<SimResult> {
    params.validate()?;
    if opts.n_steps < 1 {
        return Err(Error::InvalidParams("n_steps must be >= 1".into()));
    }
    if opts.burn_in >= opts.n_steps {
        return Err(Error::InvalidParams(format!(
            "burn_in {} leaves no steps of {}",
            opts.burn_in, opts.n_steps
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jump_law = Normal::new(params.jump_mean, params.jump_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParams(format!("jump law: {e}")))?;

    let n_bins = bins.n_points;
    let mut counts = vec![0u64; n_bins];
    let step_width = bins.step();

    let upper = band.upper();
    let lower = band.lower();
    let gamma_up = upper;
    let gamma_down = -lower;

    let mut x = opts.initial_state;
    let mut accumulated: u64 = 0;
    let mut tail_up: u64 = 0;
    let mut tail_down: u64 = 0;
    let mut clamps: u64 = 0;

    let mut profit_sum = 0.0;
    let mut volume_sum = 0.0;
    // Batch means over fixed-size blocks for correlation-robust errors.
    let batch_size: u64 = 1024;
    let mut batch_profit = 0.0;
    let mut batch_volume = 0.0;
    let mut batch_fill: u64 = 0;
    let mut profit_batches: Vec<f64> = Vec::new();
    let mut volume_batches: Vec<f64> = Vec::new();

    let p = params.arrival_prob_p;
    let q = params.jump_prob_q;

    for step in 0..opts.n_steps {
        let recording = step >= opts.burn_in;
        let mut step_profit = 0.0;
        let mut step_volume = 0.0;

        // Arbitrageur leg: clamp and book at the pre-clamp state.
        let arrived = p >= 1.0 || rng.gen_bool(p);
        let hat = if arrived && x > upper {
            step_profit = event_profit_upper(x, gamma_up);
            step_volume = event_volume_upper(x, gamma_up);
            if recording {
                clamps += 1;
            }
            upper
        } else if arrived && x < lower {
            step_profit = event_profit_lower(x, gamma_down);
            step_volume = event_volume_lower(x, gamma_down);
            if recording {
                clamps += 1;
            }
            lower
        } else {
            x
        };

        // Price leg: drift + noise + optional jump.
        let eps = params.noise.sample(&mut rng);
        let jump = if q > 0.0 && rng.gen_bool(q) {
            jump_law.sample(&mut rng)
        } else {
            0.0
        };
        x = hat + params.mu_step + params.sigma_step * eps + jump;

        if x.abs() > STATE_LIMIT {
            return Err(Error::StateOverflow {
                step,
                x,
                limit: STATE_LIMIT,
            });
        }

        if recording {
            accumulated += 1;
            profit_sum += step_profit;
            volume_sum += step_volume;
            batch_profit += step_profit;
            batch_volume += step_volume;
            batch_fill += 1;
            if batch_fill == batch_size {
                profit_batches.push(batch_profit / batch_size as f64);
                volume_batches.push(batch_volume / batch_size as f64);
                batch_profit = 0.0;
                batch_volume = 0.0;
                batch_fill = 0;
            }

            if x > upper {
                tail_up += 1;
            } else if x < lower {
                tail_down += 1;
            }
            // Node-centered bins, clipped to the grid.
            let pos = (x - bins.lower) / step_width;
            let bin = pos.round().clamp(0.0, (n_bins - 1) as f64) as usize;
            counts[bin] += 1;
        }
    }

    let total = accumulated as f64;
    // Node-centered bins: interior nodes own a full cell, the two end
    // nodes half a cell each; dividing by the owned width makes the
    // trapezoid integral exactly one.
    let values: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let width = if j == 0 || j == n_bins - 1 {
                0.5 * step_width
            } else {
                step_width
            };
            *c as f64 / (total * width)
        })
        .collect();
    let empirical_density = DensityGrid::new(bins, values)?;

    let se = |batches: &[f64], mean: f64| -> f64 {
        if batches.len() < 2 {
            return f64::NAN;
        }
        let m = batches.len() as f64;
        let var = batches.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    };
    let profit_mean = profit_sum / total;
    let volume_mean = volume_sum / total;

    Ok(SimResult {
        empirical_density,
        realized_profit_per_step: profit_mean,
        realized_volume_per_step: volume_mean,
        profit_std_error: se(&profit_batches, profit_mean),
        volume_std_error: se(&volume_batches, volume_mean),
        tail_frequency_upper: tail_up as f64 / total,
        tail_frequency_lower: tail_down as f64 / total,
        clamp_frequency: clamps as f64 / total,
        accumulated_steps: accumulated,
        seed: opts.seed,
    })
}

/// Draw raw increments of the free (unclamped) chain; the synthetic
/// input for calibration round-trips.
pub fn sample_increments(params: &ModelParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jump_law = Normal::new(params.jump_mean, params.jump_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParams(format!("jump law: {e}")))?;
    let q = params.jump_prob_q;
    Ok((0..n)
        .map(|_| {
            let eps = params.noise.sample(&mut rng);
            let jump = if q > 0.0 && rng.gen_bool(q) {
                jump_law.sample(&mut rng)
            } else {
                0.0
            };
            params.mu_step + params.sigma_step * eps + jump
        })
        .collect())
}

/// Both sides of the law of large numbers for a grid function `phi`
/// (values at the shared grid nodes): the path average from the
/// accumulated histogram, the stationary integral against `f_star`, and
/// their absolute gap.
pub fn lln_estimate(sim: &SimResult, f_star: &DensityGrid, phi: &[f64]) -> Result<(f64, f64, f64)> {
    sim.empirical_density.check_same_grid(f_star)?;
    if phi.len() != f_star.n_points() {
        return Err(Error::GridMismatch(format!(
            "phi has {} values for a {}-node grid",
            phi.len(),
            f_star.n_points()
        )));
    }
    let weigh = |density: &DensityGrid| -> f64 {
        let products: Vec<f64> = density
            .values
            .iter()
            .zip(phi.iter())
            .map(|(f, g)| f * g)
            .collect();
        trapezoid(&products, density.step())
    };
    let sample_mean = weigh(&sim.empirical_density);
    let stationary_mean = weigh(f_star);
    Ok((
        sample_mean,
        stationary_mean,
        (sample_mean - stationary_mean).abs(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{arb_report, trade_region_mass, PoolSpec};
    use crate::kernel::{DailyModel, NoiseLaw};
    use crate::stationary::{l1_distance, solve_stationary, SolveSettings};
    use approx::assert_abs_diff_eq;

    fn reference_params(q: f64) -> ModelParams {
        DailyModel {
            mu_daily: 0.00125,
            sigma_daily: 0.05,
            q_step: q,
            jump_mean_daily: -0.2035,
            jump_std_daily: 0.1952,
            p: 1.0,
            step_seconds: 12.0,
            noise: NoiseLaw::Gaussian,
        }
        .to_step()
        .unwrap()
    }

    #[test]
    fn free_chain_increments_have_model_variance() {
        let mut params = reference_params(0.0);
        params.mu_step = 0.0;
        let n = 200_000;
        let incs = sample_increments(&params, n, 7).unwrap();
        let mean: f64 = incs.iter().sum::<f64>() / n as f64;
        let var: f64 = incs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
        let sigma2 = params.sigma_step * params.sigma_step;
        // Var(s^2) = 2 sigma^4 / (n-1) for Gaussian samples.
        let se = (2.0 / (n as f64 - 1.0)).sqrt() * sigma2;
        assert!(
            (var - sigma2).abs() < 3.0 * se,
            "variance {var} vs {sigma2} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let params = reference_params(0.1);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let bins = GridSpec::symmetric(0.009, 201).unwrap();
        let a = simulate_chain(&params, &band, 200_000, 42, bins).unwrap();
        let b = simulate_chain(&params, &band, 200_000, 42, bins).unwrap();
        assert_eq!(a, b);
        let c = simulate_chain(&params, &band, 200_000, 43, bins).unwrap();
        assert_ne!(a.empirical_density, c.empirical_density);
    }

    #[test]
    fn empirical_density_is_normalized() {
        let params = reference_params(0.2);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let bins = GridSpec::symmetric(0.0105, 211).unwrap();
        let sim = simulate_chain(&params, &band, 300_000, 9, bins).unwrap();
        assert_abs_diff_eq!(sim.empirical_density.integral(), 1.0, epsilon = 1e-9);
        assert!(sim.tail_frequency_upper >= 0.0 && sim.tail_frequency_upper <= 1.0);
        assert!(sim.tail_frequency_lower >= 0.0 && sim.tail_frequency_lower <= 1.0);
    }

    #[test]
    fn tail_frequency_tracks_solver_trade_region() {
        let params = reference_params(0.0);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 401,
            max_iterations: 1500,
            l1_tolerance: 1e-11,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let mass = trade_region_mass(&f_star, &band).unwrap();
        let bins = f_star.spec();
        let sim = simulate_chain(&params, &band, 2_000_000, 11, bins).unwrap();
        let freq = sim.tail_frequency_upper + sim.tail_frequency_lower;
        assert!(
            (freq - mass).abs() < 0.01,
            "simulated {freq} vs solved {mass}"
        );
    }

    #[test]
    fn realized_profit_matches_estimator_within_errors() {
        let params = reference_params(0.1);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 401,
            max_iterations: 1500,
            l1_tolerance: 1e-11,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let pool = PoolSpec::cpmm(1.0, 30.0).unwrap();
        let report = arb_report(&f_star, &band, &params, &pool).unwrap();
        let sim = simulate_chain(&params, &band, 3_000_000, 5, f_star.spec()).unwrap();
        assert!(
            (sim.realized_profit_per_step - report.profit_per_step).abs()
                < 4.0 * sim.profit_std_error,
            "profit {} vs {} (se {})",
            sim.realized_profit_per_step,
            report.profit_per_step,
            sim.profit_std_error
        );
        assert!(
            (sim.realized_volume_per_step - report.volume_per_step).abs()
                < 4.0 * sim.volume_std_error,
            "volume {} vs {} (se {})",
            sim.realized_volume_per_step,
            report.volume_per_step,
            sim.volume_std_error
        );
    }

    #[test]
    fn empirical_density_approaches_stationary_density() {
        let params = reference_params(0.2);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 201,
            max_iterations: 1000,
            l1_tolerance: 1e-11,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let sim = simulate_chain(&params, &band, 2_000_000, 3, f_star.spec()).unwrap();
        let gap = l1_distance(&sim.empirical_density, &f_star).unwrap();
        assert!(gap < 0.04, "L1 gap {gap} at 2e6 steps");
    }

    #[test]
    fn lln_constant_function_gives_unit_means() {
        let params = reference_params(0.0);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 201,
            max_iterations: 500,
            l1_tolerance: 1e-10,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let sim = simulate_chain(&params, &band, 300_000, 1, f_star.spec()).unwrap();
        let phi = vec![1.0; f_star.n_points()];
        let (sample, stationary, gap) = lln_estimate(&sim, &f_star, &phi).unwrap();
        assert_abs_diff_eq!(sample, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(stationary, 1.0, epsilon = 1e-9);
        assert!(gap < 1e-9);
    }

    #[test]
    fn lln_tail_indicator_reproduces_trade_frequency() {
        let params = reference_params(0.1);
        let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
        let settings = SolveSettings {
            n_points: 401,
            max_iterations: 800,
            l1_tolerance: 1e-11,
            ..Default::default()
        };
        let (f_star, _) = solve_stationary(&params, &band, &settings).unwrap();
        let sim = simulate_chain(&params, &band, 2_000_000, 17, f_star.spec()).unwrap();
        let spec = f_star.spec();
        let phi: Vec<f64> = (0..spec.n_points)
            .map(|j| {
                if band.contains(spec.node(j)) {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let (sample, stationary, gap) = lln_estimate(&sim, &f_star, &phi).unwrap();
        let realized = sim.tail_frequency_upper + sim.tail_frequency_lower;
        // Sample side of the LLN vs the direct frequency counter: both
        // measure tail occupancy up to edge-bin quantization.
        assert!((sample - realized).abs() < 0.02);
        assert!((stationary - trade_region_mass(&f_star, &band).unwrap()).abs() < 0.02);
        assert!(gap < 0.02, "lln gap {gap}");
    }

    #[test]
    fn state_overflow_aborts_with_diagnostics() {
        let mut params = reference_params(0.0);
        params.mu_step = 0.3;
        let band = FeeBand::new(0.9, 0.9, 0.0).unwrap();
        let bins = GridSpec::symmetric(1.5, 101).unwrap();
        let got = simulate_chain_opts(
            &params,
            &band,
            bins,
            SimOptions {
                n_steps: 100,
                seed: 1,
                burn_in: 0,
                initial_state: 0.0,
            },
        );
        assert!(matches!(got, Err(Error::StateOverflow { .. })));
    }

    #[test]
    fn in_band_increments_pass_ks_against_gaussian() {
        // q = 0, Gaussian noise: increments are N(mu, sigma^2); the KS
        // test against the fitted Gaussian should not reject at 1%.
        let params = reference_params(0.0);
        let incs = sample_increments(&params, 100_000, 23).unwrap();
        let (_, _, p_value) =
            crate::calibrate::gaussian_moments_and_ks(&incs).expect("well-posed sample");
        assert!(p_value > 0.01, "KS p-value {p_value} rejects Gaussian");
    }
}
