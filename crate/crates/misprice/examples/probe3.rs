// Scratch probe: criterion-10 magnitudes under both jump-mean conversion rules.
use misprice::estimators::{arb_report, PoolSpec};
use misprice::kernel::{FeeBand, ModelParams, NoiseLaw};
use misprice::stationary::{solve_stationary, SolveSettings};

fn run(label: &str, jump_mean_step: f64) {
    let dt = 12.0;
    let conv = (dt / 86400.0f64).sqrt();
    let params = ModelParams::new(
        0.0677 * dt / 86400.0,
        0.0234 * conv,
        0.0411,
        jump_mean_step,
        0.1952 * conv,
        1.0,
        dt,
        NoiseLaw::Gaussian,
    )
    .unwrap();
    let band = FeeBand::symmetric_bp(30.0, 0.0).unwrap();
    let settings = SolveSettings {
        n_points: 801,
        max_iterations: 2000,
        l1_tolerance: 1e-12,
        grid_halfwidth: None,
    };
    let (f_star, trace) = solve_stationary(&params, &band, &settings).unwrap();
    let pool = PoolSpec::cpmm(86e6, 30.0).unwrap();
    let report = arb_report(&f_star, &band, &params, &pool).unwrap();
    println!(
        "{label}: daily_volume=${:.3}M daily_profit=${:.0} vol/profit={:.0} counts=({:.0},{:.0}) trade_prob={:.4} iters={}",
        report.daily_volume / 1e6,
        report.daily_profit,
        report.daily_volume / report.daily_profit,
        report.expected_count_up,
        report.expected_count_down,
        report.trade_probability,
        trace.iterations,
    );
}

fn main() {
    let dt: f64 = 12.0;
    run("linear mu_J (-0.2035*dt/86400)", -0.2035 * dt / 86400.0);
    run("sqrt   mu_J (-0.2035*sqrt(dt/86400))", -0.2035 * (dt / 86400.0f64).sqrt());
    run("zero   mu_J", 0.0);
}
