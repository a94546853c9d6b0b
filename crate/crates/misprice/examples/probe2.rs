// Scratch probe: does a +-2*gamma grid reproduce the 10-minute profit row?
use misprice::kernel::FeeBand;
use misprice::stationary::{solve_stationary, SolveSettings};
use misprice::estimators::arb_integral_cfmm;
use misprice::tables::*;

fn main() {
    for (ti, &dt) in BLOCK_TIMES_SECONDS.iter().enumerate() {
        for (fi, &bp) in FEE_LEVELS_BP.iter().enumerate() {
            let params = benchmark_params(dt, 0.0).unwrap();
            let band = FeeBand::symmetric_bp(bp, 0.0).unwrap();
            let gamma = band.upper();
            let settings = SolveSettings {
                n_points: 801,
                max_iterations: 1000,
                l1_tolerance: 1e-12,
                grid_halfwidth: Some(2.0 * gamma),
            };
            let (f, _) = solve_stationary(&params, &band, &settings).unwrap();
            let arb = arb_integral_cfmm(&f, &band, &params, 0.5).unwrap();
            let reference = PROFIT_TABLE_REFERENCE[ti][0][fi];
            let scaled = arb * dt;
            println!(
                "dt={:6} gamma={:5}bp ref={:.8} scaled={:.4e} ratio={:.3}",
                dt, bp, reference, scaled,
                if scaled != 0.0 { reference / scaled } else { f64::NAN }
            );
        }
    }
}
