// Scratch probe, not part of the crate.
use misprice::tables::*;

fn main() {
    let filter = CellFilter::default();
    let t0 = std::time::Instant::now();
    let cells = reproduce_trade_regions(4000, &filter).unwrap();
    println!("trade regions in {:?}", t0.elapsed());
    for c in &cells {
        println!(
            "dt={:6} gamma={:5}bp ref={:.3} computed={:.4} err={:+.4} iters={} conv={}",
            c.step_seconds,
            c.gamma_bp,
            c.reference,
            c.computed,
            c.computed - c.reference,
            c.iterations,
            c.converged
        );
    }

    let t1 = std::time::Instant::now();
    let cells = reproduce_profit_table(1000, &filter).unwrap();
    println!("profit table in {:?}", t1.elapsed());
    for c in &cells {
        let per_step = c.computed;
        let dt = c.step_seconds;
        println!(
            "dt={:6} q={:4} gamma={:5}bp ref={:.8} per_step={:.3e} x_dt={:.3e} per_day={:.3e} ratios: step {:.2} xdt {:.2} day {:.2}",
            dt,
            c.jump_prob,
            c.gamma_bp,
            c.reference,
            per_step,
            per_step * dt,
            per_step * 86400.0 / dt,
            c.reference / per_step,
            c.reference / (per_step * dt),
            c.reference / (per_step * 86400.0 / dt),
        );
    }
}
