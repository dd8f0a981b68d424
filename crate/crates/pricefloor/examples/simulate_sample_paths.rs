//! A handful of simulated trajectories under the terminal-threshold regime:
//! above the floor the position unwinds roughly linearly; when the price
//! dives below, trading slows (and can flip to buying near the end, where
//! the factor is negative); paths ending above the floor are closed exactly.
//!
//! Writes t, w, fq columns per path into out-paths/.
//!
//! Run with: cargo run --release --example simulate_sample_paths

use std::path::Path;

use pricefloor::io::write_trajectory;
use pricefloor::model::RegimeSpec;
use pricefloor::pde1d::{solve_singular, SolveSpec, TerminalSpec};
use pricefloor::sim::{gen_path, integrate_q, trace_regime, StrategyGrids};

fn main() {
    let k_c = 2.0 / 3.0;
    let regime = RegimeSpec::terminal_threshold(-1.4);
    let spec = SolveSpec::default();
    let grid = solve_singular(&spec, &TerminalSpec::ThresholdSingular { ell: -1.4, neg: -k_c }, 2.0, &|_, _| 1.0)
        .expect("solve");
    let grids = StrategyGrids::Single(&grid);

    let dir = Path::new("out-paths");
    std::fs::create_dir_all(dir).unwrap();
    println!("{:>5} {:>9} {:>9} {:>9} {:>7}", "path", "min w", "w(T)", "fq(T)", "closed");
    for idx in 0..8u64 {
        let path = gen_path(42, idx, 2000, 1.0).unwrap();
        let trace = trace_regime(&path, &regime);
        let q = integrate_q(&path, &trace, &grids, &regime, 2.0).unwrap();
        let w_min = path.w.iter().cloned().fold(f64::INFINITY, f64::min);
        let fq = *q.last().unwrap();
        println!(
            "{idx:>5} {w_min:9.3} {:9.3} {fq:9.5} {:>7}",
            path.w.last().unwrap(),
            if fq < 1e-6 { "yes" } else { "no" }
        );
        write_trajectory(&dir.join(format!("path_{idx}.csv")), path.dt, &path.w, &q).unwrap();
    }
    println!("\ntrajectories in {}", dir.display());
}
