//! Proportional-fair power allocation on one drop: SCA iterates, the final
//! powers and a comparison with the uniform split.
//!
//! ```text
//! cargo run --example optimize_allocation [seed]
//! ```

use owc_ratesplit::config::SimConfig;
use owc_ratesplit::ratesplit::Scheme;
use owc_ratesplit::runner::{evaluate_scheme, optimize_trial, prepare_trial};

fn main() -> owc_ratesplit::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed"));
    let config = SimConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/wide_coverage.toml"))?;
    let trial = prepare_trial(&config, &config.scene, 4, 2, Some(15.0), seed)?;

    let (alloc, rates) = optimize_trial(&config, &trial, config.alpha)?;
    for (i, f) in alloc.history.iter().enumerate() {
        println!("iter {i:>2}: objective {f:.9}");
    }
    println!("converged: {} after {} iterations", alloc.converged, alloc.iterations);
    println!("inner common powers: {:.3?}", alloc.p_inner_common);
    println!("private powers:      {:.3?}", alloc.p_private);
    println!("total {:.3} of {:.3}", alloc.total_power(), trial.power);

    let uniform = evaluate_scheme(&config, &trial, Scheme::Hrs, config.alpha, config.beta)?;
    println!("sum rate: optimized {:.3}, uniform HRS {:.3}", rates.sum_rate, uniform.sum_rate);
    Ok(())
}
