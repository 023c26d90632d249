//! Groups a random drop with k-means, builds the two-tier precoders and
//! compares HRS with RS on the same channel.
//!
//! Uses the wide-coverage scene so every user sees every AP.
//!
//! ```text
//! cargo run --example hrs_grouping [seed]
//! ```

use owc_ratesplit::config::SimConfig;
use owc_ratesplit::hrs::{hrs_rates, hrs_split};
use owc_ratesplit::precoding::{hrs_precoders, outer_residual};
use owc_ratesplit::ratesplit::Scheme;
use owc_ratesplit::runner::{evaluate_scheme, prepare_trial};

fn main() -> owc_ratesplit::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(3, |s| s.parse().expect("seed"));
    let config = SimConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/wide_coverage.toml"))?;
    let trial = prepare_trial(&config, &config.scene, 4, 2, Some(20.0), seed)?;

    for (k, u) in trial.scene.users.iter().enumerate() {
        println!(
            "user {k} at ({:.2}, {:.2}) -> group {}",
            u.position.x, u.position.y, trial.grouping.assignments[k]
        );
    }

    let h = &trial.channel.gains;
    let pre = hrs_precoders(h, &trial.grouping, config.common_strategy)?;
    println!("outer nulling residual: {:.1e}", outer_residual(h, &trial.grouping, pre.outer.as_ref().unwrap()));

    let g = trial.grouping.num_groups();
    for beta in [0.6, 0.8, 1.0] {
        let split = hrs_split(trial.power, 0.8, beta, g, 4)?;
        let r = hrs_rates(h, &trial.grouping, &pre, &split, &trial.channel.noise_var)?;
        println!(
            "beta {beta}: outer {:.3}, inner {:.3}, private {:.3}, sum {:.3}",
            r.r_outer_common,
            r.inner_common_total(),
            r.private_total(),
            r.sum_rate
        );
    }
    let rs = evaluate_scheme(&config, &trial, Scheme::Rs, 0.8, 0.8)?;
    println!("RS on the same drop: {:.3}", rs.sum_rate);
    Ok(())
}
