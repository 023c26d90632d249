//! Sum rate against the number of users with ceil(K/4) groups.
//!
//! Zero-forcing needs at least as many APs as users, so HRS drops beyond
//! four users are reported as skipped.
//!
//! ```text
//! cargo run --release --example user_sweep [config.toml]
//! ```

use owc_ratesplit::config::SimConfig;
use owc_ratesplit::ratesplit::Scheme;
use owc_ratesplit::runner::{averages, run_sweep, FixedParams, SweepAxis, SweepSpec};

fn main() -> owc_ratesplit::Result<()> {
    let config_path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/wide_coverage.toml").into());
    let config = SimConfig::load(&config_path)?;
    let spec = SweepSpec {
        axis: SweepAxis::NumUsers,
        values: (2..=8).map(f64::from).collect(),
        schemes: vec![Scheme::Hrs, Scheme::HrsOpt],
        trials: 30,
        seed: 1,
        fixed: FixedParams::from_config(&config),
    };
    let records = run_sweep(&spec, &config)?;
    for scheme in [Scheme::Hrs, Scheme::HrsOpt] {
        for (k, rate, valid) in averages(&records, scheme) {
            println!("{scheme:>8} K={k:<2} {rate:>8.3} ({valid} valid)");
        }
    }
    if let Some(r) = records.iter().find(|r| !r.is_average() && r.skipped.is_some()) {
        println!("first skip reason: {}", r.skipped.as_deref().unwrap());
    }
    Ok(())
}
