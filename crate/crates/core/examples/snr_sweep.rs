//! Monte Carlo SNR sweep of all four schemes; prints the averages and writes
//! the full CSV.
//!
//! ```text
//! cargo run --release --example snr_sweep [config.toml] [out.csv]
//! ```

use owc_ratesplit::config::SimConfig;
use owc_ratesplit::ratesplit::Scheme;
use owc_ratesplit::runner::{averages, emit_csv, run_sweep, FixedParams, SweepAxis, SweepSpec};

fn main() -> owc_ratesplit::Result<()> {
    let mut args = std::env::args().skip(1);
    let config_path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/wide_coverage.toml").into());
    let out = args.next().unwrap_or_else(|| "snr_sweep.csv".into());
    let config = SimConfig::load(&config_path)?;

    let spec = SweepSpec {
        axis: SweepAxis::SnrDb,
        values: (0..7).map(|i| 5.0 + 5.0 * i as f64).collect(),
        schemes: Scheme::ALL.to_vec(),
        trials: 50,
        seed: 1,
        fixed: FixedParams {
            num_groups: Some(2),
            ..FixedParams::from_config(&config)
        },
    };
    let records = run_sweep(&spec, &config)?;
    for scheme in Scheme::ALL {
        print!("{scheme:>8}");
        for (_, rate, _) in averages(&records, scheme) {
            print!(" {rate:>7.3}");
        }
        println!();
    }
    emit_csv(&records, &out)?;
    println!("wrote {out}");
    Ok(())
}
