//! Physical-mode sweep over the VCSEL beam waist. Rates use absolute optical
//! powers and thermal noise instead of a normalized SNR.
//!
//! ```text
//! cargo run --release --example beam_waist_sweep [config.toml]
//! ```

use owc_ratesplit::config::SimConfig;
use owc_ratesplit::ratesplit::Scheme;
use owc_ratesplit::runner::{averages, run_sweep, FixedParams, SweepAxis, SweepSpec};

fn main() -> owc_ratesplit::Result<()> {
    let config_path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml").into());
    let config = SimConfig::load(&config_path)?;
    let spec = SweepSpec {
        axis: SweepAxis::BeamWaistUm,
        values: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        schemes: Scheme::ALL.to_vec(),
        trials: 50,
        seed: 1,
        fixed: FixedParams::from_config(&config),
    };
    let records = run_sweep(&spec, &config)?;
    println!("{:>8} {:>10} {:>12} {:>6}", "scheme", "w0 [um]", "sum rate", "valid");
    for scheme in Scheme::ALL {
        for (w0, rate, valid) in averages(&records, scheme) {
            println!("{scheme:>8} {w0:>10} {rate:>12.4e} {valid:>6}");
        }
    }
    Ok(())
}
