//! Single-tier rate splitting against OMA on a fixed 4x4 channel, for a range
//! of private power shares.
//!
//! ```text
//! cargo run --example rs_rates
//! ```

use nalgebra::DMatrix;
use owc_ratesplit::channel::ChannelMatrix;
use owc_ratesplit::precoding::{rs_precoders, CommonStrategy};
use owc_ratesplit::ratesplit::{oma_rates, rs_rates, rs_split};

fn main() -> owc_ratesplit::Result<()> {
    #[rustfmt::skip]
    let raw = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.6, 0.2, 0.1,
        0.5, 1.0, 0.3, 0.2,
        0.2, 0.4, 1.0, 0.5,
        0.1, 0.2, 0.6, 1.0,
    ]);
    let ch = ChannelMatrix::normalized_from(raw)?;
    let p = 10f64.powf(15.0 / 10.0);
    let pre = rs_precoders(&ch.gains, CommonStrategy::EqualGain)?;

    println!("OMA sum rate: {:.3} bits/s/Hz", oma_rates(&ch.gains, p, &ch.noise_var).sum_rate);
    println!("{:>6} {:>8} {:>9} {:>9}", "alpha", "common", "private", "sum");
    for alpha in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let r = rs_rates(&ch.gains, &pre, &rs_split(p, alpha, 4)?, &ch.noise_var);
        println!("{alpha:>6.1} {:>8.3} {:>9.3} {:>9.3}", r.inner_common_total(), r.private_total(), r.sum_rate);
    }
    Ok(())
}
