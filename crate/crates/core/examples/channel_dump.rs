//! Places users at random in the reference room and prints their physical
//! channel gains, then the same channel normalized to 15 dB SNR.
//!
//! ```text
//! cargo run --example channel_dump [users] [seed]
//! ```

use owc_ratesplit::channel::{build_channel, normalize_channel};
use owc_ratesplit::config::SimConfig;
use owc_ratesplit::geometry::place_users_random;

fn main() -> owc_ratesplit::Result<()> {
    let mut args = std::env::args().skip(1);
    let users: usize = args.next().map_or(4, |s| s.parse().expect("users"));
    let seed: u64 = args.next().map_or(6, |s| s.parse().expect("seed"));

    let config = SimConfig::default();
    let scene = place_users_random(&config.scene, users, seed)?;
    for (k, u) in scene.users.iter().enumerate() {
        println!("user {k} at ({:.2}, {:.2})", u.position.x, u.position.y);
    }

    let h = build_channel(&scene, &config.noise)?;
    println!("\nphysical gains (photocurrent per AP, A):");
    h.write_csv(std::io::stdout())?;

    match normalize_channel(&h, 15.0) {
        Ok((n, p)) => {
            println!("\nnormalized, P = {p:.2}:");
            n.write_csv(std::io::stdout())?;
        }
        Err(e) => println!("\ncannot normalize: {e}"),
    }
    Ok(())
}
