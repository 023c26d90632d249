//! Radial intensity of the reference VCSEL beam at a few distances, and the
//! power a 20 mm² detector collects on and off axis.
//!
//! ```text
//! cargo run --example beam_profile
//! ```

use owc_ratesplit::beam::{beam_radius, power_on_aperture, radial_power_density, VcselParams};

fn main() -> owc_ratesplit::Result<()> {
    let vcsel = VcselParams::reference();
    println!("w0 = {:.1} um, lambda = {:.0} nm", vcsel.w0 * 1e6, vcsel.wavelength * 1e9);

    for d in [0.5, 1.0, 2.15, 3.0] {
        let w = beam_radius(&vcsel, d);
        println!("\nd = {d} m, w(d) = {:.2} cm", w * 100.0);
        println!("{:>10} {:>14}", "r / w", "W/m^2");
        for i in 0..=6 {
            let r = 0.25 * i as f64 * w;
            println!("{:>10.2} {:>14.4e}", r / w, radial_power_density(&vcsel, r, d)?);
        }
    }

    println!("\ncollected by a 20 mm^2 detector at 2.15 m:");
    for offset_cm in [0.0, 1.0, 2.0, 4.0, 8.0] {
        let p = power_on_aperture(&vcsel, 2.15, offset_cm / 100.0, 20e-6, 0.0)?;
        println!("  {offset_cm:>4} cm off axis: {p:.3e} W");
    }
    Ok(())
}
