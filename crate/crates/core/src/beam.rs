//! Multimode VCSEL beam model.
//!
//! Each transverse mode is a Laguerre-Gaussian profile `|u_{p,l}(r, z)|^2`
//! normalized to unit power in every cross-section. The beam is the weighted
//! superposition of its modes, scaled by the emitted optical power.
//!
//! Mode coefficients in the scene config are written as `[p, l, weight]`
//! triples, e.g. `mode_coeffs = [[0, 0, 0.7], [0, 1, 0.3]]`; weights must sum
//! to one.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Largest supported `p + l`. Factorials are handled in log space, so this
/// bound only guards against pathological configs.
pub const MAX_MODE_ORDER: usize = 120;

/// Power weight of one Laguerre-Gaussian mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoeff {
    pub p: usize,
    pub l: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcselParams {
    /// Beam waist at the aperture, meters.
    pub w0: f64,
    /// Emission wavelength, meters.
    pub wavelength: f64,
    pub refractive_index: f64,
    pub mode_coeffs: Vec<ModeCoeff>,
    /// Emitted optical power of one VCSEL, watts.
    pub total_optical_power: f64,
}

/// Optical output of one VCSEL when nothing else is configured.
pub const DEFAULT_VCSEL_POWER_W: f64 = 0.01;

impl VcselParams {
    pub fn new(
        w0: f64,
        wavelength: f64,
        refractive_index: f64,
        mode_coeffs: Vec<ModeCoeff>,
        total_optical_power: f64,
    ) -> Result<Self> {
        let params = VcselParams {
            w0,
            wavelength,
            refractive_index,
            mode_coeffs,
            total_optical_power,
        };
        params.validate()?;
        Ok(params)
    }

    /// Single fundamental mode, 850 nm, 20 um waist, in air.
    pub fn reference() -> Self {
        VcselParams {
            w0: 20e-6,
            wavelength: 850e-9,
            refractive_index: 1.0,
            mode_coeffs: vec![ModeCoeff {
                p: 0,
                l: 0,
                weight: 1.0,
            }],
            total_optical_power: DEFAULT_VCSEL_POWER_W,
        }
    }

    pub fn with_w0(&self, w0: f64) -> Result<Self> {
        let mut out = self.clone();
        out.w0 = w0;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(Error::invalid("w0", format!("must be > 0, got {}", self.w0)));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(
                "wavelength",
                format!("must be > 0, got {}", self.wavelength),
            ));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::invalid(
                "refractive_index",
                format!("must be >= 1, got {}", self.refractive_index),
            ));
        }
        if !(self.total_optical_power > 0.0 && self.total_optical_power.is_finite()) {
            return Err(Error::invalid(
                "total_optical_power",
                format!("must be > 0, got {}", self.total_optical_power),
            ));
        }
        if self.mode_coeffs.is_empty() {
            return Err(Error::invalid("mode_coeffs", "at least one mode required"));
        }
        let mut sum = 0.0;
        for m in &self.mode_coeffs {
            if !(m.weight >= 0.0) {
                return Err(Error::invalid(
                    "mode_coeffs",
                    format!("weight of mode ({}, {}) is negative", m.p, m.l),
                ));
            }
            check_order(m.p, m.l)?;
            sum += m.weight;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "mode_coeffs",
                format!("weights must sum to 1, got {sum}"),
            ));
        }
        Ok(())
    }
}

fn check_order(p: usize, l: usize) -> Result<()> {
    let order = p + l;
    if order > MAX_MODE_ORDER {
        return Err(Error::ModeOrderOutOfRange {
            order,
            max: MAX_MODE_ORDER,
        });
    }
    Ok(())
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(2 * MAX_MODE_ORDER + 2);
        t.push(0.0);
        for n in 1..=2 * MAX_MODE_ORDER + 1 {
            let prev = t[n - 1];
            t.push(prev + (n as f64).ln());
        }
        t
    })
}

/// `ln(n!)`, i.e. log-gamma at `n + 1`.
fn ln_factorial(n: usize) -> f64 {
    ln_factorial_table()[n]
}

/// Generalized Laguerre polynomial `L_p^l(x)` from its explicit sum.
///
/// Terms are accumulated with Neumaier compensation; the sum alternates in
/// sign and cancels heavily for large `x`.
pub fn laguerre_poly(p: usize, l: usize, x: f64) -> Result<f64> {
    check_order(p, l)?;
    let top = ln_factorial(p + l);
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut xm = 1.0_f64;
    for m in 0..=p {
        let ln_coeff = top - ln_factorial(p - m) - ln_factorial(l + m) - ln_factorial(m);
        let mut term = ln_coeff.exp() * xm;
        if m % 2 == 1 {
            term = -term;
        }
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        xm *= x;
    }
    Ok(sum + comp)
}

/// Beam radius `w(d)` after propagating a distance `d` from the aperture.
pub fn beam_radius(params: &VcselParams, d: f64) -> f64 {
    let w0 = params.w0;
    let spread = params.wavelength * d / (PI * params.refractive_index * w0 * w0);
    w0 * (1.0 + spread * spread).sqrt()
}

/// Mode normalization constant `A_p^l = (1/w0) sqrt(2 p! / (pi (p+l)!))`.
pub fn mode_norm_const(p: usize, l: usize, w0: f64) -> Result<f64> {
    check_order(p, l)?;
    let ratio = (ln_factorial(p) - ln_factorial(p + l)).exp();
    Ok((2.0 * ratio / PI).sqrt() / w0)
}

/// `|u_{p,l}(r, z)|^2`, intensity per watt of mode power (1/m^2).
pub fn mode_intensity(params: &VcselParams, p: usize, l: usize, r: f64, z: f64) -> Result<f64> {
    let a = mode_norm_const(p, l, params.w0)?;
    let w = beam_radius(params, z);
    let rho = 2.0 * r * r / (w * w);
    let lag = laguerre_poly(p, l, rho)?;
    let ratio = params.w0 / w;
    Ok(a * a * ratio * ratio * rho.powi(l as i32) * lag * lag * (-rho).exp())
}

/// Total radial intensity of the multimode beam (W/m^2).
pub fn radial_power_density(params: &VcselParams, r: f64, z: f64) -> Result<f64> {
    let mut acc = 0.0;
    for m in &params.mode_coeffs {
        if m.weight == 0.0 {
            continue;
        }
        acc += m.weight * mode_intensity(params, m.p, m.l, r, z)?;
    }
    Ok(params.total_optical_power * acc)
}

/// Power collected by a small detector whose center sits `radial_offset`
/// off the beam axis, `axial_dist` along it.
///
/// Intensity is taken at the detector center and multiplied by the projected
/// area. Back-facing detectors (`incidence >= 90` degrees) collect nothing.
pub fn power_on_aperture(
    params: &VcselParams,
    axial_dist: f64,
    radial_offset: f64,
    aperture_area: f64,
    incidence_deg: f64,
) -> Result<f64> {
    if !(axial_dist > 0.0) {
        return Err(Error::invalid(
            "axial_dist",
            format!("must be > 0, got {axial_dist}"),
        ));
    }
    if !(aperture_area >= 0.0) {
        return Err(Error::invalid(
            "aperture_area",
            format!("must be >= 0, got {aperture_area}"),
        ));
    }
    if incidence_deg >= 90.0 || aperture_area == 0.0 {
        return Ok(0.0);
    }
    let density = radial_power_density(params, radial_offset, axial_dist)?;
    Ok(density * aperture_area * incidence_deg.to_radians().cos())
}

/// Reference integrator for [`power_on_aperture`]: integrates the intensity
/// over a circular aperture of the given area (normal incidence) instead of
/// sampling it at the center.
pub fn power_on_aperture_quadrature(
    params: &VcselParams,
    axial_dist: f64,
    radial_offset: f64,
    aperture_area: f64,
) -> Result<f64> {
    // Validate once so the integrand can unwrap.
    radial_power_density(params, radial_offset, axial_dist)?;
    let radius = (aperture_area / PI).sqrt();
    let density = |r: f64| radial_power_density(params, r, axial_dist).unwrap_or(0.0);
    // Polar coordinates centred on the detector.
    let ring = |s: f64| {
        let around = |phi: f64| {
            let x = radial_offset + s * phi.cos();
            let y = s * phi.sin();
            density((x * x + y * y).sqrt())
        };
        s * adaptive_simpson(&around, 0.0, 2.0 * PI, 1e-12 * params.total_optical_power)
    };
    Ok(adaptive_simpson(&ring, 0.0, radius, 1e-14 * params.total_optical_power))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fundamental() -> VcselParams {
        VcselParams::reference()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre_poly(0, 3, 5.0).unwrap(), 1.0);
        assert!((laguerre_poly(1, 0, 2.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((laguerre_poly(2, 0, 1.0).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn laguerre_rejects_excessive_order() {
        assert!(matches!(
            laguerre_poly(MAX_MODE_ORDER, 1, 1.0),
            Err(Error::ModeOrderOutOfRange { .. })
        ));
        assert!(laguerre_poly(15, 5, 3.0).is_ok());
    }

    #[test]
    fn beam_radius_examples() {
        let p = fundamental();
        assert_eq!(beam_radius(&p, 0.0), p.w0);
        let w3 = beam_radius(&p, 3.0);
        assert!(close(w3, 4.058e-2, 1e-3), "w(3) = {w3}");
        assert!(beam_radius(&p, 1.0) < beam_radius(&p, 2.0));
    }

    #[test]
    fn norm_const_examples() {
        let a00 = mode_norm_const(0, 0, 20e-6).unwrap();
        assert!(close(a00, 3.9894e4, 1e-4));
        assert_eq!(mode_norm_const(1, 0, 20e-6).unwrap(), a00);
        // 2 * 0! / (pi * 1!) = 2 / pi, the same as the fundamental mode.
        let a01 = mode_norm_const(0, 1, 20e-6).unwrap();
        assert!(close(a01, 3.9894e4, 1e-4));
    }

    #[test]
    fn intensity_on_axis() {
        let p = fundamental();
        let z = 2.0;
        let w = beam_radius(&p, z);
        let i00 = mode_intensity(&p, 0, 0, 0.0, z).unwrap();
        assert!(close(i00, 2.0 / (PI * w * w), 1e-12));
        assert_eq!(mode_intensity(&p, 0, 1, 0.0, z).unwrap(), 0.0);
    }

    #[test]
    fn density_mixes_modes() {
        let mut p = fundamental();
        p.total_optical_power = 2.5;
        let single = radial_power_density(&p, 0.01, 3.0).unwrap();
        let i00 = mode_intensity(&p, 0, 0, 0.01, 3.0).unwrap();
        assert!(close(single, 2.5 * i00, 1e-14));

        p.mode_coeffs = vec![
            ModeCoeff { p: 0, l: 0, weight: 0.5 },
            ModeCoeff { p: 1, l: 0, weight: 0.5 },
        ];
        let mixed = radial_power_density(&p, 0.0, 3.0).unwrap();
        let i10 = mode_intensity(&p, 1, 0, 0.0, 3.0).unwrap();
        let i00 = mode_intensity(&p, 0, 0, 0.0, 3.0).unwrap();
        assert!(close(mixed, 0.5 * (i00 + i10) * 2.5, 1e-14));
    }

    #[test]
    fn aperture_power() {
        let mut p = fundamental();
        p.total_optical_power = 1.0;
        assert_eq!(power_on_aperture(&p, 3.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        let w = beam_radius(&p, 3.0);
        let got = power_on_aperture(&p, 3.0, 0.0, 20e-6, 0.0).unwrap();
        assert!(close(got, 2.0 * 20e-6 / (PI * w * w), 1e-12));
        assert!(close(got, 7.730e-3, 1e-3), "{got}");
        let near = power_on_aperture(&p, 3.0, 0.05, 20e-6, 0.0).unwrap();
        let far = power_on_aperture(&p, 3.0, 0.10, 20e-6, 0.0).unwrap();
        assert!(far < near);
        assert_eq!(power_on_aperture(&p, 3.0, 0.0, 20e-6, 90.0).unwrap(), 0.0);
        let tilted = power_on_aperture(&p, 3.0, 0.0, 20e-6, 60.0).unwrap();
        assert!(close(tilted, 0.5 * got, 1e-12));
    }

    #[test]
    fn aperture_power_rejects_bad_geometry() {
        let p = fundamental();
        assert!(power_on_aperture(&p, 0.0, 0.0, 1e-6, 0.0).is_err());
        assert!(power_on_aperture(&p, 1.0, 0.0, -1e-6, 0.0).is_err());
    }

    #[test]
    fn small_aperture_matches_quadrature() {
        let mut p = fundamental();
        p.total_optical_power = 1.0;
        for offset in [0.0, 0.01, 0.03] {
            let approx = power_on_aperture(&p, 3.0, offset, 20e-6, 0.0).unwrap();
            let exact = power_on_aperture_quadrature(&p, 3.0, offset, 20e-6).unwrap();
            // Detector radius 2.5 mm against a 4 cm beam.
            assert!(close(approx, exact, 0.02), "offset {offset}: {approx} vs {exact}");
        }
    }

    #[test]
    fn validation() {
        let mut p = fundamental();
        p.mode_coeffs[0].weight = 0.9;
        assert!(p.validate().is_err());
        let mut p = fundamental();
        p.refractive_index = 0.5;
        assert!(p.validate().is_err());
        assert!(fundamental().with_w0(-1.0).is_err());
    }
}
