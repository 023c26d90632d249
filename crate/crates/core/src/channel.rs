//! Line-of-sight channel matrix and receiver noise.
//!
//! Row `k` of the gain matrix is user `k`'s channel vector across the `L`
//! access points. In physical mode an entry is the photocurrent (A) user `k`
//! would see if AP `l` emitted at its full configured optical power; noise is
//! in A^2. Normalized mode rescales each row to unit norm with unit noise, so
//! the transmit power alone sets the SNR.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::beam::power_on_aperture;
use crate::error::{Error, Result};
use crate::geometry::{incidence_angle, Scene};

pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Receiver noise current spectral density, A/sqrt(Hz).
    pub current_density: f64,
    /// Receiver bandwidth, Hz.
    pub bandwidth: f64,
    pub include_shot: bool,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            current_density: 4.47e-12,
            bandwidth: 5e9,
            include_shot: false,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.current_density > 0.0) {
            return Err(Error::invalid("noise", "current_density must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("noise", "bandwidth must be > 0"));
        }
        Ok(())
    }

    /// Thermal noise variance `N0^2 B`, A^2.
    pub fn thermal_variance(&self) -> f64 {
        self.current_density * self.current_density * self.bandwidth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Physical,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// K x L, nonnegative.
    pub gains: DMatrix<f64>,
    /// Per-user noise variance.
    pub noise_var: DVector<f64>,
    pub mode: ChannelMode,
}

impl ChannelMatrix {
    /// Wraps an arbitrary nonnegative gain matrix with unit noise, e.g. for
    /// synthetic experiments.
    pub fn normalized_from(gains: DMatrix<f64>) -> Result<Self> {
        let k = gains.nrows();
        let raw = ChannelMatrix {
            gains,
            noise_var: DVector::from_element(k, 1.0),
            mode: ChannelMode::Physical,
        };
        Ok(normalize_channel(&raw, 0.0)?.0)
    }

    pub fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.gains.ncols()
    }

    /// Users whose channel row is identically zero.
    pub fn uncovered_users(&self) -> Vec<usize> {
        (0..self.num_users())
            .filter(|&k| self.gains.row(k).iter().all(|&g| g == 0.0))
            .collect()
    }

    /// CSV dump: header `ap_1..ap_L,noise_var`, one row per user.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.num_aps())
            .map(|l| format!("ap_{l}"))
            .chain(std::iter::once("noise_var".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.num_users() {
            let row: Vec<String> = self
                .gains
                .row(k)
                .iter()
                .chain(std::iter::once(&self.noise_var[k]))
                .map(|v| crate::runner::fmt_value(*v))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Photocurrent at user `user` from one VCSEL of AP `ap`, summed over the
/// photodiodes that see the AP inside their field of view.
///
/// An incidence angle equal to the FoV counts as inside.
pub fn link_gain(scene: &Scene, user: usize, ap: usize) -> Result<f64> {
    let u = scene
        .users
        .get(user)
        .ok_or_else(|| Error::invalid("user_index", format!("{user} out of range")))?;
    let a = scene
        .aps
        .get(ap)
        .ok_or_else(|| Error::invalid("ap_index", format!("{ap} out of range")))?;
    let offset = u.position - a.position;
    let axial = offset.dot(&a.beam_axis);
    if axial <= 0.0 {
        return Ok(0.0);
    }
    let radial = (offset - a.beam_axis * axial).norm();
    let mut current = 0.0;
    for pd in &u.adr {
        let inc = incidence_angle(pd, &u.position, &a.position)?;
        if inc > pd.fov_half_angle {
            continue;
        }
        current += pd.responsivity * power_on_aperture(&scene.vcsel, axial, radial, pd.area, inc)?;
    }
    Ok(current)
}

/// Builds the physical-mode channel of every placed user.
pub fn build_channel(scene: &Scene, noise: &NoiseParams) -> Result<ChannelMatrix> {
    noise.validate()?;
    let k = scene.num_users();
    if k == 0 {
        return Err(Error::invalid("scene", "no users placed"));
    }
    let l = scene.num_aps();
    let mut gains = DMatrix::zeros(k, l);
    for user in 0..k {
        for ap in 0..l {
            gains[(user, ap)] = link_gain(scene, user, ap)? * f64::from(scene.aps[ap].vcsels_per_ap);
        }
    }
    let thermal = noise.thermal_variance();
    let noise_var = DVector::from_fn(k, |user, _| {
        let mut var = thermal;
        if noise.include_shot {
            let signal_current: f64 = gains.row(user).iter().sum();
            var += 2.0 * ELECTRON_CHARGE * signal_current * noise.bandwidth;
        }
        var
    });
    Ok(ChannelMatrix {
        gains,
        noise_var,
        mode: ChannelMode::Physical,
    })
}

/// Rescales rows to unit norm with unit noise; returns the normalized channel
/// and the total transmit power `10^(snr_db / 10)`.
pub fn normalize_channel(h: &ChannelMatrix, snr_db: f64) -> Result<(ChannelMatrix, f64)> {
    if let Some(&user) = h.uncovered_users().first() {
        return Err(Error::UncoveredUser { user });
    }
    let mut gains = h.gains.clone();
    for mut row in gains.row_iter_mut() {
        // Rescale first: squares of tiny gains underflow.
        let max = row.amax();
        row /= max;
        let n = row.norm();
        row /= n;
    }
    let k = gains.nrows();
    Ok((
        ChannelMatrix {
            gains,
            noise_var: DVector::from_element(k, 1.0),
            mode: ChannelMode::Normalized,
        },
        10f64.powf(snr_db / 10.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_scene, Photodiode};

    fn upward_pd() -> Photodiode {
        Photodiode {
            azimuth: 0.0,
            elevation: 90.0,
            fov_half_angle: 25.0,
            area: 20e-6,
            responsivity: 0.4,
        }
    }

    #[test]
    fn on_axis_gain_composes_beam_value() {
        let mut s = default_scene().with_users_at(&[(3.5, 3.5)]).unwrap();
        s.users[0].adr = vec![upward_pd()];
        let g = link_gain(&s, 0, 0).unwrap();
        let expect = 0.4 * power_on_aperture(&s.vcsel, 2.15, 0.0, 20e-6, 0.0).unwrap();
        assert!((g - expect).abs() <= 1e-15 * expect);
        assert!(g > 0.0);
    }

    #[test]
    fn overhead_ap_is_outside_tilted_fov() {
        // Every reference-scene photodiode sees an overhead AP at 30 degrees > 25.
        let s = default_scene().with_users_at(&[(3.5, 3.5)]).unwrap();
        assert_eq!(link_gain(&s, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_fov_user_gets_nothing() {
        let mut s = default_scene().with_users_at(&[(0.0, 0.0)]).unwrap();
        s.users[0].adr = vec![upward_pd()];
        for ap in 0..4 {
            assert_eq!(link_gain(&s, 0, ap).unwrap(), 0.0);
        }
    }

    #[test]
    fn fov_boundary_is_inclusive() {
        let mut s = default_scene().with_users_at(&[(3.45, 3.5)]).unwrap();
        let mut pd = upward_pd();
        let inc = incidence_angle(&pd, &s.users[0].position, &s.aps[0].position).unwrap();
        pd.fov_half_angle = inc;
        s.users[0].adr = vec![pd];
        assert!(link_gain(&s, 0, 0).unwrap() > 0.0);
        s.users[0].adr[0].fov_half_angle = inc - 1e-9;
        assert_eq!(link_gain(&s, 0, 0).unwrap(), 0.0);
        s.users[0].adr[0].fov_half_angle = inc + 1e-9;
        assert!(link_gain(&s, 0, 0).unwrap() > 0.0);
    }

    #[test]
    fn thermal_noise_closed_form() {
        let s = default_scene().with_users_at(&[(2.0, 2.0)]).unwrap();
        let h = build_channel(&s, &NoiseParams::default()).unwrap();
        let expect = 4.47e-12f64 * 4.47e-12 * 5e9;
        assert!((h.noise_var[0] - expect).abs() <= 1e-15 * expect);
        assert!((expect - 9.99e-14).abs() < 1e-16);
    }

    #[test]
    fn shot_noise_adds_signal_term() {
        let mut s = default_scene().with_users_at(&[(3.45, 3.5)]).unwrap();
        s.users[0].adr = vec![upward_pd()];
        let noise = NoiseParams {
            include_shot: true,
            ..NoiseParams::default()
        };
        let h = build_channel(&s, &noise).unwrap();
        let current: f64 = h.gains.row(0).iter().sum();
        assert!(current > 0.0);
        let expect = noise.thermal_variance() + 2.0 * ELECTRON_CHARGE * current * 5e9;
        assert!((h.noise_var[0] - expect).abs() <= 1e-15 * expect);
    }

    #[test]
    fn rejects_empty_scene() {
        assert!(build_channel(&default_scene(), &NoiseParams::default()).is_err());
    }

    #[test]
    fn doubling_area_doubles_gains() {
        let mut s = default_scene().with_users_at(&[(3.4, 3.5), (1.6, 1.45)]).unwrap();
        for u in &mut s.users {
            u.adr = vec![upward_pd()];
        }
        let h1 = build_channel(&s, &NoiseParams::default()).unwrap();
        for u in &mut s.users {
            u.adr[0].area *= 2.0;
        }
        let h2 = build_channel(&s, &NoiseParams::default()).unwrap();
        assert!(h1.gains.iter().any(|&g| g > 0.0));
        for (a, b) in h1.gains.iter().zip(h2.gains.iter()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn scale_covariance() {
        let mut s = default_scene().with_users_at(&[(3.4, 3.5), (1.6, 1.45)]).unwrap();
        for u in &mut s.users {
            u.adr = vec![upward_pd()];
        }
        let h1 = build_channel(&s, &NoiseParams::default()).unwrap();
        s.vcsel.total_optical_power *= 3.0;
        let h2 = build_channel(&s, &NoiseParams::default()).unwrap();
        for (a, b) in h1.gains.iter().zip(h2.gains.iter()) {
            assert!((3.0 * a - b).abs() <= 1e-14 * b.abs());
        }
        let (n1, _) = normalize_channel(&h1, 10.0).unwrap();
        let (n2, _) = normalize_channel(&h2, 10.0).unwrap();
        for (a, b) in n1.gains.iter().zip(n2.gains.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization() {
        let h = ChannelMatrix {
            gains: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 2.0, 0.0, 3.0, 4.0]),
            noise_var: DVector::from_element(2, 1e-13),
            mode: ChannelMode::Physical,
        };
        let (n, p) = normalize_channel(&h, 0.0).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(n.mode, ChannelMode::Normalized);
        for row in n.gains.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
        assert!(n.noise_var.iter().all(|&v| v == 1.0));
        let (_, p15) = normalize_channel(&h, 15.0).unwrap();
        assert!((p15 - 31.622_776_601_683_8).abs() < 1e-9);
    }

    #[test]
    fn normalization_names_uncovered_user() {
        let h = ChannelMatrix {
            gains: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            noise_var: DVector::from_element(2, 1.0),
            mode: ChannelMode::Physical,
        };
        assert_eq!(h.uncovered_users(), vec![1]);
        assert!(matches!(normalize_channel(&h, 0.0), Err(Error::UncoveredUser { user: 1 })));
    }

    #[test]
    fn normalization_survives_tiny_gains() {
        let h = ChannelMatrix {
            gains: DMatrix::from_row_slice(1, 3, &[3e-200, 4e-200, 0.0]),
            noise_var: DVector::from_element(1, 1.0),
            mode: ChannelMode::Physical,
        };
        let (n, _) = normalize_channel(&h, 0.0).unwrap();
        assert!((n.gains[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((n.gains[(0, 1)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let h = ChannelMatrix {
            gains: DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.0, 1.0]),
            noise_var: DVector::from_element(2, 1.0),
            mode: ChannelMode::Normalized,
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ap_1,ap_2,noise_var");
        assert_eq!(lines.len(), 3);
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.5, 0.25, 1.0]);
    }
}
