//! Scene and simulation settings from a TOML file.
//!
//! Every key is optional and defaults to the reference scenario; unknown keys
//! are rejected. Keys are flat, with arrays for per-AP and per-photodiode
//! values:
//!
//! ```toml
//! room_length = 5.0
//! room_width = 5.0
//! room_height = 3.0
//! rx_plane_height = 0.85
//!
//! ap_positions = [[3.5, 3.5, 3.0], [1.5, 3.5, 3.0], [3.5, 1.5, 3.0], [1.5, 1.5, 3.0]]
//! ap_beam_axes = [[0.0, 0.0, -1.0]]      # one entry for all APs, or one per AP
//! vcsels_per_ap = 10
//!
//! pd_azimuth_deg = [0.0, 90.0, 180.0, 270.0]
//! pd_elevation_deg = [60.0, 60.0, 60.0, 60.0]
//! pd_fov_deg = [25.0, 25.0, 25.0, 25.0]
//! pd_area_m2 = 20e-6
//! pd_responsivity = 0.4
//!
//! beam_waist_m = 20e-6
//! wavelength_m = 850e-9
//! refractive_index = 1.0
//! vcsel_power_w = 0.01
//! mode_coeffs = [{ p = 0, l = 0, weight = 1.0 }]
//!
//! noise_current_density = 4.47e-12
//! bandwidth_hz = 5e9
//! include_shot_noise = false
//!
//! common_precoder = "equal_gain"          # or "dominant_singular"
//! alpha = 0.8
//! beta = 0.8
//! private_power_min_fraction = 0.0       # of the power budget
//! private_power_max_fraction = 1.0
//! min_sum_rate = 0.0                     # bits/s/Hz
//! sca_tol = 1e-6
//! sca_max_outer = 50
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::beam::{ModeCoeff, VcselParams, DEFAULT_VCSEL_POWER_W};
use crate::channel::NoiseParams;
use crate::error::{Error, Result};
use crate::geometry::{default_scene, AccessPoint, Photodiode, Room, Scene, Vec3};
use crate::optimizer::{ScaOptions, DEFAULT_MAX_INNER, DEFAULT_MAX_OUTER, DEFAULT_TOL};
use crate::precoding::CommonStrategy;

/// Optimizer bounds, expressed relative to the per-point power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationSettings {
    pub private_min_fraction: f64,
    pub private_max_fraction: f64,
    pub min_sum_rate: f64,
    pub sca: ScaOptions,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        AllocationSettings {
            private_min_fraction: 0.0,
            private_max_fraction: 1.0,
            min_sum_rate: 0.0,
            sca: ScaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scene: Scene,
    pub noise: NoiseParams,
    pub common_strategy: CommonStrategy,
    pub alpha: f64,
    pub beta: f64,
    pub allocation: AllocationSettings,
}

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_BETA: f64 = 0.8;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scene: default_scene(),
            noise: NoiseParams::default(),
            common_strategy: CommonStrategy::EqualGain,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            allocation: AllocationSettings::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StrategyKey {
    EqualGain,
    DominantSingular,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeKey {
    p: usize,
    l: usize,
    weight: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    room_length: Option<f64>,
    room_width: Option<f64>,
    room_height: Option<f64>,
    rx_plane_height: Option<f64>,
    ap_positions: Option<Vec<[f64; 3]>>,
    ap_beam_axes: Option<Vec<[f64; 3]>>,
    vcsels_per_ap: Option<u32>,
    pd_azimuth_deg: Option<Vec<f64>>,
    pd_elevation_deg: Option<Vec<f64>>,
    pd_fov_deg: Option<Vec<f64>>,
    pd_area_m2: Option<f64>,
    pd_responsivity: Option<f64>,
    beam_waist_m: Option<f64>,
    wavelength_m: Option<f64>,
    refractive_index: Option<f64>,
    vcsel_power_w: Option<f64>,
    mode_coeffs: Option<Vec<ModeKey>>,
    noise_current_density: Option<f64>,
    bandwidth_hz: Option<f64>,
    include_shot_noise: Option<bool>,
    common_precoder: Option<StrategyKey>,
    alpha: Option<f64>,
    beta: Option<f64>,
    private_power_min_fraction: Option<f64>,
    private_power_max_fraction: Option<f64>,
    min_sum_rate: Option<f64>,
    sca_tol: Option<f64>,
    sca_max_outer: Option<usize>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.noise.validate()?;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        let a = &self.allocation;
        if !(0.0 <= a.private_min_fraction
            && a.private_min_fraction <= a.private_max_fraction
            && a.private_max_fraction <= 1.0
            && a.private_max_fraction > 0.0)
        {
            return Err(Error::Config(format!(
                "need 0 <= private_power_min_fraction <= private_power_max_fraction <= 1, got {} and {}",
                a.private_min_fraction, a.private_max_fraction
            )));
        }
        if !(a.min_sum_rate >= 0.0) {
            return Err(Error::Config("min_sum_rate must be >= 0".into()));
        }
        if !(a.sca.tol > 0.0) || a.sca.max_outer == 0 {
            return Err(Error::Config("sca_tol must be > 0 and sca_max_outer >= 1".into()));
        }
        Ok(())
    }
}

impl RawConfig {
    fn build(self) -> Result<SimConfig> {
        let base = SimConfig::default();
        let room = Room::new(
            self.room_length.unwrap_or(base.scene.room.length),
            self.room_width.unwrap_or(base.scene.room.width),
            self.room_height.unwrap_or(base.scene.room.height),
            self.rx_plane_height.unwrap_or(base.scene.room.rx_plane_height),
        )?;

        let vcsels = self.vcsels_per_ap.unwrap_or(base.scene.aps[0].vcsels_per_ap);
        let positions: Vec<Vec3> = match self.ap_positions {
            Some(p) => p.iter().map(|&[x, y, z]| Vec3::new(x, y, z)).collect(),
            None => base.scene.aps.iter().map(|a| a.position).collect(),
        };
        let axes: Vec<Vec3> = match self.ap_beam_axes {
            None => vec![Vec3::new(0.0, 0.0, -1.0); positions.len()],
            Some(a) if a.len() == 1 => vec![Vec3::from(a[0]); positions.len()],
            Some(a) if a.len() == positions.len() => a.into_iter().map(Vec3::from).collect(),
            Some(a) => {
                return Err(Error::Config(format!(
                    "ap_beam_axes has {} entries; expected 1 or {}",
                    a.len(),
                    positions.len()
                )))
            }
        };
        let aps = positions
            .into_iter()
            .zip(axes)
            .map(|(position, axis)| {
                let n = axis.norm();
                if !(n > 0.0) {
                    return Err(Error::Config("beam axis must be nonzero".into()));
                }
                Ok(AccessPoint {
                    position,
                    vcsels_per_ap: vcsels,
                    beam_axis: axis / n,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let template = base.scene.adr[0];
        let azimuth = self
            .pd_azimuth_deg
            .unwrap_or_else(|| base.scene.adr.iter().map(|p| p.azimuth).collect());
        let count = azimuth.len();
        let per_pd = |name: &str, v: Option<Vec<f64>>, default: f64| -> Result<Vec<f64>> {
            match v {
                None => Ok(vec![default; count]),
                Some(v) if v.len() == count => Ok(v),
                Some(v) => Err(Error::Config(format!(
                    "{name} has {} entries but pd_azimuth_deg has {count}",
                    v.len()
                ))),
            }
        };
        let elevation = per_pd("pd_elevation_deg", self.pd_elevation_deg, template.elevation)?;
        let fov = per_pd("pd_fov_deg", self.pd_fov_deg, template.fov_half_angle)?;
        let area = self.pd_area_m2.unwrap_or(template.area);
        let responsivity = self.pd_responsivity.unwrap_or(template.responsivity);
        let adr = (0..count)
            .map(|i| Photodiode {
                azimuth: azimuth[i],
                elevation: elevation[i],
                fov_half_angle: fov[i],
                area,
                responsivity,
            })
            .collect();

        let v = &base.scene.vcsel;
        let modes = match self.mode_coeffs {
            Some(m) => m
                .into_iter()
                .map(|m| ModeCoeff {
                    p: m.p,
                    l: m.l,
                    weight: m.weight,
                })
                .collect(),
            None => v.mode_coeffs.clone(),
        };
        let vcsel = VcselParams::new(
            self.beam_waist_m.unwrap_or(v.w0),
            self.wavelength_m.unwrap_or(v.wavelength),
            self.refractive_index.unwrap_or(v.refractive_index),
            modes,
            self.vcsel_power_w.unwrap_or(DEFAULT_VCSEL_POWER_W),
        )?;

        let noise = NoiseParams {
            current_density: self.noise_current_density.unwrap_or(base.noise.current_density),
            bandwidth: self.bandwidth_hz.unwrap_or(base.noise.bandwidth),
            include_shot: self.include_shot_noise.unwrap_or(base.noise.include_shot),
        };
        let common_strategy = match self.common_precoder {
            None | Some(StrategyKey::EqualGain) => CommonStrategy::EqualGain,
            Some(StrategyKey::DominantSingular) => CommonStrategy::DominantSingular,
        };
        let allocation = AllocationSettings {
            private_min_fraction: self.private_power_min_fraction.unwrap_or(0.0),
            private_max_fraction: self.private_power_max_fraction.unwrap_or(1.0),
            min_sum_rate: self.min_sum_rate.unwrap_or(0.0),
            sca: ScaOptions {
                tol: self.sca_tol.unwrap_or(DEFAULT_TOL),
                max_outer: self.sca_max_outer.unwrap_or(DEFAULT_MAX_OUTER),
                max_inner: DEFAULT_MAX_INNER,
            },
        };
        let out = SimConfig {
            scene: Scene {
                room,
                aps,
                adr,
                users: Vec::new(),
                vcsel,
            },
            noise,
            common_strategy,
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            allocation,
        };
        out.validate()?;
        Ok(out)
    }
}
