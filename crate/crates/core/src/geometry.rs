//! Room, access points, angle-diversity receivers and user placement.
//!
//! Coordinates are meters with the origin at a floor corner and `z` pointing
//! up. Angles are degrees. A photodiode's facing direction is derived from its
//! azimuth `a` (from +x towards +y) and elevation `e` (above the horizontal):
//! `n = (cos e cos a, cos e sin a, sin e)`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam::VcselParams;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub rx_plane_height: f64,
}

impl Room {
    pub fn new(length: f64, width: f64, height: f64, rx_plane_height: f64) -> Result<Self> {
        for (name, v) in [("length", length), ("width", width), ("height", height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("room", format!("{name} must be > 0, got {v}")));
            }
        }
        if !(rx_plane_height >= 0.0 && rx_plane_height < height) {
            return Err(Error::invalid(
                "room",
                format!("rx_plane_height must lie in [0, {height}), got {rx_plane_height}"),
            ));
        }
        Ok(Room {
            length,
            width,
            height,
            rx_plane_height,
        })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.length).contains(&p.x)
            && (0.0..=self.width).contains(&p.y)
            && (0.0..=self.height).contains(&p.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub position: Vec3,
    pub vcsels_per_ap: u32,
    /// Unit propagation direction of the AP's beams.
    pub beam_axis: Vec3,
}

impl AccessPoint {
    /// A ceiling AP whose beams point straight down.
    pub fn downward(position: Vec3, vcsels_per_ap: u32) -> Self {
        AccessPoint {
            position,
            vcsels_per_ap,
            beam_axis: Vec3::new(0.0, 0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photodiode {
    pub azimuth: f64,
    pub elevation: f64,
    pub fov_half_angle: f64,
    /// Detector area, m^2.
    pub area: f64,
    /// A/W.
    pub responsivity: f64,
}

impl Photodiode {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=90.0).contains(&self.fov_half_angle) {
            return Err(Error::invalid(
                "photodiode",
                format!("fov_half_angle must lie in [0, 90], got {}", self.fov_half_angle),
            ));
        }
        if !(self.area > 0.0) {
            return Err(Error::invalid("photodiode", format!("area must be > 0, got {}", self.area)));
        }
        if !(self.responsivity > 0.0) {
            return Err(Error::invalid(
                "photodiode",
                format!("responsivity must be > 0, got {}", self.responsivity),
            ));
        }
        Ok(())
    }

    /// Unit normal of the detector surface.
    pub fn normal(&self) -> Vec3 {
        let (a, e) = (self.azimuth.to_radians(), self.elevation.to_radians());
        Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub position: Vec3,
    pub adr: Vec<Photodiode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Room,
    pub aps: Vec<AccessPoint>,
    /// Receiver template handed to every placed user.
    pub adr: Vec<Photodiode>,
    pub users: Vec<User>,
    pub vcsel: VcselParams,
}

impl Scene {
    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Checks every structural invariant. An empty user list is allowed;
    /// operations that need users reject it themselves.
    pub fn validate(&self) -> Result<()> {
        if self.aps.is_empty() {
            return Err(Error::invalid("scene", "at least one access point required"));
        }
        if self.adr.is_empty() {
            return Err(Error::invalid("scene", "receiver needs at least one photodiode"));
        }
        for pd in &self.adr {
            pd.validate()?;
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if (ap.position.z - self.room.height).abs() > 1e-12 {
                return Err(Error::invalid(
                    "scene",
                    format!("access point {i} is not on the ceiling (z = {})", ap.position.z),
                ));
            }
            if !self.room.contains(&ap.position) {
                return Err(Error::invalid("scene", format!("access point {i} lies outside the room")));
            }
            if ap.vcsels_per_ap == 0 {
                return Err(Error::invalid("scene", format!("access point {i} has no VCSELs")));
            }
            if (ap.beam_axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(
                    "scene",
                    format!("access point {i} beam axis is not a unit vector"),
                ));
            }
        }
        for (k, u) in self.users.iter().enumerate() {
            if !self.room.contains(&u.position) || u.position.z != self.room.rx_plane_height {
                return Err(Error::invalid(
                    "scene",
                    format!("user {k} is not on the receiver plane inside the room"),
                ));
            }
            if u.adr.is_empty() {
                return Err(Error::invalid("scene", format!("user {k} has no photodiodes")));
            }
            for pd in &u.adr {
                pd.validate()?;
            }
        }
        self.vcsel.validate()
    }

    /// Same scene with users at the given floor-plane coordinates.
    pub fn with_users_at(&self, xy: &[(f64, f64)]) -> Result<Scene> {
        let mut out = self.clone();
        out.users = xy
            .iter()
            .map(|&(x, y)| User {
                position: Vec3::new(x, y, self.room.rx_plane_height),
                adr: self.adr.clone(),
            })
            .collect();
        out.validate()?;
        Ok(out)
    }
}

/// The four-photodiode receiver: azimuths 0/90/180/270, 60 degree elevation,
/// 25 degree FoV, 20 mm^2, 0.4 A/W.
pub fn default_adr() -> Vec<Photodiode> {
    [0.0, 90.0, 180.0, 270.0]
        .into_iter()
        .map(|azimuth| Photodiode {
            azimuth,
            elevation: 60.0,
            fov_half_angle: 25.0,
            area: 20e-6,
            responsivity: 0.4,
        })
        .collect()
}

/// 5 x 5 x 3 m room, receiver plane at 0.85 m, four ceiling APs with ten
/// VCSELs each. No users are placed.
pub fn default_scene() -> Scene {
    let room = Room {
        length: 5.0,
        width: 5.0,
        height: 3.0,
        rx_plane_height: 0.85,
    };
    let aps = [(3.5, 3.5), (1.5, 3.5), (3.5, 1.5), (1.5, 1.5)]
        .into_iter()
        .map(|(x, y)| AccessPoint::downward(Vec3::new(x, y, 3.0), 10))
        .collect();
    Scene {
        room,
        aps,
        adr: default_adr(),
        users: Vec::new(),
        vcsel: VcselParams::reference(),
    }
}

/// Places `k` users uniformly on the receiver plane. Deterministic in `seed`.
pub fn place_users_random(scene: &Scene, k: usize, seed: u64) -> Result<Scene> {
    if k == 0 {
        return Err(Error::invalid("k", "at least one user required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xy: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(0.0..=scene.room.length),
                rng.random_range(0.0..=scene.room.width),
            )
        })
        .collect();
    scene.with_users_at(&xy)
}

/// Angle in degrees between a photodiode's normal and the direction from the
/// user towards an access point.
pub fn incidence_angle(pd: &Photodiode, user_pos: &Vec3, ap_pos: &Vec3) -> Result<f64> {
    let dir = ap_pos - user_pos;
    let dist = dir.norm();
    if !(dist > 0.0) {
        return Err(Error::invalid("incidence_angle", "user and access point coincide"));
    }
    let n = pd.normal();
    // atan2 keeps full precision near 0 and 180 degrees, where acos does not.
    Ok(n.cross(&dir).norm().atan2(n.dot(&dir)).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pd(azimuth: f64, elevation: f64) -> Photodiode {
        Photodiode {
            azimuth,
            elevation,
            fov_half_angle: 25.0,
            area: 20e-6,
            responsivity: 0.4,
        }
    }

    #[test]
    fn default_scene_matches_table() {
        let s = default_scene();
        assert_eq!(s.num_aps(), 4);
        assert_eq!(s.aps[0].position, Vec3::new(3.5, 3.5, 3.0));
        assert_eq!(s.aps[1].position, Vec3::new(1.5, 3.5, 3.0));
        assert_eq!(s.aps[2].position, Vec3::new(3.5, 1.5, 3.0));
        assert_eq!(s.aps[3].position, Vec3::new(1.5, 1.5, 3.0));
        assert!(s.aps.iter().all(|a| a.vcsels_per_ap == 10));
        assert!(s.users.is_empty());
        assert_eq!(s.vcsel.w0, 20e-6);
        assert_eq!(s.vcsel.wavelength, 850e-9);
        assert_eq!(s.room.rx_plane_height, 0.85);
        let az: Vec<f64> = s.adr.iter().map(|p| p.azimuth).collect();
        assert_eq!(az, vec![0.0, 90.0, 180.0, 270.0]);
        for p in &s.adr {
            assert_eq!((p.elevation, p.fov_half_angle, p.area, p.responsivity), (60.0, 25.0, 20e-6, 0.4));
        }
        s.validate().unwrap();
    }

    #[test]
    fn placement_is_deterministic_and_on_plane() {
        let s = default_scene();
        let a = place_users_random(&s, 4, 42).unwrap();
        let b = place_users_random(&s, 4, 42).unwrap();
        assert_eq!(a.users.len(), 4);
        assert!(a.users.iter().all(|u| u.position.z == 0.85));
        assert_eq!(a.users, b.users);
        let c = place_users_random(&s, 4, 43).unwrap();
        assert_ne!(a.users, c.users);
    }

    #[test]
    fn placement_mean_is_room_center() {
        let s = place_users_random(&default_scene(), 1000, 7).unwrap();
        let mean = s.users.iter().map(|u| u.position.x).sum::<f64>() / 1000.0;
        assert!((mean - 2.5).abs() < 0.1, "mean x = {mean}");
    }

    #[test]
    fn zero_users_rejected() {
        assert!(place_users_random(&default_scene(), 0, 1).is_err());
    }

    #[test]
    fn incidence_examples() {
        let user = Vec3::new(1.0, 1.0, 0.85);
        let above = Vec3::new(1.0, 1.0, 3.0);
        assert!(incidence_angle(&pd(0.0, 90.0), &user, &above).unwrap().abs() < 1e-9);
        let tilted = incidence_angle(&pd(0.0, 60.0), &user, &above).unwrap();
        assert!((tilted - 30.0).abs() < 1e-9);
        let side = Vec3::new(3.0, 1.0, 0.85);
        assert!((incidence_angle(&pd(0.0, 90.0), &user, &side).unwrap() - 90.0).abs() < 1e-9);
        assert!(incidence_angle(&pd(0.0, 90.0), &user, &user).is_err());
    }

    #[test]
    fn room_and_pd_validation() {
        assert!(Room::new(5.0, 5.0, 3.0, 3.0).is_err());
        assert!(Room::new(0.0, 5.0, 3.0, 1.0).is_err());
        assert!(Room::new(5.0, 5.0, 3.0, 0.0).is_ok());
        let mut p = pd(0.0, 60.0);
        p.fov_half_angle = 91.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn incidence_invariant_under_vertical_rotation(
            theta in 0.0f64..360.0,
            az in 0.0f64..360.0,
            el in 0.0f64..90.0,
            dx in -3.0f64..3.0,
            dy in -3.0f64..3.0,
            dz in 0.1f64..3.0,
        ) {
            let user = Vec3::new(2.0, 2.0, 0.85);
            let ap = user + Vec3::new(dx, dy, dz);
            let before = incidence_angle(&pd(az, el), &user, &ap).unwrap();
            let t = theta.to_radians();
            let rotated = user + Vec3::new(dx * t.cos() - dy * t.sin(), dx * t.sin() + dy * t.cos(), dz);
            let after = incidence_angle(&pd(az + theta, el), &user, &rotated).unwrap();
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn placed_users_stay_inside(seed in any::<u64>(), k in 1usize..20) {
            let s = place_users_random(&default_scene(), k, seed).unwrap();
            for u in &s.users {
                prop_assert!((0.0..=5.0).contains(&u.position.x));
                prop_assert!((0.0..=5.0).contains(&u.position.y));
                prop_assert_eq!(u.position.z, 0.85);
            }
        }
    }
}
