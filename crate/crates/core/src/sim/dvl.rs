//! Doppler velocity log range simulation (central ray per beam).

use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvlConfig {
    /// Unit beam directions in the vehicle frame.
    pub beam_directions: [[f64; 3]; 4],
    /// Full cone angle of each beam, radians.
    pub opening_angle: f64,
    pub max_range: f64,
    pub ray_step: f64,
}

impl DvlConfig {
    /// Four beams tilted `tilt` away from nadir at azimuths 45°, 135°, 225°, 315°.
    pub fn janus(tilt: f64, opening_angle: f64, max_range: f64) -> Self {
        let mut beam_directions = [[0.0; 3]; 4];
        for (k, dir) in beam_directions.iter_mut().enumerate() {
            let az = std::f64::consts::FRAC_PI_4 * (2 * k + 1) as f64;
            *dir = [tilt.sin() * az.cos(), tilt.sin() * az.sin(), -tilt.cos()];
        }
        Self {
            beam_directions,
            opening_angle,
            max_range,
            ray_step: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.beam_directions {
            let n = Vec3::from(*d).norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("DVL beam direction {d:?} is not unit")));
            }
        }
        if !(self.opening_angle > 0.0 && self.opening_angle < std::f64::consts::PI) {
            return Err(Error::Config("DVL opening angle must lie in (0, π)".into()));
        }
        if !(self.max_range > 0.0) || !(self.ray_step > 0.0) {
            return Err(Error::Config("DVL max range and ray step must be positive".into()));
        }
        Ok(())
    }

    pub fn beam(&self, k: usize) -> Vec3 {
        Vec3::from(self.beam_directions[k])
    }
}

impl Default for DvlConfig {
    fn default() -> Self {
        Self::janus(25f64.to_radians(), 4f64.to_radians(), 30.0)
    }
}

/// Slant range along each beam's central ray, `None` beyond `max_range`.
pub fn simulate_dvl(scene: &Scene, pose: &Pose, cfg: &DvlConfig) -> Result<[Option<f64>; 4]> {
    pose.validate()?;
    cfg.validate()?;
    let origin = *pose.translation();
    let mut out = [None; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let dir = pose.transform_vector(&cfg.beam(k));
        *slot = scene.raycast(&origin, &dir, cfg.max_range, cfg.ray_step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_down_and_up() {
        let scene = Scene::flat(0.0, 100.0);
        let mut cfg = DvlConfig::janus(0.0, 0.05, 30.0);
        cfg.beam_directions[1] = [0.0, 0.0, 1.0];
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 5.0));
        let r = simulate_dvl(&scene, &pose, &cfg).unwrap();
        assert!((r[0].unwrap() - 5.0).abs() <= cfg.ray_step);
        assert!(r[1].is_none());
    }

    #[test]
    fn tilted_beam_slant_range() {
        let scene = Scene::flat(0.0, 100.0);
        let tilt = 30f64.to_radians();
        let cfg = DvlConfig::janus(tilt, 0.05, 30.0);
        let h = 4.0;
        let pose = Pose::from_euler(0.0, 0.0, 0.7, Vec3::new(2.0, 1.0, h));
        for r in simulate_dvl(&scene, &pose, &cfg).unwrap() {
            assert!((r.unwrap() - h / tilt.cos()).abs() <= cfg.ray_step);
        }
        let far = Pose::from_translation(Vec3::new(0.0, 0.0, 40.0));
        assert!(simulate_dvl(&scene, &far, &cfg).unwrap().iter().all(Option::is_none));
    }

    #[test]
    fn dvl_agrees_with_sdf_zero_crossing() {
        use crate::sim::scene::{BoxSpec, Extent, GaussianBump, SceneSpec, TerrainSpec};
        let scene = Scene::from_spec(&SceneSpec {
            terrain: Some(TerrainSpec::Bumps {
                base_height: 0.0,
                bumps: vec![GaussianBump { center: [1.0, 0.0], height: 1.5, sigma: 3.0 }],
            }),
            boxes: vec![BoxSpec { center: [3.0, 3.0, 1.0], size: [1.0, 1.0, 2.0] }],
            extent: Extent { min: [-10.0, -10.0], max: [10.0, 10.0] },
        })
        .unwrap();
        let cfg = DvlConfig::default();
        for i in 0..20 {
            let pose = Pose::from_euler(0.0, 0.0, 0.3 * i as f64, Vec3::new(0.2 * i as f64, 0.1 * i as f64, 5.0));
            let ranges = simulate_dvl(&scene, &pose, &cfg).unwrap();
            for (k, r) in ranges.iter().enumerate() {
                let r = r.unwrap();
                let dir = pose.transform_vector(&cfg.beam(k));
                // Brute-force scan for the first sign change.
                let step = cfg.ray_step / 50.0;
                let mut t = 0.0;
                while scene.signed_distance(&(pose.translation() + dir * t)) > 0.0 {
                    t += step;
                }
                assert!((t - r).abs() <= 2.0 * cfg.ray_step);
            }
        }
    }
}
