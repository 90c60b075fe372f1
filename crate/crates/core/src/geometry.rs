//! Frames, sonar projection and the unit-sphere charts used for normal targets.
//!
//! Conventions used throughout the crate:
//!
//! * World frame: right-handed, `z` up. The flat seafloor of the synthetic
//!   scenes is the plane `z = 0`.
//! * Sensor (sonar, DVL, vehicle body) frames: `x` forward, `y` to port,
//!   `z` up. Azimuth is positive toward `+y`, elevation positive toward `+z`.
//! * A [`Pose`] maps sensor coordinates into the world: `p_w = R p_s + t`.
//!   The columns of `R` are the sensor axes expressed in world coordinates
//!   and `t` is the sensor origin in the world.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const ORTHO_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-6;

/// Rigid sensor pose (sensor-to-world).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Pose {
    /// Builds a pose, rejecting rotations that are not proper orthonormal.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Yaw about world `z`, then pitch about the rotated `y` (positive pitches
    /// the nose down), then roll about the rotated `x`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64, translation: Vec3) -> Self {
        let rotation = Rotation3::from_euler_angles(roll, pitch, yaw).into_inner();
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().all(|v| v.is_finite())
            || !self.translation.iter().all(|v| v.is_finite())
        {
            return Err(Error::Domain("pose contains non-finite values".into()));
        }
        let defect = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        if defect > ORTHO_TOL {
            return Err(Error::Domain(format!(
                "rotation not orthonormal (max |RᵀR - I| = {defect:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Domain(format!("rotation determinant {det} != 1")));
        }
        Ok(())
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

/// Spherical coordinates of a point in a sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarCoord {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Tangent-plane coordinates at `ê_z`, in the `(ê_x, ê_y)` basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentDelta {
    pub u: f64,
    pub v: f64,
}

impl TangentDelta {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }
}

/// Expresses a world point in the sensor frame of `pose_sonar_in_world`.
pub fn cell_to_sonar(pose_sonar_in_world: &Pose, p_c: &Vec3) -> Vec3 {
    pose_sonar_in_world.rotation.transpose() * (p_c - pose_sonar_in_world.translation)
}

pub fn project_polar(p_l: &Vec3) -> Result<PolarCoord> {
    let range = p_l.norm();
    if range == 0.0 || !range.is_finite() {
        return Err(Error::Domain(format!("cannot project point {p_l:?}")));
    }
    let horizontal = p_l.x.hypot(p_l.y);
    Ok(PolarCoord {
        range,
        azimuth: p_l.y.atan2(p_l.x),
        elevation: p_l.z.atan2(horizontal),
    })
}

fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("{what} must be a unit vector, |v| = {n}")));
    }
    Ok(())
}

/// Angles between a unit direction and each world axis, folded into `[0, π/2]`.
pub fn axis_angles(r_hat: &Vec3) -> Result<[f64; 3]> {
    check_unit(r_hat, "viewing direction")?;
    Ok([
        r_hat.x.abs().min(1.0).acos(),
        r_hat.y.abs().min(1.0).acos(),
        r_hat.z.abs().min(1.0).acos(),
    ])
}

/// Logarithm map of `S²` at `ê_z`.
pub fn log_map(n_hat: &Vec3) -> Result<TangentDelta> {
    check_unit(n_hat, "direction")?;
    let rho = n_hat.x.hypot(n_hat.y);
    if rho == 0.0 {
        if n_hat.z > 0.0 {
            return Ok(TangentDelta::new(0.0, 0.0));
        }
        return Err(Error::Singularity(
            "log map undefined at -e_z (antipode of the chart center)".into(),
        ));
    }
    let angle = rho.atan2(n_hat.z);
    Ok(TangentDelta::new(angle * n_hat.x / rho, angle * n_hat.y / rho))
}

/// Exponential map of `S²` at `ê_z`; inverse of [`log_map`] for `|δ| < π`.
pub fn exp_map(delta: &TangentDelta) -> Result<Vec3> {
    let angle = delta.norm();
    if !angle.is_finite() || angle > std::f64::consts::PI {
        return Err(Error::Domain(format!(
            "tangent delta norm {angle} outside the principal chart"
        )));
    }
    if angle == 0.0 {
        return Ok(Vec3::z());
    }
    let s = angle.sin() / angle;
    Ok(Vec3::new(s * delta.u, s * delta.v, angle.cos()))
}
