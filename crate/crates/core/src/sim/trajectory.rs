//! Survey trajectories: repeated squares and straight lines at constant altitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Counter-clockwise squares starting at `start` with the first leg along
    /// `+x`. Each further lap is shifted by `lateral_displacement` along `+y`.
    Square {
        side_length: f64,
        laps: usize,
        #[serde(default)]
        lateral_displacement: f64,
        altitude: f64,
        speed: f64,
        sample_rate: f64,
        #[serde(default)]
        start: [f64; 2],
    },
    Line {
        length: f64,
        altitude: f64,
        speed: f64,
        sample_rate: f64,
        #[serde(default)]
        start: [f64; 2],
        /// Heading of travel, radians from `+x`.
        #[serde(default)]
        heading: f64,
    },
}

/// Time-stamped vehicle pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub time: f64,
    pub pose: Pose,
}

impl TrajectorySpec {
    fn waypoints(&self) -> Result<(Vec<[f64; 2]>, f64, f64, f64)> {
        match *self {
            TrajectorySpec::Square {
                side_length,
                laps,
                lateral_displacement,
                altitude,
                speed,
                sample_rate,
                start,
            } => {
                positive(&[("side_length", side_length), ("speed", speed), ("sample_rate", sample_rate)])?;
                if laps == 0 {
                    return Err(Error::Config("square trajectory needs at least one lap".into()));
                }
                let corners = [[0.0, 0.0], [side_length, 0.0], [side_length, side_length], [0.0, side_length]];
                let mut pts = Vec::with_capacity(4 * laps + 1);
                for lap in 0..laps {
                    let dy = lap as f64 * lateral_displacement;
                    for c in corners {
                        pts.push([start[0] + c[0], start[1] + c[1] + dy]);
                    }
                }
                let last = (laps - 1) as f64 * lateral_displacement;
                pts.push([start[0], start[1] + last]);
                Ok((pts, altitude, speed, sample_rate))
            }
            TrajectorySpec::Line {
                length,
                altitude,
                speed,
                sample_rate,
                start,
                heading,
            } => {
                positive(&[("length", length), ("speed", speed), ("sample_rate", sample_rate)])?;
                let end = [start[0] + length * heading.cos(), start[1] + length * heading.sin()];
                Ok((vec![start, end], altitude, speed, sample_rate))
            }
        }
    }

    /// Total path length in meters.
    pub fn path_length(&self) -> Result<f64> {
        let (pts, ..) = self.waypoints()?;
        Ok(pts.windows(2).map(|w| seg_len(w[0], w[1])).sum())
    }
}

fn positive(params: &[(&str, f64)]) -> Result<()> {
    for (name, v) in params {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("trajectory {name} must be positive, got {v}")));
        }
    }
    Ok(())
}

fn seg_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Vehicle poses sampled at `sample_rate` while traversing the path at `speed`.
///
/// Heading follows the current leg; the body frame is level.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<TimedPose>> {
    let (pts, altitude, speed, rate) = spec.waypoints()?;
    if !altitude.is_finite() {
        return Err(Error::Config("altitude must be finite".into()));
    }
    let lengths: Vec<f64> = pts.windows(2).map(|w| seg_len(w[0], w[1])).collect();
    let total: f64 = lengths.iter().sum();
    let count = (total / speed * rate).round() as usize;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    for k in 0..count {
        let time = k as f64 / rate;
        let s = (speed * time).min(total);
        while seg + 1 < lengths.len() && s >= seg_start + lengths[seg] {
            seg_start += lengths[seg];
            seg += 1;
        }
        let (a, b) = (pts[seg], pts[seg + 1]);
        let u = if lengths[seg] > 0.0 { (s - seg_start) / lengths[seg] } else { 0.0 };
        let x = a[0] + (b[0] - a[0]) * u;
        let y = a[1] + (b[1] - a[1]) * u;
        let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
        out.push(TimedPose {
            time,
            pose: Pose::from_euler(0.0, 0.0, yaw, Vec3::new(x, y, altitude)),
        });
    }
    Ok(out)
}
