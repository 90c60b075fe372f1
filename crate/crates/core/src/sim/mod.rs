//! Synthetic scenes and sensors standing in for recorded survey data.

pub mod dvl;
pub mod scene;
pub mod sonar;
pub mod trajectory;

pub use dvl::{simulate_dvl, DvlConfig};
pub use scene::{BoxSpec, Extent, GaussianBump, Scene, SceneSpec, TerrainSpec};
pub use sonar::{simulate_sonar, SonarConfig, SonarImage};
pub use trajectory::{generate_trajectory, TimedPose, TrajectorySpec};
