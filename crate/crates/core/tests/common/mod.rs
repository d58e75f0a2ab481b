#![allow(dead_code)]

use chunkgen_core::guide::GuideSpec;
use chunkgen_core::schedule::{LinearScheduleParams, NoiseSchedule};
use chunkgen_core::world::{ArtifactPattern, MotionMode, ToyDenoiser, WorldSpec};
use chunkgen_core::{Frame, FrameShape};

pub struct Setup {
    pub world: WorldSpec,
    pub schedule: NoiseSchedule,
    pub denoiser: ToyDenoiser,
    pub guide: Frame,
}

pub fn setup(world: WorldSpec) -> Setup {
    let schedule = LinearScheduleParams::default().build().unwrap();
    let denoiser = ToyDenoiser::new(world.clone(), schedule.clone()).unwrap();
    let guide = GuideSpec::default().render(world.frame_shape).unwrap();
    Setup {
        world,
        schedule,
        denoiser,
        guide,
    }
}

pub fn default_setup() -> Setup {
    setup(WorldSpec::default())
}

/// A 4x4x1, 3-frame world small enough for full finite-difference checks.
pub fn tiny_world() -> WorldSpec {
    WorldSpec {
        modes: vec![
            MotionMode::clean(0, 1, 0.5),
            MotionMode::clean(1, 0, 0.3),
            MotionMode::artifact(0, 1, 0.4, 0.2),
        ],
        sigma_data: 0.05,
        chunk_len: 3,
        frame_shape: FrameShape::new(4, 4, 1).unwrap(),
        artifact_pattern: ArtifactPattern::CheckerboardRamp,
    }
}

/// One clean mode only.
pub fn single_mode_world() -> WorldSpec {
    WorldSpec {
        modes: vec![MotionMode::clean(0, 1, 1.0)],
        ..WorldSpec::default()
    }
}
