//! Shared setup for the pipeline benchmarks.

use retarget_core::fixtures::{make_fixture, FixtureSpec};
use retarget_core::net::RetargetModel;
use retarget_core::training::{initial_model, DatasetView, TrainConfig};

/// Default-config model and dataset over a small synthetic fixture.
pub fn small_setup() -> (TrainConfig, DatasetView, RetargetModel) {
    let fx = make_fixture(&FixtureSpec {
        motions: 4,
        frames: 128,
        ..FixtureSpec::default()
    })
    .expect("valid spec");
    let config = TrainConfig::default();
    let view = DatasetView::new(
        &config,
        &fx.human.rig(),
        &fx.human.clips,
        &fx.robot.rig(),
        &fx.robot.clips,
    )
    .expect("fixture windows");
    let model = initial_model(&config, &view).expect("model");
    (config, view, model)
}
