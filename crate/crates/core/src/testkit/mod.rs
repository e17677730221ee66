//! Test support: synthetic documents, fixture assets and a scripted model
//! backend.

pub mod pdf;
pub mod scripted;

use std::path::PathBuf;
use std::sync::Arc;

use crate::harness::raster::RasterEngine;
use crate::harness::{Action, InteractionTrajectory, RenderOptions, Renderer, Scaffold, Screenshot, TrajectoryStep};

/// The crate's `assets/` directory.
pub fn assets_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets")
}

pub fn fixture_html(name: &str) -> String {
    std::fs::read_to_string(assets_dir().join("fixtures").join(name)).expect("fixture exists")
}

/// The prebuilt static-site scaffold.
pub fn static_scaffold() -> Scaffold {
    Scaffold::load(assets_dir().join("scaffold-static")).expect("static scaffold loads")
}

/// A raster renderer with no settle delay.
pub fn raster_renderer() -> Renderer {
    let options = RenderOptions { settle_ms: 0, ..RenderOptions::default() };
    Renderer::new(Arc::new(RasterEngine::new()), options, 2)
}

/// `n` click steps on 4x3 frames labelled `f0..`, each with the given diff.
pub fn fake_trajectory(n: usize, diff: f64) -> InteractionTrajectory {
    let shot = |i: usize| {
        let img = image::RgbImage::from_pixel(4, 3, image::Rgb([i as u8, 0, 0]));
        Screenshot::from_rgb(&img, format!("f{i}"))
    };
    InteractionTrajectory {
        steps: (0..n)
            .map(|i| TrajectoryStep {
                action: Action::click("#x"),
                target: None,
                resolved: true,
                pre: shot(100 + i),
                post: shot(i),
                diff,
            })
            .collect(),
    }
}
