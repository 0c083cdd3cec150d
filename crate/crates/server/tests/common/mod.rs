#![allow(dead_code)]

use std::net::SocketAddr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchsem::embed::{EmbedConfig, TrunkWidths};
use sketchsem::sketch::{Stroke, VectorSketch};
use sketchsem::ssi::SsiConfig;
use sketchsem::{EmbedModel, SsiModel};
use sketchsem_server::AppState;

pub fn small_embed_config() -> EmbedConfig {
    EmbedConfig {
        resolution: 16,
        latent: 16,
        generator_channels: 8,
        encoder_widths: TrunkWidths { base: 4, max: 8 },
        avg_samples: 8,
        avg_seed: 1,
    }
}

/// Untrained models with the default classifier architecture.
pub fn test_state() -> AppState {
    AppState::new(
        SsiModel::new(SsiConfig::default(), 1),
        EmbedModel::new(small_embed_config(), 2),
        7,
    )
}

pub async fn start(state: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    sketchsem_server::spawn(state, listener).await.unwrap().0
}

/// `n` random-walk strokes of 8 to 40 points on a 512 canvas.
pub fn random_sketch(n: usize, seed: u64) -> VectorSketch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strokes = (0..n)
        .map(|i| {
            let (mut x, mut y) = (rng.random_range(40.0..470.0), rng.random_range(40.0..470.0));
            let len = rng.random_range(8..=40);
            let pts: Vec<(f64, f64)> = (0..len)
                .map(|_| {
                    x = (x + rng.random_range(-4.0..4.0_f64)).clamp(0.0, 511.0);
                    y = (y + rng.random_range(-4.0..4.0_f64)).clamp(0.0, 511.0);
                    (x, y)
                })
                .collect();
            Stroke::from_xy(&pts, i as u64, None)
        })
        .collect();
    VectorSketch::with_strokes(512, 512, strokes)
}
