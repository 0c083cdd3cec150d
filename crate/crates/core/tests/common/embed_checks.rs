use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sketchsem::scalar::Scalar;
use sketchsem::autodiff::{grad_check, AutodiffError, GradCheckConfig, ParamStore, Tensor};
use sketchsem::embed::{
    fuse_codes, loss_terms, loss_total, EmbedConfig, EmbedModel, FrozenNets, LossWeights, SegModel, StyleCodes,
    TrunkWidths, APPEARANCE_SITES, SKETCH_CHANNELS, SKETCH_SITES, STYLE_SITES,
};

/// Small model for gradient checks and code-level properties.
pub fn tiny_config(resolution: usize) -> EmbedConfig {
    EmbedConfig {
        resolution,
        latent: 6,
        generator_channels: 4,
        encoder_widths: TrunkWidths { base: 2, max: 4 },
        avg_samples: 4,
        avg_seed: 3,
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::uniform(rows, cols, lo, hi, rng)
}

/// Worst relative error of the full weighted objective through encoders,
/// fusion and the toy generator, over all trainable weights.
pub fn full_loss_gradcheck(seed: u64) -> f64 {
    let res = 8;
    let batch = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = EmbedModel::<f64>::new(tiny_config(res), seed);
    let frozen = FrozenNets::new(SegModel::<f64>::new(res, seed + 1), seed + 2);
    let rasters = random_tensor(&mut rng, batch * res * res, SKETCH_CHANNELS, 0.0, 1.0);
    let faces = random_tensor(&mut rng, batch * res * res, 3, 0.0, 1.0);
    let mut store = std::mem::replace(&mut model.store, ParamStore::new());
    let weights = LossWeights::default();
    let report = grad_check(
        &mut store,
        GradCheckConfig {
            max_coords: 1500,
            // small step so no leaky-relu kink falls inside the difference
            step: 1e-6,
            seed,
            ..GradCheckConfig::default()
        },
        |tape, st| -> Result<_, AutodiffError> {
            let r = tape.constant(rasters.clone());
            let f = tape.constant(faces.clone());
            let (xhat, w, avg) = model.forward_batch_with(st, tape, r, f, batch)?;
            let terms = loss_terms(tape, &frozen, f, xhat, w, avg, batch)?;
            loss_total(tape, &terms, &weights)
        },
    )
    .expect("shapes are consistent");
    report.max_rel_error
}

#[derive(Debug, Default)]
pub struct SplitReport {
    pub pairs: usize,
    /// Pairs whose structure rows changed when only appearance changed.
    pub structure_rows_changed: usize,
    /// Pairs whose appearance rows changed when only structure changed.
    pub appearance_rows_changed: usize,
    /// Smallest max-abs image difference under a structure perturbation.
    pub min_image_change: f64,
}

impl SplitReport {
    pub fn holds(&self) -> bool {
        self.structure_rows_changed == 0 && self.appearance_rows_changed == 0 && self.min_image_change > 0.0
    }
}

/// Random code pairs through fusion and generation: appearance edits must
/// leave fused rows 0..8 bit-identical, structure edits must leave rows
/// 8..18 bit-identical and must change the image.
pub fn semantic_split<T: Scalar>(model: &EmbedModel<T>, pairs: usize, seed: u64) -> SplitReport {
    let d = model.latent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SplitReport {
        pairs,
        min_image_change: f64::INFINITY,
        ..SplitReport::default()
    };
    let bits = |t: &Tensor<T>, r: usize| -> Vec<u64> { t.row(r).iter().map(|v| v.as_f64().to_bits()).collect() };
    let cast = |t: Tensor<f64>| Tensor::<T>::from_f64(t.rows(), t.cols(), t.data());
    for _ in 0..pairs {
        let shared = cast(random_tensor(&mut rng, 1, d, -0.5, 0.5));
        let structure = cast(random_tensor(&mut rng, SKETCH_SITES, d, -0.5, 0.5));
        let appearance = cast(random_tensor(&mut rng, APPEARANCE_SITES, d, -0.5, 0.5));
        let codes = StyleCodes::from_tensors(&shared, &structure, &appearance).unwrap();
        let base = fuse_codes(&codes, model.avg()).unwrap();

        let other_app = cast(random_tensor(&mut rng, APPEARANCE_SITES, d, -0.5, 0.5));
        let w_app = fuse_codes(&codes.with_appearance(&other_app).unwrap(), model.avg()).unwrap();
        if (0..SKETCH_SITES).any(|r| bits(&base, r) != bits(&w_app, r)) {
            report.structure_rows_changed += 1;
        }

        let other_struct = cast(random_tensor(&mut rng, SKETCH_SITES, d, -0.5, 0.5));
        let moved = StyleCodes::from_tensors(&shared, &other_struct, &appearance).unwrap();
        let w_struct = fuse_codes(&moved, model.avg()).unwrap();
        if (SKETCH_SITES..STYLE_SITES).any(|r| bits(&base, r) != bits(&w_struct, r)) {
            report.appearance_rows_changed += 1;
        }
        let a = model.generate(&base).unwrap();
        let b = model.generate(&w_struct).unwrap();
        report.min_image_change = report.min_image_change.min(a.max_abs_diff(&b));
    }
    report
}
