use sketchsem::harness::{gen_toy_dataset, ToyConfig, ToyItem};
use sketchsem::pipeline::{extract_contour, extract_edges, merge_maps, vectorize, EdgeParams};
use sketchsem::sketch::{pair_category, rasterize, CategoryId, SemanticRaster};

pub fn toy_items(count: usize, seed: u64) -> Vec<ToyItem> {
    let ds = gen_toy_dataset(&ToyConfig {
        count,
        seed,
        ..ToyConfig::default()
    });
    ds.train.into_iter().chain(ds.test).collect()
}

/// Thinned merged raster of a toy face, before vectorization.
pub fn thinned_raster(item: &ToyItem) -> SemanticRaster {
    let contour = extract_contour(&item.seg);
    let mut edges = extract_edges(&item.gray(), &EdgeParams::default());
    edges.label_from(&item.seg);
    merge_maps(&contour, &edges).expect("toy maps share one size")
}

/// Number of faces whose vectorized strokes do not redraw the thinned raster
/// exactly (pixels and labels), or whose output is not thin.
pub fn roundtrip_failures(items: &[ToyItem]) -> usize {
    items
        .iter()
        .filter(|item| {
            let thinned = thinned_raster(item);
            let redrawn = rasterize(&vectorize(&thinned), thinned.dims());
            redrawn != thinned || !redrawn.is_thin()
        })
        .count()
}

/// Categories of the face regions with no stroke carrying that category or
/// a boundary category that involves it.
pub fn missing_parts(item: &ToyItem) -> Vec<CategoryId> {
    let labels: Vec<CategoryId> = item.sketch.strokes.iter().filter_map(|s| s.label).collect();
    let mut present: Vec<CategoryId> = item.seg.labels().iter().filter_map(|l| l.remap()).collect();
    present.sort();
    present.dedup();
    present
        .into_iter()
        .filter(|&c| {
            !labels
                .iter()
                .any(|&l| l == c || CategoryId::all().any(|other| pair_category(c, other) == Some(l)))
        })
        .collect()
}
