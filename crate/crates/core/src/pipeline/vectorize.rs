use std::collections::{BTreeMap, HashMap};

use crate::sketch::{CategoryId, Point, SemanticRaster, Stroke, VectorSketch, MAX_SEGMENT_POINTS};

/// Step order while tracing: 4-neighbors first, then diagonals.
const STEPS: [(isize, isize); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

struct Tracer<'a> {
    raster: &'a SemanticRaster,
    visited: Vec<bool>,
}

impl Tracer<'_> {
    fn same(&self, x: isize, y: isize, label: Option<CategoryId>) -> Option<usize> {
        let (w, h) = self.raster.dims();
        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
            return None;
        }
        let (ux, uy) = (x as usize, y as usize);
        (self.raster.is_set(ux, uy) && self.raster.label(ux, uy) == label).then_some(uy * w + ux)
    }

    fn unvisited_steps(&self, i: usize, label: Option<CategoryId>) -> impl Iterator<Item = usize> + '_ {
        let w = self.raster.width();
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        STEPS
            .iter()
            .filter_map(move |&(dx, dy)| self.same(x + dx, y + dy, label))
            .filter(|&j| !self.visited[j])
    }

    fn trace(&mut self, start: usize, label: Option<CategoryId>) -> Vec<usize> {
        let mut chain = vec![start];
        self.visited[start] = true;
        let mut cur = start;
        loop {
            let Some(next) = self.unvisited_steps(cur, label).next() else {
                break;
            };
            self.visited[next] = true;
            chain.push(next);
            cur = next;
        }
        chain
    }
}

/// Traces each category's pixels into 8-connected chains, starting from chain
/// endpoints in scan order before falling back to the first unvisited pixel
/// (closed loops). Every occupied pixel lands in exactly one stroke, and each
/// chain is split into segments of at most 50 points sharing a parent id.
/// Categories are emitted in id order, unlabeled pixels last.
pub fn vectorize(raster: &SemanticRaster) -> VectorSketch {
    let (w, h) = raster.dims();
    let mut groups: BTreeMap<(bool, u8), Vec<usize>> = BTreeMap::new();
    for (x, y, l) in raster.pixels() {
        let key = l.map_or((true, 0), |c| (false, c.raw()));
        groups.entry(key).or_default().push(y * w + x);
    }
    let mut tracer = Tracer {
        raster,
        visited: vec![false; w * h],
    };
    let mut sketch = VectorSketch::new(w as u32, h as u32);
    let mut parent = 0u64;
    for (key, pixels) in groups {
        let label = (!key.0).then(|| CategoryId::new(key.1).expect("raster labels are valid"));
        let mut cursor = 0;
        loop {
            let endpoint = pixels
                .iter()
                .copied()
                .find(|&i| !tracer.visited[i] && tracer.unvisited_steps(i, label).take(2).count() <= 1);
            let start = match endpoint {
                Some(i) => i,
                None => {
                    while cursor < pixels.len() && tracer.visited[pixels[cursor]] {
                        cursor += 1;
                    }
                    match pixels.get(cursor) {
                        Some(&i) => i,
                        None => break,
                    }
                }
            };
            let chain = tracer.trace(start, label);
            let points = chain
                .iter()
                .map(|&i| Point::new((i % w) as f64, (i / w) as f64))
                .collect();
            let stroke = Stroke::new(points, parent, label);
            sketch.strokes.extend(crate::sketch::split_stroke(&stroke, MAX_SEGMENT_POINTS));
            parent += 1;
        }
    }
    sketch
}

/// Keeps, per category, the `top_k` longest parent strokes (with all of their
/// segments). Length is the parent's total point count; ties keep the parent
/// that appears first. Stroke order is preserved.
pub fn simplify(sketch: &VectorSketch, top_k: usize) -> VectorSketch {
    let mut length: HashMap<(Option<CategoryId>, u64), usize> = HashMap::new();
    let mut order: Vec<(Option<CategoryId>, u64)> = Vec::new();
    for s in &sketch.strokes {
        let key = (s.label, s.parent_id);
        let e = length.entry(key).or_insert_with(|| {
            order.push(key);
            0
        });
        *e += s.len();
    }
    let mut by_label: HashMap<Option<CategoryId>, Vec<(usize, usize, u64)>> = HashMap::new();
    for (rank, key) in order.iter().enumerate() {
        by_label.entry(key.0).or_default().push((length[key], rank, key.1));
    }
    let mut keep = std::collections::HashSet::new();
    for (label, mut parents) in by_label {
        parents.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, _, p) in parents.iter().take(top_k) {
            keep.insert((label, p));
        }
    }
    let strokes = sketch
        .strokes
        .iter()
        .filter(|s| keep.contains(&(s.label, s.parent_id)))
        .cloned()
        .collect();
    VectorSketch::with_strokes(sketch.width, sketch.height, strokes)
}
