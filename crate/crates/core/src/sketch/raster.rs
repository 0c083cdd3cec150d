use super::{CategoryId, Stroke, VectorSketch};

/// Pixel grid with a binary occupancy channel and an optional category per
/// occupied pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SemanticRaster {
    width: usize,
    height: usize,
    occupied: Vec<bool>,
    labels: Vec<Option<CategoryId>>,
}

impl SemanticRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            occupied: vec![false; width * height],
            labels: vec![None; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.occupied[self.idx(x, y)]
    }

    /// Bounds-checked occupancy; outside the grid counts as empty.
    pub fn is_set_i(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.is_set(x as usize, y as usize)
    }

    pub fn label(&self, x: usize, y: usize) -> Option<CategoryId> {
        self.labels[self.idx(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Option<CategoryId>) {
        let i = self.idx(x, y);
        self.occupied[i] = true;
        self.labels[i] = label;
    }

    pub fn clear(&mut self, x: usize, y: usize) {
        let i = self.idx(x, y);
        self.occupied[i] = false;
        self.labels[i] = None;
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.occupied.iter().any(|&o| o)
    }

    /// Occupied pixels in scan order (row-major).
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize, Option<CategoryId>)> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(i, _)| (i % self.width, i / self.width, self.labels[i]))
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn labels(&self) -> &[Option<CategoryId>] {
        &self.labels
    }

    /// First fully occupied 2x2 block, by its top-left corner.
    pub fn find_2x2_block(&self) -> Option<(usize, usize)> {
        for y in 0..self.height.saturating_sub(1) {
            for x in 0..self.width.saturating_sub(1) {
                if self.is_set(x, y) && self.is_set(x + 1, y) && self.is_set(x, y + 1) && self.is_set(x + 1, y + 1) {
                    return Some((x, y));
                }
            }
        }
        None
    }

    pub fn is_thin(&self) -> bool {
        self.find_2x2_block().is_none()
    }
}

/// Maps a canvas coordinate onto a grid cell, clamping the far edge.
fn to_cell(v: f64, canvas: u32, size: usize) -> i64 {
    let c = (v * size as f64 / canvas as f64).floor() as i64;
    c.clamp(0, size as i64 - 1)
}

fn draw_line(r: &mut SemanticRaster, (x0, y0): (i64, i64), (x1, y1): (i64, i64), label: Option<CategoryId>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        r.set(x as usize, y as usize, label);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn draw_stroke(r: &mut SemanticRaster, s: &Stroke, canvas: (u32, u32)) {
    let (w, h) = r.dims();
    let cells: Vec<(i64, i64)> = s
        .points
        .iter()
        .map(|p| (to_cell(p.x, canvas.0, w), to_cell(p.y, canvas.1, h)))
        .collect();
    match cells.as_slice() {
        [] => {}
        [c] => draw_line(r, *c, *c, s.label),
        _ => {
            for pair in cells.windows(2) {
                draw_line(r, pair[0], pair[1], s.label);
            }
        }
    }
}

/// Draws every stroke as 1-px Bresenham polylines scaled onto a `w x h` grid.
/// Strokes drawn later overwrite the label of shared pixels.
pub fn rasterize(sketch: &VectorSketch, (w, h): (usize, usize)) -> SemanticRaster {
    assert!(w > 0 && h > 0, "raster size must be positive");
    assert!(sketch.width > 0 && sketch.height > 0, "canvas must be positive");
    let mut r = SemanticRaster::new(w, h);
    for s in &sketch.strokes {
        draw_stroke(&mut r, s, (sketch.width, sketch.height));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::Stroke;

    #[test]
    fn horizontal_line_sets_four_pixels() {
        let s = VectorSketch::with_strokes(4, 1, vec![Stroke::from_xy(&[(0.0, 0.0), (3.0, 0.0)], 0, None)]);
        let r = rasterize(&s, (4, 1));
        assert_eq!(r.count(), 4);
        assert!(r.pixels().all(|(_, _, l)| l.is_none()));
    }

    #[test]
    fn empty_sketch_gives_blank_raster() {
        assert!(rasterize(&VectorSketch::new(8, 8), (8, 8)).is_blank());
    }

    #[test]
    fn later_stroke_wins_overlap() {
        let a = Stroke::from_xy(&[(0.0, 2.0), (4.0, 2.0)], 0, Some(CategoryId::HAIR));
        let b = Stroke::from_xy(&[(2.0, 0.0), (2.0, 4.0)], 1, Some(CategoryId::HAT));
        let r = rasterize(&VectorSketch::with_strokes(5, 5, vec![a.clone(), b.clone()]), (5, 5));
        assert_eq!(r.label(2, 2), Some(CategoryId::HAT));
        let r = rasterize(&VectorSketch::with_strokes(5, 5, vec![b, a]), (5, 5));
        assert_eq!(r.label(2, 2), Some(CategoryId::HAIR));
    }

    #[test]
    fn deterministic_and_scaled() {
        let s = VectorSketch::with_strokes(
            64,
            64,
            vec![Stroke::from_xy(&[(0.0, 0.0), (63.0, 31.0), (10.0, 60.0)], 0, Some(CategoryId::NOSE))],
        );
        assert_eq!(rasterize(&s, (32, 32)), rasterize(&s, (32, 32)));
        let r = rasterize(&s, (16, 16));
        assert!(r.is_set(0, 0) && r.is_set(15, 7) && r.is_set(2, 15));
    }
}
