use std::collections::VecDeque;

use super::{EdgeMap, PipelineError, SegMap};
use crate::sketch::{pair_category, CategoryId, SemanticRaster};

use super::thin::thin;

const NEIGHBORS4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    NEIGHBORS4.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then_some((nx as usize, ny as usize))
    })
}

/// Boundary pixels of the remapped regions. Background is never drawn but
/// still bounds its neighbors. A boundary between one of the six pair
/// combinations takes the pair-category; other boundaries take the non-skin
/// side's category.
pub fn extract_contour(seg: &SegMap) -> SemanticRaster {
    let (w, h) = (seg.width(), seg.height());
    let mut out = SemanticRaster::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let Some(own) = seg.get(x, y).remap() else {
                continue;
            };
            let mut pair = None;
            let mut part = None;
            let mut boundary = false;
            for (nx, ny) in neighbors4(x, y, w, h) {
                let other = seg.get(nx, ny).remap();
                if other == Some(own) {
                    continue;
                }
                boundary = true;
                if let Some(o) = other {
                    if pair.is_none() {
                        pair = pair_category(own, o);
                    }
                    if part.is_none() && o != CategoryId::SKIN {
                        part = Some(o);
                    }
                }
            }
            if !boundary {
                continue;
            }
            let label = match (pair, own) {
                (Some(p), _) => p,
                (None, CategoryId::SKIN) => part.unwrap_or(CategoryId::SKIN),
                (None, own) => own,
            };
            out.set(x, y, Some(label));
        }
    }
    out
}

/// Dilation radius for a canvas width: 2 px at 512, never below 1.
pub fn dilation_radius(width: usize) -> usize {
    ((2.0 * width as f64 / 512.0).round() as usize).max(1)
}

/// Nearest contour label within Chebyshev radius `r` of every pixel, found by
/// a multi-source BFS seeded in scan order so ties resolve deterministically.
fn dilate(contour: &SemanticRaster, r: usize) -> Vec<Option<Option<CategoryId>>> {
    let (w, h) = contour.dims();
    let mut near: Vec<Option<Option<CategoryId>>> = vec![None; w * h];
    let mut dist = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for (x, y, l) in contour.pixels() {
        near[y * w + x] = Some(l);
        dist[y * w + x] = 0;
        queue.push_back((x, y));
    }
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[y * w + x];
        if d == r {
            continue;
        }
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if dist[j] == usize::MAX {
                    dist[j] = d + 1;
                    near[j] = near[y * w + x];
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
    }
    near
}

/// Unions the contour with the edge map, relabels edge pixels that fall inside
/// the dilated contour with the contour's label, and thins the result.
pub fn merge_maps(contour: &SemanticRaster, edges: &EdgeMap) -> Result<SemanticRaster, PipelineError> {
    let (w, h) = contour.dims();
    if (edges.width(), edges.height()) != (w, h) {
        return Err(PipelineError::DimensionMismatch(w, h, edges.width(), edges.height()));
    }
    let near = dilate(contour, dilation_radius(w));
    let mut merged = contour.clone();
    for y in 0..h {
        for x in 0..w {
            if !edges.is_edge(x, y) || contour.is_set(x, y) {
                continue;
            }
            let label = near[y * w + x].unwrap_or_else(|| edges.label(x, y));
            merged.set(x, y, label);
        }
    }
    Ok(thin(&merged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SourceLabel;

    fn halves(w: usize, h: usize, left: SourceLabel, right: SourceLabel) -> SegMap {
        let mut seg = SegMap::filled(w, h, left);
        for y in 0..h {
            for x in w / 2..w {
                seg.set(x, y, right);
            }
        }
        seg
    }

    #[test]
    fn skin_hair_boundary_columns() {
        let c = extract_contour(&halves(4, 4, SourceLabel::Skin, SourceLabel::Hair));
        assert_eq!(c.count(), 8);
        for y in 0..4 {
            assert_eq!(c.label(1, y), Some(CategoryId::SKIN_HAIR));
            assert_eq!(c.label(2, y), Some(CategoryId::SKIN_HAIR));
        }
    }

    #[test]
    fn uniform_map_has_no_contour() {
        assert!(extract_contour(&SegMap::filled(5, 5, SourceLabel::Skin)).is_blank());
    }

    #[test]
    fn skin_nose_boundary_is_nose() {
        let c = extract_contour(&halves(4, 3, SourceLabel::Skin, SourceLabel::Nose));
        assert!(c.pixels().all(|(_, _, l)| l == Some(CategoryId::NOSE)));
        assert_eq!(c.count(), 6);
    }

    #[test]
    fn lips_merge_without_boundary() {
        let c = extract_contour(&halves(4, 3, SourceLabel::ULip, SourceLabel::LLip));
        assert!(c.is_blank());
    }

    #[test]
    fn background_side_is_not_drawn() {
        let c = extract_contour(&halves(4, 3, SourceLabel::Background, SourceLabel::Skin));
        assert_eq!(c.count(), 3);
        assert!(c.pixels().all(|(x, _, l)| x == 2 && l == Some(CategoryId::SKIN)));
    }

    #[test]
    fn radius_scales_with_canvas() {
        assert_eq!(dilation_radius(512), 2);
        assert_eq!(dilation_radius(1024), 4);
        assert_eq!(dilation_radius(64), 1);
    }

    #[test]
    fn merge_with_empty_edges_is_thinned_contour() {
        let contour = extract_contour(&halves(8, 6, SourceLabel::Skin, SourceLabel::Hair));
        let merged = merge_maps(&contour, &EdgeMap::new(8, 6)).unwrap();
        assert_eq!(merged, thin(&contour));
    }

    #[test]
    fn merge_with_empty_contour_is_thinned_edges() {
        let mut edges = EdgeMap::new(6, 6);
        let mut expect = SemanticRaster::new(6, 6);
        for y in 1..5 {
            edges.set(3, y, Some(CategoryId::NOSE));
            expect.set(3, y, Some(CategoryId::NOSE));
        }
        let merged = merge_maps(&SemanticRaster::new(6, 6), &edges).unwrap();
        assert_eq!(merged, thin(&expect));
    }

    #[test]
    fn edge_near_pair_contour_takes_pair_label() {
        let mut contour = SemanticRaster::new(8, 8);
        for y in 0..8 {
            contour.set(3, y, Some(CategoryId::SKIN_HAIR));
        }
        let mut edges = EdgeMap::new(8, 8);
        edges.set(4, 4, Some(CategoryId::HAIR));
        edges.set(7, 4, Some(CategoryId::HAIR));
        let merged = merge_maps(&contour, &edges).unwrap();
        assert_eq!(merged.label(7, 4), Some(CategoryId::HAIR));
        assert!(merged.pixels().filter(|&(x, _, _)| x == 3 || x == 4).all(|(_, _, l)| l == Some(CategoryId::SKIN_HAIR)));
    }

    #[test]
    fn merge_rejects_dimension_mismatch() {
        assert!(matches!(
            merge_maps(&SemanticRaster::new(4, 4), &EdgeMap::new(5, 4)),
            Err(PipelineError::DimensionMismatch(..))
        ));
    }
}
