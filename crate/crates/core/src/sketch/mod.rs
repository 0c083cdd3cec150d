//! Vector sketch data model: points, strokes, labels, JSON I/O and
//! rasterization.

mod category;
mod io;
mod raster;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use category::{
    pair_category, remap_label, CategoryId, CategoryRow, CategoryScheme, Remapped, SourceLabel, NUM_CATEGORIES,
    NUM_SOURCE_LABELS,
};
pub use raster::{rasterize, SemanticRaster};

pub const MAX_SEGMENT_POINTS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("unknown category id {0} (valid ids are 0-21)")]
    UnknownCategory(i64),
    #[error("unknown source label {0} (valid ids are 0-18)")]
    UnknownSourceLabel(u8),
    #[error("stroke has no points")]
    EmptyStroke,
    #[error("canvas must be positive, got {0}x{1}")]
    InvalidCanvas(u32, u32),
    #[error("stroke {stroke} point {point}: ({x}, {y}) lies outside the {width}x{height} canvas")]
    OutsideCanvas {
        stroke: usize,
        point: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("parse error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{field}: {msg}")]
    Field { field: String, msg: String },
}

/// Continuous pixel position, origin top-left, y pointing down.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
    pub parent_id: u64,
    pub label: Option<CategoryId>,
}

impl Stroke {
    pub fn new(points: Vec<Point>, parent_id: u64, label: Option<CategoryId>) -> Self {
        Self {
            points,
            parent_id,
            label,
        }
    }

    pub fn from_xy(xy: &[(f64, f64)], parent_id: u64, label: Option<CategoryId>) -> Self {
        Self::new(xy.iter().map(|&(x, y)| Point::new(x, y)).collect(), parent_id, label)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy chunking in drawing order into pieces of at most `max_points`.
pub fn split_stroke(stroke: &Stroke, max_points: usize) -> Vec<Stroke> {
    assert!(max_points >= 2, "max_points must be at least 2");
    stroke
        .points
        .chunks(max_points)
        .map(|c| Stroke::new(c.to_vec(), stroke.parent_id, stroke.label))
        .collect()
}

pub fn centroid(stroke: &Stroke) -> Result<Point, SketchError> {
    if stroke.points.is_empty() {
        return Err(SketchError::EmptyStroke);
    }
    let n = stroke.points.len() as f64;
    let (sx, sy) = stroke.points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Point::new(sx / n, sy / n))
}

pub fn reverse(stroke: &Stroke) -> Stroke {
    let mut s = stroke.clone();
    s.points.reverse();
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorSketch {
    pub width: u32,
    pub height: u32,
    pub strokes: Vec<Stroke>,
}

impl VectorSketch {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            strokes: Vec::new(),
        }
    }

    pub fn with_strokes(width: u32, height: u32, strokes: Vec<Stroke>) -> Self {
        Self { width, height, strokes }
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn num_points(&self) -> usize {
        self.strokes.iter().map(Stroke::len).sum()
    }

    /// Checks canvas size, stroke non-emptiness and that every point lies
    /// on the canvas.
    pub fn validate(&self) -> Result<(), SketchError> {
        if self.width == 0 || self.height == 0 {
            return Err(SketchError::InvalidCanvas(self.width, self.height));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (si, s) in self.strokes.iter().enumerate() {
            if s.points.is_empty() {
                return Err(SketchError::Field {
                    field: format!("strokes[{si}].points"),
                    msg: "stroke has no points".into(),
                });
            }
            for (pi, p) in s.points.iter().enumerate() {
                if !(p.is_finite() && p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h) {
                    return Err(SketchError::OutsideCanvas {
                        stroke: si,
                        point: pi,
                        x: p.x,
                        y: p.y,
                        width: self.width,
                        height: self.height,
                    });
                }
            }
        }
        Ok(())
    }

    /// Splits every stroke into segments of at most `max_points`.
    pub fn segmented(&self, max_points: usize) -> VectorSketch {
        let strokes = self.strokes.iter().flat_map(|s| split_stroke(s, max_points)).collect();
        Self::with_strokes(self.width, self.height, strokes)
    }

    pub fn labels(&self) -> Vec<Option<CategoryId>> {
        self.strokes.iter().map(|s| s.label).collect()
    }

    pub fn all_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.strokes.iter().flat_map(|s| s.points.iter().copied())
    }
}
