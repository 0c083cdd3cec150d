use serde::{Deserialize, Serialize};

use super::{CategoryId, Point, SketchError, Stroke, VectorSketch};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SketchDoc {
    canvas: [u32; 2],
    strokes: Vec<StrokeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrokeDoc {
    parent: u64,
    label: Option<i64>,
    points: Vec<[f64; 2]>,
}

impl From<serde_json::Error> for SketchError {
    fn from(e: serde_json::Error) -> Self {
        SketchError::Syntax {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}

impl VectorSketch {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("sketch serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("sketch serializes")
    }

    fn to_doc(&self) -> SketchDoc {
        SketchDoc {
            canvas: [self.width, self.height],
            strokes: self
                .strokes
                .iter()
                .map(|s| StrokeDoc {
                    parent: s.parent_id,
                    label: s.label.map(|c| c.raw() as i64),
                    points: s.points.iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        }
    }

    /// Parses and validates the sketch file format.
    pub fn from_json(text: &str) -> Result<Self, SketchError> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, SketchError> {
        let doc: SketchDoc = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            SketchError::Field {
                field: if path == "." { "sketch".into() } else { path },
                msg: e.into_inner().to_string(),
            }
        })?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: SketchDoc) -> Result<Self, SketchError> {
        let mut strokes = Vec::with_capacity(doc.strokes.len());
        for s in doc.strokes {
            let label = match s.label {
                None => None,
                Some(id) if (0..=u8::MAX as i64).contains(&id) => Some(CategoryId::new(id as u8)?),
                Some(id) => return Err(SketchError::UnknownCategory(id)),
            };
            let points = s.points.iter().map(|&[x, y]| Point::new(x, y)).collect();
            strokes.push(Stroke::new(points, s.parent, label));
        }
        let sketch = VectorSketch::with_strokes(doc.canvas[0], doc.canvas[1], strokes);
        sketch.validate()?;
        Ok(sketch)
    }
}
