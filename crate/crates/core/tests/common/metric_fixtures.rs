use std::path::{Path, PathBuf};

use serde_json::Value;
use sketchsem::harness::{chamfer, p_acc, stroke_accuracy};
use sketchsem::pipeline::SegMap;
use sketchsem::sketch::{CategoryId, Point, VectorSketch};

// Resolves from any workspace crate that includes these helpers.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/metrics")
}

fn ids(v: &Value) -> Vec<u8> {
    v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as u8).collect()
}

fn points(v: &Value) -> Vec<Point> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|p| Point::new(p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect()
}

/// Evaluates one pinned fixture; returns `(name, computed, expected)` pairs.
pub fn evaluate(path: &Path) -> Vec<(String, f64, f64)> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut out = Vec::new();
    match doc["kind"].as_str().unwrap() {
        "p_acc" => {
            let (w, h) = (doc["width"].as_u64().unwrap() as usize, doc["height"].as_u64().unwrap() as usize);
            let gt = SegMap::from_ids(w, h, &ids(&doc["gt"])).unwrap();
            let pred = SegMap::from_ids(w, h, &ids(&doc["pred"])).unwrap();
            let region: Vec<bool> = doc["region"].as_array().unwrap().iter().map(|b| b.as_bool().unwrap()).collect();
            out.push(("p_acc".into(), p_acc(&pred, &gt, None).unwrap(), doc["expected"].as_f64().unwrap()));
            out.push((
                "p_acc in region".into(),
                p_acc(&pred, &gt, Some(&region)).unwrap(),
                doc["expected_in_region"].as_f64().unwrap(),
            ));
        }
        "chamfer" => {
            let (a, b) = (points(&doc["a"]), points(&doc["b"]));
            let width = doc["width"].as_f64().unwrap();
            out.push(("chamfer".into(), chamfer(&a, &b, width).unwrap(), doc["expected"].as_f64().unwrap()));
        }
        "stroke_accuracy" => {
            let sketch = VectorSketch::from_json_value(doc["sketch"].clone()).unwrap();
            let pred: Vec<Option<CategoryId>> = ids(&doc["pred"]).into_iter().map(|i| Some(CategoryId::new(i).unwrap())).collect();
            let report = stroke_accuracy(&[sketch], &[pred]).unwrap();
            out.push(("stroke accuracy".into(), report.stroke_accuracy.unwrap(), doc["expected"].as_f64().unwrap()));
            for (name, v) in doc["expected_per_category"].as_object().unwrap() {
                let row = report.per_category.iter().find(|c| &c.name == name).unwrap();
                out.push((format!("accuracy of {name}"), row.accuracy.unwrap(), v.as_f64().unwrap()));
            }
        }
        other => panic!("unknown fixture kind {other}"),
    }
    out
}

/// Largest deviation over every pinned fixture.
pub fn worst_fixture_error() -> f64 {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    assert_eq!(paths.len(), 3, "expected three pinned metric fixtures");
    paths
        .iter()
        .flat_map(|p| evaluate(p))
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max)
}
