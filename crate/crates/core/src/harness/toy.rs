//! Procedural toy faces: seeded geometry rendered to a face-parsing map, a
//! shaded color image and the synthesized ground-truth vector sketch.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::pipeline::{synthesize, GrayImage, SegMap, SynthOptions};
use crate::seed::rng_for;
use crate::sketch::{SourceLabel, VectorSketch};

pub const TOY_CANVAS: usize = 64;
const BROW_HALF_HEIGHT: f64 = 1.0;
// Hat crown and brim sit this fraction of the head height above center.
const HAT_LINE: f64 = 0.7;

/// Probability of each accessory appearing on a face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccessoryRates {
    pub hat: f64,
    pub glasses: f64,
    pub earring: f64,
    pub necklace: f64,
}

impl Default for AccessoryRates {
    fn default() -> Self {
        Self {
            hat: 0.05,
            glasses: 0.06,
            earring: 0.25,
            necklace: 0.07,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, rx: f64, ry: f64) -> Self {
        Self { cx, cy, rx, ry }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = ((x - self.cx) / self.rx, (y - self.cy) / self.ry);
        u * u + v * v <= 1.0
    }
}

/// Seeded face parameters; everything else is derived deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyFaceSpec {
    pub head: Ellipse,
    pub hair_extent: f64,
    pub hair_drop: f64,
    pub fringe: f64,
    pub eye_dx: f64,
    pub eye_dy: f64,
    pub eye_size: (f64, f64),
    pub brow_gap: f64,
    pub nose_len: f64,
    pub mouth_dy: f64,
    pub mouth_w: f64,
    pub neck_w: f64,
    pub hat: bool,
    pub glasses: bool,
    pub earring: bool,
    pub necklace: bool,
    pub skin_rgb: [f64; 3],
    pub hair_rgb: [f64; 3],
    pub cloth_rgb: [f64; 3],
    pub hat_rgb: [f64; 3],
    pub background_rgb: [f64; 3],
    pub light: (f64, f64),
}

fn rgb<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> [f64; 3] {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

impl ToyFaceSpec {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, rates: &AccessoryRates) -> Self {
        let c = TOY_CANVAS as f64;
        let (dx, dy) = (rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
        let head = Ellipse::new(
            c / 2.0 + dx,
            c / 2.0 - 2.0 + dy,
            rng.random_range(12.5..15.5),
            rng.random_range(16.0..19.0),
        );
        let s = rng.random_range(0.25..0.45);
        let skin = [0.55 + s, 0.35 + s * 0.9, 0.25 + s * 0.8];
        let eye_size = (rng.random_range(2.2..3.0), rng.random_range(1.2..1.8));
        // Brow ends stay 3 px inside the face outline.
        let eye_dx = rng.random_range(6.5..8.0_f64).min(head.rx - eye_size.0 - 3.8);
        Self {
            head,
            hair_extent: rng.random_range(2.0..5.0),
            hair_drop: rng.random_range(-4.0..10.0),
            fringe: rng.random_range(0.8..0.9),
            eye_dx,
            eye_dy: rng.random_range(-3.0..-1.5),
            eye_size,
            brow_gap: rng.random_range(3.0..4.0),
            nose_len: rng.random_range(2.5..3.2),
            mouth_dy: rng.random_range(10.5..12.0),
            mouth_w: rng.random_range(3.5..6.0),
            neck_w: rng.random_range(5.0..7.5),
            hat: rng.random_bool(rates.hat),
            glasses: rng.random_bool(rates.glasses),
            earring: rng.random_bool(rates.earring),
            necklace: rng.random_bool(rates.necklace),
            skin_rgb: skin,
            hair_rgb: rgb(rng, 0.05, 0.45),
            cloth_rgb: rgb(rng, 0.1, 0.9),
            hat_rgb: rgb(rng, 0.1, 0.9),
            background_rgb: rgb(rng, 0.6, 1.0),
            light: (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
        }
    }

    /// Face-parsing map; later parts overwrite earlier ones.
    pub fn render_segmap(&self) -> SegMap {
        use SourceLabel::*;
        let n = TOY_CANVAS;
        let h = self.head;
        let mut seg = SegMap::filled(n, n, Background);
        let hair_back = Ellipse::new(h.cx, h.cy - 1.0, h.rx + self.hair_extent, h.ry + self.hair_extent);
        let shoulders = Ellipse::new(h.cx, n as f64 + 6.0, h.rx + 14.0, 16.0);
        let chin = h.cy + h.ry;
        let l_ear = Ellipse::new(h.cx - h.rx, h.cy + 1.0, 2.6, 4.2);
        let r_ear = Ellipse::new(h.cx + h.rx, h.cy + 1.0, 2.6, 4.2);
        let ex = self.eye_dx;
        let eye_y = h.cy + self.eye_dy;
        let (erx, ery) = self.eye_size;
        let l_eye = Ellipse::new(h.cx - ex, eye_y, erx, ery);
        let r_eye = Ellipse::new(h.cx + ex, eye_y, erx, ery);
        // Glasses rings reach 1.8 px past the eye; brows keep clear of them.
        let gap = if self.glasses { self.brow_gap.max(4.8) } else { self.brow_gap };
        let brow_y = eye_y - ery - gap - BROW_HALF_HEIGHT;
        let l_brow = Ellipse::new(h.cx - ex, brow_y, erx + 0.8, BROW_HALF_HEIGHT);
        let r_brow = Ellipse::new(h.cx + ex, brow_y, erx + 0.8, BROW_HALF_HEIGHT);
        let nose = Ellipse::new(h.cx, h.cy + 4.0, 1.5, self.nose_len);
        let mouth_y = h.cy + self.mouth_dy;
        let lips = Ellipse::new(h.cx, mouth_y, self.mouth_w, 2.2);
        let hat_top = Ellipse::new(h.cx, h.cy - h.ry * 0.8, h.rx + 4.0, h.ry * 0.65);
        for y in 0..n {
            for x in 0..n {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut l = Background;
                if shoulders.contains(px, py) {
                    l = Cloth;
                }
                if hair_back.contains(px, py) && py < h.cy + self.hair_drop {
                    l = Hair;
                }
                if (px - h.cx).abs() <= self.neck_w && py > h.cy && py < shoulders.cy - shoulders.ry + 3.0 {
                    l = Neck;
                    if self.necklace && (py - (chin + 4.0)).abs() <= 0.9 {
                        l = NeckL;
                    }
                }
                if l_ear.contains(px, py) {
                    l = LEar;
                }
                if r_ear.contains(px, py) {
                    l = REar;
                }
                if h.contains(px, py) {
                    l = Skin;
                    if py < h.cy - h.ry * self.fringe {
                        l = Hair;
                    }
                }
                if l_brow.contains(px, py) {
                    l = LBrow;
                }
                if r_brow.contains(px, py) {
                    l = RBrow;
                }
                if self.hat && (hat_top.contains(px, py) && py < h.cy - h.ry * HAT_LINE || brim(h, px, py)) {
                    l = Hat;
                }
                if self.glasses {
                    let ring = |e: &Ellipse| {
                        let outer = Ellipse::new(e.cx, e.cy, e.rx + 1.8, e.ry + 1.8);
                        outer.contains(px, py) && !Ellipse::new(e.cx, e.cy, e.rx + 0.7, e.ry + 0.7).contains(px, py)
                    };
                    let bridge = (px - h.cx).abs() < ex - erx && (py - eye_y).abs() < 0.6;
                    if ring(&l_eye) || ring(&r_eye) || bridge {
                        l = EyeG;
                    }
                }
                if l_eye.contains(px, py) {
                    l = LEye;
                }
                if r_eye.contains(px, py) {
                    l = REye;
                }
                if nose.contains(px, py) {
                    l = Nose;
                }
                if lips.contains(px, py) {
                    l = if (py - mouth_y).abs() < 0.5 {
                        Mouth
                    } else if py < mouth_y {
                        ULip
                    } else {
                        LLip
                    };
                }
                if self.earring {
                    for e in [&l_ear, &r_ear] {
                        if (px - e.cx).hypot(py - (e.cy + e.ry + 1.2)) <= 1.3 {
                            l = EarR;
                        }
                    }
                }
                seg.set(x, y, l);
            }
        }
        seg
    }

    /// Flat region colors with a linear lighting ramp, plus faint noise.
    pub fn render_image<R: Rng + ?Sized>(&self, seg: &SegMap, rng: &mut R) -> Vec<f64> {
        use SourceLabel::*;
        let n = TOY_CANVAS;
        let noise = Normal::new(0.0, 0.01).expect("valid sigma");
        let mut out = Vec::with_capacity(n * n * 3);
        for y in 0..n {
            for x in 0..n {
                let base = match seg.get(x, y) {
                    Background => self.background_rgb,
                    Skin | LEar | REar => self.skin_rgb,
                    Nose => self.skin_rgb.map(|c| c * 0.9),
                    Hair | LBrow | RBrow => self.hair_rgb,
                    LEye | REye => [0.15, 0.12, 0.1],
                    EyeG => [0.1, 0.1, 0.12],
                    Mouth => [0.3, 0.05, 0.05],
                    ULip | LLip => [0.75, 0.3, 0.3],
                    Hat => self.hat_rgb,
                    EarR => [0.95, 0.8, 0.2],
                    NeckL => [0.85, 0.85, 0.9],
                    Neck => self.skin_rgb.map(|c| c * 0.85),
                    Cloth => self.cloth_rgb,
                };
                let shade = 1.0
                    + self.light.0 * (x as f64 / n as f64 - 0.5)
                    + self.light.1 * (y as f64 / n as f64 - 0.5);
                for c in base {
                    out.push((c * shade + noise.sample(rng)).clamp(0.0, 1.0));
                }
            }
        }
        out
    }
}

fn brim(h: Ellipse, px: f64, py: f64) -> bool {
    let y = h.cy - h.ry * HAT_LINE;
    (py - y).abs() <= 1.2 && (px - h.cx).abs() <= h.rx + 6.0
}

/// One rendered face.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyItem {
    pub spec: ToyFaceSpec,
    pub seg: SegMap,
    /// Row-major RGB triples in `[0, 1]`.
    pub image: Vec<f64>,
    pub sketch: VectorSketch,
}

impl ToyItem {
    pub fn gray(&self) -> GrayImage {
        GrayImage::from_rgb(TOY_CANVAS, TOY_CANVAS, &self.image)
    }

    pub fn has_accessory(&self, which: Accessory) -> bool {
        match which {
            Accessory::Hat => self.spec.hat,
            Accessory::Glasses => self.spec.glasses,
            Accessory::Earring => self.spec.earring,
            Accessory::Necklace => self.spec.necklace,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accessory {
    Hat,
    Glasses,
    Earring,
    Necklace,
}

impl Accessory {
    pub const ALL: [Accessory; 4] = [Accessory::Hat, Accessory::Glasses, Accessory::Earring, Accessory::Necklace];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub count: usize,
    pub seed: u64,
    pub rates: AccessoryRates,
    pub contour_only: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
            rates: AccessoryRates::default(),
            contour_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    pub train: Vec<ToyItem>,
    pub test: Vec<ToyItem>,
}

pub fn render_item<R: Rng + ?Sized>(spec: ToyFaceSpec, rng: &mut R, contour_only: bool) -> ToyItem {
    let seg = spec.render_segmap();
    let image = spec.render_image(&seg, rng);
    let gray = GrayImage::from_rgb(TOY_CANVAS, TOY_CANVAS, &image);
    let opts = SynthOptions {
        contour_only,
        ..SynthOptions::default()
    };
    let sketch = synthesize(&seg, Some(&gray), &opts).expect("toy maps share one size");
    ToyItem {
        spec,
        seg,
        image,
        sketch,
    }
}

/// `count` faces; the last tenth (rounded) is held out for testing.
pub fn gen_toy_dataset(config: &ToyConfig) -> ToyDataset {
    let mut rng = rng_for(config.seed, "toy");
    let mut items: Vec<ToyItem> = (0..config.count)
        .map(|_| {
            let spec = ToyFaceSpec::sample(&mut rng, &config.rates);
            render_item(spec, &mut rng, config.contour_only)
        })
        .collect();
    let test_len = (config.count as f64 * 0.1).round() as usize;
    let test = items.split_off(config.count - test_len);
    ToyDataset { train: items, test }
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `seg/`, `img/` PNGs, `sketch/` JSON and `split.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        for sub in ["seg", "img", "sketch"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let mut split = serde_json::Map::new();
        for (name, items, offset) in [("train", &self.train, 0), ("test", &self.test, self.train.len())] {
            let mut names = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let stem = format!("{:05}", offset + i);
                item.seg.save_png(&dir.join("seg").join(format!("{stem}.png")))?;
                save_rgb_png(&dir.join("img").join(format!("{stem}.png")), TOY_CANVAS, TOY_CANVAS, &item.image)?;
                fs::write(dir.join("sketch").join(format!("{stem}.json")), item.sketch.to_json())?;
                let spec = serde_json::to_value(&item.spec).expect("spec serializes");
                names.push(serde_json::json!({ "id": stem, "spec": spec }));
            }
            split.insert(name.to_string(), serde_json::Value::Array(names));
        }
        fs::write(dir.join("split.json"), serde_json::to_string_pretty(&split).expect("split serializes"))?;
        Ok(())
    }

    /// Reads a directory written by [`ToyDataset::save`]. Images are reloaded
    /// from their 8-bit PNGs.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let split: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("split.json"))?)
            .map_err(|e| HarnessError::Format(format!("split.json: {e}")))?;
        let part = |name: &str| -> Result<Vec<ToyItem>, HarnessError> {
            let entries = split[name]
                .as_array()
                .ok_or_else(|| HarnessError::Format(format!("split.json: missing {name}")))?;
            entries
                .iter()
                .map(|e| {
                    let stem = e["id"].as_str().ok_or_else(|| HarnessError::Format("split.json: id".into()))?;
                    let spec: ToyFaceSpec = serde_json::from_value(e["spec"].clone())
                        .map_err(|err| HarnessError::Format(format!("split.json spec: {err}")))?;
                    let seg = SegMap::load_png(&dir.join("seg").join(format!("{stem}.png")))?;
                    let image = load_rgb_png(&dir.join("img").join(format!("{stem}.png")))?.2;
                    let sketch = VectorSketch::from_json(&fs::read_to_string(dir.join("sketch").join(format!("{stem}.json")))?)?;
                    Ok(ToyItem {
                        spec,
                        seg,
                        image,
                        sketch,
                    })
                })
                .collect()
        };
        Ok(Self {
            train: part("train")?,
            test: part("test")?,
        })
    }
}

pub fn save_rgb_png(path: &Path, width: usize, height: usize, rgb: &[f64]) -> Result<(), HarnessError> {
    let bytes = rgb_to_bytes(rgb);
    image::RgbImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| HarnessError::Format("rgb buffer size".into()))?
        .save(path)
        .map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
}

pub fn rgb_to_bytes(rgb: &[f64]) -> Vec<u8> {
    rgb.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn load_rgb_png(path: &Path) -> Result<(usize, usize, Vec<f64>), HarnessError> {
    let img = image::open(path)
        .map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((w, h, img.as_raw().iter().map(|&b| b as f64 / 255.0).collect()))
}
