use super::{EdgeMap, GrayImage};

/// Hysteresis thresholds on the Sobel magnitude, scaled so a unit step
/// scores 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeParams {
    pub high: f64,
    pub low: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self { high: 0.3, low: 0.1 }
    }
}

fn sobel_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let at = |x: isize, y: isize| img.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize);
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            mag[y as usize * w + x as usize] = gx.hypot(gy) / 4.0;
        }
    }
    mag
}

/// Sobel gradient magnitude with hysteresis: pixels above `high` seed edges,
/// which grow through 8-connected pixels above `low`. No labels are set.
pub fn extract_edges(img: &GrayImage, params: &EdgeParams) -> EdgeMap {
    let (w, h) = (img.width, img.height);
    let mag = sobel_magnitude(img);
    let mut out = EdgeMap::new(w, h);
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| mag[i] >= params.high).collect();
    for &i in &stack {
        out.set(i % w, i / w, None);
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (ux, uy) = (nx as usize, ny as usize);
                if !out.is_edge(ux, uy) && mag[uy * w + ux] >= params.low {
                    out.set(ux, uy, None);
                    stack.push(uy * w + ux);
                }
            }
        }
    }
    out
}
