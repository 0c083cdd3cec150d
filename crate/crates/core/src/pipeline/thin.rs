use crate::sketch::SemanticRaster;

/// 8-neighborhood clockwise from north: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn ring(r: &SemanticRaster, x: usize, y: usize) -> [bool; 8] {
    let mut p = [false; 8];
    for (k, &(dx, dy)) in RING.iter().enumerate() {
        p[k] = r.is_set_i(x as isize + dx, y as isize + dy);
    }
    p
}

fn transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count()
}

/// One Zhang-Suen sub-iteration; returns the number of deleted pixels.
fn zs_pass(r: &mut SemanticRaster, second: bool, spare: bool) -> usize {
    let (w, h) = r.dims();
    let mut doomed = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !r.is_set(x, y) {
                continue;
            }
            let p = ring(r, x, y);
            let b = p.iter().filter(|&&v| v).count();
            if !(2..=6).contains(&b) || transitions(&p) != 1 {
                continue;
            }
            let (n, e, s, wst) = (p[0], p[2], p[4], p[6]);
            let ok = if second {
                !(n && e && wst) && !(n && s && wst)
            } else {
                !(n && e && s) && !(e && s && wst)
            };
            if ok {
                doomed.push((x, y));
            }
        }
    }
    if spare {
        spare_last_pixels(r, &mut doomed);
    }
    for &(x, y) in &doomed {
        r.clear(x, y);
    }
    doomed.len()
}

/// Parallel deletion can erase a small component outright (an isolated 2x2
/// block loses all four pixels). Keeps the first doomed pixel of any
/// 8-connected component that would otherwise vanish.
fn spare_last_pixels(r: &SemanticRaster, doomed: &mut Vec<(usize, usize)>) {
    let (w, h) = r.dims();
    let mut marked = vec![false; w * h];
    for &(x, y) in doomed.iter() {
        marked[y * w + x] = true;
    }
    let mut seen = vec![false; w * h];
    let mut spared = Vec::new();
    for &(x0, y0) in doomed.iter() {
        if seen[y0 * w + x0] {
            continue;
        }
        seen[y0 * w + x0] = true;
        let mut stack = vec![(x0, y0)];
        let mut survives = false;
        while let Some((x, y)) = stack.pop() {
            if !marked[y * w + x] {
                survives = true;
            }
            for &(dx, dy) in &RING {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if !r.is_set_i(nx, ny) {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !seen[ny * w + nx] {
                    seen[ny * w + nx] = true;
                    stack.push((nx, ny));
                }
            }
        }
        if !survives {
            spared.push((x0, y0));
        }
    }
    doomed.retain(|p| !spared.contains(p));
}

/// Plain Zhang-Suen iteration to convergence. Labels of surviving pixels
/// are untouched.
pub fn zhang_suen(raster: &SemanticRaster) -> SemanticRaster {
    zs_iterate(raster, false)
}

fn zs_iterate(raster: &SemanticRaster, spare: bool) -> SemanticRaster {
    let mut r = raster.clone();
    loop {
        let removed = zs_pass(&mut r, false, spare) + zs_pass(&mut r, true, spare);
        if removed == 0 {
            return r;
        }
    }
}

/// Yokoi 8-connectivity number; a pixel with value 1 can be removed
/// without splitting its neighborhood.
fn connectivity8(p: &[bool; 8]) -> usize {
    let q = |k: usize| !p[k % 8];
    [0, 2, 4, 6]
        .iter()
        .filter(|&&k| q(k) && !(q(k + 1) && q(k + 2)))
        .count()
}

/// Removes one pixel from the first fully occupied 2x2 block, preferring a
/// corner whose removal keeps local connectivity.
fn break_block(r: &mut SemanticRaster) -> bool {
    let Some((x, y)) = r.find_2x2_block() else {
        return false;
    };
    let corners = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
    let pick = corners
        .iter()
        .copied()
        .find(|&(cx, cy)| connectivity8(&ring(r, cx, cy)) == 1)
        .unwrap_or(corners[0]);
    r.clear(pick.0, pick.1);
    true
}

/// Zhang-Suen skeleton followed by 2x2-block removal, repeated until neither
/// step changes the raster. Unlike plain `zhang_suen`, no connected component
/// is erased. The result never holds a full 2x2 block and is a fixed point of
/// `thin`.
pub fn thin(raster: &SemanticRaster) -> SemanticRaster {
    let mut r = zs_iterate(raster, true);
    loop {
        let mut changed = false;
        while break_block(&mut r) {
            changed = true;
        }
        if !changed {
            return r;
        }
        r = zs_iterate(&r, true);
    }
}
