use std::collections::HashSet;

use proptest::prelude::*;
use sketchsem::pipeline::{simplify, thin, vectorize, zhang_suen};
use sketchsem::sketch::{rasterize, CategoryId, SemanticRaster, Stroke, VectorSketch};

// Literal transcription of the published Zhang-Suen rules on a zero-padded
// integer grid, kept independent of the library's implementation.
fn zs_oracle(cells: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let (h, w) = (cells.len(), cells[0].len());
    let mut g = vec![vec![0u8; w + 2]; h + 2];
    for y in 0..h {
        for x in 0..w {
            g[y + 1][x + 1] = cells[y][x];
        }
    }
    loop {
        let mut changed = false;
        for step in 0..2 {
            let mut marked = Vec::new();
            for y in 1..=h {
                for x in 1..=w {
                    if g[y][x] == 0 {
                        continue;
                    }
                    let p2 = g[y - 1][x];
                    let p3 = g[y - 1][x + 1];
                    let p4 = g[y][x + 1];
                    let p5 = g[y + 1][x + 1];
                    let p6 = g[y + 1][x];
                    let p7 = g[y + 1][x - 1];
                    let p8 = g[y][x - 1];
                    let p9 = g[y - 1][x - 1];
                    let seq = [p2, p3, p4, p5, p6, p7, p8, p9, p2];
                    let b: u8 = seq[..8].iter().sum();
                    let a = seq.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count();
                    let (c, d) = if step == 0 {
                        (p2 * p4 * p6, p4 * p6 * p8)
                    } else {
                        (p2 * p4 * p8, p2 * p6 * p8)
                    };
                    if (2..=6).contains(&b) && a == 1 && c == 0 && d == 0 {
                        marked.push((y, x));
                    }
                }
            }
            changed |= !marked.is_empty();
            for (y, x) in marked {
                g[y][x] = 0;
            }
        }
        if !changed {
            break;
        }
    }
    g[1..=h].iter().map(|row| row[1..=w].to_vec()).collect()
}

fn to_raster(cells: &[Vec<u8>]) -> SemanticRaster {
    let mut r = SemanticRaster::new(cells[0].len(), cells.len());
    for (y, row) in cells.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            if v == 1 {
                r.set(x, y, Some(CategoryId::new(((x + 3 * y) % 22) as u8).unwrap()));
            }
        }
    }
    r
}

fn to_cells(r: &SemanticRaster) -> Vec<Vec<u8>> {
    (0..r.height())
        .map(|y| (0..r.width()).map(|x| r.is_set(x, y) as u8).collect())
        .collect()
}

fn grid(text: &str) -> Vec<Vec<u8>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.bytes().map(|b| (b == b'#') as u8).collect())
        .collect()
}

#[test]
fn filled_5x3_rectangle_matches_oracle() {
    let input = grid(
        "
        .......
        .#####.
        .#####.
        .#####.
        .......",
    );
    let expected = zs_oracle(&input);
    // frozen oracle output
    assert_eq!(
        expected,
        grid(
            "
            .......
            .......
            ..##...
            .......
            ......."
        )
    );
    let got = thin(&to_raster(&input));
    assert_eq!(to_cells(&got), expected);
    assert!(got.is_thin());
}

#[test]
fn thin_keeps_lines_and_empty() {
    let line = grid("..........\n.########.\n..........");
    let r = to_raster(&line);
    assert_eq!(thin(&r), r);
    let empty = SemanticRaster::new(6, 4);
    assert_eq!(thin(&empty), empty);
}

#[test]
fn thin_breaks_blocks_left_by_zhang_suen() {
    // an X-like junction whose 2x2 core survives plain Zhang-Suen
    let cells = grid(
        "
        ...#..
        .##.#.
        #.##..
        ..##..
        .#..#.",
    );
    let r = to_raster(&cells);
    assert_eq!(to_cells(&zhang_suen(&r)), zs_oracle(&cells));
    assert!(!zhang_suen(&r).is_thin());
    assert!(thin(&r).is_thin());
}

#[test]
fn thin_keeps_isolated_small_blobs() {
    let cells = grid("......\n..##..\n..##..\n......");
    let r = to_raster(&cells);
    assert!(zhang_suen(&r).is_blank());
    assert_eq!(thin(&r).count(), 1);
}

// 8-connected components as sets of (x, y).
fn components(cells: &[Vec<u8>]) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = (cells.len(), cells[0].len());
    let mut seen = vec![vec![false; w]; h];
    let mut out = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if cells[y0][x0] == 0 || seen[y0][x0] {
                continue;
            }
            seen[y0][x0] = true;
            let (mut stack, mut comp) = (vec![(x0, y0)], Vec::new());
            while let Some((x, y)) = stack.pop() {
                comp.push((x, y));
                for ny in y.saturating_sub(1)..(y + 2).min(h) {
                    for nx in x.saturating_sub(1)..(x + 2).min(w) {
                        if cells[ny][nx] == 1 && !seen[ny][nx] {
                            seen[ny][nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

fn arb_cells(max: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2..max, 2..max).prop_flat_map(|(w, h)| prop::collection::vec(prop::collection::vec(0u8..2, w), h))
}

fn arb_blobs() -> impl Strategy<Value = Vec<Vec<u8>>> {
    // unions of random filled rectangles, closer to real contour maps than noise
    (6usize..24, 6usize..24, prop::collection::vec((0usize..24, 0usize..24, 1usize..6, 1usize..6), 1..6)).prop_map(
        |(w, h, rects)| {
            let mut g = vec![vec![0u8; w]; h];
            for (x, y, rw, rh) in rects {
                for row in g.iter_mut().skip(y % h).take(rh) {
                    for c in row.iter_mut().skip(x % w).take(rw) {
                        *c = 1;
                    }
                }
            }
            g
        },
    )
}

proptest! {
    #[test]
    fn zhang_suen_matches_oracle(cells in arb_cells(14)) {
        prop_assert_eq!(to_cells(&zhang_suen(&to_raster(&cells))), zs_oracle(&cells));
    }

    #[test]
    fn thin_is_thin_idempotent_and_a_subset(cells in prop_oneof![arb_cells(16), arb_blobs()]) {
        let r = to_raster(&cells);
        let t = thin(&r);
        prop_assert!(t.is_thin());
        prop_assert_eq!(thin(&t), t.clone());
        for (x, y, l) in t.pixels() {
            prop_assert!(r.is_set(x, y));
            prop_assert_eq!(l, r.label(x, y));
        }
        for comp in components(&cells) {
            prop_assert!(comp.iter().any(|&(x, y)| t.is_set(x, y)));
        }
    }

    #[test]
    fn vectorize_partitions_and_round_trips(cells in prop_oneof![arb_cells(16), arb_blobs()], relabel in 0u8..4) {
        // few labels so that same-label chains actually form
        let mut r = to_raster(&cells);
        let pix: Vec<_> = r.pixels().collect();
        for (x, y, _) in pix {
            let l = (x + y) as u8 % (relabel + 1);
            r.set(x, y, if l == 3 { None } else { Some(CategoryId::new(l).unwrap()) });
        }
        let t = thin(&r);
        let sketch = vectorize(&t);
        prop_assert_eq!(sketch.num_points(), t.count());
        let mut seen = HashSet::new();
        for s in &sketch.strokes {
            prop_assert!(s.len() <= 50 && !s.is_empty());
            for p in &s.points {
                let (x, y) = (p.x as usize, p.y as usize);
                prop_assert!(seen.insert((x, y)));
                prop_assert_eq!(t.label(x, y), s.label);
            }
        }
        let back = rasterize(&sketch, t.dims());
        prop_assert_eq!(back.occupancy(), t.occupancy());
    }
}

#[test]
fn horizontal_line_is_one_stroke() {
    let mut r = SemanticRaster::new(7, 3);
    for x in 1..6 {
        r.set(x, 1, Some(CategoryId::HAIR));
    }
    let s = vectorize(&r);
    assert_eq!(s.len(), 1);
    assert_eq!(s.strokes[0].len(), 5);
    assert_eq!(s.strokes[0].label, Some(CategoryId::HAIR));
    assert_eq!(s.strokes[0].points[0].x, 1.0);
}

#[test]
fn disjoint_lines_are_two_strokes() {
    let mut r = SemanticRaster::new(7, 5);
    for x in 1..6 {
        r.set(x, 1, Some(CategoryId::HAIR));
        r.set(x, 3, Some(CategoryId::HAIR));
    }
    assert_eq!(vectorize(&r).len(), 2);
}

#[test]
fn long_chains_split_at_fifty() {
    let mut r = SemanticRaster::new(120, 1);
    for x in 0..120 {
        r.set(x, 0, Some(CategoryId::NOSE));
    }
    let s = vectorize(&r);
    assert_eq!(s.strokes.iter().map(Stroke::len).collect::<Vec<_>>(), vec![50, 50, 20]);
    assert!(s.strokes.iter().all(|st| st.parent_id == s.strokes[0].parent_id));
}

fn hair_sketch(lengths: &[usize]) -> VectorSketch {
    let strokes = lengths
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let pts: Vec<(f64, f64)> = (0..n).map(|k| (k as f64, i as f64)).collect();
            Stroke::from_xy(&pts, i as u64, Some(CategoryId::HAIR))
        })
        .collect();
    VectorSketch::with_strokes(64, 64, strokes)
}

#[test]
fn simplify_examples() {
    let two = hair_sketch(&[5, 9]);
    assert_eq!(simplify(&two, 3), two);
    let five = hair_sketch(&[10, 50, 20, 40, 30]);
    let kept: Vec<usize> = simplify(&five, 3).strokes.iter().map(Stroke::len).collect();
    assert_eq!(kept, vec![50, 40, 30]);
    assert!(simplify(&five, 0).is_empty());
}

#[test]
fn simplify_counts_parent_length_across_segments() {
    let mut s = hair_sketch(&[30, 45]);
    let long = Stroke::from_xy(&(0..60).map(|k| (k as f64, 9.0)).collect::<Vec<_>>(), 7, Some(CategoryId::HAIR));
    s.strokes.extend(sketchsem::sketch::split_stroke(&long, 50));
    let out = simplify(&s, 1);
    assert_eq!(out.len(), 2);
    assert!(out.strokes.iter().all(|st| st.parent_id == 7));
}

proptest! {
    #[test]
    fn simplify_is_monotone(lengths in prop::collection::vec(1usize..40, 0..12), k in 0usize..8, extra in 0usize..5) {
        let s = hair_sketch(&lengths);
        let small: HashSet<u64> = simplify(&s, k).strokes.iter().map(|x| x.parent_id).collect();
        let large: HashSet<u64> = simplify(&s, k + extra).strokes.iter().map(|x| x.parent_id).collect();
        prop_assert!(small.is_subset(&large));
    }
}
