// Finite-difference checks for every tape primitive on seeded random shapes.
// Shared by the core property tests and the acceptance suite.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchsem::autodiff::{grad_check, AutodiffError, EdgeIndex, GradCheckConfig, ParamStore, Tape, Tensor, Var};

type Res = Result<Var, AutodiffError>;

pub struct Case {
    pub name: &'static str,
    inputs: fn(usize, usize, &mut ChaCha8Rng) -> Vec<Tensor<f64>>,
    apply: fn(&mut Tape<f64>, &[Var], usize, usize) -> Res,
}

fn rand_t(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::uniform(r, c, -1.5, 1.5, rng)
}

// Keeps values away from the kink at zero.
fn away_from_zero(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let data = (0..r * c)
        .map(|_| {
            let m: f64 = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(r, c, data)
}

fn one(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
    vec![rand_t(r, c, rng)]
}

fn two(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
    vec![rand_t(r, c, rng), rand_t(r, c, rng)]
}

/// Seeded directed graph on `r` vertices with `2c` edges, self-loops and
/// duplicates allowed.
fn graph(r: usize, c: usize) -> EdgeIndex {
    let mut rng = ChaCha8Rng::seed_from_u64((r * 31 + c) as u64);
    let (src, dst) = (0..2 * c).map(|_| (rng.random_range(0..r), rng.random_range(0..r))).unzip();
    EdgeIndex::new(src, dst, r)
}

fn positive(len: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::uniform(len, 1, 0.2, 2.0, rng)
}

pub fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "matmul",
            inputs: |r, c, rng| {
                let k = 1 + (r * 3 + c) % 8;
                vec![rand_t(r, k, rng), rand_t(k, c, rng)]
            },
            apply: |t, v, _, _| t.matmul(v[0], v[1]),
        },
        Case {
            name: "add",
            inputs: two,
            apply: |t, v, _, _| t.add(v[0], v[1]),
        },
        Case {
            name: "add_row",
            inputs: |r, c, rng| vec![rand_t(r, c, rng), rand_t(1, c, rng)],
            apply: |t, v, _, _| t.add_row(v[0], v[1]),
        },
        Case {
            name: "sub",
            inputs: two,
            apply: |t, v, _, _| t.sub(v[0], v[1]),
        },
        Case {
            name: "mul",
            inputs: two,
            apply: |t, v, _, _| t.mul(v[0], v[1]),
        },
        Case {
            name: "mul_col",
            inputs: |r, c, rng| vec![rand_t(r, c, rng), rand_t(r, 1, rng)],
            apply: |t, v, _, _| t.mul_col(v[0], v[1]),
        },
        Case {
            name: "scale",
            inputs: one,
            apply: |t, v, _, _| Ok(t.scale(v[0], -1.7)),
        },
        Case {
            name: "offset",
            inputs: one,
            apply: |t, v, _, _| Ok(t.offset(v[0], 0.3)),
        },
        Case {
            name: "sigmoid",
            inputs: one,
            apply: |t, v, _, _| Ok(t.sigmoid(v[0])),
        },
        Case {
            name: "tanh",
            inputs: one,
            apply: |t, v, _, _| Ok(t.tanh(v[0])),
        },
        Case {
            name: "relu",
            inputs: |r, c, rng| vec![away_from_zero(r, c, rng)],
            apply: |t, v, _, _| Ok(t.relu(v[0])),
        },
        Case {
            name: "leaky_relu",
            inputs: |r, c, rng| vec![away_from_zero(r, c, rng)],
            apply: |t, v, _, _| Ok(t.leaky_relu(v[0], 0.2)),
        },
        Case {
            name: "sum",
            inputs: one,
            apply: |t, v, _, _| Ok(t.sum(v[0])),
        },
        Case {
            name: "mean",
            inputs: one,
            apply: |t, v, _, _| Ok(t.mean(v[0])),
        },
        Case {
            name: "norm",
            inputs: |r, c, rng| vec![away_from_zero(r, c, rng)],
            apply: |t, v, _, _| Ok(t.norm(v[0])),
        },
        Case {
            name: "mse",
            inputs: two,
            apply: |t, v, _, _| t.mse(v[0], v[1]),
        },
        Case {
            name: "softmax_cross_entropy",
            inputs: one,
            apply: |t, v, r, c| {
                let targets: Vec<usize> = (0..r).map(|i| (i * 5 + 3) % c).collect();
                t.softmax_cross_entropy(v[0], &targets)
            },
        },
        Case {
            name: "concat_cols",
            inputs: |r, c, rng| vec![rand_t(r, c, rng), rand_t(r, 1 + c % 3, rng)],
            apply: |t, v, _, _| t.concat_cols(&[v[0], v[1], v[0]]),
        },
        Case {
            name: "concat_rows",
            inputs: |r, c, rng| vec![rand_t(r, c, rng), rand_t(1 + r % 3, c, rng)],
            apply: |t, v, _, _| t.concat_rows(&[v[1], v[0]]),
        },
        Case {
            name: "slice_cols",
            inputs: one,
            apply: |t, v, _, c| t.slice_cols(v[0], c / 2, c - c / 2),
        },
        Case {
            name: "slice_rows",
            inputs: one,
            apply: |t, v, r, _| t.slice_rows(v[0], r / 3, r - r / 3),
        },
        Case {
            name: "gather_rows",
            inputs: one,
            apply: |t, v, r, _| {
                let idx: Rc<[Option<usize>]> =
                    (0..r + 3).map(|i| if i % 4 == 3 { None } else { Some((i * 7) % r) }).collect();
                t.gather_rows(v[0], idx)
            },
        },
        Case {
            name: "reshape",
            inputs: one,
            apply: |t, v, r, c| t.reshape(v[0], c, r),
        },
        Case {
            name: "group_mean",
            inputs: |r, c, rng| vec![rand_t(2 * r, c, rng)],
            apply: |t, v, _, _| t.group_mean(v[0], 2),
        },
        Case {
            name: "gcn_norm",
            inputs: |r, c, rng| vec![positive(graph(r, c).len(), rng)],
            apply: |t, v, r, c| t.gcn_norm(v[0], &graph(r, c)),
        },
        Case {
            name: "propagate",
            inputs: |r, c, rng| vec![rand_t(graph(r, c).len(), 1, rng), rand_t(r, c, rng)],
            apply: |t, v, r, c| t.propagate(v[0], v[1], &graph(r, c)),
        },
    ]
}

/// Max relative error of `case` on an `r x c` instance drawn from `seed`.
/// The output is contracted with fixed random weights so every output
/// coordinate contributes to the loss.
pub fn check_case(case: &Case, r: usize, c: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (case.inputs)(r, c, &mut rng);
    let mut store = ParamStore::new();
    let ids: Vec<_> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, t)| store.add(format!("in{i}"), t))
        .collect();
    let weight_seed = rng.random::<u64>();
    let apply = case.apply;
    let report = grad_check(&mut store, GradCheckConfig::default(), |tape, store| {
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(store, id)).collect();
        let out = apply(tape, &vars, r, c)?;
        let s = tape.shape(out);
        let mut wr = ChaCha8Rng::seed_from_u64(weight_seed);
        let w = tape.constant(Tensor::uniform(s.rows, s.cols, 0.5, 1.5, &mut wr));
        let prod = tape.mul(out, w)?;
        Ok::<_, AutodiffError>(tape.sum(prod))
    })
    .unwrap_or_else(|e| panic!("{}: {e}", case.name));
    report.max_rel_error
}

/// Runs every primitive over `trials` seeded shapes up to 8x8 and returns
/// the worst error per primitive.
pub fn sweep(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases()
        .iter()
        .map(|case| {
            let worst = (0..trials)
                .map(|_| {
                    let (r, c) = (rng.random_range(1..=8), rng.random_range(1..=8));
                    check_case(case, r, c, rng.random())
                })
                .fold(0.0, f64::max);
            (case.name, worst)
        })
        .collect()
}
