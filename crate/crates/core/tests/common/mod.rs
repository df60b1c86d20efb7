//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use dermgraph::dataset::{generate_synthetic, Case, SyntheticSpec};
use dermgraph::embedding::NODE_FEATURE_DIM;
use dermgraph::graph::ProximityStack;
use dermgraph::model::{batch_loss, gradients, GraphContext, Hyperparameters, ModelParameters};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MEL: usize = 7;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled cases: per-case attribute bits and a melanoma bit.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<([u8; 7], u8)> {
    let rates: [f64; 8] = std::array::from_fn(|_| rng.random_range(0.05..0.7));
    (0..n)
        .map(|_| {
            let a: [u8; 7] = std::array::from_fn(|j| u8::from(rng.random_bool(rates[j])));
            (a, u8::from(rng.random_bool(rates[7])))
        })
        .collect()
}

fn positive(case: &([u8; 7], u8), node: usize) -> bool {
    if node == MEL {
        case.1 == 1
    } else {
        case.0[node] == 1
    }
}

/// Internal and external graph weights as reduced fractions `(num, den)`
/// counted directly from the cases; `None` where there is no edge.
pub fn brute_force_fractions(cases: &[([u8; 7], u8)]) -> [[Option<(u64, u64)>; 8]; 8] {
    let count = |pred: &dyn Fn(&([u8; 7], u8)) -> bool| cases.iter().filter(|c| pred(c)).count() as u64;
    let mut out = [[None; 8]; 8];
    for p in 0..7 {
        for q in 0..7 {
            if p == q {
                continue;
            }
            let joint = count(&|c| positive(c, p) && positive(c, q));
            if joint >= 1 {
                out[p][q] = Some((joint, count(&|c| positive(c, p))));
            }
        }
        let joint = count(&|c| positive(c, p) && positive(c, MEL));
        if joint >= 1 {
            let tp = count(&|c| positive(c, p));
            let tm = count(&|c| positive(c, MEL));
            out[MEL][p] = Some(if tp >= tm { (1, 1) } else { (tp, tm) });
            out[p][MEL] = Some(if tm >= tp { (1, 1) } else { (tm, tp) });
        }
    }
    out
}

/// Cases with 651 APN/IR-PIG co-occurrences, 899 APN-only, and 1449
/// IR-PIG-only, giving 651/1550 = 0.42 and 651/2100 = 0.31.
pub fn asymmetry_cases() -> Vec<([u8; 7], u8)> {
    let mut cases = Vec::new();
    let mut push = |apn: u8, pig: u8, n: usize| {
        for i in 0..n {
            let mut a = [0u8; 7];
            a[0] = apn;
            a[2] = pig;
            cases.push((a, u8::from(i % 2 == 0)));
        }
    };
    push(1, 1, 651);
    push(1, 0, 899);
    push(0, 1, 1449);
    push(0, 0, 500);
    cases
}

pub fn random_adjacency(rng: &mut ChaCha8Rng) -> Array2<f64> {
    let density = rng.random_range(0.1..0.6);
    Array2::from_shape_fn((8, 8), |(i, j)| {
        if i != j && rng.random_bool(density) {
            rng.random_range(0.01..1.0)
        } else {
            0.0
        }
    })
}

/// `D^-1 A` with a unit self-loop on empty rows, by explicit loops.
pub fn oracle_transition(a: &Array2<f64>) -> Vec<Vec<f64>> {
    let n = a.nrows();
    (0..n)
        .map(|i| {
            let total: f64 = (0..n).map(|j| a[[i, j]]).sum();
            (0..n)
                .map(|j| {
                    if total > 0.0 {
                        a[[i, j]] / total
                    } else if i == j {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Sum over every walk of `len` steps from `from` to `to` of the product of
/// transition weights.
fn walk_sum(t: &[Vec<f64>], from: usize, to: usize, len: usize) -> f64 {
    if len == 0 {
        return if from == to { 1.0 } else { 0.0 };
    }
    (0..t.len())
        .map(|next| {
            let w = t[from][next];
            if w == 0.0 {
                0.0
            } else {
                w * walk_sum(t, next, to, len - 1)
            }
        })
        .sum()
}

/// `P^(k)` by path enumeration: meeting paths `i -> m <- j` and diffusion
/// paths `i <- m -> j`, each of `k - 1` steps per side, kept only where both
/// kinds exist, and averaged.
pub fn oracle_proximity(a: &Array2<f64>, k: usize) -> Vec<Vec<f64>> {
    let t = oracle_transition(a);
    let n = t.len();
    let steps = k - 1;
    let reach: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|m| walk_sum(&t, i, m, steps)).collect())
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let meeting: f64 = (0..n).map(|m| reach[i][m] * reach[j][m]).sum();
            let diffusion: f64 = (0..n).map(|m| reach[m][i] * reach[m][j]).sum();
            if meeting != 0.0 && diffusion != 0.0 {
                out[i][j] = (meeting + diffusion) / 2.0;
            }
        }
    }
    out
}

/// Mann-Whitney statistic by comparing every positive/negative pair.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            den += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / den
}

/// A random model, batch, and graph context for gradient checking.
pub struct GradCase {
    pub cases: Vec<Case>,
    pub params: ModelParameters,
    pub hyper: Hyperparameters,
    pub ctx: GraphContext,
}

pub fn grad_case(d: usize, order: usize, seed: u64) -> GradCase {
    let mut r = rng(seed);
    let cases = generate_synthetic(&SyntheticSpec {
        n_cases: 6,
        feature_dim: d,
        noise_sigma: 0.5,
        seed,
        ..Default::default()
    })
    .unwrap()
    .into_cases();
    let mut adj = random_adjacency(&mut r);
    adj[[0, 1]] = 0.5;
    let prox = ProximityStack::build(&adj, order).unwrap();
    let x = Array2::from_shape_fn((8, NODE_FEATURE_DIM), |_| r.random_range(-1.0..1.0));
    let ctx = GraphContext::new(prox, x).unwrap();

    let mut params = ModelParameters::zeros(d, order);
    let b = 1.0 / (NODE_FEATURE_DIM as f64).sqrt();
    for th in &mut params.theta {
        th.mapv_inplace(|_| r.random_range(-b..b));
    }
    params.pool_proj.mapv_inplace(|_| r.random_range(-1.0..1.0));
    params.head_w.mapv_inplace(|_| r.random_range(-0.8..0.8));
    params.head_b.mapv_inplace(|_| r.random_range(-0.5..0.5));
    params.u.mapv_inplace(|_| r.random_range(-1.0..1.5));

    let g = [r.random_range(0.1..1.0), r.random_range(0.1..1.0), r.random_range(0.1..1.0)];
    let gs: f64 = g.iter().sum();
    let hyper = Hyperparameters {
        delta: r.random_range(0.0..1.0),
        gamma: g.map(|v| v / gs),
        order,
        mu: Some(std::array::from_fn(|_| r.random_range(0.5..2.0))),
        mu_mel: r.random_range(0.5..2.0),
        tau: [0.0, 1.0, 2.0, 2.5][(seed % 4) as usize],
        lambda: r.random_range(0.2..2.0),
        ..Default::default()
    };
    GradCase {
        cases,
        params,
        hyper,
        ctx,
    }
}

/// Worst relative error between analytic and central-difference partials
/// over every parameter entry, with `max(|a|, |n|, 1e-6)` as denominator,
/// and the number of entries checked.
pub fn gradient_check(gc: &GradCase, h: f64) -> (f64, usize) {
    let batch: Vec<&Case> = gc.cases.iter().collect();
    let analytic = gradients(&batch, &gc.params, &gc.hyper, &gc.ctx).unwrap().grad;
    let mut p = gc.params.clone();
    let n_tensors = p.tensors().len();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for t in 0..n_tensors {
        let len = p.tensors()[t].len();
        for i in 0..len {
            let orig = p.tensors()[t][i];
            p.tensors_mut()[t][i] = orig + h;
            let up = batch_loss(&batch, &p, &gc.hyper, &gc.ctx);
            p.tensors_mut()[t][i] = orig - h;
            let down = batch_loss(&batch, &p, &gc.hyper, &gc.ctx);
            p.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.tensors()[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}
