//! Brute-force oracles and random instance generators shared by the
//! integration tests. The oracles recompute every quantity from the raw
//! distance matrix and value vectors, without calling the library.

#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strongmin::{build_grid_1d, ExtFn, MetricSpace};

pub const INF: f64 = f64::INFINITY;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k / denom` for a uniform integer `k` in `lo..=hi`. With a power-of-two
/// `denom` and small `k`, sums and differences of such values are exact.
pub fn dyadic(rng: &mut impl Rng, lo: i64, hi: i64, denom: f64) -> f64 {
    rng.gen_range(lo..=hi) as f64 / denom
}

/// Values with flat regions (a small palette of levels reused across points)
/// and `+inf` at roughly `inf_share` of the points. At least one point is finite.
pub fn flat_values(rng: &mut impl Rng, n: usize, inf_share: f64) -> Vec<f64> {
    let levels: Vec<f64> = (0..rng.gen_range(1..=6))
        .map(|_| dyadic(rng, -32, 32, 16.0))
        .collect();
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(inf_share) {
                INF
            } else if rng.gen_bool(0.7) {
                *levels.choose(rng).unwrap()
            } else {
                dyadic(rng, -64, 64, 32.0)
            }
        })
        .collect();
    if v.iter().all(|x| x.is_infinite()) {
        let i = rng.gen_range(0..n);
        v[i] = levels[0];
    }
    v
}

/// A random finite metric space with `2..=max_n` points: a 1-d grid, dyadic
/// points in the plane, or a shortest-path metric of a weighted graph.
pub fn random_space(rng: &mut impl Rng, max_n: usize) -> Arc<MetricSpace> {
    let n = rng.gen_range(2..=max_n);
    match rng.gen_range(0..3) {
        0 => {
            let a = dyadic(rng, -8, 0, 4.0);
            let b = a + dyadic(rng, 1, 32, 4.0);
            build_grid_1d(a, b, n).unwrap().into_shared()
        }
        1 => {
            // Distinct points only, so every pairwise distance is positive.
            let mut seen = std::collections::BTreeSet::new();
            while seen.len() < n {
                seen.insert((rng.gen_range(-64i64..=64), rng.gen_range(-64i64..=64)));
            }
            let pts = seen
                .into_iter()
                .map(|(x, y)| vec![x as f64 / 32.0, y as f64 / 32.0])
                .collect();
            MetricSpace::euclidean(pts).unwrap().into_shared()
        }
        _ => graph_space(rng, n),
    }
}

/// Shortest paths on a random connected graph with dyadic edge weights.
pub fn graph_space(rng: &mut impl Rng, n: usize) -> Arc<MetricSpace> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let edge = |d: &mut Vec<Vec<f64>>, i: usize, j: usize, w: f64| {
        if w < d[i][j] {
            d[i][j] = w;
            d[j][i] = w;
        }
    };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let w = dyadic(rng, 1, 16, 8.0);
        edge(&mut d, i, j, w);
    }
    for _ in 0..n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            let w = dyadic(rng, 1, 16, 8.0);
            edge(&mut d, i, j, w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    MetricSpace::new(labels, None, d).unwrap().into_shared()
}

pub fn ext(space: &Arc<MetricSpace>, values: Vec<f64>) -> ExtFn {
    ExtFn::new(space.clone(), values).unwrap()
}

// ---- oracles ----

pub fn dist(space: &MetricSpace, i: usize, j: usize) -> f64 {
    space.row(i)[j]
}

pub fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(INF, f64::min)
}

pub fn enlarge_bf(space: &MetricSpace, v: &[f64], r: f64) -> Vec<f64> {
    (0..v.len())
        .map(|x| {
            let mut best = INF;
            for y in 0..v.len() {
                if dist(space, x, y) <= r && v[y] < best {
                    best = v[y];
                }
            }
            best
        })
        .collect()
}

pub fn argmin_bf(v: &[f64], eps: f64) -> Vec<usize> {
    let m = min_of(v);
    (0..v.len()).filter(|&i| v[i] <= m + eps).collect()
}

pub fn diam_bf(space: &MetricSpace, s: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for &i in s {
        for &j in s {
            d = d.max(dist(space, i, j));
        }
    }
    d
}

pub fn dist_to_set_bf(space: &MetricSpace, x: usize, s: &[usize]) -> f64 {
    s.iter().map(|&y| dist(space, x, y)).fold(INF, f64::min)
}

pub fn sum_bf(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Smallest `N'` with `ok(n)` for all `N' <= n <= N`, `None` if `ok(N)` fails.
pub fn tail_threshold(horizon: usize, ok: impl Fn(usize) -> bool) -> Option<usize> {
    let mut first = None;
    for n in (1..=horizon).rev() {
        if !ok(n) {
            break;
        }
        first = Some(n);
    }
    first
}

/// `f_n >= (f_inf)_eps - eps` at every point, for `n = 1..=N` (`terms[n-1]`).
pub fn lower_bound_threshold_bf(
    space: &MetricSpace,
    terms: &[Vec<f64>],
    limit: &[f64],
    eps: f64,
) -> Option<usize> {
    let floor: Vec<f64> = enlarge_bf(space, limit, eps)
        .iter()
        .map(|v| v - eps)
        .collect();
    tail_threshold(terms.len(), |n| {
        terms[n - 1].iter().zip(&floor).all(|(a, b)| *a >= *b)
    })
}

/// `|f_n - f_inf| <= tol` pointwise, `+inf` matching only `+inf`.
pub fn pointwise_threshold_bf(terms: &[Vec<f64>], limit: &[f64], tol: f64) -> Option<usize> {
    tail_threshold(terms.len(), |n| {
        terms[n - 1]
            .iter()
            .zip(limit)
            .all(|(a, b)| match (a.is_finite(), b.is_finite()) {
                (false, false) => true,
                (true, true) => (a - b).abs() <= tol,
                _ => false,
            })
    })
}

/// `sup |g| + max |g(x) - g(y)| / dist(x, y)` over distinct pairs.
pub fn cone_norm_bf(space: &MetricSpace, g: &[f64]) -> f64 {
    let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut lip = 0.0f64;
    for i in 0..g.len() {
        for j in 0..g.len() {
            if i != j {
                lip = lip.max((g[i] - g[j]).abs() / dist(space, i, j));
            }
        }
    }
    sup + lip
}
