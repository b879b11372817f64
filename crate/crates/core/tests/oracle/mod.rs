//! Reference implementations written directly from the definitions, with no
//! shared code paths beyond the public data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use taskib::model::TaskDistribution;

/// `I(X;Y)` for a hard clustering; terms with zero probability contribute 0.
pub fn mutual_information(masses: &[f64], dists: &[Vec<f64>]) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    let py = marginal(masses, dists);
    let mut total = 0.0;
    for (m, d) in masses.iter().zip(dists) {
        for (p, q) in d.iter().zip(&py) {
            if *p > 0.0 {
                total += m * p * (p / q).ln();
            }
        }
    }
    total
}

pub fn marginal(masses: &[f64], dists: &[Vec<f64>]) -> Vec<f64> {
    let mut py = vec![0.0; dists[0].len()];
    for (m, d) in masses.iter().zip(dists) {
        for (acc, p) in py.iter_mut().zip(d) {
            *acc += m * p;
        }
    }
    py
}

pub fn uniform_information(dists: &[Vec<f64>]) -> f64 {
    let n = dists.len();
    mutual_information(&vec![1.0 / n as f64; n], dists)
}

/// Connected components by breadth-first search.
pub fn components(ids: &[u64], edges: &[(u64, u64)]) -> Vec<BTreeSet<u64>> {
    let mut adj: BTreeMap<u64, Vec<u64>> = ids.iter().map(|&i| (i, Vec::new())).collect();
    for &(a, b) in edges {
        adj.get_mut(&a).unwrap().push(b);
        adj.get_mut(&b).unwrap().push(a);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in ids {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[&v] {
                if seen.insert(w) {
                    comp.insert(w);
                    queue.push_back(w);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Mass-weighted Jensen-Shannon divergence times the combined mass.
pub fn js_weight(mi: f64, pi: &[f64], mj: f64, pj: &[f64]) -> f64 {
    let total = mi + mj;
    let wi = mi / total;
    let wj = mj / total;
    let mut kl_i = 0.0;
    let mut kl_j = 0.0;
    for (&a, &b) in pi.iter().zip(pj) {
        let mean = wi * a + wj * b;
        if a > 0.0 {
            kl_i += a * (a / mean).ln();
        }
        if b > 0.0 {
            kl_j += b * (b / mean).ln();
        }
    }
    (total * (wi * kl_i + wj * kl_j)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: u64,
    pub right: u64,
    pub weight: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub merges: Vec<Merge>,
    pub partition: BTreeSet<Vec<u64>>,
}

/// Agglomerative IB that recomputes every adjacent pair's weight on every
/// iteration. Weights are computed on member counts and reported divided by
/// the number of primitives; `delta_bar` may exceed 1 to run to completion.
pub fn naive_ib(
    ids: &[u64],
    dists: &BTreeMap<u64, TaskDistribution>,
    edges: &[(u64, u64)],
    delta_bar: f64,
) -> Outcome {
    let n = ids.len();
    let mut members: Vec<Vec<u64>> = ids.iter().map(|&i| vec![i]).collect();
    let mut probs: Vec<Vec<f64>> = ids.iter().map(|i| dists[i].probs().to_vec()).collect();
    let mut alive = vec![true; n];
    let slot: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        let (sa, sb) = (slot[&a], slot[&b]);
        if sa != sb {
            adj[sa][sb] = true;
            adj[sb][sa] = true;
        }
    }
    let masses = vec![1.0 / n as f64; n];
    let info = if n == 0 {
        0.0
    } else {
        let ds: Vec<TaskDistribution> = ids.iter().map(|i| dists[i].clone()).collect();
        taskib::ib::mutual_information(&masses, &ds)
    };
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(f64, (u64, u64), usize, usize)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if !(alive[i] && alive[j] && adj[i][j]) {
                    continue;
                }
                let w = js_weight(
                    members[i].len() as f64,
                    &probs[i],
                    members[j].len() as f64,
                    &probs[j],
                );
                let (ri, rj) = (members[i][0], members[j][0]);
                let key = (ri.min(rj), ri.max(rj));
                let better = match best {
                    None => true,
                    Some((bw, bk, _, _)) => w.total_cmp(&bw).then(key.cmp(&bk)).is_lt(),
                };
                if better {
                    best = Some((w, key, i, j));
                }
            }
        }
        let Some((w, key, i, j)) = best else { break };
        let weight = w / n as f64;
        let delta = if info < 1e-12 { 0.0 } else { weight / info };
        if delta >= delta_bar {
            break;
        }
        merges.push(Merge {
            left: key.0,
            right: key.1,
            weight,
            delta,
        });
        let (ni, nj) = (members[i].len() as f64, members[j].len() as f64);
        probs[i] = probs[i]
            .iter()
            .zip(&probs[j])
            .map(|(a, b)| (ni * a + nj * b) / (ni + nj))
            .collect();
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        members[i].sort_unstable();
        alive[j] = false;
        let neighbors: Vec<usize> = (0..n).filter(|&k| adj[j][k] && k != i).collect();
        for k in neighbors {
            adj[i][k] = true;
            adj[k][i] = true;
        }
    }
    let partition = (0..n)
        .filter(|&s| alive[s])
        .map(|s| members[s].clone())
        .collect();
    Outcome { merges, partition }
}

/// Relevance distribution computed literally: for `l = 1..=k` add the
/// vector that keeps only the top-`l` entries of `theta` (ties to the lower
/// index, negative entries floored at 0), then normalize. Returns `None`
/// when nothing positive is retained.
pub fn conditional(theta: &[f64], k: usize) -> Option<Vec<f64>> {
    let alpha = theta[0];
    let max_task = theta[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_task < alpha {
        let mut p = vec![0.0; theta.len()];
        p[0] = 1.0;
        return Some(p);
    }
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut acc = vec![0.0; theta.len()];
    for l in 1..=k {
        for &idx in &order[..l] {
            acc[idx] += theta[idx].max(0.0);
        }
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(acc.iter().map(|a| a / total).collect())
}
