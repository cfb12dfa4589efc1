//! Escape probabilities of simple random walk on finite windows.
//!
//! The probability that a walk from the base reaches distance `r` before
//! returning equals C_eff(base, S_r) / deg(base), where the sphere S_r is
//! shorted to a single sink. The effective conductance is computed exactly
//! by eliminating interior vertices one at a time (Schur complement of the
//! weighted Laplacian).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;
use crate::schreier::SchreierBall;

pub const SEED_ENV: &str = "FULLGROUP_LAB_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq)]
pub struct EscapePoint<S: Scalar> {
    pub radius: usize,
    pub probability: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeReport<S: Scalar> {
    pub action: String,
    pub series: Vec<EscapePoint<S>>,
    /// Nonincreasing across the tested radii.
    pub monotone: bool,
}

impl<S: Scalar> EscapeReport<S> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "action": self.action,
            "series": self.series.iter().map(|p| json!({
                "r": p.radius,
                "p": p.probability.to_string(),
                "approx": p.probability.to_f64_lossy(),
            })).collect::<Vec<_>>(),
            "monotone": self.monotone,
        })
    }
}

fn add<S: Scalar>(w: &mut BTreeMap<usize, S>, k: usize, x: S) {
    match w.get_mut(&k) {
        Some(cur) => *cur = cur.clone() + x,
        None => {
            w.insert(k, x);
        }
    }
}

/// Exact escape probability to distance `r`; `1 ≤ r ≤ radius`.
pub fn escape_probability<S: Scalar>(ball: &SchreierBall, r: usize) -> Result<S> {
    if r == 0 || r > ball.radius() {
        return Err(LabError::InvalidRadius(r));
    }
    let graph = ball.graph();
    let base = ball.base();
    let sink = ball.len();
    let node = |v: usize| if ball.dist(v) >= r { sink } else { v };
    let mut weights: BTreeMap<usize, BTreeMap<usize, S>> = BTreeMap::new();
    for v in (0..ball.len()).filter(|&v| ball.dist(v) < r) {
        for &u in graph.neighbors(v) {
            let (a, b) = (node(v), node(u));
            add(weights.entry(a).or_default(), b, S::one());
            if b == sink {
                add(weights.entry(sink).or_default(), a, S::one());
            }
        }
    }
    let degree = S::from_count(graph.degree(base));
    let mut queue: BTreeSet<(usize, usize)> = weights
        .iter()
        .filter(|(&v, _)| v != base && v != sink)
        .map(|(&v, w)| (w.len(), v))
        .collect();
    while let Some((_, v)) = queue.pop_first() {
        let row = weights.remove(&v).unwrap_or_default();
        let total = row.values().cloned().fold(S::zero(), |a, b| a + b);
        let neighbours: Vec<(usize, S)> = row.into_iter().collect();
        for &(a, _) in &neighbours {
            let entry = weights.get_mut(&a).expect("symmetric weights");
            let old = entry.len();
            entry.remove(&v);
            if a != base && a != sink {
                queue.remove(&(old, a));
            }
        }
        for (i, (a, wa)) in neighbours.iter().enumerate() {
            for (b, wb) in &neighbours[i + 1..] {
                let w = wa.clone() * wb.clone() / total.clone();
                add(weights.get_mut(a).expect("present"), *b, w.clone());
                add(weights.get_mut(b).expect("present"), *a, w);
            }
        }
        for &(a, _) in &neighbours {
            if a != base && a != sink {
                queue.insert((weights[&a].len(), a));
            }
        }
    }
    let conductance = weights
        .get(&base)
        .and_then(|w| w.get(&sink))
        .cloned()
        .unwrap_or_else(S::zero);
    Ok(conductance / degree)
}

/// Escape probabilities for every radius, solved in parallel.
pub fn escape_series<S: Scalar>(ball: &SchreierBall, radii: &[usize]) -> Result<EscapeReport<S>> {
    let series = radii
        .par_iter()
        .map(|&r| {
            Ok(EscapePoint {
                radius: r,
                probability: escape_probability(ball, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<&EscapePoint<S>> = series.iter().collect();
    sorted.sort_by_key(|p| p.radius);
    let monotone = sorted
        .windows(2)
        .all(|w| w[1].probability <= w[0].probability);
    Ok(EscapeReport {
        action: ball.name().to_string(),
        series,
        monotone,
    })
}

/// Ball of the given depth around the root of the `k`-regular tree.
pub fn regular_tree(k: usize, depth: usize) -> Result<SchreierBall> {
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    let mut count = 1;
    for level in 0..depth {
        let children = if level == 0 { k } else { k - 1 };
        let mut next = Vec::new();
        for &v in &frontier {
            for _ in 0..children {
                edges.push((v, count));
                next.push(count);
                count += 1;
            }
        }
        frontier = next;
    }
    SchreierBall::from_graph(format!("tree{k}"), Graph::from_edges(count, &edges), 0)
}

pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationReport {
    pub radius: usize,
    pub trials: usize,
    pub escapes: usize,
    pub estimate: f64,
    pub standard_error: f64,
}

impl SimulationReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "r": self.radius,
            "trials": self.trials,
            "escapes": self.escapes,
            "estimate": self.estimate,
            "standard_error": self.standard_error,
        })
    }
}

/// Monte Carlo estimate of [`escape_probability`].
pub fn simulate_escape(
    ball: &SchreierBall,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if r == 0 || r > ball.radius() || trials == 0 {
        return Err(LabError::InvalidRadius(r));
    }
    let graph = ball.graph();
    let base = ball.base();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut escapes = 0;
    for _ in 0..trials {
        let mut v = base;
        loop {
            let nb = graph.neighbors(v);
            v = nb[rng.gen_range(0..nb.len())];
            if ball.dist(v) >= r {
                escapes += 1;
                break;
            }
            if v == base {
                break;
            }
        }
    }
    let estimate = escapes as f64 / trials as f64;
    Ok(SimulationReport {
        radius: r,
        trials,
        escapes,
        estimate,
        standard_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
    })
}
