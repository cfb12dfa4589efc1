//! Finite pieces of orbit Schreier graphs: balls around a point and the
//! level-n quotients on binary words.
//!
//! A ball truncates an infinite graph, so any set-level statement is only
//! certified for vertices at distance at most `radius - margin` from the
//! center. Windows built from finite graphs (level graphs, synthetic
//! fixtures) are `closed`: every vertex is certified.

use std::collections::{BTreeSet, HashMap};

use serde_json::json;

use crate::action::{all_words, ActionSystem};
use crate::error::{LabError, Result};
use crate::graph::{Graph, LabeledEdge, UNREACHABLE};
use crate::point::{bits_to_string, BoundaryPoint};

pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct SchreierBall {
    name: String,
    graph: Graph,
    base: usize,
    dist: Vec<usize>,
    radius: usize,
    closed: bool,
    points: Vec<BoundaryPoint>,
    index: HashMap<BoundaryPoint, usize>,
    generator_names: Vec<String>,
    steps: Vec<Vec<Option<usize>>>,
    level: Option<usize>,
}

impl SchreierBall {
    /// A closed window over an arbitrary finite graph; `radius` becomes the
    /// eccentricity of `base`.
    pub fn from_graph(name: impl Into<String>, graph: Graph, base: usize) -> Result<Self> {
        let dist = graph.bfs(base);
        if dist.contains(&UNREACHABLE) {
            return Err(LabError::NotConnected);
        }
        let radius = dist.iter().copied().max().unwrap_or(0);
        Ok(SchreierBall {
            name: name.into(),
            graph,
            base,
            dist,
            radius,
            closed: true,
            points: Vec::new(),
            index: HashMap::new(),
            generator_names: Vec::new(),
            steps: Vec::new(),
            level: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn dist(&self, v: usize) -> usize {
        self.dist[v]
    }

    pub fn distances(&self) -> &[usize] {
        &self.dist
    }

    /// True when `v` lies at least `margin` inside the rim.
    pub fn is_certified(&self, v: usize, margin: usize) -> bool {
        self.closed || self.dist[v] + margin <= self.radius
    }

    pub fn certified(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.is_certified(v, margin))
            .collect()
    }

    pub fn has_points(&self) -> bool {
        !self.points.is_empty()
    }

    pub fn point(&self, v: usize) -> Result<&BoundaryPoint> {
        self.points.get(v).ok_or(LabError::NoPoints(v))
    }

    pub fn vertex_of(&self, p: &BoundaryPoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Word length when the window is a level graph.
    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn generator_names(&self) -> &[String] {
        &self.generator_names
    }

    /// Image of `v` under generator `g` if it lies in the window.
    pub fn step(&self, v: usize, g: usize) -> Option<usize> {
        self.steps.get(v).and_then(|s| s[g])
    }

    pub fn to_dot(&self, no_loops: bool) -> String {
        let mut out = String::from("digraph schreier {\n");
        for (v, label) in self.graph.labels().iter().enumerate() {
            out.push_str(&format!("  {v} [label=\"{label}\"];\n"));
        }
        for e in self.graph.edges() {
            if no_loops && e.from == e.to {
                continue;
            }
            out.push_str(&format!(
                "  {} -> {} [label=\"{}\"];\n",
                e.from, e.to, e.label
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<serde_json::Value> = self
            .graph
            .edges()
            .iter()
            .map(|e| json!([e.from, e.label, e.to]))
            .collect();
        json!({
            "name": self.name,
            "base": self.base,
            "radius": self.radius,
            "closed": self.closed,
            "vertices": self.graph.labels(),
            "edges": edges,
            "dist": self.dist,
        })
    }
}

/// Ball of the given radius around the action's basepoint.
pub fn build_ball(action: &ActionSystem, radius: usize, cap: usize) -> Result<SchreierBall> {
    build_ball_at(action, action.basepoint(), radius, cap)
}

/// Ball around an arbitrary point. Vertices are numbered in BFS order, each
/// layer sorted by canonical form.
pub fn build_ball_at(
    action: &ActionSystem,
    center: &BoundaryPoint,
    radius: usize,
    cap: usize,
) -> Result<SchreierBall> {
    let k = action.generators().len();
    let mut points = vec![center.clone()];
    let mut index: HashMap<BoundaryPoint, usize> = HashMap::from([(center.clone(), 0)]);
    let mut dist = vec![0usize];
    let mut images: Vec<Vec<BoundaryPoint>> = Vec::new();
    let mut layer = vec![0usize];
    for d in 0..radius {
        let mut fresh: BTreeSet<BoundaryPoint> = BTreeSet::new();
        for &v in &layer {
            let imgs: Vec<BoundaryPoint> = (0..k)
                .map(|g| action.apply_generator(g, &points[v]))
                .collect();
            for img in &imgs {
                if !index.contains_key(img) {
                    fresh.insert(img.clone());
                }
            }
            images.push(imgs);
        }
        if points.len() + fresh.len() > cap {
            return Err(LabError::BallTooLarge(cap));
        }
        layer = Vec::with_capacity(fresh.len());
        for p in fresh {
            let v = points.len();
            index.insert(p.clone(), v);
            points.push(p);
            dist.push(d + 1);
            layer.push(v);
        }
    }
    for &v in &layer {
        images.push(
            (0..k)
                .map(|g| action.apply_generator(g, &points[v]))
                .collect(),
        );
    }
    let names = action.generator_names();
    let steps: Vec<Vec<Option<usize>>> = images
        .iter()
        .map(|imgs| imgs.iter().map(|p| index.get(p).copied()).collect())
        .collect();
    let mut edges = Vec::new();
    for (v, row) in steps.iter().enumerate() {
        for (g, w) in row.iter().enumerate() {
            if let Some(w) = *w {
                edges.push(LabeledEdge {
                    from: v,
                    to: w,
                    label: names[g].clone(),
                });
            }
        }
    }
    let labels = points.iter().map(|p| p.to_string()).collect();
    Ok(SchreierBall {
        name: action.name().to_string(),
        graph: Graph::new(labels, edges),
        base: 0,
        dist,
        radius,
        closed: false,
        points,
        index,
        generator_names: names,
        steps,
        level: None,
    })
}

/// The action on binary words of length `level`; word `w` has index
/// `Σ w_i 2^i`.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    level: usize,
    graph: Graph,
    generator_names: Vec<String>,
    perms: Vec<Vec<usize>>,
}

pub fn word_index(word: &[u8]) -> usize {
    word.iter()
        .enumerate()
        .map(|(i, &b)| (b as usize) << i)
        .sum()
}

pub fn index_word(index: usize, level: usize) -> Vec<u8> {
    (0..level).map(|i| ((index >> i) & 1) as u8).collect()
}

pub fn build_level_graph(action: &ActionSystem, level: usize, cap: usize) -> Result<LevelGraph> {
    if level >= usize::BITS as usize - 1 || (1usize << level) > cap {
        return Err(LabError::BallTooLarge(cap));
    }
    if level < action.piece_depth() {
        return Err(LabError::LevelTooShallow {
            level,
            depth: action.piece_depth(),
        });
    }
    let n = 1usize << level;
    let names = action.generator_names();
    let mut perms = Vec::with_capacity(names.len());
    for (g, name) in names.iter().enumerate() {
        let mut perm = vec![0usize; n];
        let mut hit = vec![false; n];
        for (i, word) in all_words(level).enumerate() {
            let j = word_index(&action.apply_generator_prefix(g, &word)?);
            if hit[j] {
                return Err(LabError::InvalidAutomaton(format!(
                    "generator `{}` is not a permutation of level {level}",
                    name
                )));
            }
            hit[j] = true;
            perm[i] = j;
        }
        perms.push(perm);
    }
    let labels = (0..n)
        .map(|i| bits_to_string(&index_word(i, level)))
        .collect();
    let mut edges = Vec::new();
    for v in 0..n {
        for (g, perm) in perms.iter().enumerate() {
            edges.push(LabeledEdge {
                from: v,
                to: perm[v],
                label: names[g].clone(),
            });
        }
    }
    Ok(LevelGraph {
        level,
        graph: Graph::new(labels, edges),
        generator_names: names,
        perms,
    })
}

impl LevelGraph {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn permutation(&self, g: usize) -> &[usize] {
        &self.perms[g]
    }

    /// True when the underlying simple graph is a path through all vertices.
    pub fn is_simple_path(&self) -> bool {
        let n = self.graph.len();
        let ends = (0..n).filter(|&v| self.graph.degree(v) == 1).count();
        let inner = (0..n).filter(|&v| self.graph.degree(v) == 2).count();
        let edges: usize = (0..n).map(|v| self.graph.degree(v)).sum::<usize>() / 2;
        self.graph.is_connected() && edges + 1 == n && (n == 1 || (ends == 2 && ends + inner == n))
    }

    /// A closed window on the level graph centered at `root`.
    pub fn as_window(&self, name: &str, root: &[u8]) -> Result<SchreierBall> {
        let mut ball = SchreierBall::from_graph(
            format!("{name}-level-{}", self.level),
            self.graph.clone(),
            word_index(root),
        )?;
        ball.generator_names = self.generator_names.clone();
        ball.steps = (0..self.graph.len())
            .map(|v| self.perms.iter().map(|p| Some(p[v])).collect())
            .collect();
        ball.level = Some(self.level);
        Ok(ball)
    }
}

/// ∂W in a ball, split into vertices whose status is certified and vertices
/// of W too close to the rim to decide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryReport {
    pub certified: BTreeSet<usize>,
    pub rim: BTreeSet<usize>,
}

pub fn boundary_set(graph: &Graph, set: &BTreeSet<usize>) -> BTreeSet<usize> {
    graph.boundary(set)
}

pub fn neighborhood_set(graph: &Graph, set: &BTreeSet<usize>, k: usize) -> BTreeSet<usize> {
    graph.neighborhood(set, k)
}

pub fn certified_boundary(
    ball: &SchreierBall,
    set: &BTreeSet<usize>,
    margin: usize,
) -> BoundaryReport {
    let margin = margin.max(1);
    let (inside, rim): (BTreeSet<usize>, BTreeSet<usize>) = set
        .iter()
        .copied()
        .partition(|&v| ball.is_certified(v, margin));
    let certified = inside
        .into_iter()
        .filter(|&x| ball.graph().neighbors(x).iter().any(|w| !set.contains(w)))
        .collect();
    BoundaryReport { certified, rim }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::builtin_action;

    fn int_point(n: i64) -> BoundaryPoint {
        let tail = if n < 0 { 1 } else { 0 };
        let mut bits = Vec::new();
        let mut v = n;
        while v != 0 && v != -1 {
            bits.push((v & 1) as u8);
            v >>= 1;
        }
        BoundaryPoint::new(bits, vec![tail]).unwrap()
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn odometer_ball_is_integer_segment() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 3, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(ball.len(), 7);
        for n in -3i64..=3 {
            let v = ball.vertex_of(&int_point(n)).expect("integer in ball");
            assert_eq!(ball.dist(v), n.unsigned_abs() as usize);
        }
        assert_eq!(
            ball.dist(ball.vertex_of(&BoundaryPoint::constant(0)).unwrap()),
            0
        );
        let simple_edges: usize = (0..7).map(|v| ball.graph().degree(v)).sum::<usize>() / 2;
        assert_eq!(simple_edges, 6);
    }

    #[test]
    fn radius_zero_is_single_vertex() {
        for name in crate::action::BUILTIN_ACTIONS {
            let ball = build_ball(&builtin_action(name).unwrap(), 0, 10).unwrap();
            assert_eq!(ball.len(), 1);
            assert!(ball.graph().edges().iter().all(|e| e.from == e.to));
        }
    }

    #[test]
    fn grigorchuk_ball_matches_closure() {
        let g = builtin_action("grigorchuk").unwrap();
        let center = BoundaryPoint::constant(1);
        let ball = build_ball_at(&g, &center, 2, DEFAULT_VERTEX_CAP).unwrap();
        let mut closure: BTreeSet<BoundaryPoint> = BTreeSet::from([center.clone()]);
        let mut frontier = vec![center];
        for _ in 0..2 {
            let mut next = Vec::new();
            for p in &frontier {
                for gi in 0..4 {
                    let q = g.apply_generator(gi, p);
                    if closure.insert(q.clone()) {
                        next.push(q);
                    }
                }
            }
            frontier = next;
        }
        let got: BTreeSet<BoundaryPoint> = (0..ball.len())
            .map(|v| ball.point(v).unwrap().clone())
            .collect();
        assert_eq!(got, closure);
    }

    #[test]
    fn ball_cap_is_enforced() {
        let o = builtin_action("odometer").unwrap();
        assert_eq!(
            build_ball(&o, 10, 5).unwrap_err(),
            LabError::BallTooLarge(5)
        );
    }

    #[test]
    fn ball_invariants_and_monotonicity() {
        for name in crate::action::BUILTIN_ACTIONS {
            let act = builtin_action(name).unwrap();
            let small = build_ball(&act, 6, DEFAULT_VERTEX_CAP).unwrap();
            let big = build_ball(&act, 7, DEFAULT_VERTEX_CAP).unwrap();
            for v in 0..small.len() {
                let w = big.vertex_of(small.point(v).unwrap()).unwrap();
                assert_eq!(big.dist(w), small.dist(v));
                assert!(small.dist(v) <= 6);
                if small.dist(v) < 6 {
                    assert!((0..act.generators().len()).all(|g| small.step(v, g).is_some()));
                }
            }
            for e in small.graph().edges() {
                assert!(small.dist(e.to) <= small.dist(e.from) + 1);
                let g = act.generator_index(&e.label).unwrap();
                assert_eq!(small.step(e.to, act.inverse_of(g)), Some(e.from));
            }
        }
    }

    #[test]
    fn grigorchuk_level_two_path() {
        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 2, DEFAULT_VERTEX_CAP).unwrap();
        let v = |s: &str| word_index(&crate::point::parse_bits(s).unwrap());
        let a = g.generator_index("a").unwrap();
        let b = g.generator_index("b").unwrap();
        let c = g.generator_index("c").unwrap();
        let d = g.generator_index("d").unwrap();
        assert_eq!(lg.permutation(a)[v("00")], v("10"));
        assert_eq!(lg.permutation(a)[v("01")], v("11"));
        assert_eq!(lg.permutation(b)[v("00")], v("01"));
        assert_eq!(lg.permutation(c)[v("00")], v("01"));
        assert_eq!(lg.permutation(d)[v("00")], v("00"));
        assert_eq!(lg.permutation(b)[v("10")], v("10"));
        assert_eq!(
            lg.graph().neighbors(v("00")),
            &[v("10"), v("01")]
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()[..]
        );
        assert!(lg.is_simple_path());
    }

    #[test]
    fn level_graph_shapes() {
        let d = builtin_action("dihedral").unwrap();
        assert!(build_level_graph(&d, 3, DEFAULT_VERTEX_CAP)
            .unwrap()
            .is_simple_path());
        let o = builtin_action("odometer").unwrap();
        let lg = build_level_graph(&o, 2, DEFAULT_VERTEX_CAP).unwrap();
        assert!(!lg.is_simple_path());
        assert!((0..4).all(|v| lg.graph().degree(v) == 2));
        let t = o.generator_index("t").unwrap();
        for n in 0..4usize {
            assert_eq!(
                lg.permutation(t)[word_index(&index_word(n, 2))],
                (n + 1) % 4
            );
        }
        assert_eq!(
            build_level_graph(&o, 12, 100).unwrap_err(),
            LabError::BallTooLarge(100)
        );
    }

    #[test]
    fn rim_aware_boundary() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 3, DEFAULT_VERTEX_CAP).unwrap();
        let w: BTreeSet<usize> = (0..=3)
            .map(|n| ball.vertex_of(&int_point(n)).unwrap())
            .collect();
        let report = certified_boundary(&ball, &w, 1);
        assert_eq!(
            report.certified,
            set(&[ball.vertex_of(&int_point(0)).unwrap()])
        );
        assert_eq!(report.rim, set(&[ball.vertex_of(&int_point(3)).unwrap()]));
    }

    #[test]
    fn odometer_neighborhood() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 5, DEFAULT_VERTEX_CAP).unwrap();
        let zero = set(&[ball.vertex_of(&int_point(0)).unwrap()]);
        let expected: BTreeSet<usize> = (-3..=3)
            .map(|n| ball.vertex_of(&int_point(n)).unwrap())
            .collect();
        assert_eq!(neighborhood_set(ball.graph(), &zero, 3), expected);
        assert_eq!(neighborhood_set(ball.graph(), &zero, 0), zero);
    }

    #[test]
    fn neighborhood_equals_word_neighborhood() {
        // Γ_k({base}) equals the S^k-orbit of the basepoint.
        let g = builtin_action("grigorchuk").unwrap();
        let ball = build_ball(&g, 8, DEFAULT_VERTEX_CAP).unwrap();
        let k = 3;
        let mut reach: BTreeSet<usize> = BTreeSet::from([ball.base()]);
        for _ in 0..k {
            let next: Vec<usize> = reach
                .iter()
                .flat_map(|&v| (0..4).map(move |gi| (v, gi)))
                .filter_map(|(v, gi)| ball.step(v, gi))
                .collect();
            reach.extend(next);
        }
        assert_eq!(
            neighborhood_set(ball.graph(), &BTreeSet::from([ball.base()]), k),
            reach
        );
    }

    #[test]
    fn exports_are_stable() {
        let o = builtin_action("odometer").unwrap();
        let a = build_ball(&o, 2, 100).unwrap();
        let b = build_ball(&o, 2, 100).unwrap();
        assert_eq!(a.to_dot(false), b.to_dot(false));
        assert!(a.to_dot(true).contains("label=\"(0)\""));
        assert_eq!(a.to_json()["vertices"].as_array().unwrap().len(), 5);
    }
}
