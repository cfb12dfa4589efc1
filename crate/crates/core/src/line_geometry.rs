//! Quasi-isometry charts to ℤ, diametral geodesics and projections.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::graph::{Graph, UNREACHABLE};
use crate::scalar::Scalar;
use crate::schreier::SchreierBall;

/// Pairs closer than this to the rim are excluded from certification.
pub const QI_MARGIN: usize = 1;

/// A candidate quasi-isometry f: V → ℤ with fitted constants.
#[derive(Clone, Debug)]
pub struct LineChart<S: Scalar> {
    pub f: Vec<i64>,
    pub certified: Vec<bool>,
    pub anchor: usize,
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
    pub m: S,
    /// Distinct `(d(u,v), |f(u) - f(v)|)` over certified pairs.
    profile: BTreeSet<(usize, usize)>,
}

pub fn m_constant<S: Scalar>(alpha: &S, beta: &S) -> S {
    alpha.clone() * alpha.clone() + S::from_int(2) * alpha.clone() * beta.clone()
}

fn half_ceil<S: Scalar>(x: &S) -> S {
    let twice = x.clone() * S::from_int(2);
    S::ratio(twice.ceil_int(), 2)
}

fn pair_profile(graph: &Graph, f: &[i64], certified: &[bool]) -> BTreeSet<(usize, usize)> {
    let sources: Vec<usize> = (0..graph.len()).filter(|&v| certified[v]).collect();
    sources
        .par_iter()
        .map(|&s| {
            let dist = graph.bfs(s);
            let mut local = BTreeSet::new();
            for &t in sources.iter().filter(|&&t| t > s) {
                local.insert((dist[t], f[s].abs_diff(f[t]) as usize));
            }
            local
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        })
}

fn gap_radius(f: &[i64], certified: &[bool]) -> i64 {
    let image: BTreeSet<i64> = f
        .iter()
        .zip(certified)
        .filter(|(_, &c)| c)
        .map(|(&x, _)| x)
        .collect();
    let values: Vec<i64> = image.into_iter().collect();
    values
        .windows(2)
        .map(|w| (w[1] - w[0]) / 2)
        .max()
        .unwrap_or(0)
}

impl<S: Scalar> LineChart<S> {
    /// A chart with externally chosen constants, for negative controls.
    pub fn from_parts(graph: &Graph, f: Vec<i64>, certified: Vec<bool>, alpha: S, beta: S) -> Self {
        let profile = pair_profile(graph, &f, &certified);
        let gamma = S::from_int(gap_radius(&f, &certified));
        let m = m_constant(&alpha, &beta);
        LineChart {
            f,
            certified,
            anchor: 0,
            alpha,
            beta,
            gamma,
            m,
            profile,
        }
    }

    /// Smallest half-integer β making both inequalities hold at `alpha`.
    pub fn min_beta(&self, alpha: &S) -> S {
        let mut need = S::zero();
        for &(d, df) in &self.profile {
            let (d, df) = (S::from_count(d), S::from_count(df));
            let lower = d.clone() / alpha.clone() - df.clone();
            let upper = df - alpha.clone() * d;
            need = need.max_of(lower).max_of(upper);
        }
        half_ceil(&need)
    }

    pub fn satisfies(&self, alpha: &S, beta: &S) -> bool {
        self.profile.iter().all(|&(d, df)| {
            let (d, df) = (S::from_count(d), S::from_count(df));
            d.clone() / alpha.clone() - beta.clone() <= df && df <= alpha.clone() * d + beta.clone()
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "alpha": self.alpha.to_string(),
            "beta": self.beta.to_string(),
            "gamma": self.gamma.to_string(),
            "m": self.m.to_string(),
        })
    }

    /// Flips the sign of `f` when most shared vertices disagree with `prev`
    /// on which side of the base they lie. Vertices are matched by label.
    pub fn align_with(&mut self, graph: &Graph, prev: &LineChart<S>, prev_graph: &Graph) -> bool {
        let prev_f: HashMap<&str, i64> = (0..prev_graph.len())
            .map(|v| (prev_graph.label(v), prev.f[v]))
            .collect();
        let (mut agree, mut disagree) = (0usize, 0usize);
        for v in 0..graph.len() {
            if let Some(&pf) = prev_f.get(graph.label(v)) {
                match (pf.signum() * self.f[v].signum()).cmp(&0) {
                    std::cmp::Ordering::Greater => agree += 1,
                    std::cmp::Ordering::Less => disagree += 1,
                    std::cmp::Ordering::Equal => {}
                }
            }
        }
        if disagree > agree {
            self.f.iter_mut().for_each(|x| *x = -*x);
            true
        } else {
            false
        }
    }
}

fn farthest(dist: &[usize]) -> usize {
    let mut best = 0;
    for (v, &d) in dist.iter().enumerate() {
        if d != UNREACHABLE && d > dist[best] {
            best = v;
        }
    }
    best
}

/// The −∞ end used by every chart: the vertex farthest from the base
/// (smallest index on ties), replaced by the far end of a second sweep when
/// the first generator that moves the base would otherwise decrease f.
pub fn chart_anchor(ball: &SchreierBall) -> usize {
    let graph = ball.graph();
    let base = ball.base();
    let u = farthest(&graph.bfs(base));
    let from_u = graph.bfs(u);
    let moved = (0..ball.generator_names().len())
        .filter_map(|g| ball.step(base, g))
        .find(|&w| from_u[w] != from_u[base]);
    match moved {
        Some(w) if from_u[w] < from_u[base] => farthest(&from_u),
        _ => u,
    }
}

pub fn fit_line_chart<S: Scalar>(ball: &SchreierBall) -> Result<LineChart<S>> {
    let graph = ball.graph();
    if graph.len() < 2 {
        return Err(LabError::Degenerate);
    }
    if !graph.is_connected() {
        return Err(LabError::NotConnected);
    }
    let anchor = chart_anchor(ball);
    let from_anchor = graph.bfs(anchor);
    let offset = from_anchor[ball.base()] as i64;
    let f: Vec<i64> = from_anchor.iter().map(|&d| d as i64 - offset).collect();
    let certified: Vec<bool> = (0..graph.len())
        .map(|v| ball.is_certified(v, QI_MARGIN))
        .collect();
    let mut chart = LineChart::from_parts(graph, f, certified, S::one(), S::zero());
    chart.anchor = anchor;
    // α = 1 is the least grid value and always admits a β because f is
    // 1-Lipschitz, so the lexicographic minimum has α = 1.
    let alpha = S::one();
    chart.beta = chart.min_beta(&alpha);
    chart.m = m_constant(&alpha, &chart.beta);
    chart.alpha = alpha;
    Ok(chart)
}

#[derive(Clone, Debug)]
pub struct FiberReport<S: Scalar> {
    pub max_diameter: usize,
    pub bound: S,
    pub pass: bool,
    pub worst_level: Option<i64>,
}

impl<S: Scalar> FiberReport<S> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "max_fiber_diameter": self.max_diameter,
            "bound": self.bound.to_string(),
            "worst_level": self.worst_level,
            "pass": self.pass,
        })
    }
}

/// Largest diameter of a fiber f⁻¹(n) over certified vertices, against αβ.
pub fn fiber_diameter_check<S: Scalar>(graph: &Graph, chart: &LineChart<S>) -> FiberReport<S> {
    let mut fibers: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for v in (0..graph.len()).filter(|&v| chart.certified[v]) {
        fibers.entry(chart.f[v]).or_default().push(v);
    }
    let diameters: Vec<(i64, usize)> = fibers
        .par_iter()
        .map(|(&level, members)| {
            let diam = members
                .iter()
                .map(|&s| {
                    let dist = graph.bfs(s);
                    members.iter().map(|&t| dist[t]).max().unwrap_or(0)
                })
                .max()
                .unwrap_or(0);
            (level, diam)
        })
        .collect();
    let (worst_level, max_diameter) =
        diameters.iter().fold(
            (None, 0),
            |(lv, best), &(l, d)| if d > best { (Some(l), d) } else { (lv, best) },
        );
    let bound = chart.alpha.clone() * chart.beta.clone();
    let pass = S::from_count(max_diameter) <= bound;
    FiberReport {
        max_diameter,
        bound,
        pass,
        worst_level,
    }
}

/// A shortest path v₀…v_L; v₀ is the −∞ end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicSegment {
    pub vertices: Vec<usize>,
}

impl GeodesicSegment {
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() <= 1
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    /// Checks d(v_i, v_j) = |i - j| for all pairs.
    pub fn is_geodesic(&self, graph: &Graph) -> bool {
        self.vertices.iter().enumerate().all(|(i, &vi)| {
            let dist = graph.bfs(vi);
            self.vertices
                .iter()
                .enumerate()
                .all(|(j, &vj)| dist[vj] == i.abs_diff(j))
        })
    }
}

/// Double BFS from the base, starting at the chart anchor so that the
/// orientation matches [`fit_line_chart`].
pub fn diametral_geodesic(ball: &SchreierBall) -> Result<GeodesicSegment> {
    let graph = ball.graph();
    if !graph.is_connected() {
        return Err(LabError::NotConnected);
    }
    let u = chart_anchor(ball);
    let w = farthest(&graph.bfs(u));
    let vertices = graph.shortest_path(u, w).ok_or(LabError::NotConnected)?;
    Ok(GeodesicSegment { vertices })
}

/// Largest n such that a geodesic of length 2n has midpoint `v`, found by
/// extending endpoint pairs one sphere at a time. Only certified vertices
/// may serve as endpoints.
pub fn max_geodesic_midpoint(ball: &SchreierBall, v: usize, margin: usize) -> usize {
    let graph = ball.graph();
    let from_v = graph.bfs(v);
    let mut cache: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::from([(v, v)]);
    let mut n = 0;
    loop {
        let children = |x: usize| -> Vec<usize> {
            graph
                .neighbors(x)
                .iter()
                .copied()
                .filter(|&y| from_v[y] == n + 1 && ball.is_certified(y, margin))
                .collect()
        };
        let mut next = BTreeSet::new();
        for &(a, b) in &pairs {
            let (ca, cb) = (children(a), children(b));
            for &x in &ca {
                let dx = cache.entry(x).or_insert_with(|| graph.bfs(x)).clone();
                for &y in &cb {
                    if dx[y] == 2 * (n + 1) {
                        next.insert((x.min(y), x.max(y)));
                    }
                }
            }
        }
        if next.is_empty() {
            return n;
        }
        pairs = next;
        n += 1;
    }
}

/// The vertex of `line` closest to `x`, ties broken toward −∞.
pub fn project_to_geodesic(graph: &Graph, line: &GeodesicSegment, x: usize) -> usize {
    let dist = graph.bfs(x);
    *line
        .vertices
        .iter()
        .min_by_key(|&&v| dist[v])
        .expect("geodesic has at least one vertex")
}

#[derive(Clone, Debug)]
pub struct CoveringReport<S: Scalar> {
    pub max_distance: usize,
    pub m: S,
    pub pass: bool,
}

impl<S: Scalar> CoveringReport<S> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "max_distance": self.max_distance, "m": self.m.to_string(), "pass": self.pass })
    }
}

pub fn m_covering_check<S: Scalar>(
    ball: &SchreierBall,
    line: &GeodesicSegment,
    m: &S,
    margin: usize,
) -> CoveringReport<S> {
    let dist = ball.graph().bfs_from_set(line.vertices.iter().copied());
    let max_distance = (0..ball.len())
        .filter(|&v| ball.is_certified(v, margin))
        .map(|v| dist[v])
        .max()
        .unwrap_or(0);
    let pass = max_distance != UNREACHABLE && S::from_count(max_distance) <= *m;
    CoveringReport {
        max_distance,
        m: m.clone(),
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::builtin_action;
    use crate::schreier::{build_ball, build_level_graph, DEFAULT_VERTEX_CAP};
    use crate::Exact;

    fn q(n: i64, d: i64) -> Exact {
        Exact::ratio(n, d)
    }

    fn window(graph: Graph, base: usize) -> SchreierBall {
        SchreierBall::from_graph("fixture", graph, base).unwrap()
    }

    /// Exhaustive check of both inequalities with explicit all-pairs BFS.
    fn oracle_ok(graph: &Graph, chart: &LineChart<Exact>, alpha: &Exact, beta: &Exact) -> bool {
        let n = graph.len();
        (0..n).filter(|&u| chart.certified[u]).all(|u| {
            let dist = graph.bfs(u);
            (0..n).filter(|&v| chart.certified[v]).all(|v| {
                let d = Exact::from_count(dist[v]);
                let df = Exact::from_int((chart.f[u] - chart.f[v]).abs());
                d.clone() / alpha.clone() - beta.clone() <= df
                    && df <= alpha.clone() * d + beta.clone()
            })
        })
    }

    #[test]
    fn odometer_chart_is_exact() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 3, DEFAULT_VERTEX_CAP).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        assert_eq!(
            (chart.alpha.clone(), chart.beta.clone()),
            (q(1, 1), q(0, 1))
        );
        assert_eq!((chart.gamma.clone(), chart.m.clone()), (q(0, 1), q(1, 1)));
        assert!(oracle_ok(ball.graph(), &chart, &chart.alpha, &chart.beta));
        assert_eq!(chart.f[ball.base()], 0);
    }

    #[test]
    fn single_edge_and_formula() {
        let chart: LineChart<Exact> = fit_line_chart(&window(Graph::path(2), 0)).unwrap();
        assert_eq!(chart.m, q(1, 1));
        assert_eq!(m_constant(&q(2, 1), &q(3, 1)), q(16, 1));
        assert_eq!(m_constant(&2.0f64, &3.0), 16.0);
        assert!(matches!(
            fit_line_chart::<Exact>(&window(Graph::path(1), 0)),
            Err(LabError::Degenerate)
        ));
    }

    #[test]
    fn fitted_beta_is_tight_and_valid() {
        // A cycle of length 8 folds onto the line: β > 0 is needed.
        let edges: Vec<(usize, usize)> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        let ball = window(Graph::from_edges(8, &edges), 0);
        let chart: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        assert!(chart.beta > q(0, 1));
        assert!(oracle_ok(ball.graph(), &chart, &chart.alpha, &chart.beta));
        let smaller = chart.beta.clone() - q(1, 2);
        assert!(!oracle_ok(ball.graph(), &chart, &chart.alpha, &smaller));
        assert!(!chart.satisfies(&chart.alpha, &smaller));
    }

    #[test]
    fn chart_is_lipschitz_on_edges() {
        let g = builtin_action("grigorchuk").unwrap();
        let ball = build_ball(&g, 40, DEFAULT_VERTEX_CAP).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        let bound = chart.alpha.clone() + chart.beta.clone();
        for e in ball.graph().edges() {
            assert!(Exact::from_int((chart.f[e.from] - chart.f[e.to]).abs()) <= bound);
        }
    }

    #[test]
    fn scalar_types_agree() {
        let g = builtin_action("dihedral").unwrap();
        let ball = build_ball(&g, 20, DEFAULT_VERTEX_CAP).unwrap();
        let exact: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        let float: LineChart<f64> = fit_line_chart(&ball).unwrap();
        assert_eq!(exact.m.to_f64_lossy(), float.m);
        assert_eq!(exact.f, float.f);
    }

    #[test]
    fn fiber_checks() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 3, DEFAULT_VERTEX_CAP).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        let report = fiber_diameter_check(ball.graph(), &chart);
        assert!(report.pass && report.max_diameter == 0);

        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 8, DEFAULT_VERTEX_CAP).unwrap();
        let win = lg.as_window("grigorchuk", &[0; 8]).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&win).unwrap();
        let report = fiber_diameter_check(win.graph(), &chart);
        let mut direct = 0;
        for u in 0..win.len() {
            let dist = win.graph().bfs(u);
            for (v, &d) in dist.iter().enumerate() {
                if chart.f[u] == chart.f[v] {
                    direct = direct.max(d);
                }
            }
        }
        assert_eq!(report.max_diameter, direct);
        assert!(report.pass);

        // Fat fiber: two leaves at the same height with constants claiming αβ = 0.
        let graph = Graph::from_edges(4, &[(0, 1), (1, 2), (1, 3)]);
        let chart =
            LineChart::from_parts(&graph, vec![0, 1, 2, 2], vec![true; 4], q(1, 1), q(0, 1));
        let report = fiber_diameter_check(&graph, &chart);
        assert!(!report.pass);
        assert_eq!(report.max_diameter, 2);
    }

    #[test]
    fn diametral_geodesics() {
        let path = window(Graph::path(7), 3);
        let seg = diametral_geodesic(&path).unwrap();
        assert_eq!(seg.len(), 6);
        assert!(seg.is_geodesic(path.graph()));

        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 10, DEFAULT_VERTEX_CAP).unwrap();
        let seg = diametral_geodesic(&ball).unwrap();
        let diameter = (0..ball.len())
            .map(|v| ball.graph().bfs(v).into_iter().max().unwrap())
            .max()
            .unwrap();
        assert_eq!((seg.len(), diameter), (20, 20));
        let chart: LineChart<Exact> = fit_line_chart(&ball).unwrap();
        assert!(chart.f[seg.vertices[0]] < chart.f[*seg.vertices.last().unwrap()]);

        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 6, DEFAULT_VERTEX_CAP).unwrap();
        let seg = diametral_geodesic(&lg.as_window("g", &[0; 6]).unwrap()).unwrap();
        assert_eq!(seg.len(), 63);
    }

    /// Enumerates all pairs on spheres around `v` directly.
    fn midpoint_oracle(graph: &Graph, v: usize) -> usize {
        let from_v = graph.bfs(v);
        let mut best = 0;
        for a in 0..graph.len() {
            let da = graph.bfs(a);
            for b in 0..graph.len() {
                if from_v[a] == from_v[b] && da[b] == 2 * from_v[a] {
                    best = best.max(from_v[a]);
                }
            }
        }
        best
    }

    #[test]
    fn midpoints() {
        let path = window(Graph::path(9), 4);
        assert_eq!(max_geodesic_midpoint(&path, 4, 0), 4);
        assert_eq!(max_geodesic_midpoint(&path, 0, 0), 0);
        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 3, DEFAULT_VERTEX_CAP).unwrap();
        let win = lg.as_window("g", &[0; 3]).unwrap();
        let seg = diametral_geodesic(&win).unwrap();
        let v = seg.vertices[3];
        assert_eq!(max_geodesic_midpoint(&win, v, 0), 3);
        for u in 0..win.len() {
            assert_eq!(
                max_geodesic_midpoint(&win, u, 0),
                midpoint_oracle(win.graph(), u)
            );
        }
    }

    #[test]
    fn midpoint_grows_with_radius() {
        for name in crate::action::BUILTIN_ACTIONS {
            let act = builtin_action(name).unwrap();
            let mut last = 0;
            for r in [4, 8, 16, 32] {
                let ball = build_ball(&act, r, DEFAULT_VERTEX_CAP).unwrap();
                let n = max_geodesic_midpoint(&ball, ball.base(), 0);
                assert!(n >= last, "{name} radius {r}");
                last = n;
            }
            assert!(last >= 16, "{name}: midpoint {last}");
        }
    }

    #[test]
    fn projections() {
        // ℓ = 0..=6, x = 7 adjacent to v3 and v5.
        let mut edges: Vec<(usize, usize)> = (1..7).map(|i| (i - 1, i)).collect();
        edges.extend([(7, 3), (7, 5)]);
        let graph = Graph::from_edges(8, &edges);
        let line = GeodesicSegment {
            vertices: (0..7).collect(),
        };
        assert_eq!(project_to_geodesic(&graph, &line, 7), 3);
        assert_eq!(project_to_geodesic(&graph, &line, 4), 4);

        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 5, DEFAULT_VERTEX_CAP).unwrap();
        let seg = diametral_geodesic(&ball).unwrap();
        for v in 0..ball.len() {
            assert_eq!(project_to_geodesic(ball.graph(), &seg, v), v);
        }
    }

    #[test]
    fn covering() {
        let o = builtin_action("odometer").unwrap();
        let ball = build_ball(&o, 5, DEFAULT_VERTEX_CAP).unwrap();
        let seg = diametral_geodesic(&ball).unwrap();
        let report = m_covering_check(&ball, &seg, &q(1, 1), QI_MARGIN);
        assert!(report.pass && report.max_distance == 0);

        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 9, DEFAULT_VERTEX_CAP).unwrap();
        let win = lg.as_window("g", &[0; 9]).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&win).unwrap();
        let seg = diametral_geodesic(&win).unwrap();
        assert!(m_covering_check(&win, &seg, &chart.m, 0).pass);

        let star = window(Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]), 0);
        let line = GeodesicSegment {
            vertices: vec![1, 0, 2],
        };
        let report = m_covering_check(&star, &line, &q(0, 1), 0);
        assert!(!report.pass && report.max_distance == 1);
    }

    #[test]
    fn orientation_alignment() {
        let o = builtin_action("odometer").unwrap();
        let small = build_ball(&o, 4, DEFAULT_VERTEX_CAP).unwrap();
        let big = build_ball(&o, 6, DEFAULT_VERTEX_CAP).unwrap();
        let prev: LineChart<Exact> = fit_line_chart(&small).unwrap();
        let mut next: LineChart<Exact> = fit_line_chart(&big).unwrap();
        next.f.iter_mut().for_each(|x| *x = -*x);
        assert!(next.align_with(big.graph(), &prev, small.graph()));
        assert!(!next.align_with(big.graph(), &prev, small.graph()));
    }
}
