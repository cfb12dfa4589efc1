//! The half-space Y = f⁻¹(ℕ), the cocycle c_φ = Y △ φ(Y) and its kernel.

use std::collections::BTreeSet;

use serde_json::json;

use crate::action::{all_words, ActionSystem, GeneratorSpec, GroupWord};
use crate::error::{LabError, Result};
use crate::full_group::{make_element, FullGroupElement};
use crate::graph::UNREACHABLE;
use crate::line_geometry::{
    diametral_geodesic, fit_line_chart, GeodesicSegment, LineChart, QI_MARGIN,
};
use crate::scalar::Scalar;
use crate::schreier::{build_ball, SchreierBall};
use crate::window::{element_map, word_map, VertexMap};

#[derive(Clone, Debug)]
pub struct HalfSpace {
    /// f(x) ≥ 0, evaluated on every vertex.
    pub member: Vec<bool>,
    pub certified: Vec<bool>,
    /// ∂Y among certified vertices.
    pub boundary: BTreeSet<usize>,
    /// ∂(Y^c) among certified vertices.
    pub co_boundary: BTreeSet<usize>,
}

impl HalfSpace {
    pub fn contains(&self, v: usize) -> bool {
        self.member[v]
    }

    /// Y restricted to certified vertices.
    pub fn members(&self) -> BTreeSet<usize> {
        (0..self.member.len())
            .filter(|&v| self.member[v] && self.certified[v])
            .collect()
    }
}

pub fn half_space<S: Scalar>(ball: &SchreierBall, chart: &LineChart<S>) -> HalfSpace {
    let member: Vec<bool> = chart.f.iter().map(|&x| x >= 0).collect();
    let certified: Vec<bool> = (0..ball.len())
        .map(|v| ball.is_certified(v, QI_MARGIN))
        .collect();
    let graph = ball.graph();
    let crosses = |v: usize| graph.neighbors(v).iter().any(|&w| member[w] != member[v]);
    let (mut boundary, mut co_boundary) = (BTreeSet::new(), BTreeSet::new());
    for v in (0..ball.len()).filter(|&v| certified[v] && crosses(v)) {
        if member[v] {
            boundary.insert(v);
        } else {
            co_boundary.insert(v);
        }
    }
    HalfSpace {
        member,
        certified,
        boundary,
        co_boundary,
    }
}

#[derive(Clone, Debug)]
pub struct BoundYReport<S: Scalar> {
    pub bound: S,
    pub max_level: i64,
    pub witness: Option<usize>,
    pub pass: bool,
}

/// ∂Y ⊆ f⁻¹([0, α+β−1]).
pub fn boundary_level_check<S: Scalar>(y: &HalfSpace, chart: &LineChart<S>) -> BoundYReport<S> {
    let bound = chart.alpha.clone() + chart.beta.clone() - S::one();
    let max_level = y.boundary.iter().map(|&v| chart.f[v]).max().unwrap_or(0);
    let witness = y
        .boundary
        .iter()
        .copied()
        .find(|&v| chart.f[v] < 0 || S::from_int(chart.f[v]) > bound);
    BoundYReport {
        bound,
        max_level,
        witness,
        pass: witness.is_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CocycleValue {
    pub set: BTreeSet<usize>,
    pub inner_radius: usize,
    pub outer_radius: usize,
    pub stabilized: bool,
    /// gY∖Y ⊆ Γ_len(g)(∂Y) for every piece word g.
    pub containment: bool,
}

impl CocycleValue {
    pub fn to_json(&self, ball: &SchreierBall) -> serde_json::Value {
        let labels: Vec<&str> = self.set.iter().map(|&v| ball.graph().label(v)).collect();
        json!({
            "value": self.set,
            "labels": labels,
            "stabilized": self.stabilized,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "containment": self.containment,
        })
    }
}

fn in_region(ball: &SchreierBall, v: usize, radius: usize) -> bool {
    ball.is_closed() || ball.dist(v) <= radius
}

/// Radii at which a value moving points by at most `d` can be trusted.
fn stabilization_radii(ball: &SchreierBall, d: usize) -> Result<(usize, usize)> {
    if ball.is_closed() {
        return Ok((ball.radius(), ball.radius()));
    }
    let outer = ball.radius().checked_sub(1 + d).ok_or_else(|| {
        LabError::NotStabilized(format!(
            "radius {} below 1 + d_phi = {}",
            ball.radius(),
            1 + d
        ))
    })?;
    let inner = outer.checked_sub(d.max(1)).ok_or_else(|| {
        LabError::NotStabilized(format!("radius {} leaves no inner window", ball.radius()))
    })?;
    Ok((inner, outer))
}

/// Vertices of Y △ φ(Y) inside `radius`; x ∈ φ(Y) iff φ⁻¹(x) ∈ Y.
fn difference_within(
    ball: &SchreierBall,
    y: &HalfSpace,
    inverse: &VertexMap,
    radius: usize,
) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    for x in (0..ball.len()).filter(|&x| in_region(ball, x, radius)) {
        let pre = inverse[x].ok_or_else(|| {
            LabError::NotStabilized(format!("preimage of vertex {x} leaves the window"))
        })?;
        if y.member[x] != y.member[pre] {
            out.insert(x);
        }
    }
    Ok(out)
}

pub fn cocycle_value(
    action: &ActionSystem,
    ball: &SchreierBall,
    y: &HalfSpace,
    phi: &FullGroupElement,
) -> Result<CocycleValue> {
    let d = phi.displacement_bound();
    let (inner, outer) = stabilization_radii(ball, d)?;
    let inverse = element_map(action, ball, &phi.invert(action)?)?;
    let wide = difference_within(ball, y, &inverse, outer)?;
    let set: BTreeSet<usize> = wide
        .iter()
        .copied()
        .filter(|&x| in_region(ball, x, inner))
        .collect();
    if set != wide {
        let outside = wide.difference(&set).next().copied().unwrap_or(0);
        return Err(LabError::NotStabilized(format!(
            "vertex {outside} appears between radius {inner} and {outer}"
        )));
    }
    let containment = piece_containment(action, ball, y, phi, outer)?;
    Ok(CocycleValue {
        set,
        inner_radius: inner,
        outer_radius: outer,
        stabilized: true,
        containment,
    })
}

fn piece_containment(
    action: &ActionSystem,
    ball: &SchreierBall,
    y: &HalfSpace,
    phi: &FullGroupElement,
    radius: usize,
) -> Result<bool> {
    let from_boundary = ball.graph().bfs_from_set(y.boundary.iter().copied());
    let mut words: Vec<&GroupWord> = phi.pieces().iter().map(|p| &p.word).collect();
    words.sort();
    words.dedup();
    for w in words {
        let inverse = word_map(action, ball, &action.invert_word(w))?;
        for x in (0..ball.len()).filter(|&x| in_region(ball, x, radius) && !y.member[x]) {
            let Some(pre) = inverse[x] else { continue };
            if y.member[pre] && (from_boundary[x] == UNREACHABLE || from_boundary[x] > w.len()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True iff φ(Y) = Y on the stabilized window.
pub fn stabilizer_test(
    action: &ActionSystem,
    ball: &SchreierBall,
    y: &HalfSpace,
    phi: &FullGroupElement,
) -> Result<bool> {
    Ok(cocycle_value(action, ball, y, phi)?.set.is_empty())
}

/// Image of a vertex set; `None` if some image leaves the window.
pub fn map_set(map: &VertexMap, set: &BTreeSet<usize>) -> Option<BTreeSet<usize>> {
    set.iter().map(|&v| map[v]).collect()
}

/// c_{φψ} = c_φ △ φ(c_ψ) on stabilized values.
pub fn cocycle_identity_holds(
    action: &ActionSystem,
    ball: &SchreierBall,
    y: &HalfSpace,
    phi: &FullGroupElement,
    psi: &FullGroupElement,
    depth_cap: usize,
) -> Result<bool> {
    let product = phi.compose(psi, action, depth_cap)?;
    let c_prod = cocycle_value(action, ball, y, &product)?.set;
    let c_phi = cocycle_value(action, ball, y, phi)?.set;
    let c_psi = cocycle_value(action, ball, y, psi)?.set;
    let forward = element_map(action, ball, phi)?;
    let moved = map_set(&forward, &c_psi)
        .ok_or_else(|| LabError::NotStabilized("φ(c_ψ) leaves the window".into()))?;
    let rhs: BTreeSet<usize> = c_phi.symmetric_difference(&moved).copied().collect();
    Ok(c_prod == rhs)
}

/// Least R with ∂Y ∪ ∂Y^c ⊆ B_R(p), for p on the geodesic.
pub fn r_constant(
    y: &HalfSpace,
    ball: &SchreierBall,
    p: usize,
    line: &GeodesicSegment,
) -> Result<usize> {
    if line.position(p).is_none() {
        return Err(LabError::BaseNotOnGeodesic);
    }
    let marked: Vec<usize> = y.boundary.union(&y.co_boundary).copied().collect();
    if let Some(&v) = marked
        .iter()
        .find(|&&v| !ball.is_certified(v, QI_MARGIN + 1))
    {
        return Err(LabError::NotStabilized(format!(
            "boundary vertex {v} touches the rim"
        )));
    }
    let dist = ball.graph().bfs(p);
    Ok(marked.iter().map(|&v| dist[v]).max().unwrap_or(0))
}

/// N_φ = 6m + R + 2d_φ.
pub fn n_phi<S: Scalar>(m: &S, r: usize, d_phi: usize) -> S {
    S::from_int(6) * m.clone() + S::from_count(r) + S::from_count(2 * d_phi)
}

/// Everything derived from one window: chart, Y, ℓ and R at the base.
#[derive(Clone, Debug)]
pub struct Frame<S: Scalar> {
    pub action: ActionSystem,
    pub ball: SchreierBall,
    pub chart: LineChart<S>,
    pub half: HalfSpace,
    pub line: GeodesicSegment,
    pub r: usize,
}

impl<S: Scalar> Frame<S> {
    pub fn new(action: ActionSystem, ball: SchreierBall) -> Result<Self> {
        let chart = fit_line_chart(&ball)?;
        let half = half_space(&ball, &chart);
        let line = diametral_geodesic(&ball)?;
        let r = r_constant(&half, &ball, ball.base(), &line)?;
        Ok(Frame {
            action,
            ball,
            chart,
            half,
            line,
            r,
        })
    }

    pub fn around_basepoint(action: ActionSystem, radius: usize, cap: usize) -> Result<Self> {
        let ball = build_ball(&action, radius, cap)?;
        Self::new(action, ball)
    }

    pub fn element_map(&self, element: &FullGroupElement) -> Result<VertexMap> {
        element_map(&self.action, &self.ball, element)
    }

    pub fn cocycle(&self, element: &FullGroupElement) -> Result<CocycleValue> {
        cocycle_value(&self.action, &self.ball, &self.half, element)
    }

    pub fn in_kernel(&self, element: &FullGroupElement) -> Result<bool> {
        stabilizer_test(&self.action, &self.ball, &self.half, element)
    }

    pub fn n_phi(&self, element: &FullGroupElement) -> S {
        n_phi(&self.chart.m, self.r, element.displacement_bound())
    }

    /// ⌈m⌉ as an integer radius.
    pub fn m_radius(&self) -> usize {
        self.chart.m.ceil_int().max(0) as usize
    }
}

/// Restrictions of single-state involutive generators to a cylinder pair
/// {c, s(c)} that stabilize Y, for depths up to `max_depth`.
pub fn kernel_candidates<S: Scalar>(
    frame: &Frame<S>,
    max_depth: usize,
) -> Result<Vec<FullGroupElement>> {
    let action = &frame.action;
    let mut found = Vec::new();
    for (g, gen) in action.generators().iter().enumerate() {
        if !matches!(gen.spec, GeneratorSpec::State(_)) || !action.is_involution(g) {
            continue;
        }
        let s = GroupWord(vec![g]);
        for depth in 1..=max_depth.max(action.piece_depth()) {
            for c in all_words(depth) {
                let image = action.apply_word_prefix(&s, &c)?;
                if image < c {
                    continue;
                }
                let pieces = all_words(depth)
                    .map(|w| {
                        let word = if w == c || w == image {
                            s.clone()
                        } else {
                            GroupWord::identity()
                        };
                        (w, word)
                    })
                    .collect();
                let element = make_element(action, pieces)?.normal_form(action);
                if !found.contains(&element) && frame.in_kernel(&element)? {
                    found.push(element);
                }
            }
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::builtin_action;
    use crate::full_group::{element_from_names, random_element, DEFAULT_DEPTH_CAP};
    use crate::schreier::{build_level_graph, DEFAULT_VERTEX_CAP};
    use crate::testkit::int_point;
    use crate::Exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn odometer_frame(radius: usize) -> Frame<Exact> {
        Frame::around_basepoint(
            builtin_action("odometer").unwrap(),
            radius,
            DEFAULT_VERTEX_CAP,
        )
        .unwrap()
    }

    fn ints(frame: &Frame<Exact>, range: impl IntoIterator<Item = i64>) -> BTreeSet<usize> {
        range
            .into_iter()
            .map(|n| frame.ball.vertex_of(&int_point(n)).unwrap())
            .collect()
    }

    fn word_element(frame: &Frame<Exact>, names: &[&str]) -> FullGroupElement {
        FullGroupElement::from_word(frame.action.word(names).unwrap())
    }

    #[test]
    fn odometer_half_line() {
        let frame = odometer_frame(3);
        // Certified vertices are -2..=2 at margin 1.
        assert_eq!(frame.half.members(), ints(&frame, 0..=2));
        assert_eq!(frame.half.boundary, ints(&frame, [0]));
        assert_eq!(frame.half.co_boundary, ints(&frame, [-1]));
        for n in -3i64..=3 {
            let v = frame.ball.vertex_of(&int_point(n)).unwrap();
            assert_eq!(frame.half.contains(v), n >= 0);
        }
        assert!(boundary_level_check(&frame.half, &frame.chart).pass);
    }

    #[test]
    fn all_nonnegative_chart() {
        let graph = crate::graph::Graph::path(5);
        let ball = SchreierBall::from_graph("path", graph.clone(), 0).unwrap();
        let chart: LineChart<Exact> = LineChart::from_parts(
            &graph,
            vec![0, 1, 2, 3, 4],
            vec![true; 5],
            Exact::from_int(1),
            Exact::from_int(0),
        );
        let y = half_space(&ball, &chart);
        assert_eq!(y.members().len(), 5);
        assert!(y.boundary.is_empty());
    }

    #[test]
    fn boundary_levels_on_builtins() {
        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 8, DEFAULT_VERTEX_CAP).unwrap();
        let win = lg.as_window("grigorchuk", &[0; 8]).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&win).unwrap();
        let y = half_space(&win, &chart);
        let bound = chart.alpha.clone() + chart.beta.clone() - Exact::from_int(1);
        for v in 0..win.len() {
            let crosses = win
                .graph()
                .neighbors(v)
                .iter()
                .any(|&w| y.member[w] != y.member[v]);
            if y.member[v] && crosses {
                assert!(chart.f[v] >= 0 && Exact::from_int(chart.f[v]) <= bound);
            }
        }
        assert!(boundary_level_check(&y, &chart).pass);
        for name in crate::action::BUILTIN_ACTIONS {
            let frame: Frame<Exact> =
                Frame::around_basepoint(builtin_action(name).unwrap(), 30, DEFAULT_VERTEX_CAP)
                    .unwrap();
            assert!(
                boundary_level_check(&frame.half, &frame.chart).pass,
                "{name}"
            );
        }
    }

    #[test]
    fn boundary_is_finite_while_y_grows() {
        for name in crate::action::BUILTIN_ACTIONS {
            let sizes: Vec<(usize, usize)> = [20, 40, 80]
                .iter()
                .map(|&r| {
                    let f: Frame<Exact> = Frame::around_basepoint(
                        builtin_action(name).unwrap(),
                        r,
                        DEFAULT_VERTEX_CAP,
                    )
                    .unwrap();
                    (f.half.boundary.len(), f.half.members().len())
                })
                .collect();
            assert!(
                sizes
                    .windows(2)
                    .all(|w| w[0].0 == w[1].0 && w[0].1 < w[1].1),
                "{name}: {sizes:?}"
            );
        }
    }

    #[test]
    fn odometer_cocycle_values() {
        let frame = odometer_frame(20);
        assert!(frame
            .cocycle(&FullGroupElement::identity())
            .unwrap()
            .set
            .is_empty());
        let t = word_element(&frame, &["t"]);
        let c_t = frame.cocycle(&t).unwrap();
        assert_eq!(c_t.set, ints(&frame, [0]));
        assert!(c_t.containment);
        let tt = word_element(&frame, &["t", "t"]);
        let c_tt = frame.cocycle(&tt).unwrap().set;
        assert_eq!(c_tt, ints(&frame, [0, 1]));
        let moved = map_set(&frame.element_map(&t).unwrap(), &c_t.set).unwrap();
        assert_eq!(
            c_tt,
            c_t.set.symmetric_difference(&moved).copied().collect()
        );
    }

    #[test]
    fn kernel_membership() {
        let frame = odometer_frame(20);
        let swap = element_from_names(&frame.action, &[("0", &["t"]), ("1", &["t^-1"])]).unwrap();
        assert!(frame.in_kernel(&FullGroupElement::identity()).unwrap());
        assert!(frame.in_kernel(&swap).unwrap());
        assert!(!frame.in_kernel(&word_element(&frame, &["t"])).unwrap());
    }

    #[test]
    fn small_window_is_not_stabilized() {
        let frame = odometer_frame(3);
        let t3 = word_element(&frame, &["t", "t", "t"]);
        assert!(matches!(
            frame.cocycle(&t3),
            Err(LabError::NotStabilized(_))
        ));
    }

    #[test]
    fn r_constants() {
        let frame = odometer_frame(10);
        assert_eq!(frame.r, 1);
        let two = SchreierBall::from_graph("edge", crate::graph::Graph::path(2), 1).unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&two).unwrap();
        let y = half_space(&two, &chart);
        let line = diametral_geodesic(&two).unwrap();
        assert_eq!(r_constant(&y, &two, 1, &line).unwrap(), 1);

        let g = builtin_action("grigorchuk").unwrap();
        let lg = build_level_graph(&g, 10, DEFAULT_VERTEX_CAP).unwrap();
        let win = lg.as_window("grigorchuk", &[0; 10]).unwrap();
        let frame: Frame<Exact> = Frame::new(g, win).unwrap();
        let dist = frame.ball.graph().bfs(frame.ball.base());
        for v in frame.half.boundary.union(&frame.half.co_boundary) {
            assert!(dist[*v] <= frame.r);
        }

        // A base off the geodesic is rejected.
        let star = SchreierBall::from_graph(
            "star",
            crate::graph::Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]),
            0,
        )
        .unwrap();
        let chart: LineChart<Exact> = fit_line_chart(&star).unwrap();
        let y = half_space(&star, &chart);
        let line = GeodesicSegment {
            vertices: vec![1, 0, 2],
        };
        assert_eq!(
            r_constant(&y, &star, 3, &line).unwrap_err(),
            LabError::BaseNotOnGeodesic
        );
    }

    #[test]
    fn n_phi_formula() {
        assert_eq!(n_phi(&Exact::from_int(1), 1, 1), Exact::from_int(9));
        assert_eq!(n_phi(&Exact::from_int(1), 1, 0), Exact::from_int(7));
        assert_eq!(n_phi(&Exact::from_int(16), 5, 3), Exact::from_int(107));
        assert_eq!(n_phi(&16.0f64, 5, 3), 107.0);
    }

    #[test]
    fn cocycle_identity_and_kernel_closure() {
        let frame = odometer_frame(40);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut kernel =
            vec![element_from_names(&frame.action, &[("0", &["t"]), ("1", &["t^-1"])]).unwrap()];
        for _ in 0..25 {
            let phi = random_element(&mut rng, &frame.action, 3, 3);
            let psi = random_element(&mut rng, &frame.action, 3, 3);
            assert!(cocycle_identity_holds(
                &frame.action,
                &frame.ball,
                &frame.half,
                &phi,
                &psi,
                DEFAULT_DEPTH_CAP
            )
            .unwrap());
            let c = frame.cocycle(&phi).unwrap();
            assert!(c.containment);
            if c.set.is_empty() {
                kernel.push(phi);
            }
        }
        for a in &kernel {
            assert!(frame.in_kernel(&a.invert(&frame.action).unwrap()).unwrap());
            for b in &kernel {
                assert!(frame
                    .in_kernel(&a.compose(b, &frame.action, DEFAULT_DEPTH_CAP).unwrap())
                    .unwrap());
            }
        }
    }

    #[test]
    fn kernel_candidates_for_grigorchuk() {
        let frame: Frame<Exact> = Frame::around_basepoint(
            builtin_action("grigorchuk").unwrap(),
            40,
            DEFAULT_VERTEX_CAP,
        )
        .unwrap();
        let found = kernel_candidates(&frame, 3).unwrap();
        assert!(!found.is_empty());
        for e in &found {
            assert!(frame.cocycle(e).unwrap().set.is_empty());
        }
    }
}
