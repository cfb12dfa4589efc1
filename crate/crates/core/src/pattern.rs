//! Local action patterns, their repetition, and transport of the half-space
//! to a matching point.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde_json::json;

use crate::action::GroupWord;
use crate::cocycle::Frame;
use crate::error::{LabError, Result};
use crate::full_group::FullGroupElement;
use crate::graph::UNREACHABLE;
use crate::scalar::Scalar;
use crate::schreier::SchreierBall;
use crate::window::{element_map, piece_at, VertexMap};

/// The labelled n-ball around a vertex together with the piece word each
/// element of F uses there. Vertices are numbered by a BFS that tries
/// generators in index order, so equal patterns have equal tables.
#[derive(Clone, Debug)]
pub struct LocalPattern {
    pub center: usize,
    pub depth: usize,
    pub order: Vec<usize>,
    code: Vec<Vec<Option<usize>>>,
    words: Vec<Vec<GroupWord>>,
}

impl PartialEq for LocalPattern {
    fn eq(&self, other: &Self) -> bool {
        self.depth == other.depth && self.code == other.code && self.words == other.words
    }
}

impl Eq for LocalPattern {}

pub fn local_pattern(
    ball: &SchreierBall,
    family: &[FullGroupElement],
    v: usize,
    n: usize,
) -> Result<LocalPattern> {
    if !ball.is_closed() && ball.dist(v) + n + 1 > ball.radius() {
        return Err(LabError::RimContact {
            vertex: v,
            depth: n,
        });
    }
    let k = ball.generator_names().len();
    let mut local: HashMap<usize, usize> = HashMap::from([(v, 0)]);
    let mut order = vec![v];
    let mut depth = vec![0usize];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if depth[i] == n {
            continue;
        }
        for g in 0..k {
            if let Some(w) = ball.step(order[i], g) {
                if let std::collections::hash_map::Entry::Vacant(e) = local.entry(w) {
                    e.insert(order.len());
                    order.push(w);
                    depth.push(depth[i] + 1);
                    queue.push_back(order.len() - 1);
                }
            }
        }
    }
    let code = order
        .iter()
        .map(|&x| {
            (0..k)
                .map(|g| ball.step(x, g).and_then(|w| local.get(&w).copied()))
                .collect()
        })
        .collect();
    let words = order
        .iter()
        .map(|&x| {
            family
                .iter()
                .map(|phi| Ok(phi.pieces()[piece_at(ball, phi, x)?].word.clone()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalPattern {
        center: v,
        depth: n,
        order,
        code,
        words,
    })
}

/// Vertices far enough from the rim to carry a depth-`n` pattern.
pub fn pattern_region(ball: &SchreierBall, n: usize) -> Vec<usize> {
    (0..ball.len())
        .filter(|&v| ball.is_closed() || ball.dist(v) + n < ball.radius())
        .collect()
}

/// All vertices whose pattern equals the one at `p`, in index order.
pub fn pattern_matches(
    ball: &SchreierBall,
    family: &[FullGroupElement],
    p: usize,
    n: usize,
) -> Result<Vec<usize>> {
    let reference = local_pattern(ball, family, p, n)?;
    let region = pattern_region(ball, n);
    let hits: Vec<Option<usize>> = region
        .par_iter()
        .map(|&v| local_pattern(ball, family, v, n).map(|pat| (pat == reference).then_some(v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.into_iter().flatten().collect())
}

#[derive(Clone, Debug)]
pub struct RepetitionReport {
    pub r: usize,
    pub matches: Vec<usize>,
    pub window_radius: usize,
    /// Number of vertices y for which a match was certified.
    pub tested: usize,
}

impl RepetitionReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "r": self.r,
            "matches": self.matches.len(),
            "window_radius": self.window_radius,
            "tested": self.tested,
            "note": "window-relative evidence",
        })
    }
}

/// Smallest r such that every tested y has a match of the pattern at `p`
/// in B_r(y). In an open window the tested vertices are the inner half of
/// the pattern region, and r must keep B_r(y) inside that region.
pub fn repetition_radius(
    ball: &SchreierBall,
    family: &[FullGroupElement],
    p: usize,
    n: usize,
) -> Result<RepetitionReport> {
    let matches = pattern_matches(ball, family, p, n)?;
    let dist = ball.graph().bfs_from_set(matches.iter().copied());
    let (tested, slack): (Vec<usize>, usize) = if ball.is_closed() {
        ((0..ball.len()).collect(), usize::MAX)
    } else {
        let reach = ball.radius() - n - 1;
        (
            (0..ball.len())
                .filter(|&v| ball.dist(v) <= reach / 2)
                .collect(),
            reach - reach / 2,
        )
    };
    let r = tested.iter().map(|&y| dist[y]).max().unwrap_or(0);
    if r == UNREACHABLE || r > slack {
        return Err(LabError::NoRepetition(ball.radius()));
    }
    Ok(RepetitionReport {
        r,
        matches,
        window_radius: ball.radius(),
        tested: tested.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub name: &'static str,
    pub pass: bool,
    pub witness: Option<usize>,
}

impl Claim {
    fn new(name: &'static str, witness: Option<usize>) -> Self {
        Claim {
            name,
            pass: witness.is_none(),
            witness,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "claim": self.name, "pass": self.pass, "witness": self.witness })
    }
}

#[derive(Clone, Debug)]
pub struct TransportReport {
    pub z: usize,
    pub n: usize,
    pub region_radius: usize,
    pub b_plus: BTreeSet<usize>,
    pub b_minus: BTreeSet<usize>,
    pub a_plus: BTreeSet<usize>,
    pub a_minus: BTreeSet<usize>,
    /// Y_z restricted to the region.
    pub y_z: BTreeSet<usize>,
    /// Y_z is A⁺ (rather than A⁻).
    pub plus_side: bool,
    pub claims: Vec<Claim>,
}

impl TransportReport {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "z": self.z,
            "n": self.n,
            "region_radius": self.region_radius,
            "b_plus": self.b_plus.len(),
            "b_minus": self.b_minus.len(),
            "a_plus": self.a_plus.len(),
            "a_minus": self.a_minus.len(),
            "y_z_side": if self.plus_side { "A+" } else { "A-" },
            "claims": self.claims.iter().map(Claim::to_json).collect::<Vec<_>>(),
            "pass": self.passed(),
        })
    }
}

/// Largest N_φ over the family (6m + R when the family is empty).
pub fn family_n_phi<S: Scalar>(frame: &Frame<S>, family: &[FullGroupElement]) -> S {
    family
        .iter()
        .map(|phi| frame.n_phi(phi))
        .fold(crate::cocycle::n_phi(&frame.chart.m, frame.r, 0), S::max_of)
}

pub fn family_displacement(family: &[FullGroupElement]) -> usize {
    family
        .iter()
        .map(FullGroupElement::displacement_bound)
        .max()
        .unwrap_or(0)
}

/// Kernel membership and n > N_φ for every element of the family.
pub fn check_family<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    n: usize,
) -> Result<()> {
    for (i, phi) in family.iter().enumerate() {
        if !frame.in_kernel(phi)? {
            return Err(LabError::NotInKernel(i));
        }
    }
    let bound = family_n_phi(frame, family);
    if S::from_count(n) <= bound {
        return Err(LabError::PreconditionNphi {
            n,
            n_phi: bound.to_string(),
        });
    }
    Ok(())
}

/// Vertices reachable from `sources` without touching `blocked`.
fn reach_avoiding(
    ball: &SchreierBall,
    sources: &BTreeSet<usize>,
    blocked: &BTreeSet<usize>,
) -> Vec<bool> {
    let graph = ball.graph();
    let mut seen = vec![false; ball.len()];
    let mut queue: VecDeque<usize> = sources.iter().copied().collect();
    for &s in sources {
        seen[s] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            if !seen[w] && !blocked.contains(&w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// All four conclusions of the transport construction, each recorded as a
/// claim with a witness instead of aborting.
pub fn transport_report<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    z: usize,
    n: usize,
) -> Result<TransportReport> {
    check_family(frame, family, n)?;
    let ball = &frame.ball;
    let d_max = family_displacement(family);
    if !ball.is_closed() && ball.dist(z) + n + 1 + d_max > ball.radius() {
        return Err(LabError::RimContact {
            vertex: z,
            depth: n,
        });
    }
    let p = ball.base();
    let at_p = local_pattern(ball, family, p, n)?;
    let at_z = local_pattern(ball, family, z, n)?;
    if at_p != at_z {
        return Err(LabError::PatternMismatch(z));
    }
    let h: HashMap<usize, usize> = at_p
        .order
        .iter()
        .copied()
        .zip(at_z.order.iter().copied())
        .collect();
    let y = &frame.half;
    let (mut b_plus, mut b_minus) = (BTreeSet::new(), BTreeSet::new());
    for (&x, &hx) in &h {
        if y.member[x] {
            b_plus.insert(hx);
        } else {
            b_minus.insert(hx);
        }
    }
    let in_a_plus = reach_avoiding(ball, &b_plus, &b_minus);
    let in_a_minus = reach_avoiding(ball, &b_minus, &b_plus);

    let region_radius = if ball.is_closed() {
        ball.radius()
    } else {
        ball.radius() - 1 - d_max
    };
    let region: Vec<usize> = (0..ball.len())
        .filter(|&v| ball.is_closed() || ball.dist(v) <= region_radius)
        .collect();
    let mut claims = Vec::new();

    claims.push(Claim::new(
        "complement",
        region
            .iter()
            .copied()
            .find(|&x| in_a_plus[x] == in_a_minus[x]),
    ));

    // Ends: geodesic strips of width max(1, ⌈m⌉) at both ends of the region.
    let width = frame.m_radius().max(1);
    let on_line: Vec<usize> = frame
        .line
        .vertices
        .iter()
        .copied()
        .filter(|&v| ball.is_closed() || ball.dist(v) <= region_radius)
        .collect();
    let minus_strip: Vec<usize> = on_line.iter().copied().take(width).collect();
    let plus_strip: Vec<usize> = on_line.iter().rev().copied().take(width).collect();
    let holds = |set: &[bool], strip: &[usize]| strip.iter().all(|&v| set[v]);
    let plus_side = holds(&in_a_plus, &plus_strip);
    let (y_mark, other) = if plus_side {
        (&in_a_plus, &in_a_minus)
    } else {
        (&in_a_minus, &in_a_plus)
    };
    let ends_ok = holds(y_mark, &plus_strip)
        && !holds(other, &plus_strip)
        && holds(other, &minus_strip)
        && !holds(y_mark, &minus_strip);
    let ends_witness = if ends_ok {
        None
    } else {
        plus_strip.first().copied().or(Some(z))
    };

    // Boundary: ∂A⁺ = h(∂Y), ∂A⁻ = h(∂Y^c), and ∂Y_z ⊆ B_R(z).
    let graph = ball.graph();
    let inner_boundary = |mark: &[bool]| -> BTreeSet<usize> {
        region
            .iter()
            .copied()
            .filter(|&x| mark[x] && graph.neighbors(x).iter().any(|&w| !mark[w]))
            .collect()
    };
    let transported = |set: &BTreeSet<usize>| -> Option<BTreeSet<usize>> {
        set.iter().map(|x| h.get(x).copied()).collect()
    };
    let from_z = graph.bfs(z);
    let boundary_witness = match (transported(&y.boundary), transported(&y.co_boundary)) {
        (Some(hb), Some(hc)) => {
            let ap = inner_boundary(&in_a_plus);
            let am = inner_boundary(&in_a_minus);
            let ybd = inner_boundary(y_mark);
            ap.symmetric_difference(&hb)
                .chain(am.symmetric_difference(&hc))
                .chain(ybd.iter().filter(|&&v| from_z[v] > frame.r))
                .next()
                .copied()
        }
        _ => Some(p),
    };
    claims.push(Claim::new("boundary", boundary_witness));

    // Invariance of Y_z under F and F⁻¹.
    let maps: Vec<(VertexMap, VertexMap)> = family
        .iter()
        .map(|phi| {
            Ok((
                element_map(&frame.action, ball, phi)?,
                element_map(&frame.action, ball, &phi.invert(&frame.action)?)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let invariance_witness = region.iter().copied().find(|&x| {
        maps.iter().any(|(fwd, back)| {
            [fwd[x], back[x]].iter().any(|img| match img {
                Some(w) => y_mark[*w] != y_mark[x],
                None => true,
            })
        })
    });
    claims.push(Claim::new("invariance", invariance_witness));
    claims.push(Claim::new("ends", ends_witness));

    let collect = |mark: &[bool]| -> BTreeSet<usize> {
        region.iter().copied().filter(|&x| mark[x]).collect()
    };
    Ok(TransportReport {
        z,
        n,
        region_radius,
        b_plus,
        b_minus,
        a_plus: collect(&in_a_plus),
        a_minus: collect(&in_a_minus),
        y_z: collect(y_mark),
        plus_side,
        claims,
    })
}

/// Like [`transport_report`] but fails on the first violated claim.
pub fn transport_halfspace<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    z: usize,
    n: usize,
) -> Result<TransportReport> {
    let report = transport_report(frame, family, z, n)?;
    if let Some(c) = report.claims.iter().find(|c| !c.pass) {
        return Err(LabError::TransportFailure {
            claim: c.name.to_string(),
            witness: c.witness.unwrap_or(z),
        });
    }
    Ok(report)
}
