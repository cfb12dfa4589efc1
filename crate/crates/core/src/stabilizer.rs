//! The nested family of transported half-spaces along the geodesic and the
//! embedding of ⟨F⟩ into a product of finite symmetric groups.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde_json::json;

use crate::cocycle::Frame;
use crate::error::{LabError, Result};
use crate::full_group::FullGroupElement;
use crate::pattern::{
    check_family, family_displacement, local_pattern, repetition_radius, transport_halfspace, Claim,
};
use crate::permgroup::{group_order, restrict_to_moved};
use crate::scalar::Scalar;
use crate::window::VertexMap;

#[derive(Clone, Debug)]
pub struct Anchor {
    pub index: i64,
    pub y: usize,
    pub z: usize,
    /// Y_i on the common region.
    pub half: BTreeSet<usize>,
}

/// Δ_i = Y_i ∖ Y_{i+1}.
#[derive(Clone, Debug)]
pub struct Block {
    pub index: i64,
    pub members: BTreeSet<usize>,
    /// |B_m([y_{i−1}, y_{i+2}])|.
    pub segment_bound: usize,
    pub within_segment: bool,
    pub invariant: bool,
}

#[derive(Clone, Debug)]
pub struct NestedFamily {
    pub n: usize,
    pub r: usize,
    pub spacing: usize,
    pub m_radius: usize,
    pub anchors: Vec<Anchor>,
    pub blocks: Vec<Block>,
    /// Largest B_m-neighbourhood of 3·spacing + 1 consecutive geodesic vertices.
    pub u_bound: usize,
    pub region_radius: usize,
    pub checks: Vec<Claim>,
}

impl NestedFamily {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "anchors": self.anchors.len(),
            "anchor_vertices": self.anchors.iter().map(|a| json!({"i": a.index, "y": a.y, "z": a.z})).collect::<Vec<_>>(),
            "r": self.r,
            "n": self.n,
            "spacing": self.spacing,
            "U": self.u_bound,
            "blocks": self.blocks.iter().map(|b| b.members.len()).collect::<Vec<_>>(),
            "checks": self.checks.iter().map(Claim::to_json).collect::<Vec<_>>(),
            "pass": self.passed(),
        })
    }
}

fn maps_for<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
) -> Result<Vec<(VertexMap, VertexMap)>> {
    family
        .iter()
        .map(|phi| {
            Ok((
                frame.element_map(phi)?,
                frame.element_map(&phi.invert(&frame.action)?)?,
            ))
        })
        .collect()
}

/// Builds the family and records every check; see [`nested_family`] for
/// the strict variant.
pub fn family_report<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    n: usize,
) -> Result<NestedFamily> {
    check_family(frame, family, n)?;
    let ball = &frame.ball;
    let graph = ball.graph();
    let base = ball.base();
    let r = repetition_radius(ball, family, base, n)?.r;
    let m_radius = frame.m_radius();
    let spacing = 2 * r + 2 * n + 2 * m_radius + 2;
    let d_max = family_displacement(family);
    let line = &frame.line;
    let origin = line.position(base).ok_or(LabError::BaseNotOnGeodesic)?;
    let fits = |v: usize| ball.is_closed() || ball.dist(v) + r + n + 1 + d_max < ball.radius();
    let at = |i: i64| -> Option<usize> {
        let pos = origin as i64 + i * spacing as i64;
        (pos >= 0 && (pos as usize) < line.vertices.len()).then(|| line.vertices[pos as usize])
    };
    let mut indices: Vec<i64> = Vec::new();
    for dir in [-1i64, 1] {
        let mut i = if dir < 0 { -1 } else { 0 };
        while let Some(y) = at(i) {
            if !fits(y) {
                break;
            }
            indices.push(i);
            i += dir;
        }
    }
    indices.sort_unstable();
    if indices.len() < 3 {
        return Err(LabError::WindowTooSmall(format!(
            "{} anchor(s) at spacing {spacing} in a window of radius {}",
            indices.len(),
            ball.radius()
        )));
    }

    let reference = local_pattern(ball, family, base, n)?;
    let region_radius = if ball.is_closed() {
        ball.radius()
    } else {
        ball.radius() - 1 - d_max
    };
    let anchors: Vec<Anchor> = indices
        .par_iter()
        .map(|&i| {
            let y = at(i).expect("anchor on the geodesic");
            let dist = graph.bfs(y);
            let mut candidates: Vec<usize> = (0..ball.len()).filter(|&v| dist[v] <= r).collect();
            candidates.sort_by_key(|&v| (dist[v], v));
            let z = candidates
                .into_iter()
                .find(|&v| local_pattern(ball, family, v, n).is_ok_and(|p| p == reference))
                .ok_or(LabError::NoRepetition(ball.radius()))?;
            let report = transport_halfspace(frame, family, z, n).map_err(|e| match e {
                LabError::TransportFailure { claim, witness } => LabError::FamilyFailure {
                    check: format!("transport `{claim}` at anchor {i}"),
                    witness: witness.to_string(),
                },
                other => other,
            })?;
            Ok(Anchor {
                index: i,
                y,
                z,
                half: report.y_z,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    let disjoint = anchors.iter().enumerate().find_map(|(a, first)| {
        let dist = graph.bfs(first.z);
        anchors[a + 1..]
            .iter()
            .find(|b| dist[b.z] <= 2 * n)
            .map(|b| b.z)
    });
    checks.push(Claim {
        name: "disjoint",
        pass: disjoint.is_none(),
        witness: disjoint,
    });

    let nesting = anchors
        .windows(2)
        .find_map(|w| w[1].half.difference(&w[0].half).next().copied());
    checks.push(Claim {
        name: "nesting",
        pass: nesting.is_none(),
        witness: nesting,
    });

    let maps = maps_for(frame, family)?;
    let neighbourhood = |i: i64| -> BTreeSet<usize> {
        let lo = (origin as i64 + (i - 1) * spacing as i64).max(0) as usize;
        let hi = ((origin as i64 + (i + 2) * spacing as i64) as usize).min(line.vertices.len() - 1);
        graph.neighborhood(&line.vertices[lo..=hi].iter().copied().collect(), m_radius)
    };
    let blocks: Vec<Block> = anchors
        .windows(2)
        .map(|w| {
            let members: BTreeSet<usize> = w[0].half.difference(&w[1].half).copied().collect();
            let segment = neighbourhood(w[0].index);
            let invariant = members.iter().all(|&x| {
                maps.iter().all(|(fwd, back)| {
                    [fwd[x], back[x]]
                        .iter()
                        .all(|img| img.is_some_and(|v| members.contains(&v)))
                })
            });
            Block {
                index: w[0].index,
                within_segment: members.is_subset(&segment),
                segment_bound: segment.len(),
                members,
                invariant,
            }
        })
        .collect();
    let u_bound = blocks.iter().map(|b| b.segment_bound).max().unwrap_or(0);
    let find_block = |bad: &dyn Fn(&Block) -> bool| {
        blocks
            .iter()
            .find(|b| bad(b))
            .map(|b| b.index.unsigned_abs() as usize)
    };
    let oversize = find_block(&|b| b.members.len() > u_bound);
    checks.push(Claim {
        name: "block_bound",
        pass: oversize.is_none(),
        witness: oversize,
    });
    let outside = find_block(&|b| !b.within_segment);
    checks.push(Claim {
        name: "block_segment",
        pass: outside.is_none(),
        witness: outside,
    });
    let moved = find_block(&|b| !b.invariant);
    checks.push(Claim {
        name: "block_invariance",
        pass: moved.is_none(),
        witness: moved,
    });

    Ok(NestedFamily {
        n,
        r,
        spacing,
        m_radius,
        anchors,
        blocks,
        u_bound,
        region_radius,
        checks,
    })
}

pub fn nested_family<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    n: usize,
) -> Result<NestedFamily> {
    let report = family_report(frame, family, n)?;
    if let Some(c) = report.checks.iter().find(|c| !c.pass) {
        return Err(LabError::FamilyFailure {
            check: c.name.to_string(),
            witness: c.witness.map_or_else(|| "-".into(), |w| w.to_string()),
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderReport {
    pub blocks: usize,
    pub brute: usize,
    pub agree: bool,
    pub block_support: usize,
    pub brute_support: usize,
}

impl OrderReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "blocks": self.blocks,
            "brute": self.brute,
            "agree": self.agree,
            "block_support": self.block_support,
            "brute_support": self.brute_support,
        })
    }
}

fn perms_on(
    maps: &[(VertexMap, VertexMap)],
    support: &BTreeSet<usize>,
) -> Vec<HashMap<usize, usize>> {
    maps.iter()
        .map(|(fwd, _)| {
            support
                .iter()
                .map(|&x| (x, fwd[x].expect("support is invariant")))
                .collect()
        })
        .collect()
}

/// Order of ⟨F⟩ acting on the union of the blocks, and on the largest
/// F-invariant subset of the certified region.
pub fn finite_embedding_order<S: Scalar>(
    frame: &Frame<S>,
    family: &[FullGroupElement],
    nested: &NestedFamily,
    cap: usize,
) -> Result<OrderReport> {
    let maps = maps_for(frame, family)?;
    let block_support: BTreeSet<usize> = nested
        .blocks
        .iter()
        .flat_map(|b| b.members.iter().copied())
        .collect();
    let blocks = group_order(
        &restrict_to_moved(&perms_on(&maps, &block_support), &block_support),
        cap,
    )?;

    let ball = &frame.ball;
    let mut core: BTreeSet<usize> = (0..ball.len())
        .filter(|&v| ball.is_closed() || ball.dist(v) <= nested.region_radius)
        .collect();
    loop {
        let leaving: Vec<usize> = core
            .iter()
            .copied()
            .filter(|&x| {
                maps.iter().any(|(fwd, back)| {
                    [fwd[x], back[x]]
                        .iter()
                        .any(|img| !img.is_some_and(|v| core.contains(&v)))
                })
            })
            .collect();
        if leaving.is_empty() {
            break;
        }
        for x in leaving {
            core.remove(&x);
        }
    }
    let brute = group_order(&restrict_to_moved(&perms_on(&maps, &core), &core), cap)?;
    Ok(OrderReport {
        blocks,
        brute,
        agree: blocks == brute,
        block_support: block_support.len(),
        brute_support: core.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::builtin_action;
    use crate::full_group::element_from_names;
    use crate::permgroup::DEFAULT_ORDER_CAP;
    use crate::schreier::DEFAULT_VERTEX_CAP;
    use crate::testkit::int_point;
    use crate::Exact;

    fn odometer_frame(radius: usize) -> Frame<Exact> {
        Frame::around_basepoint(
            builtin_action("odometer").unwrap(),
            radius,
            DEFAULT_VERTEX_CAP,
        )
        .unwrap()
    }

    fn swap(frame: &Frame<Exact>) -> FullGroupElement {
        element_from_names(&frame.action, &[("0", &["t"]), ("1", &["t^-1"])]).unwrap()
    }

    fn double_swap(frame: &Frame<Exact>) -> FullGroupElement {
        element_from_names(
            &frame.action,
            &[
                ("00", &["t", "t"]),
                ("01", &["t^-1", "t^-1"]),
                ("10", &["t", "t"]),
                ("11", &["t^-1", "t^-1"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_family() {
        let frame = odometer_frame(120);
        let family = [FullGroupElement::identity()];
        let nested = nested_family(&frame, &family, 8).unwrap();
        assert!(nested.anchors.len() >= 3);
        for b in &nested.blocks {
            assert_eq!(b.members.len(), nested.spacing);
        }
        let order = finite_embedding_order(&frame, &family, &nested, DEFAULT_ORDER_CAP).unwrap();
        assert_eq!((order.blocks, order.brute), (1, 1));
    }

    #[test]
    fn pair_swap_family() {
        let frame = odometer_frame(200);
        let family = [swap(&frame)];
        let nested = nested_family(&frame, &family, 10).unwrap();
        assert!(nested.anchors.len() >= 3);
        assert_eq!(nested.spacing, 2 * nested.r + 20 + 2 + 2);
        let value = |v: usize| -> i64 {
            (-200i64..=200)
                .find(|&n| frame.ball.vertex_of(&int_point(n)) == Some(v))
                .unwrap()
        };
        for b in &nested.blocks {
            let ints: BTreeSet<i64> = b.members.iter().map(|&v| value(v)).collect();
            for &k in &ints {
                let partner = if k.rem_euclid(2) == 0 { k + 1 } else { k - 1 };
                assert!(ints.contains(&partner));
            }
            assert!(b.members.len() <= nested.u_bound);
        }
        let order = finite_embedding_order(&frame, &family, &nested, DEFAULT_ORDER_CAP).unwrap();
        assert_eq!((order.blocks, order.brute), (2, 2));
    }

    #[test]
    fn klein_family() {
        let frame = odometer_frame(200);
        let family = [swap(&frame), double_swap(&frame)];
        assert!(matches!(
            nested_family(&frame, &family, 10),
            Err(LabError::PreconditionNphi { .. })
        ));
        let nested = nested_family(&frame, &family, 12).unwrap();
        let order = finite_embedding_order(&frame, &family, &nested, DEFAULT_ORDER_CAP).unwrap();
        assert_eq!(order.blocks, order.brute);
        assert_eq!(order.brute, 4);
    }

    #[test]
    fn small_window() {
        let frame = odometer_frame(20);
        let family = [swap(&frame)];
        assert!(matches!(
            nested_family(&frame, &family, 10),
            Err(LabError::WindowTooSmall(_))
        ));
    }
}
