//! The end-to-end evidence pipeline: every finite-window check in one
//! deterministic report.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::action::{short_hash, ActionSystem};
use crate::cocycle::{cocycle_identity_holds, kernel_candidates, map_set, Frame};
use crate::error::{LabError, Result};
use crate::full_group::{element_from_names, random_element, FullGroupElement};
use crate::line_geometry::{
    fiber_diameter_check, m_covering_check, max_geodesic_midpoint, QI_MARGIN,
};
use crate::pattern::{family_n_phi, pattern_matches, repetition_radius, transport_report};
use crate::recurrence::escape_series;
use crate::scalar::Scalar;
use crate::stabilizer::{family_report, finite_embedding_order};
use crate::Exact;

pub const LEMMA_IDS: [&str; 15] = [
    "localfin",
    "biinf",
    "m_geod",
    "boundY",
    "cocycle_fin",
    "cocycle_identity",
    "kernel_stab",
    "upp",
    "d_phi",
    "oneend",
    "stab_transport",
    "nesting",
    "block_bound",
    "finite_order",
    "recurrence",
];

/// Transport is checked at this many pattern matches nearest the base.
pub const TRANSPORT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaResult {
    pub id: &'static str,
    pub status: Status,
    pub witnesses: Value,
    pub parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub millis: Option<u128>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub action: String,
    pub action_hash: String,
    pub chart_hash: String,
    pub tool_version: String,
    pub config: VerifyConfig,
    pub family: Vec<Value>,
    pub lemmas: Vec<LemmaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_millis: Option<u128>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.lemmas.iter().all(|l| l.status == Status::Pass)
    }

    pub fn lemma(&self, id: &str) -> Option<&LemmaResult> {
        self.lemmas.iter().find(|l| l.id == id)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub radius: usize,
    pub n: usize,
    pub vertex_cap: usize,
    pub order_cap: usize,
    pub depth_cap: usize,
    pub seed: u64,
    /// Random elements for the cocycle checks.
    pub samples: usize,
    #[serde(skip)]
    pub timing: bool,
    #[serde(skip)]
    pub tool_version: String,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            radius: 200,
            n: 10,
            vertex_cap: crate::schreier::DEFAULT_VERTEX_CAP,
            order_cap: crate::permgroup::DEFAULT_ORDER_CAP,
            depth_cap: crate::full_group::DEFAULT_DEPTH_CAP,
            seed: crate::recurrence::DEFAULT_SEED,
            samples: 20,
            timing: false,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// A kernel element to drive the pipeline when none is supplied: the first
/// restricted involution, else the swap (g on "0", g⁻¹ on "1") for the first
/// generator when that is a valid kernel element, else the identity.
pub fn default_family<S: Scalar>(frame: &Frame<S>) -> Result<Vec<FullGroupElement>> {
    if let Some(first) = kernel_candidates(frame, 3)?.into_iter().next() {
        return Ok(vec![first]);
    }
    let action = &frame.action;
    if let Some(g) = action.generator_names().first() {
        let inv = action.generator_names()[action.inverse_of(0)].clone();
        if let Ok(swap) =
            element_from_names(action, &[("0", &[g.as_str()]), ("1", &[inv.as_str()])])
        {
            if frame.in_kernel(&swap).unwrap_or(false) {
                return Ok(vec![swap]);
            }
        }
    }
    Ok(vec![FullGroupElement::identity()])
}

fn chart_hash(frame: &Frame<Exact>) -> String {
    let text = json!({ "f": frame.chart.f, "constants": frame.chart.to_json() }).to_string();
    short_hash(text.as_bytes())
}

fn outcome(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn error_witness(e: &LabError) -> Value {
    json!({ "error": e.to_string() })
}

struct Recorder {
    timing: bool,
    lemmas: Vec<LemmaResult>,
}

impl Recorder {
    fn run(&mut self, id: &'static str, check: impl FnOnce() -> Result<(Status, Value, Value)>) {
        let start = Instant::now();
        let (status, witnesses, parameters) =
            check().unwrap_or_else(|e| (Status::Fail, error_witness(&e), Value::Null));
        let millis = self.timing.then(|| start.elapsed().as_millis());
        self.lemmas.push(LemmaResult {
            id,
            status,
            witnesses,
            parameters,
            millis,
        });
    }

    fn skip(&mut self, id: &'static str, reason: &str) {
        self.lemmas.push(LemmaResult {
            id,
            status: Status::Skipped,
            witnesses: json!({ "reason": reason }),
            parameters: Value::Null,
            millis: None,
        });
    }
}

fn displacement_witness(frame: &Frame<Exact>, phi: &FullGroupElement) -> Result<Option<usize>> {
    let map = frame.element_map(phi)?;
    let graph = frame.ball.graph();
    let bound = phi.displacement_bound();
    Ok((0..frame.ball.len()).find(|&x| map[x].is_some_and(|y| graph.bfs(x)[y] > bound)))
}

/// Runs every lemma check on the window of `config.radius` around the
/// basepoint. Errors are reported per lemma; only a failure to build the
/// window itself is returned as `Err`.
pub fn verify(
    action: &ActionSystem,
    family: Option<Vec<FullGroupElement>>,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let frame: Frame<Exact> =
        Frame::around_basepoint(action.clone(), config.radius, config.vertex_cap)?;
    let family = match family {
        Some(f) => f,
        None => default_family(&frame)?,
    };
    let ball = &frame.ball;
    let base = ball.base();
    let n = config.n;
    let mut rec = Recorder {
        timing: config.timing,
        lemmas: Vec::new(),
    };

    rec.run("localfin", || {
        let fiber = fiber_diameter_check(ball.graph(), &frame.chart);
        Ok((outcome(fiber.pass), fiber.to_json(), frame.chart.to_json()))
    });

    rec.run("biinf", || {
        let k = max_geodesic_midpoint(ball, base, QI_MARGIN);
        let geodesic = frame.line.is_geodesic(ball.graph());
        let pass = geodesic && (ball.is_closed() || 2 * k >= ball.radius());
        Ok((
            outcome(pass),
            json!({ "midpoint_half_length": k, "diametral_is_geodesic": geodesic }),
            json!({ "radius": ball.radius(), "geodesic_length": frame.line.len() }),
        ))
    });

    rec.run("m_geod", || {
        let cover = m_covering_check(ball, &frame.line, &frame.chart.m, QI_MARGIN);
        Ok((
            outcome(cover.pass),
            cover.to_json(),
            json!({ "margin": QI_MARGIN }),
        ))
    });

    rec.run("boundY", || {
        let report = crate::cocycle::boundary_level_check(&frame.half, &frame.chart);
        Ok((
            outcome(report.pass),
            json!({ "witness": report.witness, "max_level": report.max_level }),
            json!({ "bound": report.bound.to_string(), "boundary": frame.half.boundary.len() }),
        ))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample: Vec<FullGroupElement> = (0..config.samples)
        .map(|_| random_element(&mut rng, action, 3, 3))
        .collect();

    rec.run("cocycle_fin", || {
        let mut sizes = Vec::new();
        let mut bad = None;
        for (i, phi) in family.iter().chain(&sample).enumerate() {
            match frame.cocycle(phi) {
                Ok(c) if c.containment => sizes.push(c.set.len()),
                Ok(_) => bad = bad.or(Some(json!({ "element": i, "reason": "containment" }))),
                Err(e) => bad = bad.or(Some(json!({ "element": i, "reason": e.to_string() }))),
            }
        }
        let identity = frame.cocycle(&FullGroupElement::identity())?.set.is_empty();
        let pass = bad.is_none() && identity;
        Ok((
            outcome(pass),
            json!({ "failure": bad, "identity_empty": identity }),
            json!({ "elements": family.len() + sample.len(), "max_size": sizes.iter().max() }),
        ))
    });

    rec.run("cocycle_identity", || {
        let mut failure = None;
        let pairs: Vec<(usize, usize)> = (0..sample.len())
            .map(|i| (i, (i * 7 + 3) % sample.len()))
            .collect();
        for &(i, j) in &pairs {
            if !cocycle_identity_holds(
                action,
                ball,
                &frame.half,
                &sample[i],
                &sample[j],
                config.depth_cap,
            )? {
                failure = Some(json!([i, j]));
                break;
            }
        }
        Ok((
            outcome(failure.is_none()),
            json!({ "failure": failure }),
            json!({ "pairs": pairs.len() }),
        ))
    });

    rec.run("kernel_stab", || {
        // c_φ = ∅ must agree with φ(Y) = Y computed directly on certified members.
        let members = frame.half.members();
        let inner = ball.radius().saturating_sub(2 + 2 * sample.iter().map(FullGroupElement::displacement_bound).max().unwrap_or(0));
        let core: BTreeSet<usize> = members.iter().copied().filter(|&v| ball.is_closed() || ball.dist(v) <= inner).collect();
        let mut mismatch = None;
        for (i, phi) in family.iter().chain(&sample).enumerate() {
            let kernel = frame.in_kernel(phi)?;
            let image = map_set(&frame.element_map(phi)?, &core);
            let stable = image.is_some_and(|img| img.iter().all(|&v| frame.half.member[v]));
            let inverse_stable = {
                let inv = phi.invert(action)?;
                map_set(&frame.element_map(&inv)?, &core).is_some_and(|img| img.iter().all(|&v| frame.half.member[v]))
            };
            if kernel != (stable && inverse_stable) {
                mismatch = Some(i);
                break;
            }
        }
        let mut closure = true;
        for a in &family {
            closure &= frame.in_kernel(&a.invert(action)?)?;
            for b in &family {
                closure &= frame.in_kernel(&a.compose(b, action, config.depth_cap)?)?;
            }
        }
        let family_in_kernel = family.iter().map(|phi| frame.in_kernel(phi)).collect::<Result<Vec<_>>>()?;
        let pass = mismatch.is_none() && closure && family_in_kernel.iter().all(|&k| k);
        Ok((
            outcome(pass),
            json!({ "mismatch": mismatch, "family_in_kernel": family_in_kernel, "closed": closure }),
            json!({ "tested": family.len() + sample.len() }),
        ))
    });

    let bound = family_n_phi(&frame, &family);
    let precondition = Exact::from_count(n) > bound;

    rec.run("upp", || {
        let report = repetition_radius(ball, &family, base, n)?;
        Ok((
            Status::Pass,
            json!({ "r": report.r, "matches": report.matches.len() }),
            json!({ "n": n, "tested": report.tested, "window_radius": report.window_radius }),
        ))
    });

    rec.run("d_phi", || {
        let mut worst = None;
        for (i, phi) in family.iter().chain(&sample).enumerate() {
            if let Some(x) = displacement_witness(&frame, phi)? {
                worst = Some(json!({ "element": i, "vertex": x }));
                break;
            }
        }
        let d: Vec<usize> = family
            .iter()
            .map(FullGroupElement::displacement_bound)
            .collect();
        let n_phi: Vec<String> = family
            .iter()
            .map(|phi| frame.n_phi(phi).to_string())
            .collect();
        Ok((
            outcome(worst.is_none()),
            json!({ "violation": worst }),
            json!({ "d_phi": d, "N_phi": n_phi, "m": frame.chart.m.to_string(), "R": frame.r }),
        ))
    });

    if precondition {
        rec.run("oneend", || {
            let report = transport_report(&frame, &family, base, n)?;
            let ends = report.claims.iter().find(|c| c.name == "ends").expect("ends claim");
            // At z = p the transported half-space must be Y itself.
            let expected: BTreeSet<usize> = (0..ball.len())
                .filter(|&v| frame.half.member[v] && (ball.is_closed() || ball.dist(v) <= report.region_radius))
                .collect();
            let same = report.y_z == expected;
            Ok((
                outcome(ends.pass && same),
                json!({ "ends": ends.to_json(), "side": if report.plus_side { "A+" } else { "A-" }, "equals_y": same }),
                json!({ "z": base, "n": n }),
            ))
        });

        rec.run("stab_transport", || {
            let matches = pattern_matches(ball, &family, base, n)?;
            let d_max = crate::pattern::family_displacement(&family);
            let mut usable: Vec<usize> = matches
                .into_iter()
                .filter(|&z| ball.is_closed() || ball.dist(z) + n + 1 + d_max <= ball.radius())
                .collect();
            usable.sort_by_key(|&z| (ball.dist(z), z));
            usable.truncate(TRANSPORT_POINTS);
            let reports = usable
                .iter()
                .map(|&z| transport_report(&frame, &family, z, n))
                .collect::<Result<Vec<_>>>()?;
            let pass =
                usable.len() >= TRANSPORT_POINTS.min(2) && reports.iter().all(|r| r.passed());
            Ok((
                outcome(pass),
                json!(reports.iter().map(|r| r.to_json()).collect::<Vec<_>>()),
                json!({ "points": usable.len(), "n": n }),
            ))
        });

        match family_report(&frame, &family, n) {
            Ok(nested) => {
                let pick = |names: &[&str]| -> Vec<Value> {
                    nested
                        .checks
                        .iter()
                        .filter(|c| names.contains(&c.name))
                        .map(|c| c.to_json())
                        .collect()
                };
                let ok = |names: &[&str]| {
                    nested
                        .checks
                        .iter()
                        .filter(|c| names.contains(&c.name))
                        .all(|c| c.pass)
                };
                let params = json!({ "anchors": nested.anchors.len(), "spacing": nested.spacing, "r": nested.r });
                rec.run("nesting", || {
                    Ok((
                        outcome(ok(&["disjoint", "nesting"]) && nested.anchors.len() >= 3),
                        json!(pick(&["disjoint", "nesting"])),
                        params.clone(),
                    ))
                });
                let block_names = ["block_bound", "block_segment", "block_invariance"];
                rec.run("block_bound", || {
                    Ok((
                        outcome(ok(&block_names)),
                        json!(pick(&block_names)),
                        json!({ "U": nested.u_bound, "blocks": nested.blocks.iter().map(|b| b.members.len()).collect::<Vec<_>>() }),
                    ))
                });
                rec.run("finite_order", || {
                    let order = finite_embedding_order(&frame, &family, &nested, config.order_cap)?;
                    Ok((
                        outcome(order.agree),
                        order.to_json(),
                        json!({ "cap": config.order_cap }),
                    ))
                });
            }
            Err(e) => {
                for id in ["nesting", "block_bound", "finite_order"] {
                    rec.run(id, || Err(e.clone()));
                }
            }
        }
    } else {
        let reason = format!("n = {n} does not exceed N_phi = {bound}");
        for id in [
            "oneend",
            "stab_transport",
            "nesting",
            "block_bound",
            "finite_order",
        ] {
            rec.skip(id, &reason);
        }
    }

    rec.run("recurrence", || {
        let radii: Vec<usize> = std::iter::successors(Some(2usize), |r| Some(r * 2))
            .take_while(|&r| r <= ball.radius())
            .collect();
        let report = escape_series::<Exact>(ball, &radii)?;
        let decays = report.series.len() < 2
            || report.series.last().map(|p| &p.probability)
                < report.series.first().map(|p| &p.probability);
        Ok((
            outcome(report.monotone && decays),
            report.to_json(),
            json!({ "radii": radii }),
        ))
    });

    rec.lemmas
        .sort_by_key(|l| LEMMA_IDS.iter().position(|&id| id == l.id));
    Ok(VerificationReport {
        action: action.name().to_string(),
        action_hash: action.content_hash(),
        chart_hash: chart_hash(&frame),
        tool_version: config.tool_version.clone(),
        config: config.clone(),
        family: family
            .iter()
            .map(|phi| serde_json::to_value(phi.to_file(action)).expect("element serializes"))
            .collect(),
        lemmas: rec.lemmas,
        total_millis: config.timing.then(|| start.elapsed().as_millis()),
    })
}
