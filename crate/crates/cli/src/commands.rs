use std::fs;
use std::path::Path;

use fullgroup_core::action::{random_point, BUILTIN_ACTIONS};
use fullgroup_core::cocycle::Frame;
use fullgroup_core::full_group::{ElementFile, FullGroupElement};
use fullgroup_core::line_geometry::{
    diametral_geodesic, fiber_diameter_check, fit_line_chart, m_covering_check, QI_MARGIN,
};
use fullgroup_core::pattern::{family_displacement, pattern_matches, transport_report};
use fullgroup_core::recurrence::{escape_series, regular_tree, seed_from_env, simulate_escape};
use fullgroup_core::schreier::{build_ball, build_level_graph, SchreierBall};
use fullgroup_core::stabilizer::{family_report, finite_embedding_order};
use fullgroup_core::verify::{default_family, verify, VerifyConfig};
use fullgroup_core::{builtin_action, ActionSystem, BoundaryPoint, Exact, LabError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{ActionCommand, Command, ElementCommand, Family, Output, Window};

pub enum Failure {
    Usage(String),
    Check(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::UnknownAction(_)
            | LabError::UnknownGenerator(_)
            | LabError::InvalidPoint(_)
            | LabError::InvalidAutomaton(_)
            | LabError::NotClosedUnderInverse(_)
            | LabError::InvalidBase(_)
            | LabError::InvalidRadius(_)
            | LabError::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// A built-in name or a path to an action JSON file.
fn load_action(spec: &str) -> Result<ActionSystem, Failure> {
    if BUILTIN_ACTIONS.contains(&spec) {
        return Ok(builtin_action(spec)?);
    }
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(ActionSystem::from_json(&read(path)?)?);
    }
    Err(LabError::UnknownAction(spec.to_string()).into())
}

fn load_element(action: &ActionSystem, path: &Path) -> Result<FullGroupElement, Failure> {
    Ok(FullGroupElement::from_json(action, &read(path)?)?)
}

/// A JSON array of element files, or a single element file.
fn load_family(action: &ActionSystem, path: &Path) -> Result<Vec<FullGroupElement>, Failure> {
    let text = read(path)?;
    let files: Vec<ElementFile> = match serde_json::from_str::<Vec<ElementFile>>(&text) {
        Ok(files) => files,
        Err(_) => vec![serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?],
    };
    files
        .iter()
        .map(|f| FullGroupElement::from_file(action, f).map_err(Failure::from))
        .collect()
}

fn emit(output: &Output, value: &Value) -> Result<(), Failure> {
    emit_text(
        output,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(value).expect("json value serializes")
        ),
    )
}

fn emit_text(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn window(
    action: &ActionSystem,
    w: &Window,
    default_radius: usize,
) -> Result<SchreierBall, Failure> {
    match (w.level, w.radius) {
        (Some(_), Some(_)) => Err(Failure::Usage("--level and --radius are exclusive".into())),
        (Some(level), None) => {
            let graph = build_level_graph(action, level, w.cap)?;
            Ok(graph.as_window(action.name(), &action.basepoint().prefix(level))?)
        }
        (None, radius) => Ok(build_ball(action, radius.unwrap_or(default_radius), w.cap)?),
    }
}

fn frame_for(
    action: &ActionSystem,
    f: &Family,
) -> Result<(Frame<Exact>, Vec<FullGroupElement>), Failure> {
    let frame = Frame::around_basepoint(action.clone(), f.radius, f.cap)?;
    let family = match &f.file {
        Some(path) => load_family(action, path)?,
        None => default_family(&frame)?,
    };
    Ok((frame, family))
}

/// Generator inverses, plus the defining relations when the action has
/// generators named a, b, c, d.
fn check_action(action: &ActionSystem) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env());
    let points: Vec<BoundaryPoint> = (0..1000).map(|_| random_point(&mut rng, 8, 8)).collect();
    let names = action.generator_names();
    let holds = |word: &[&str]| -> Result<bool, LabError> {
        let w = action.word(word)?;
        Ok(points.iter().all(|x| action.apply_word(&w, x) == *x))
    };
    let inverses: Vec<Value> = (0..names.len())
        .map(|g| {
            let inv = &names[action.inverse_of(g)];
            json!({ "generator": names[g], "inverse": inv, "holds": holds(&[&names[g], inv]).unwrap_or(false) })
        })
        .collect();
    let mut relations = Vec::new();
    if ["a", "b", "c", "d"]
        .iter()
        .all(|g| names.iter().any(|n| n == g))
    {
        for rel in [
            &["a", "a"][..],
            &["b", "b"],
            &["c", "c"],
            &["d", "d"],
            &["b", "c", "d"],
        ] {
            relations
                .push(json!({ "relation": rel.join(""), "holds": holds(rel).unwrap_or(false) }));
        }
    }
    let pass = inverses
        .iter()
        .chain(&relations)
        .all(|v| v["holds"] == json!(true));
    json!({
        "name": action.name(),
        "hash": action.content_hash(),
        "generators": names,
        "piece_depth": action.piece_depth(),
        "inverses": inverses,
        "relations": relations,
        "points": points.len(),
        "pass": pass,
    })
}

fn element_summary(action: &ActionSystem, e: &FullGroupElement) -> Value {
    json!({
        "element": serde_json::to_value(e.to_file(action)).expect("element serializes"),
        "depth": e.depth(),
        "d_phi": e.displacement_bound(),
        "hash": e.content_hash(action),
    })
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Action(ActionCommand::Dump { action, output }) => {
            let action = load_action(&action)?;
            emit_text(&output, &format!("{}\n", action.to_json()))?;
            Ok(true)
        }
        Command::Action(ActionCommand::Check { action, output }) => {
            let report = check_action(&load_action(&action)?);
            emit(&output, &report)?;
            Ok(report["pass"] == json!(true))
        }
        Command::Graph {
            action,
            window: w,
            dot,
            no_loops,
            output,
        } => {
            let action = load_action(&action)?;
            let ball = window(&action, &w, 8)?;
            if dot {
                emit_text(&output, &ball.to_dot(no_loops))?;
            } else {
                let mut value = ball.to_json();
                if no_loops {
                    let simple: Vec<[usize; 2]> = (0..ball.len())
                        .flat_map(|v| {
                            ball.graph()
                                .neighbors(v)
                                .iter()
                                .filter(move |&&u| u > v)
                                .map(move |&u| [v, u])
                        })
                        .collect();
                    value["edges"] = json!(simple);
                }
                emit(&output, &value)?;
            }
            Ok(true)
        }
        Command::Qi {
            action,
            window: w,
            output,
        } => {
            let action = load_action(&action)?;
            let ball = window(&action, &w, 32)?;
            let chart = fit_line_chart::<Exact>(&ball)?;
            let fiber = fiber_diameter_check(ball.graph(), &chart);
            let line = diametral_geodesic(&ball)?;
            let cover = m_covering_check(&ball, &line, &chart.m, QI_MARGIN);
            let pass = fiber.pass && cover.pass;
            emit(
                &output,
                &json!({
                    "action": action.name(),
                    "window": ball.name(),
                    "vertices": ball.len(),
                    "closed": ball.is_closed(),
                    "certificate": chart.to_json(),
                    "fiber": fiber.to_json(),
                    "covering": cover.to_json(),
                    "geodesic_length": line.len(),
                    "pass": pass,
                }),
            )?;
            Ok(pass)
        }
        Command::Element(cmd) => run_element(cmd),
        Command::Cocycle {
            action,
            element,
            radius,
            cap,
            output,
        } => {
            let action = load_action(&action)?;
            let phi = load_element(&action, &element)?;
            let frame: Frame<Exact> = Frame::around_basepoint(action.clone(), radius, cap)?;
            let value = frame.cocycle(&phi)?;
            let mut report = value.to_json(&frame.ball);
            report["kernel"] = json!(value.set.is_empty());
            report["R"] = json!(frame.r);
            report["d_phi"] = json!(phi.displacement_bound());
            report["m"] = json!(frame.chart.m.to_string());
            report["N_phi"] = json!(frame.n_phi(&phi).to_string());
            emit(&output, &report)?;
            Ok(value.stabilized && value.containment)
        }
        Command::Transport {
            action,
            family,
            z,
            points,
            output,
        } => {
            let action = load_action(&action)?;
            let (frame, elements) = frame_for(&action, &family)?;
            let ball = &frame.ball;
            let targets = match z {
                Some(z) if z < ball.len() => vec![z],
                Some(z) => return Err(Failure::Usage(format!("vertex {z} is outside the window"))),
                None => {
                    let d_max = family_displacement(&elements);
                    let mut m: Vec<usize> =
                        pattern_matches(ball, &elements, ball.base(), family.n)?
                            .into_iter()
                            .filter(|&v| ball.dist(v) + family.n + 1 + d_max <= ball.radius())
                            .collect();
                    m.sort_by_key(|&v| (ball.dist(v), v));
                    m.truncate(points);
                    m
                }
            };
            let reports = targets
                .iter()
                .map(|&z| transport_report(&frame, &elements, z, family.n))
                .collect::<Result<Vec<_>, _>>()?;
            let pass = reports.iter().all(|r| r.passed());
            emit(
                &output,
                &json!({
                    "action": action.name(),
                    "n": family.n,
                    "R": frame.r,
                    "reports": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
                    "pass": pass,
                }),
            )?;
            Ok(pass)
        }
        Command::Stabilizer {
            action,
            family,
            order_cap,
            output,
        } => {
            let action = load_action(&action)?;
            let (frame, elements) = frame_for(&action, &family)?;
            let nested = family_report(&frame, &elements, family.n)?;
            let order = finite_embedding_order(&frame, &elements, &nested, order_cap)?;
            let pass = nested.passed() && order.agree;
            emit(
                &output,
                &json!({
                    "action": action.name(),
                    "nested": nested.to_json(),
                    "order": order.to_json(),
                    "order_cap": order_cap,
                    "pass": pass,
                }),
            )?;
            Ok(pass)
        }
        Command::Recurrence {
            action,
            radii,
            simulate,
            cap,
            output,
        } => {
            let largest = radii.iter().copied().max().unwrap_or(0);
            let ball = if action == "tree3" {
                regular_tree(3, largest)?
            } else {
                build_ball(&load_action(&action)?, largest, cap)?
            };
            let report = escape_series::<Exact>(&ball, &radii)?;
            let mut value = report.to_json();
            if let Some(trials) = simulate {
                let seed = seed_from_env();
                let sims = radii
                    .iter()
                    .map(|&r| simulate_escape(&ball, r, trials, seed).map(|s| s.to_json()))
                    .collect::<Result<Vec<_>, _>>()?;
                value["simulation"] = json!({ "seed": seed, "runs": sims });
            }
            emit(&output, &value)?;
            Ok(report.monotone)
        }
        Command::Verify {
            action,
            radius,
            n,
            family,
            cap,
            order_cap,
            depth_cap,
            samples,
            timing,
            output,
        } => {
            let action = load_action(&action)?;
            let elements = family
                .as_deref()
                .map(|p| load_family(&action, p))
                .transpose()?;
            let config = VerifyConfig {
                radius,
                n,
                vertex_cap: cap,
                order_cap,
                depth_cap,
                seed: seed_from_env(),
                samples,
                timing,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            };
            let report = verify(&action, elements, &config)?;
            emit(&output, &report.to_json())?;
            Ok(report.passed())
        }
    }
}

fn run_element(cmd: ElementCommand) -> Outcome {
    match cmd {
        ElementCommand::Check {
            action,
            element,
            output,
        } => {
            let action = load_action(&action)?;
            let text = read(&element)?;
            match FullGroupElement::from_json(&action, &text) {
                Ok(e) => {
                    let mut v = element_summary(&action, &e);
                    v["valid"] = json!(true);
                    emit(&output, &v)?;
                    Ok(true)
                }
                Err(err @ LabError::Parse(_)) => Err(err.into()),
                Err(err) => {
                    emit(
                        &output,
                        &json!({ "valid": false, "error": err.to_string() }),
                    )?;
                    Ok(false)
                }
            }
        }
        ElementCommand::Apply {
            action,
            element,
            point,
            output,
        } => {
            let action = load_action(&action)?;
            let e = load_element(&action, &element)?;
            let x: BoundaryPoint = point.parse()?;
            let y = e.apply(&action, &x);
            emit(
                &output,
                &json!({ "point": x.to_string(), "image": y.to_string(), "piece": e.piece_index(&x) }),
            )?;
            Ok(true)
        }
        ElementCommand::Compose {
            action,
            element,
            depth_cap,
            output,
        } => {
            if element.len() != 2 {
                return Err(Failure::Usage(format!(
                    "compose takes two --element files, got {}",
                    element.len()
                )));
            }
            let action = load_action(&action)?;
            let a = load_element(&action, &element[0])?;
            let b = load_element(&action, &element[1])?;
            let product = a.compose(&b, &action, depth_cap)?;
            emit(&output, &element_summary(&action, &product))?;
            Ok(true)
        }
        ElementCommand::Invert {
            action,
            element,
            output,
        } => {
            let action = load_action(&action)?;
            let inverse = load_element(&action, &element)?.invert(&action)?;
            emit(&output, &element_summary(&action, &inverse))?;
            Ok(true)
        }
    }
}
