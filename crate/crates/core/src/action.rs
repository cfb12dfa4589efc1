//! Finitely generated groups acting on the binary Cantor set, their words,
//! the built-in example actions and the JSON action-definition format.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::automaton::Transducer;
use crate::error::{LabError, Result};
use crate::point::{bits_to_string, parse_bits, BoundaryPoint};

/// How a generator acts: one automaton state everywhere, or one state per
/// cylinder of a prefix partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorSpec {
    State(usize),
    Pieces(Vec<(Vec<u8>, usize)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub spec: GeneratorSpec,
}

/// A word in the generators, stored as generator indices.
/// Acts from the left: the last letter is applied first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupWord(pub Vec<usize>);

impl GroupWord {
    pub fn identity() -> Self {
        GroupWord(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    /// `self · other`: apply `other` first.
    pub fn concat(&self, other: &GroupWord) -> GroupWord {
        GroupWord(self.0.iter().chain(&other.0).copied().collect())
    }
}

#[derive(Clone, Debug)]
pub struct ActionSystem {
    name: String,
    automaton: Transducer,
    generators: Vec<Generator>,
    inverses: Vec<usize>,
    basepoint: BoundaryPoint,
}

const INVERSE_CHECK_LEVEL: usize = 8;

impl ActionSystem {
    pub fn new(
        name: impl Into<String>,
        automaton: Transducer,
        mut generators: Vec<Generator>,
        basepoint: BoundaryPoint,
    ) -> Result<Self> {
        generators.sort_by(|a, b| a.name.cmp(&b.name));
        for g in &generators {
            if let GeneratorSpec::Pieces(pieces) = &g.spec {
                let prefixes: Vec<Vec<u8>> = pieces.iter().map(|(p, _)| p.clone()).collect();
                check_partition(&prefixes).map_err(|e| {
                    LabError::InvalidAutomaton(format!("generator `{}`: {e}", g.name))
                })?;
            }
            let states: Vec<usize> = match &g.spec {
                GeneratorSpec::State(s) => vec![*s],
                GeneratorSpec::Pieces(p) => p.iter().map(|(_, s)| *s).collect(),
            };
            if states.iter().any(|&s| s >= automaton.len()) {
                return Err(LabError::InvalidAutomaton(format!(
                    "generator `{}` uses an unknown state",
                    g.name
                )));
            }
        }
        let mut system = ActionSystem {
            name: name.into(),
            automaton,
            generators,
            inverses: Vec::new(),
            basepoint,
        };
        system.inverses = system.detect_inverses()?;
        Ok(system)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn automaton(&self) -> &Transducer {
        &self.automaton
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator_names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    pub fn basepoint(&self) -> &BoundaryPoint {
        &self.basepoint
    }

    pub fn with_basepoint(&self, basepoint: BoundaryPoint) -> Self {
        ActionSystem {
            basepoint,
            ..self.clone()
        }
    }

    pub fn generator_index(&self, name: &str) -> Result<usize> {
        self.generators
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| LabError::UnknownGenerator(name.to_string()))
    }

    pub fn inverse_of(&self, generator: usize) -> usize {
        self.inverses[generator]
    }

    /// Deepest prefix used by a piecewise generator.
    pub fn piece_depth(&self) -> usize {
        self.generators
            .iter()
            .map(|g| match &g.spec {
                GeneratorSpec::State(_) => 0,
                GeneratorSpec::Pieces(p) => p.iter().map(|(q, _)| q.len()).max().unwrap_or(0),
            })
            .max()
            .unwrap_or(0)
    }

    pub fn word(&self, names: &[impl AsRef<str>]) -> Result<GroupWord> {
        names
            .iter()
            .map(|n| self.generator_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(GroupWord)
    }

    /// Parses a word written letter by letter, e.g. `"bcd"`; only valid when
    /// every generator name is one character.
    pub fn word_from_letters(&self, letters: &str) -> Result<GroupWord> {
        let names: Vec<String> = letters.chars().map(|c| c.to_string()).collect();
        self.word(&names)
    }

    pub fn word_names(&self, word: &GroupWord) -> Vec<String> {
        word.0
            .iter()
            .map(|&g| self.generators[g].name.clone())
            .collect()
    }

    pub fn invert_word(&self, word: &GroupWord) -> GroupWord {
        GroupWord(word.0.iter().rev().map(|&g| self.inverses[g]).collect())
    }

    /// Free reduction: cancels adjacent `g · g⁻¹`.
    pub fn reduce_word(&self, word: &GroupWord) -> GroupWord {
        let mut out: Vec<usize> = Vec::with_capacity(word.len());
        for &g in &word.0 {
            if out.last().is_some_and(|&h| self.inverses[h] == g) {
                out.pop();
            } else {
                out.push(g);
            }
        }
        GroupWord(out)
    }

    fn state_for(
        &self,
        generator: usize,
        letter_at: impl Fn(usize) -> Option<u8>,
    ) -> Result<usize> {
        match &self.generators[generator].spec {
            GeneratorSpec::State(s) => Ok(*s),
            GeneratorSpec::Pieces(pieces) => {
                for (prefix, s) in pieces {
                    let mut matched = true;
                    for (i, &b) in prefix.iter().enumerate() {
                        match letter_at(i) {
                            Some(l) if l == b => {}
                            Some(_) => {
                                matched = false;
                                break;
                            }
                            None => {
                                return Err(LabError::LevelTooShallow {
                                    level: i,
                                    depth: prefix.len(),
                                })
                            }
                        }
                    }
                    if matched {
                        return Ok(*s);
                    }
                }
                unreachable!("generator pieces form a partition")
            }
        }
    }

    pub fn apply_generator(&self, generator: usize, x: &BoundaryPoint) -> BoundaryPoint {
        let state = self
            .state_for(generator, |i| Some(x.letter(i)))
            .expect("infinite words match every prefix");
        self.automaton.apply(state, x)
    }

    /// Applies a word to a point, rightmost letter first.
    pub fn apply_word(&self, word: &GroupWord, x: &BoundaryPoint) -> BoundaryPoint {
        word.0
            .iter()
            .rev()
            .fold(x.clone(), |acc, &g| self.apply_generator(g, &acc))
    }

    /// Level action of a generator on a finite word.
    pub fn apply_generator_prefix(&self, generator: usize, word: &[u8]) -> Result<Vec<u8>> {
        let state = self.state_for(generator, |i| word.get(i).copied())?;
        Ok(self.automaton.apply_prefix(state, word))
    }

    pub fn apply_word_prefix(&self, word: &GroupWord, prefix: &[u8]) -> Result<Vec<u8>> {
        word.0.iter().rev().try_fold(prefix.to_vec(), |acc, &g| {
            self.apply_generator_prefix(g, &acc)
        })
    }

    fn sample_points() -> Vec<BoundaryPoint> {
        let mut pts = Vec::new();
        for pre_len in 0..=2usize {
            for per_len in 1..=3usize {
                for bits in 0..(1u32 << (pre_len + per_len)) {
                    let word: Vec<u8> = (0..pre_len + per_len)
                        .map(|i| ((bits >> i) & 1) as u8)
                        .collect();
                    let (pre, per) = word.split_at(pre_len);
                    pts.push(BoundaryPoint::new(pre.to_vec(), per.to_vec()).unwrap());
                }
            }
        }
        pts.sort();
        pts.dedup();
        pts
    }

    /// True when `second ∘ first` fixes every tested word and point.
    fn composes_to_identity(&self, first: usize, second: usize) -> bool {
        let level = INVERSE_CHECK_LEVEL.max(self.piece_depth());
        let words_ok = all_words(level).all(|w| {
            self.apply_generator_prefix(first, &w)
                .and_then(|img| self.apply_generator_prefix(second, &img))
                .map(|back| back == w)
                .unwrap_or(false)
        });
        words_ok
            && Self::sample_points()
                .iter()
                .all(|x| self.apply_generator(second, &self.apply_generator(first, x)) == *x)
    }

    pub fn is_involution(&self, generator: usize) -> bool {
        self.composes_to_identity(generator, generator)
    }

    fn detect_inverses(&self) -> Result<Vec<usize>> {
        (0..self.generators.len())
            .map(|g| {
                std::iter::once(g)
                    .chain((0..self.generators.len()).filter(|&h| h != g))
                    .find(|&h| self.composes_to_identity(g, h))
                    .ok_or_else(|| LabError::NotClosedUnderInverse(self.generators[g].name.clone()))
            })
            .collect()
    }

    pub fn to_file(&self) -> ActionFile {
        let state_name = |s: usize| self.automaton.name(s).to_string();
        let transducers = (0..self.automaton.len())
            .map(|s| {
                let transitions = (0..2u8)
                    .map(|b| (b.to_string(), state_name(self.automaton.next_state(s, b))))
                    .collect();
                let outputs = (0..2u8)
                    .map(|b| (b.to_string(), self.automaton.output(s, b).to_string()))
                    .collect();
                (
                    state_name(s),
                    StateFile {
                        transitions,
                        outputs,
                    },
                )
            })
            .collect();
        let generators = self
            .generators
            .iter()
            .map(|g| {
                let spec = match &g.spec {
                    GeneratorSpec::State(s) => GeneratorFile::State(state_name(*s)),
                    GeneratorSpec::Pieces(p) => GeneratorFile::Pieces(
                        p.iter()
                            .map(|(prefix, s)| PieceFile {
                                prefix: bits_to_string(prefix),
                                state: state_name(*s),
                            })
                            .collect(),
                    ),
                };
                (g.name.clone(), spec)
            })
            .collect();
        ActionFile {
            name: self.name.clone(),
            transducers,
            generators,
            basepoint: PointFile {
                preperiod: bits_to_string(self.basepoint.preperiod()),
                period: bits_to_string(self.basepoint.period()),
            },
        }
    }

    pub fn from_file(file: &ActionFile) -> Result<Self> {
        let names: Vec<&String> = file.transducers.keys().collect();
        let index = |name: &str| {
            names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| LabError::InvalidAutomaton(format!("unknown state `{name}`")))
        };
        let letter = |map: &BTreeMap<String, String>, key: &str, what: &str| {
            map.get(key).cloned().ok_or_else(|| {
                LabError::InvalidAutomaton(format!("missing {what} for letter {key}"))
            })
        };
        let mut states = Vec::new();
        for (name, st) in &file.transducers {
            let next = [
                index(&letter(&st.transitions, "0", "transition")?)?,
                index(&letter(&st.transitions, "1", "transition")?)?,
            ];
            let parse_out = |s: String| match s.as_str() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(LabError::InvalidAutomaton(format!(
                    "output `{other}` is not binary"
                ))),
            };
            let out = [
                parse_out(letter(&st.outputs, "0", "output")?)?,
                parse_out(letter(&st.outputs, "1", "output")?)?,
            ];
            states.push((name.clone(), next, out));
        }
        let automaton = Transducer::new(states)?;
        let generators = file
            .generators
            .iter()
            .map(|(name, spec)| {
                let spec = match spec {
                    GeneratorFile::State(s) => GeneratorSpec::State(index(s)?),
                    GeneratorFile::Pieces(p) => GeneratorSpec::Pieces(
                        p.iter()
                            .map(|piece| Ok((parse_bits(&piece.prefix)?, index(&piece.state)?)))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                Ok(Generator {
                    name: name.clone(),
                    spec,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let basepoint =
            BoundaryPoint::from_strs(&file.basepoint.preperiod, &file.basepoint.period)?;
        ActionSystem::new(file.name.clone(), automaton, generators, basepoint)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ActionFile =
            serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("action file serializes")
    }

    /// Short content hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(&self.to_file()).expect("action file serializes");
        short_hash(json.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn all_words(level: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..(1u64 << level)).map(move |bits| (0..level).map(|i| ((bits >> i) & 1) as u8).collect())
}

/// Checks that the prefixes are pairwise incomparable and cover every
/// infinite word.
pub fn check_partition(prefixes: &[Vec<u8>]) -> std::result::Result<(), String> {
    let mut sorted = prefixes.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].starts_with(&pair[0]) {
            return Err(format!(
                "`{}` lies under `{}`",
                bits_to_string(&pair[1]),
                bits_to_string(&pair[0])
            ));
        }
    }
    let depth = sorted.iter().map(Vec::len).max().unwrap_or(0);
    if depth > 63 {
        return Err(format!("prefix depth {depth} exceeds 63"));
    }
    let mass: u128 = sorted.iter().map(|p| 1u128 << (depth - p.len())).sum();
    if mass != 1u128 << depth {
        return Err("prefixes do not cover every word".into());
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ActionFile {
    pub name: String,
    pub transducers: BTreeMap<String, StateFile>,
    pub generators: BTreeMap<String, GeneratorFile>,
    pub basepoint: PointFile,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct StateFile {
    pub transitions: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum GeneratorFile {
    State(String),
    Pieces(Vec<PieceFile>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PieceFile {
    pub prefix: String,
    pub state: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PointFile {
    pub preperiod: String,
    pub period: String,
}

pub const BUILTIN_ACTIONS: [&str; 3] = ["grigorchuk", "odometer", "dihedral"];

fn state(name: &str, next: [usize; 2], out: [u8; 2]) -> (String, [usize; 2], [u8; 2]) {
    (name.to_string(), next, out)
}

fn single(name: &str, s: usize) -> Generator {
    Generator {
        name: name.to_string(),
        spec: GeneratorSpec::State(s),
    }
}

/// The built-in actions: `grigorchuk`, `odometer` and `dihedral`.
pub fn builtin_action(name: &str) -> Result<ActionSystem> {
    match name {
        "grigorchuk" => {
            // a = σ, b = (a, c), c = (a, d), d = (1, b)
            let automaton = Transducer::new(vec![
                state("e", [0, 0], [0, 1]),
                state("a", [0, 0], [1, 0]),
                state("b", [1, 3], [0, 1]),
                state("c", [1, 4], [0, 1]),
                state("d", [0, 2], [0, 1]),
            ])?;
            let gens = vec![
                single("a", 1),
                single("b", 2),
                single("c", 3),
                single("d", 4),
            ];
            ActionSystem::new("grigorchuk", automaton, gens, BoundaryPoint::constant(0))
        }
        "odometer" => {
            // t(0w) = 1w, t(1w) = 0·t(w); its inverse borrows instead of carrying.
            let automaton = Transducer::new(vec![
                state("e", [0, 0], [0, 1]),
                state("t", [0, 1], [1, 0]),
                state("t^-1", [2, 0], [1, 0]),
            ])?;
            let gens = vec![single("t", 1), single("t^-1", 2)];
            ActionSystem::new("odometer", automaton, gens, BoundaryPoint::constant(0))
        }
        "dihedral" => {
            // a = σ, b = (a, b)
            let automaton = Transducer::new(vec![
                state("e", [0, 0], [0, 1]),
                state("a", [0, 0], [1, 0]),
                state("b", [1, 2], [0, 1]),
            ])?;
            let gens = vec![single("a", 1), single("b", 2)];
            ActionSystem::new("dihedral", automaton, gens, BoundaryPoint::constant(0))
        }
        other => Err(LabError::UnknownAction(other.to_string())),
    }
}

/// One fragment `h`: acts by the base involution on the `true` cylinders and
/// trivially on the `false` ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentTable {
    pub name: String,
    pub pieces: Vec<(Vec<u8>, bool)>,
}

impl FragmentTable {
    pub fn new(name: &str, pieces: &[(&str, bool)]) -> Result<Self> {
        Ok(FragmentTable {
            name: name.to_string(),
            pieces: pieces
                .iter()
                .map(|(p, on)| Ok((parse_bits(p)?, *on)))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    fn is_on(&self, word: &[u8]) -> bool {
        self.pieces.iter().any(|(p, on)| *on && word.starts_with(p))
    }
}

/// Replaces the involutive generator `base` by the fragments in `tables`.
pub fn fragment_generators(
    action: &ActionSystem,
    base: &str,
    tables: &[FragmentTable],
) -> Result<ActionSystem> {
    let base_index = action.generator_index(base)?;
    let base_state = match action.generators[base_index].spec {
        GeneratorSpec::State(s) if action.is_involution(base_index) => s,
        _ => return Err(LabError::InvalidBase(base.to_string())),
    };
    if tables.is_empty() {
        return Err(LabError::NotAFragmentation("no fragments given".into()));
    }
    for t in tables {
        let prefixes: Vec<Vec<u8>> = t.pieces.iter().map(|(p, _)| p.clone()).collect();
        check_partition(&prefixes)
            .map_err(|e| LabError::NotAFragmentation(format!("fragment `{}`: {e}", t.name)))?;
    }
    let depth = tables
        .iter()
        .flat_map(|t| t.pieces.iter().map(|(p, _)| p.len()))
        .max()
        .unwrap_or(0);
    for word in all_words(depth) {
        if !tables.iter().any(|t| t.is_on(&word)) {
            return Err(LabError::NotAFragmentation(format!(
                "cylinder `{}` is not covered by any fragment",
                bits_to_string(&word)
            )));
        }
        for t in tables {
            let image = action.automaton.apply_prefix(base_state, &word);
            if t.is_on(&word) && !t.is_on(&image) {
                return Err(LabError::NotAFragmentation(format!(
                    "support of `{}` is not invariant under `{base}` at `{}`",
                    t.name,
                    bits_to_string(&word)
                )));
            }
        }
    }
    let identity = action.automaton.identity();
    let mut generators: Vec<Generator> = Vec::new();
    for (i, g) in action.generators.iter().enumerate() {
        if i != base_index {
            generators.push(g.clone());
            continue;
        }
        for t in tables {
            let pieces = t
                .pieces
                .iter()
                .map(|(p, on)| (p.clone(), if *on { base_state } else { identity }))
                .collect();
            generators.push(Generator {
                name: t.name.clone(),
                spec: GeneratorSpec::Pieces(pieces),
            });
        }
    }
    let mut names: Vec<&str> = generators.iter().map(|g| g.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(LabError::NotAFragmentation(
            "fragment names clash with existing generators".into(),
        ));
    }
    ActionSystem::new(
        format!("{}-frag-{}", action.name, base),
        action.automaton.clone(),
        generators,
        action.basepoint.clone(),
    )
}

/// A uniformly random eventually periodic point with bounded lengths.
pub fn random_point<R: Rng>(rng: &mut R, max_preperiod: usize, max_period: usize) -> BoundaryPoint {
    let pre_len = rng.gen_range(0..=max_preperiod);
    let per_len = rng.gen_range(1..=max_period.max(1));
    let pre = (0..pre_len).map(|_| rng.gen_range(0..2u8)).collect();
    let per = (0..per_len).map(|_| rng.gen_range(0..2u8)).collect();
    BoundaryPoint::new(pre, per).expect("nonempty period")
}
