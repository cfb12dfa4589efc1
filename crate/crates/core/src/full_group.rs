//! Elements of the topological full group: prefix partitions labelled by
//! group words.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{check_partition, short_hash, ActionSystem, GroupWord};
use crate::error::{LabError, Result};
use crate::point::{bits_to_string, parse_bits, BoundaryPoint};

pub const DEFAULT_DEPTH_CAP: usize = 16;

/// Domain prefix, word acting on it, image prefix.
type ImageCylinder = (Vec<u8>, GroupWord, Vec<u8>);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Piece {
    pub prefix: Vec<u8>,
    pub word: GroupWord,
}

/// Pieces are kept sorted by prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FullGroupElement {
    pieces: Vec<Piece>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementFile {
    pub pieces: Vec<PieceFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceFile {
    pub prefix: String,
    pub word: Vec<String>,
}

/// Every extension of `prefix` to length `depth`.
fn extensions(prefix: &[u8], depth: usize) -> Vec<Vec<u8>> {
    if prefix.len() >= depth {
        return vec![prefix.to_vec()];
    }
    let extra = depth - prefix.len();
    (0..1u64 << extra)
        .map(|bits| {
            let mut w = prefix.to_vec();
            w.extend((0..extra).map(|i| ((bits >> i) & 1) as u8));
            w
        })
        .collect()
}

/// Replaces sibling pieces `p0`, `p1` carrying the same word by one piece `p`.
fn merge_siblings(mut pieces: Vec<Piece>) -> Vec<Piece> {
    loop {
        pieces.sort();
        let mut merged = false;
        let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
        let mut i = 0;
        while i < pieces.len() {
            let a = &pieces[i];
            if let Some(b) = pieces.get(i + 1) {
                let n = a.prefix.len();
                if n > 0
                    && b.prefix.len() == n
                    && a.prefix[..n - 1] == b.prefix[..n - 1]
                    && a.prefix[n - 1] == 0
                    && b.prefix[n - 1] == 1
                    && a.word == b.word
                {
                    out.push(Piece {
                        prefix: a.prefix[..n - 1].to_vec(),
                        word: a.word.clone(),
                    });
                    merged = true;
                    i += 2;
                    continue;
                }
            }
            out.push(a.clone());
            i += 1;
        }
        pieces = out;
        if !merged {
            return pieces;
        }
    }
}

pub fn make_element(
    action: &ActionSystem,
    pieces: Vec<(Vec<u8>, GroupWord)>,
) -> Result<FullGroupElement> {
    let prefixes: Vec<Vec<u8>> = pieces.iter().map(|(p, _)| p.clone()).collect();
    check_partition(&prefixes).map_err(LabError::NotAPartition)?;
    let mut pieces: Vec<Piece> = pieces
        .into_iter()
        .map(|(prefix, word)| Piece { prefix, word })
        .collect();
    pieces.sort();
    let element = FullGroupElement { pieces };
    element.check_bijective(action)?;
    Ok(element)
}

/// Parses `[("0", ["t"]), ...]` style tables.
pub fn element_from_names(
    action: &ActionSystem,
    pieces: &[(&str, &[&str])],
) -> Result<FullGroupElement> {
    let pieces = pieces
        .iter()
        .map(|(p, w)| Ok((parse_bits(p)?, action.word(w)?)))
        .collect::<Result<Vec<_>>>()?;
    make_element(action, pieces)
}

impl FullGroupElement {
    pub fn identity() -> Self {
        FullGroupElement {
            pieces: vec![Piece {
                prefix: Vec::new(),
                word: GroupWord::identity(),
            }],
        }
    }

    pub fn from_word(word: GroupWord) -> Self {
        FullGroupElement {
            pieces: vec![Piece {
                prefix: Vec::new(),
                word,
            }],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn depth(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.prefix.len())
            .max()
            .unwrap_or(0)
    }

    /// d_φ: longest literal word over all pieces.
    pub fn displacement_bound(&self) -> usize {
        self.pieces.iter().map(|p| p.word.len()).max().unwrap_or(0)
    }

    /// Pieces refined until each prefix fixes the generator pieces, paired
    /// with the image cylinder.
    fn image_cylinders(&self, action: &ActionSystem) -> Result<Vec<ImageCylinder>> {
        let depth = action.piece_depth();
        let mut out = Vec::new();
        for piece in &self.pieces {
            for p in extensions(&piece.prefix, depth) {
                let q = action.apply_word_prefix(&piece.word, &p)?;
                out.push((p, piece.word.clone(), q));
            }
        }
        Ok(out)
    }

    /// Exact check: the image cylinders must again form a partition.
    fn check_bijective(&self, action: &ActionSystem) -> Result<()> {
        let mut images = self.image_cylinders(action)?;
        images.sort_by(|a, b| a.2.cmp(&b.2));
        for pair in images.windows(2) {
            if pair[1].2.starts_with(&pair[0].2) {
                return Err(LabError::NotInvertible(
                    bits_to_string(&pair[0].0),
                    bits_to_string(&pair[1].0),
                ));
            }
        }
        let targets: Vec<Vec<u8>> = images.into_iter().map(|x| x.2).collect();
        check_partition(&targets).map_err(|e| {
            LabError::NotInvertible("image".into(), format!("cylinders miss words: {e}"))
        })
    }

    pub fn word_at(&self, x: &BoundaryPoint) -> &GroupWord {
        &self
            .pieces
            .iter()
            .find(|p| x.starts_with(&p.prefix))
            .expect("pieces form a partition")
            .word
    }

    pub fn piece_index(&self, x: &BoundaryPoint) -> usize {
        self.pieces
            .iter()
            .position(|p| x.starts_with(&p.prefix))
            .expect("pieces form a partition")
    }

    /// Piece containing the cylinder of a finite word, if the word is deep enough.
    pub fn piece_index_of_word(&self, word: &[u8]) -> Result<usize> {
        self.pieces
            .iter()
            .position(|p| word.starts_with(&p.prefix))
            .ok_or(LabError::LevelTooShallow {
                level: word.len(),
                depth: self.depth(),
            })
    }

    /// Level action on a finite word.
    pub fn apply_prefix(&self, action: &ActionSystem, word: &[u8]) -> Result<Vec<u8>> {
        let piece = &self.pieces[self.piece_index_of_word(word)?];
        action.apply_word_prefix(&piece.word, word)
    }

    pub fn apply(&self, action: &ActionSystem, x: &BoundaryPoint) -> BoundaryPoint {
        action.apply_word(self.word_at(x), x)
    }

    pub fn invert(&self, action: &ActionSystem) -> Result<FullGroupElement> {
        let pieces = self
            .image_cylinders(action)?
            .into_iter()
            .map(|(_, w, q)| Piece {
                prefix: q,
                word: action.invert_word(&w),
            })
            .collect();
        Ok(FullGroupElement {
            pieces: merge_siblings(pieces),
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(
        &self,
        other: &FullGroupElement,
        action: &ActionSystem,
        cap: usize,
    ) -> Result<FullGroupElement> {
        let mut stack: Vec<(Vec<u8>, GroupWord)> = other
            .pieces
            .iter()
            .flat_map(|p| {
                extensions(&p.prefix, action.piece_depth())
                    .into_iter()
                    .map(|q| (q, p.word.clone()))
            })
            .collect();
        let mut out = Vec::new();
        while let Some((p, w)) = stack.pop() {
            let q = action.apply_word_prefix(&w, &p)?;
            match self
                .pieces
                .iter()
                .find(|r| q.starts_with(&r.prefix) || r.prefix.starts_with(&q))
            {
                Some(r) if q.starts_with(&r.prefix) => {
                    out.push(Piece {
                        prefix: p,
                        word: action.reduce_word(&r.word.concat(&w)),
                    });
                }
                Some(_) => {
                    if p.len() + 1 > cap {
                        return Err(LabError::DepthCap(p.len() + 1, cap));
                    }
                    for b in 0..2u8 {
                        let mut child = p.clone();
                        child.push(b);
                        stack.push((child, w.clone()));
                    }
                }
                None => unreachable!("pieces form a partition"),
            }
        }
        Ok(FullGroupElement {
            pieces: merge_siblings(out),
        })
    }

    /// Pieces with reduced words, merged where siblings agree.
    pub fn normal_form(&self, action: &ActionSystem) -> FullGroupElement {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                prefix: p.prefix.clone(),
                word: action.reduce_word(&p.word),
            })
            .collect();
        FullGroupElement {
            pieces: merge_siblings(pieces),
        }
    }

    /// Both tables refined to a common depth, compared cylinder by cylinder.
    pub fn same_table(&self, other: &FullGroupElement, action: &ActionSystem) -> bool {
        let depth = self.depth().max(other.depth());
        let refine = |e: &FullGroupElement| -> BTreeMap<Vec<u8>, GroupWord> {
            e.pieces
                .iter()
                .flat_map(|p| {
                    extensions(&p.prefix, depth)
                        .into_iter()
                        .map(|q| (q, action.reduce_word(&p.word)))
                })
                .collect()
        };
        refine(self) == refine(other)
    }

    pub fn is_identity_on(&self, action: &ActionSystem, points: &[BoundaryPoint]) -> bool {
        points.iter().all(|x| self.apply(action, x) == *x)
    }

    pub fn to_file(&self, action: &ActionSystem) -> ElementFile {
        ElementFile {
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceFile {
                    prefix: bits_to_string(&p.prefix),
                    word: action.word_names(&p.word),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, action: &ActionSystem) -> String {
        serde_json::to_string_pretty(&self.to_file(action)).expect("element serializes")
    }

    pub fn from_file(action: &ActionSystem, file: &ElementFile) -> Result<Self> {
        let pieces = file
            .pieces
            .iter()
            .map(|p| Ok((parse_bits(&p.prefix)?, action.word(&p.word)?)))
            .collect::<Result<Vec<_>>>()?;
        make_element(action, pieces)
    }

    pub fn from_json(action: &ActionSystem, text: &str) -> Result<Self> {
        let file: ElementFile =
            serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        Self::from_file(action, &file)
    }

    pub fn content_hash(&self, action: &ActionSystem) -> String {
        let json = serde_json::to_string(&self.to_file(action)).expect("element serializes");
        short_hash(json.as_bytes())
    }
}

fn random_partition<R: Rng>(
    rng: &mut R,
    prefix: Vec<u8>,
    max_depth: usize,
    out: &mut Vec<Vec<u8>>,
) {
    if prefix.len() < max_depth && rng.gen_bool(0.5) {
        for b in 0..2u8 {
            let mut child = prefix.clone();
            child.push(b);
            random_partition(rng, child, max_depth, out);
        }
    } else {
        out.push(prefix);
    }
}

fn random_word<R: Rng>(rng: &mut R, action: &ActionSystem, max_len: usize) -> GroupWord {
    let len = rng.gen_range(0..=max_len);
    let k = action.generators().len();
    GroupWord((0..len).map(|_| rng.gen_range(0..k)).collect())
}

/// A random valid element by rejection sampling over random partitions of
/// depth at most `max_depth` and words of length at most `max_word`.
/// Falls back to a single generator if no sample is bijective.
pub fn random_element<R: Rng>(
    rng: &mut R,
    action: &ActionSystem,
    max_depth: usize,
    max_word: usize,
) -> FullGroupElement {
    for _ in 0..10_000 {
        let mut prefixes = Vec::new();
        random_partition(rng, Vec::new(), max_depth, &mut prefixes);
        let pieces = prefixes
            .into_iter()
            .map(|p| (p, random_word(rng, action, max_word)))
            .collect();
        if let Ok(e) = make_element(action, pieces) {
            return e;
        }
    }
    let g = rng.gen_range(0..action.generators().len());
    FullGroupElement::from_word(GroupWord(vec![g]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{builtin_action, random_point};
    use crate::schreier::{build_ball, DEFAULT_VERTEX_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn pair_swap(o: &ActionSystem) -> FullGroupElement {
        element_from_names(o, &[("0", &["t"]), ("1", &["t^-1"])]).unwrap()
    }

    fn points(seed: u64, n: usize) -> Vec<BoundaryPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| random_point(&mut rng, 6, 4)).collect()
    }

    #[test]
    fn pair_swap_is_valid_and_swaps_neighbours() {
        let o = builtin_action("odometer").unwrap();
        let s = pair_swap(&o);
        // Level-3 brute force: the induced map on words is a permutation.
        let mut images: Vec<Vec<u8>> = crate::action::all_words(3)
            .map(|w| {
                o.apply_word_prefix(
                    s.word_at(&BoundaryPoint::new(w.clone(), vec![0]).unwrap()),
                    &w,
                )
                .unwrap()
            })
            .collect();
        images.sort();
        images.dedup();
        assert_eq!(images.len(), 8);
        for n in -20i64..20 {
            let partner = if n.rem_euclid(2) == 0 { n + 1 } else { n - 1 };
            assert_eq!(s.apply(&o, &int_point(n)), int_point(partner));
        }
        assert_eq!(s.displacement_bound(), 1);
    }

    #[test]
    fn rejects_bad_tables() {
        let o = builtin_action("odometer").unwrap();
        let overlap = element_from_names(&o, &[("0", &["t"]), ("01", &["t"])]);
        assert!(matches!(overlap, Err(LabError::NotAPartition(_))));
        let gap = element_from_names(&o, &[("0", &["t"])]);
        assert!(matches!(gap, Err(LabError::NotAPartition(_))));
        let collide = element_from_names(&o, &[("0", &["t"]), ("1", &[])]);
        assert!(matches!(collide, Err(LabError::NotInvertible(_, _))));
    }

    #[test]
    fn trivial_table_is_identity() {
        let o = builtin_action("odometer").unwrap();
        let e = element_from_names(&o, &[("0", &[]), ("1", &[])]).unwrap();
        assert!(e.same_table(&FullGroupElement::identity(), &o));
        assert_eq!(e.normal_form(&o), FullGroupElement::identity());
        assert!(e.is_identity_on(&o, &points(3, 50)));
        assert_eq!(FullGroupElement::identity().displacement_bound(), 0);
    }

    #[test]
    fn composition_and_inverse() {
        let o = builtin_action("odometer").unwrap();
        let s = pair_swap(&o);
        let ss = s.compose(&s, &o, DEFAULT_DEPTH_CAP).unwrap();
        assert!(ss.is_identity_on(&o, &points(4, 100)));
        assert_eq!(ss.normal_form(&o), FullGroupElement::identity());
        assert!(s.invert(&o).unwrap().same_table(&s, &o));

        let t = FullGroupElement::from_word(o.word(&["t"]).unwrap());
        let tt = t.compose(&t, &o, DEFAULT_DEPTH_CAP).unwrap();
        for n in -50i64..50 {
            assert_eq!(tt.apply(&o, &int_point(n)), int_point(n + 2));
        }
        assert_eq!(
            t.invert(&o).unwrap(),
            FullGroupElement::from_word(o.word(&["t^-1"]).unwrap())
        );
        assert_eq!(
            FullGroupElement::identity().invert(&o).unwrap(),
            FullGroupElement::identity()
        );
    }

    #[test]
    fn random_elements_behave() {
        let o = builtin_action("odometer").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = points(5, 100);
        for _ in 0..30 {
            let f = random_element(&mut rng, &o, 3, 3);
            let g = random_element(&mut rng, &o, 3, 3);
            let h = random_element(&mut rng, &o, 3, 3);
            assert!(f.depth() <= 3 && f.displacement_bound() <= 3);
            let finv = f.invert(&o).unwrap();
            assert!(f
                .compose(&finv, &o, DEFAULT_DEPTH_CAP)
                .unwrap()
                .is_identity_on(&o, &pts));
            let fg = f.compose(&g, &o, DEFAULT_DEPTH_CAP).unwrap();
            let fg_h = fg.compose(&h, &o, DEFAULT_DEPTH_CAP).unwrap();
            let f_gh = f
                .compose(
                    &g.compose(&h, &o, DEFAULT_DEPTH_CAP).unwrap(),
                    &o,
                    DEFAULT_DEPTH_CAP,
                )
                .unwrap();
            for x in &pts {
                assert_eq!(fg.apply(&o, x), f.apply(&o, &g.apply(&o, x)));
                assert_eq!(fg_h.apply(&o, x), f_gh.apply(&o, x));
            }
        }
    }

    #[test]
    fn displacement_bounds_ball_distance() {
        let o = builtin_action("odometer").unwrap();
        let e = element_from_names(
            &o,
            &[
                ("0", &["t", "t", "t", "t"]),
                ("1", &["t^-1", "t^-1", "t^-1", "t^-1"]),
            ],
        )
        .unwrap();
        assert_eq!(e.displacement_bound(), 4);
        let ball = build_ball(&o, 30, DEFAULT_VERTEX_CAP).unwrap();
        for v in 0..ball.len() {
            let x = ball.point(v).unwrap();
            if let Some(w) = ball.vertex_of(&e.apply(&o, x)) {
                let d = ball.graph().bfs(v)[w];
                assert!(d <= 4);
            }
        }
    }

    #[test]
    fn elements_agreeing_pointwise_have_equal_tables() {
        let o = builtin_action("odometer").unwrap();
        let s = pair_swap(&o);
        let refined = element_from_names(
            &o,
            &[
                ("00", &["t"]),
                ("01", &["t"]),
                ("10", &["t^-1"]),
                ("11", &["t^-1"]),
            ],
        )
        .unwrap();
        assert!(s.same_table(&refined, &o));
        assert_eq!(refined.normal_form(&o), s);
    }

    #[test]
    fn depth_cap_is_enforced() {
        let o = builtin_action("odometer").unwrap();
        let deep =
            element_from_names(&o, &[("00", &[]), ("10", &[]), ("01", &[]), ("11", &[])]).unwrap();
        let t = FullGroupElement::from_word(o.word(&["t"]).unwrap());
        assert!(matches!(
            deep.compose(&t, &o, 1),
            Err(LabError::DepthCap(2, 1))
        ));
    }

    #[test]
    fn json_round_trip() {
        let o = builtin_action("odometer").unwrap();
        let s = pair_swap(&o);
        let text = s.to_json(&o);
        assert_eq!(FullGroupElement::from_json(&o, &text).unwrap(), s);
        let raw = r#"{"pieces":[{"prefix":"0","word":["t"]},{"prefix":"1","word":["t^-1"]}]}"#;
        assert_eq!(FullGroupElement::from_json(&o, raw).unwrap(), s);
        assert!(matches!(
            FullGroupElement::from_json(&o, "{"),
            Err(LabError::Parse(_))
        ));
    }

    #[test]
    fn fragmented_generators_compose() {
        let d = builtin_action("dihedral").unwrap();
        let tables = [
            crate::action::FragmentTable::new("h1", &[("0", true), ("1", false)]).unwrap(),
            crate::action::FragmentTable::new("h2", &[("0", false), ("1", true)]).unwrap(),
        ];
        let frag = crate::action::fragment_generators(&d, "b", &tables).unwrap();
        let e = element_from_names(&frag, &[("0", &["h1"]), ("1", &["h2"])]).unwrap();
        let b = FullGroupElement::from_word(d.word(&["b"]).unwrap());
        for x in points(9, 60) {
            assert_eq!(e.apply(&frag, &x), b.apply(&d, &x));
        }
    }
}
