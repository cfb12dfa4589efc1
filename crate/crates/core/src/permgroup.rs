//! Orders of finite permutation groups by breadth-first closure.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{LabError, Result};

pub const DEFAULT_ORDER_CAP: usize = 1_000_000;

/// `perm[i]` is the image of point `i`.
pub type Perm = Vec<u32>;

fn compose(a: &Perm, b: &Perm) -> Perm {
    b.iter().map(|&i| a[i as usize]).collect()
}

/// Order of ⟨generators⟩. In a finite group the monoid generated by the
/// generators is already the group, so inverses are not needed.
pub fn group_order(generators: &[Perm], cap: usize) -> Result<usize> {
    let degree = generators.first().map_or(0, Vec::len);
    let identity: Perm = (0..degree as u32).collect();
    let mut seen: HashSet<Perm> = HashSet::from([identity.clone()]);
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for s in generators {
            let h = compose(s, &g);
            if !seen.contains(&h) {
                if seen.len() >= cap {
                    return Err(LabError::OrderCap(cap));
                }
                seen.insert(h.clone());
                queue.push_back(h);
            }
        }
    }
    Ok(seen.len())
}

/// Restricts maps on `support` (each a bijection of it) to the points some
/// map moves, relabelled `0..k`.
pub fn restrict_to_moved(maps: &[HashMap<usize, usize>], support: &BTreeSet<usize>) -> Vec<Perm> {
    let moved: Vec<usize> = support
        .iter()
        .copied()
        .filter(|x| maps.iter().any(|m| m.get(x) != Some(x)))
        .collect();
    let index: HashMap<usize, u32> = moved
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, i as u32))
        .collect();
    maps.iter()
        .map(|m| moved.iter().map(|x| index[&m[x]]).collect())
        .collect()
}
