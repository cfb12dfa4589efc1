//! Binary Mealy automata whose states act as rooted-tree automorphisms.

use std::collections::HashMap;

use crate::error::{LabError, Result};
use crate::point::BoundaryPoint;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transducer {
    names: Vec<String>,
    next: Vec<[usize; 2]>,
    out: Vec<[u8; 2]>,
    identity: usize,
}

impl Transducer {
    /// `states` lists `(name, [next on 0, next on 1], [output on 0, output on 1])`.
    pub fn new(states: Vec<(String, [usize; 2], [u8; 2])>) -> Result<Self> {
        let n = states.len();
        let mut names = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for (name, nx, o) in states {
            if nx.iter().any(|&s| s >= n) {
                return Err(LabError::InvalidAutomaton(format!(
                    "state `{name}` transitions out of range"
                )));
            }
            if o[0] > 1 || o[1] > 1 || o[0] == o[1] {
                return Err(LabError::InvalidAutomaton(format!(
                    "state `{name}` output is not a permutation of {{0,1}}"
                )));
            }
            names.push(name);
            next.push(nx);
            out.push(o);
        }
        let identity = (0..n)
            .find(|&s| next[s] == [s, s] && out[s] == [0, 1])
            .ok_or_else(|| LabError::InvalidAutomaton("no identity state".into()))?;
        Ok(Transducer {
            names,
            next,
            out,
            identity,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn name(&self, state: usize) -> &str {
        &self.names[state]
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn next_state(&self, state: usize, letter: u8) -> usize {
        self.next[state][letter as usize]
    }

    pub fn output(&self, state: usize, letter: u8) -> u8 {
        self.out[state][letter as usize]
    }

    /// Image of a finite word (the level action).
    pub fn apply_prefix(&self, state: usize, word: &[u8]) -> Vec<u8> {
        let mut s = state;
        word.iter()
            .map(|&b| {
                let o = self.output(s, b);
                s = self.next_state(s, b);
                o
            })
            .collect()
    }

    /// Image of an eventually periodic word.
    ///
    /// The state at the start of each period block determines the rest of the
    /// output, so the output becomes periodic once such a state repeats.
    pub fn apply(&self, state: usize, x: &BoundaryPoint) -> BoundaryPoint {
        let mut s = state;
        let mut output = Vec::with_capacity(x.preperiod().len() + x.period().len() * 2);
        for &b in x.preperiod() {
            output.push(self.output(s, b));
            s = self.next_state(s, b);
        }
        let mut block_start: HashMap<usize, usize> = HashMap::new();
        loop {
            if let Some(&start) = block_start.get(&s) {
                let period = output.split_off(start);
                return BoundaryPoint::new(output, period).expect("nonempty period");
            }
            if s == self.identity {
                output.extend_from_slice(x.period());
                let start = output.len() - x.period().len();
                let period = output.split_off(start);
                return BoundaryPoint::new(output, period).expect("nonempty period");
            }
            block_start.insert(s, output.len());
            for &b in x.period() {
                output.push(self.output(s, b));
                s = self.next_state(s, b);
            }
        }
    }
}
