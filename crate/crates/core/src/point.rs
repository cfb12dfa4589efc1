//! Eventually periodic binary words, the computable points of the Cantor set.

use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};

/// The infinite word `preperiod · period · period · …` in canonical form:
/// the period is primitive and the preperiod cannot be shortened by rotating
/// the period.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryPoint {
    preperiod: Vec<u8>,
    period: Vec<u8>,
}

fn primitive_root(word: &[u8]) -> &[u8] {
    let n = word.len();
    (1..=n)
        .filter(|d| n.is_multiple_of(*d))
        .find(|&d| (d..n).all(|i| word[i] == word[i - d]))
        .map(|d| &word[..d])
        .unwrap_or(word)
}

impl BoundaryPoint {
    pub fn new(preperiod: Vec<u8>, period: Vec<u8>) -> Result<Self> {
        if period.is_empty() {
            return Err(LabError::InvalidPoint("empty period".into()));
        }
        if let Some(bad) = preperiod.iter().chain(&period).find(|&&b| b > 1) {
            return Err(LabError::InvalidPoint(format!(
                "letter {bad} is not binary"
            )));
        }
        let mut period = primitive_root(&period).to_vec();
        let mut preperiod = preperiod;
        while let Some(&last) = preperiod.last() {
            if last != *period.last().unwrap() {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }
        Ok(BoundaryPoint { preperiod, period })
    }

    /// Parses binary strings such as `("01", "1")`.
    pub fn from_strs(preperiod: &str, period: &str) -> Result<Self> {
        Self::new(parse_bits(preperiod)?, parse_bits(period)?)
    }

    /// `letter^∞`
    pub fn constant(letter: u8) -> Self {
        BoundaryPoint {
            preperiod: Vec::new(),
            period: vec![letter & 1],
        }
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    pub fn letter(&self, i: usize) -> u8 {
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.letter(i)).collect()
    }

    pub fn starts_with(&self, prefix: &[u8]) -> bool {
        prefix.iter().enumerate().all(|(i, &b)| self.letter(i) == b)
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({})",
            bits_to_string(&self.preperiod),
            bits_to_string(&self.period)
        )
    }
}

impl FromStr for BoundaryPoint {
    type Err = LabError;

    /// Accepts the display form `pre(period)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| LabError::InvalidPoint(format!("missing `(` in {s}")))?;
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| LabError::InvalidPoint(format!("missing `)` in {s}")))?;
        Self::from_strs(&s[..open], inner)
    }
}

pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(LabError::InvalidPoint(format!(
                "letter `{other}` is not binary"
            ))),
        })
        .collect()
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}
