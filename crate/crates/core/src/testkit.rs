//! Oracles shared by unit tests.

use crate::point::BoundaryPoint;

/// The integer `n` as a 2-adic word, least significant bit first.
pub fn int_point(n: i64) -> BoundaryPoint {
    let tail = if n < 0 { 1 } else { 0 };
    let mut bits = Vec::new();
    let mut v = n;
    while v != 0 && v != -1 {
        bits.push((v & 1) as u8);
        v >>= 1;
    }
    BoundaryPoint::new(bits, vec![tail]).unwrap()
}
