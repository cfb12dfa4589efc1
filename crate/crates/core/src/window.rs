//! Group elements acting on the vertices of a window.
//!
//! Point balls carry their orbit points; level windows carry binary words
//! as labels. Synthetic fixtures carry neither and reject element maps.

use crate::action::{ActionSystem, GroupWord};
use crate::error::{LabError, Result};
use crate::full_group::FullGroupElement;
use crate::point::parse_bits;
use crate::schreier::{word_index, SchreierBall};

/// A partial permutation of the window: `None` when the image leaves it.
pub type VertexMap = Vec<Option<usize>>;

fn level_word(ball: &SchreierBall, v: usize) -> Result<Vec<u8>> {
    parse_bits(ball.graph().label(v))
}

fn map_with(
    ball: &SchreierBall,
    on_point: impl Fn(&crate::point::BoundaryPoint) -> crate::point::BoundaryPoint,
    on_word: impl Fn(&[u8]) -> Result<Vec<u8>>,
) -> Result<VertexMap> {
    if ball.has_points() {
        (0..ball.len())
            .map(|v| Ok(ball.vertex_of(&on_point(ball.point(v)?))))
            .collect()
    } else if ball.level().is_some() {
        (0..ball.len())
            .map(|v| Ok(Some(word_index(&on_word(&level_word(ball, v)?)?))))
            .collect()
    } else {
        Err(LabError::NoPoints(0))
    }
}

pub fn word_map(action: &ActionSystem, ball: &SchreierBall, word: &GroupWord) -> Result<VertexMap> {
    map_with(
        ball,
        |x| action.apply_word(word, x),
        |w| action.apply_word_prefix(word, w),
    )
}

pub fn element_map(
    action: &ActionSystem,
    ball: &SchreierBall,
    element: &FullGroupElement,
) -> Result<VertexMap> {
    map_with(
        ball,
        |x| element.apply(action, x),
        |w| element.apply_prefix(action, w),
    )
}

/// Index of the piece of `element` that acts at vertex `v`.
pub fn piece_at(ball: &SchreierBall, element: &FullGroupElement, v: usize) -> Result<usize> {
    if ball.has_points() {
        Ok(element.piece_index(ball.point(v)?))
    } else if ball.level().is_some() {
        element.piece_index_of_word(&level_word(ball, v)?)
    } else {
        Err(LabError::NoPoints(v))
    }
}
