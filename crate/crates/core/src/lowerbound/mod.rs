//! Instances on which proper learners need many oracle queries while the
//! improper learner does not.
//!
//! Binary vectors in `{0,1}^d` are stored as `u64` bitmasks, so the
//! hidden-box constructions are limited to `d <= 64`.

mod hidden_box;
mod needle;
mod search;

pub use hidden_box::{
    box_for, collision_rate, evaluate_box_candidate, evaluate_box_candidate_with, gv_packing, make_hidden_box_instance,
    random_weight_vector, CandidateEval, CollisionReport, EvalMethod, GvPacking, HiddenBoxInstance, EXACT_BITS_LIMIT,
};
pub use needle::{make_needle_instance, NeedleInstance};
pub use search::{proper_search_demo, SearchInstance, SearchReport, Strategy};

/// Bitmask of a 0/1 grid point.
pub fn point_mask(x: &crate::point::Point) -> Option<u64> {
    let c = x.coords()?;
    if c.len() > 64 {
        return None;
    }
    let mut mask = 0u64;
    for (i, &v) in c.iter().enumerate() {
        match v {
            0 => {}
            1 => mask |= 1 << i,
            _ => return None,
        }
    }
    Some(mask)
}

/// 0/1 grid point of a bitmask.
pub fn mask_point(mask: u64, d: usize) -> crate::point::Point {
    crate::point::Point::grid((0..d).map(|i| ((mask >> i) & 1) as u32))
}
