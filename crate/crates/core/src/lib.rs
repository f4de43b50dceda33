#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod continuity;
pub mod geometry;
pub mod grid;
pub mod kw;
pub mod linalg;
pub mod scenario;
