// NaN-rejecting `!(x > 0.0)` checks and index loops over parallel arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod controller;
pub mod evolution;
pub mod exec;
pub mod experiment;
pub mod learner;
pub mod locomotion;
pub mod lsystem;
pub mod morphology;
