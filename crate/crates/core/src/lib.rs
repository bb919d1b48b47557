//! In-grasp manipulation planning for multi-fingered hands.

pub mod cli;
pub mod gradcheck;
pub mod hand;
pub mod nlp;
pub mod pipeline;
pub mod plant;
pub mod scenario;
pub mod se3;
pub mod trajopt;
