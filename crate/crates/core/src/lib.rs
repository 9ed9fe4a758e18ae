//! Approximate Lie and Q-conditional symmetry analysis of differential
//! equations containing a small parameter.

pub mod expr;
pub mod jet;
pub mod parser;
pub mod perturb;
pub mod symmetry;
pub mod casestudy;
pub mod numeric;
