//! Cost-minimizing assignment of secret-sharing schemes to the nodes of
//! mixed-protocol secure computation circuits.

pub mod casegen;
pub mod circuit;
pub mod cli;
pub mod cost_model;
pub mod optimizer;
