//! Joint bandwidth and power allocation for multi-user MISO network slicing,
//! and the Pareto boundary between global energy efficiency and throughput.

pub mod cli;
pub mod feasible;
pub mod model;
pub mod par;
pub mod pareto;
pub mod prb;
pub mod solver;
