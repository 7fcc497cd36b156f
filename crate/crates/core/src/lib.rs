//! Oil-spill response station siting and resource allocation under
//! uncertainty, formulated as a two-stage stochastic MILP.

pub mod evaluation;
pub mod formulation;
pub mod io;
pub mod model;
pub mod repair;
pub mod scenario;
pub mod solve;
pub mod sweep;

pub use spillopt_milp as milp;
