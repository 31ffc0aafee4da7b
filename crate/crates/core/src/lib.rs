pub mod benefit;
pub mod covergraph;
pub mod loadmgr;
pub mod model;
pub mod policy;
pub mod simharness;
pub mod vcover;
pub mod yardsticks;
pub mod workload;
