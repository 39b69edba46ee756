//! Right-of-way aware traffic simulation with intention inference and an
//! evolutionary actor-critic driving policy.

pub mod agent;
pub mod evolve;
pub mod geometry;
pub mod harness;
pub mod intention;
pub mod neural;
pub mod par;
pub mod reward;
pub mod row;
pub mod sim;
pub mod world;
