//! Scheduling engine for entanglement distribution over a satellite
//! constellation: geometry, link physics, weather, per-slot optimization and
//! the day-scale simulation loop.

pub mod environment;
pub mod linkphys;
pub mod orbital;
pub mod scheduler;
pub mod simharness;
