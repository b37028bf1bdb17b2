//! Witnesses: subsystems induced by certificate supports, and schedulers.

pub mod scheduler;
pub mod subsystem;
