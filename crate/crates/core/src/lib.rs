pub mod model;
pub mod rdsl;
pub mod constraints;
pub mod platform;
pub mod graph;
pub mod elaborate;
pub mod scenario;
pub mod schedule;
pub mod synth;
pub mod verify;
pub mod emit;
