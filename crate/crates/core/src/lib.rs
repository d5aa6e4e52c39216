//! Hardware-free humanoid soccer robot stack.

pub mod actuator;
pub mod behavior;
pub mod config;
pub mod estimation;
pub mod gait;
pub mod motions;
pub mod robot_model;
pub mod runtime;
pub mod servo_bus;
pub mod vision;
