//! Simulated world and the 125 Hz control loop tying every module together.

pub mod field;
pub mod render;
pub mod world;
pub mod clock;
pub mod http;
pub mod params;
pub mod scenario;
pub mod telemetry;
pub mod vision_worker;
pub mod system;
