//! Hierarchical parameter store with change notification, persistence and
//! a socket API.

pub mod queue;
pub mod service;
pub mod store;

pub use queue::BoundedQueue;
pub use service::{config_port, handle_request, ConfigService, ServiceCommand, ServiceContext, Session, TelemetryHub};
pub use store::{ConfigError, Meta, Notification, ParamEntry, ParamPath, ParamStore, ParamValue, Subscription};
