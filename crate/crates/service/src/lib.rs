//! Command-line entry points and the HTTP steering service.

pub mod api;
pub mod commands;
pub mod error;
pub mod session;

pub use error::{Result, ServiceError};
pub use session::{Session, SessionManager};
