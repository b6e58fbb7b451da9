//! HTTP service and command-line front end for MusicScaffold.

pub mod api;
pub mod app;
pub mod error;

pub use app::{App, Settings};
pub use error::ApiError;

/// Published request/response schemas.
pub const SCHEMA: &str = include_str!("../schema/musicscaffold.schema.json");
