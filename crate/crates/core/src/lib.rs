//! MusicScaffold core: turns a free-text creative intent into an explained
//! attribute plan, sketches it as a short symbolic prompt by retrieving a
//! tagged segment and adapting it with music-theory rules, renders the
//! sketch, and keeps every attempt in a session library.
//!
//! ```text
//! intent text ──interpret──▶ AttributeSet ──retrieve + refine──▶ SymbolicPrompt ──render──▶ RenderResult
//! ```

pub mod blobs;
pub mod fault;
pub mod interpret;
pub mod library;
pub mod midi;
pub mod model;
pub mod refine;
pub mod render;
pub mod seed;
pub mod store;

pub use model::*;
