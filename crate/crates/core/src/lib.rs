//! Scene authoring engine with one code generation module per element and
//! a central module that coordinates them.

pub mod code;
pub mod context;
pub mod engine;
pub mod error;
pub mod events;
pub mod llm;
pub mod params;
pub mod project;
pub mod prompt;
pub mod scenario;
pub mod scene;
pub mod session;
pub mod store;

pub use engine::{Engine, EngineConfig};
pub use error::{Error, Result};
pub use project::Project;
