//! Code units and everything that reads or rewrites generated code.

pub mod bundle;
pub mod js;
pub mod merge;
pub mod response;
pub mod template;
pub mod unit;

pub use bundle::Bundle;
pub use unit::CodeUnit;
