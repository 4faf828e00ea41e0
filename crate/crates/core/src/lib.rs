pub mod angular;
pub mod blocktri;
pub mod bounds;
pub mod config;
pub mod error;
pub mod forcing;
pub mod forward;
pub mod functions;
pub mod grid;
pub mod identify;
pub mod io;
pub mod manufactured;
pub mod measurements;
pub mod model;
pub mod nondegeneracy;
pub mod norms;
pub mod operators;
pub mod stencil;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
