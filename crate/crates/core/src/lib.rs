pub mod decompose;
pub mod eig3;
pub mod error;
pub mod extremal;
pub mod fields;
pub mod forms;
pub mod input;
pub mod polyconvexity;
pub mod rankone;

pub use error::{Error, Result};
