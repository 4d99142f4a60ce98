//! Profile-guided localization of C++ performance anti-patterns and
//! selection of model-generated fixes.

pub mod edit;
pub mod embedding;
pub mod eval;
pub mod ir;
pub mod mine;
pub mod profile;
pub mod rank;
pub mod verify;
