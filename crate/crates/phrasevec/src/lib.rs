pub mod alacarte;
pub mod bos;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod numfmt;
pub mod retrofit;

pub use error::{Error, Result};
