//! Numerical Nahm transform of SU(2) connections on `R × T³`.
//!
//! The guide in `book/` walks through the pipeline; its snippets are
//! compiled and run as doctests of this crate.

pub mod banded;
pub mod cache;
pub mod curvature;
pub mod dirac;
pub mod error;
pub mod field;
pub mod grid;
pub mod laplace;
pub mod linalg;
pub mod models;
pub mod path;
pub mod small;
pub mod torus;
pub mod transform;

pub use error::{Error, Result};


#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/conventions.md")]
pub mod book_conventions {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/torus.md")]
pub mod book_torus {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cylinder.md")]
pub mod book_cylinder {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
pub mod book_models {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/transform.md")]
pub mod book_transform {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/limitations.md")]
pub mod book_limitations {}
