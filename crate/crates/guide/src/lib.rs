//! Book chapters as doc-tests: every Rust block in `book/src` runs under
//! `cargo test -p guide`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/basis.md")]
pub mod basis {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/sectors.md")]
pub mod sectors {}
#[doc = include_str!("../../../book/src/fragmentation.md")]
pub mod fragmentation {}
#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}
#[doc = include_str!("../../../book/src/observables.md")]
pub mod observables {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
