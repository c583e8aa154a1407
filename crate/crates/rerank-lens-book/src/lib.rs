//! Doc-test harness for the guide in `book/`.
//!
//! mdbook cannot run example code against crate dependencies, so every
//! chapter is included here as a module doc and `cargo test --doc`
//! exercises each ```rust block. One module per chapter keeps failures
//! attributable to their chapter.

#[doc = include_str!("../../../README.md")]
pub mod readme {}

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/lexical.md")]
pub mod lexical {}

#[doc = include_str!("../../../book/src/rerankers.md")]
pub mod rerankers {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
