//! Doc-test harness for the mdbook guide in `book/`.
//!
//! Each chapter is included as the documentation of an empty module, so
//! every Rust code block in the book compiles and runs under
//! `cargo test --doc -p finrel-book`. The guide cannot drift from the
//! library without failing the build. One module per chapter keeps test
//! failures attributable to their chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/state-spaces.md")]
pub mod state_spaces {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/field-equation.md")]
pub mod field_equation {}

#[doc = include_str!("../../../book/src/maxent.md")]
pub mod maxent {}

#[doc = include_str!("../../../book/src/pricing.md")]
pub mod pricing {}

#[doc = include_str!("../../../book/src/information.md")]
pub mod information {}

#[doc = include_str!("../../../book/src/continuous-filtering.md")]
pub mod continuous_filtering {}

#[doc = include_str!("../../../book/src/worked-example.md")]
pub mod worked_example {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
