//! Guide chapters from `book/src`, compiled so their snippets run as
//! doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/coherence.md")]
pub mod coherence {}

#[doc = include_str!("../../../book/src/linking.md")]
pub mod linking {}

#[doc = include_str!("../../../book/src/quality.md")]
pub mod quality {}

#[doc = include_str!("../../../book/src/noise-floor.md")]
pub mod noise_floor {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
