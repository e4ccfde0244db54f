// mdbook cannot run snippets that depend on a workspace crate, so every
// chapter is pulled in here as a module doc and `cargo test --doc` runs the
// code blocks instead. One module per chapter keeps failures traceable to
// the Markdown file they came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/instances.md")]
pub mod instances {}
#[doc = include_str!("../../../book/src/relaxation.md")]
pub mod relaxation {}
#[doc = include_str!("../../../book/src/safe_bounds.md")]
pub mod safe_bounds {}
#[doc = include_str!("../../../book/src/cutting_planes.md")]
pub mod cutting_planes {}
#[doc = include_str!("../../../book/src/branch_and_bound.md")]
pub mod branch_and_bound {}
#[doc = include_str!("../../../book/src/parallel.md")]
pub mod parallel {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
