#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod fluidsim;
pub mod hmm;
pub mod krylov;
pub mod opticflow;
pub mod pod;
mod vecops;

pub use error::{Error, Result};

// The book's code listings run as doc tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/posteriors.md")]
    mod posteriors {}
    #[doc = include_str!("../../../book/src/bases.md")]
    mod bases {}
    #[doc = include_str!("../../../book/src/fluid.md")]
    mod fluid {}
    #[doc = include_str!("../../../book/src/opticflow.md")]
    mod opticflow {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
