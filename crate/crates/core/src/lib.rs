//! Bayesian residual-based cointegration tests.
//!
//! The guide in `book/` walks through each test; its code listings run as
//! doc-tests of this crate.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ar1;
pub mod arp;
pub mod classical;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod order;

pub use data::{Dataset, Method, RegressionSpec, ResidualSeries, TestResult, Verdict};
pub use error::{Error, Result};

// Compile and run every code listing in the guide.
#[cfg(doctest)]
macro_rules! book_chapters {
    ($($name:ident),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", stringify!($name), ".md"))]
            mod $name {}
        )*
    };
}

#[cfg(doctest)]
mod book {
    book_chapters!(
        introduction,
        data,
        ar1,
        gibbs,
        order,
        baseline,
        experiments,
        cli
    );
}
