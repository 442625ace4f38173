// Negated comparisons below are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod markov;
pub mod pacbayes;
pub mod plot;
pub mod spectral;
