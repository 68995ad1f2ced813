// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod channel;
pub mod conic;
pub mod cx;
pub mod error;
pub mod harness;
pub mod lmi;
pub mod maxrho;
pub mod oracle;
pub mod params;

pub use error::Error;
