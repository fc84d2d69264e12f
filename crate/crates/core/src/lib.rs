//! Concurrent approximate-membership and counting filters.
//!
//! - [`Tcf`]: two-choice filter with a point API (lock-free, CAS per slot).
//! - [`BulkTcf`]: the same filter with sorted blocks and batch operations.
//! - [`Gqf`]: counting quotient filter with region locks and a bulk API
//!   that processes even and odd regions in separate phases.

pub mod bench;
mod error;
pub mod gqf;
pub mod hash;
mod parallel;
pub mod tcf;
pub mod tcf_bulk;
mod words;

pub use error::{Error, Result};
pub use gqf::{Gqf, QfParams};
pub use tcf::{Entry, Location, Placement, Tcf, TcfParams};
pub use tcf_bulk::{BulkInsertStats, BulkTcf, BulkTcfParams};
