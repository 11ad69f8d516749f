//! Simulator of a molecular hard-disk unit: a two-variable compact model of
//! the redox/ion-drift junction, a 6-bit multilevel codec with closed-loop
//! programming, a stateful logic engine (single-unit XOR, Boolean gate
//! framework, ternary/quaternary MAX-MIN-threshold), an addressable unit
//! array with durable persistence, and an in-situ bitwise image encryption
//! pipeline on top.

pub mod array;
pub mod codec;
pub mod crypto;
pub mod device;
pub mod error;
pub mod logic;
pub mod protocols;
pub mod rng;
pub mod util;

pub use error::{Error, Result};
