//! Enhanced shortcuts to adiabaticity: first-order corrections to
//! shortcut control schemes and exact simulation of the corrected schemes.

pub mod config;
pub mod error;
pub mod esta;
pub mod experiments;
pub mod models;
pub mod modes;
pub mod oracle;
pub mod output;
pub mod poly;
pub mod propagators;
pub mod quadrature;
pub mod schemes;

pub use error::{EstaError, Result};
