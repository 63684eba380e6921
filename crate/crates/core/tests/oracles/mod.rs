//! Independent reference implementations used by the integration and
//! acceptance tests.
#![allow(dead_code)]

pub mod rdp;
pub mod transport;
