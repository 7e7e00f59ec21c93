//! File formats, batch evaluation and the HTTP session service around
//! `camguide-core`.

pub mod batch;
pub mod formats;
pub mod service;
