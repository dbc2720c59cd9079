//! File formats, parallel drivers and reporting for the `nucpt` executable.

pub mod applog;
pub mod atomic;
pub mod batch;
pub mod instance_file;
pub mod parallel;
pub mod report;
pub mod svg;
