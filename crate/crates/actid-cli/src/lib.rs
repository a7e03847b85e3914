//! Library surface of the command line: problem files, run orchestration,
//! trace rendering, and the built-in demos. The binary in `main.rs` is a
//! thin argument-parsing layer over these.

pub mod demo;
pub mod problemfile;
pub mod runner;
pub mod trace;
