//! Command-line tools and the HTTP session service.

pub mod bench;
pub mod cli;
pub mod server;
pub mod session;
