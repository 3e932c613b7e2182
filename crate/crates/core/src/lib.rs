pub mod access;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod explore;
pub mod io;
pub mod pose;
pub mod quality;
pub mod synthetic;
pub mod toy_rl;
