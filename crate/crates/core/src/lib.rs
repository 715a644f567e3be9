pub mod cli;
pub mod driver;
pub mod error;
pub mod integrators;
pub mod matfun;
pub mod model;
pub mod options;
pub mod phi;
pub mod problems;
