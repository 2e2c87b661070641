pub mod channel;
pub mod cli;
pub mod density;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod scattering;
pub mod selftest;
pub mod spin;
