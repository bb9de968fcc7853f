pub mod error;
pub mod numerics;
pub mod exact;
pub mod gauss;
pub mod modular;
pub mod spectral;
pub mod phi;
pub mod dual;
pub mod asympt;
pub mod geometry;
pub mod talbot;
pub mod verify;
pub mod cli;
