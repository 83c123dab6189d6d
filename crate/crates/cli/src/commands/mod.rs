pub mod operators;
pub mod resonance;
pub mod stability;
pub mod transfer;
