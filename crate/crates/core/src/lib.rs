pub mod compose;
pub mod conformance;
pub mod discover;
pub mod gwf;
pub mod log;
pub mod morphism;
pub mod net;
pub mod pipeline;
pub mod simulate;
pub mod unfolding;
