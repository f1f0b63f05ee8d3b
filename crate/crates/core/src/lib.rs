//! Event-based eye-tracking toolkit: event streams and windowing, dense
//! representations (Bina-rep, voxel, frame), stochastic augmentation, an
//! event-camera simulator, the conv + bidirectional-GRU + selective
//! state-space network, and the training/evaluation loop around it.

pub use mambapupil_autograd as autograd;

pub mod augment;
pub mod config;
pub mod data;
pub mod events;
pub mod model;
pub mod rep;
pub mod synth;
pub mod train;
