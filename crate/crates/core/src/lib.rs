pub mod scad;
pub mod blocks;
pub mod geometry;
pub mod render;
pub mod vision;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod program;
pub mod service;
pub mod voting;
pub use nalgebra;
