//! Experiment harness for occlusion-robust own-voice beamforming: scene
//! construction over the evaluation grid, strategy runs, CSV/plot-data
//! output, and the `occbeam` command-line interface.

pub mod commands;
pub mod config;
pub mod plotdata;
pub mod runner;
