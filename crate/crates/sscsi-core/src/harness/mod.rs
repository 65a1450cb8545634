//! Experiment scaffolding: test scenes, noise, run manifests, PGM dumps and
//! the canned studies behind the CLI's sweep subcommands.

pub mod experiments;
pub mod manifest;
pub mod pgm;
pub mod scene;
