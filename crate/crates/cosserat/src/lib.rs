//! Scene files, result files, scene generators and benchmark drivers for
//! `cosserat-core`, plus the `cosserat` command-line tool.

pub mod bench;
pub mod generators;
pub mod outputs;
pub mod scene_file;
