//! Self-supervised multi-frame super-resolution for low-dose electron
//! microscopy movies.
//!
//! The crate covers the whole desk-scale pipeline: image primitives and MRC
//! I/O ([`image`]), a CTF forward model and movie simulator ([`formation`]),
//! whole-frame alignment and reference-anchored frame averaging
//! ([`motion`]), the fusion network and its registered loss ([`srnet`]),
//! zero-shot training and self-ensemble inference ([`zssr`]), and the
//! micrograph quality metrics used to judge the output ([`evalctf`]).

pub mod error;
pub mod evalctf;
pub mod exec;
pub mod formation;
pub mod image;
pub mod motion;
pub mod srnet;
pub mod zssr;

pub use error::{Error, Result};
pub use image::{Image2D, MovieStack};
