//! Training and evaluation engine for dual-domain collaborative denoising
//! social recommendation.
//!
//! The pipeline per epoch: propagate the base embeddings over the previous
//! epoch's denoised interaction graph, prune low-consistency social edges,
//! prune interaction edges that disagree with the user's social
//! neighborhood, then train on the pruned graphs with BPR plus contrastive
//! losses over collaboratively perturbed embeddings.

#![allow(clippy::needless_range_loop)]

pub mod adam;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod denoise;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod objective;
pub mod perturb;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
