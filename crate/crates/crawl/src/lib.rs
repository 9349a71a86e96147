//! Approximate personalized PageRank over a graph reached through HTTP.
//!
//! A server exposes two read-only endpoints per node (out-neighbors and
//! in-degree). [`RemoteGraphClient`] implements the local-query contract on
//! top of them with caching and retries, and [`crawl_ppr`] runs the push
//! algorithm through it with resumable checkpoints. [`serve_graph`] hosts any
//! in-memory graph over the same protocol.

use std::path::PathBuf;

use ppr_core::AccessError;
use thiserror::Error;

pub mod checkpoint;
pub mod client;
pub mod crawl;
pub mod server;
pub mod wire;

pub use checkpoint::CrawlCheckpoint;
pub use client::{CachedNode, ClientConfig, RemoteGraphClient, RetryPolicy};
pub use crawl::{crawl_ppr, CrawlOptions, CrawlOutcome, CrawlStatus};
pub use server::{serve_graph, ServerHandle, ServerOptions, ServerStats};

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error(transparent)]
    Core(#[from] ppr_core::Error),
    #[error("{source}{}", match checkpoint {
        Some(p) => format!("; run suspended, resume from {}", p.display()),
        None => String::new(),
    })]
    Transport {
        source: AccessError,
        checkpoint: Option<PathBuf>,
    },
}
