//! Response bodies of the two-endpoint graph protocol.
//!
//! ```text
//! GET {base}/v1/nodes/{id}/out        -> {"id", "out_degree", "out_neighbors"}
//! GET {base}/v1/nodes/{id}/in_degree  -> {"id", "in_degree"}
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed body: {0}")]
    Json(#[from] serde_json::Error),
    #[error("response is for {got:?}, expected {expected:?}")]
    WrongNode { expected: String, got: String },
    #[error("out_degree {declared} disagrees with {listed} listed neighbors")]
    DegreeMismatch { declared: usize, listed: usize },
    #[error("neighbor {0:?} listed twice")]
    DuplicateNeighbor(String),
    #[error("empty node id")]
    EmptyId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutResponse {
    pub id: String,
    pub out_degree: usize,
    pub out_neighbors: Vec<String>,
}

impl OutResponse {
    /// Parses and checks a body returned for `expected`.
    pub fn parse(body: &[u8], expected: &str) -> Result<Self, WireError> {
        let resp: Self = serde_json::from_slice(body)?;
        if resp.id != expected {
            return Err(WireError::WrongNode { expected: expected.to_owned(), got: resp.id });
        }
        if resp.out_degree != resp.out_neighbors.len() {
            return Err(WireError::DegreeMismatch {
                declared: resp.out_degree,
                listed: resp.out_neighbors.len(),
            });
        }
        let mut seen = HashSet::with_capacity(resp.out_neighbors.len());
        for v in &resp.out_neighbors {
            if v.is_empty() {
                return Err(WireError::EmptyId);
            }
            if !seen.insert(v.as_str()) {
                return Err(WireError::DuplicateNeighbor(v.clone()));
            }
        }
        Ok(resp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InDegreeResponse {
    pub id: String,
    pub in_degree: usize,
}

impl InDegreeResponse {
    pub fn parse(body: &[u8], expected: &str) -> Result<Self, WireError> {
        let resp: Self = serde_json::from_slice(body)?;
        if resp.id != expected {
            return Err(WireError::WrongNode { expected: expected.to_owned(), got: resp.id });
        }
        Ok(resp)
    }
}
