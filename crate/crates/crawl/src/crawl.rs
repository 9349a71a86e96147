//! Push approximation driven over a [`RemoteGraphClient`], with periodic
//! checkpoints and suspension on persistent transport failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use ppr_core::ppr::PushState;
use ppr_core::{AccessError, Error, PprDocument, PprResult, PreferenceVector};

use crate::checkpoint::CrawlCheckpoint;
use crate::client::RemoteGraphClient;
use crate::CrawlError;

pub const DEFAULT_CHECKPOINT_EVERY: u64 = 1000;

#[derive(Debug, Clone)]
pub struct CrawlOptions {
    /// Resumed from when it exists; written periodically and on suspension.
    pub checkpoint_path: Option<PathBuf>,
    pub checkpoint_every: u64,
    /// Suspend once the total push count reaches this value.
    pub max_pushes: Option<u64>,
    /// Suspend at the next push boundary once set.
    pub stop: Option<Arc<AtomicBool>>,
    /// Fetch in-degrees of every pushed node before returning.
    pub fetch_in_degrees: bool,
}

impl Default for CrawlOptions {
    fn default() -> Self {
        Self {
            checkpoint_path: None,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            max_pushes: None,
            stop: None,
            fetch_in_degrees: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrawlStatus {
    Complete,
    Suspended,
}

#[derive(Debug, Clone)]
pub struct CrawlOutcome {
    pub status: CrawlStatus,
    /// Indices refer to the client's id map.
    pub result: PprResult,
    pub document: PprDocument,
    /// In-degree of every node with a positive estimate.
    pub in_degrees: BTreeMap<String, usize>,
    /// Nodes the server did not know, treated as dangling.
    pub missing: Vec<String>,
    pub fetch_count: u64,
    pub checkpoint: Option<PathBuf>,
}

struct Run<'a> {
    client: &'a RemoteGraphClient,
    preference: BTreeMap<String, f64>,
    options: &'a CrawlOptions,
}

impl Run<'_> {
    fn save(&self, state: &PushState) -> Result<Option<PathBuf>, Error> {
        let Some(path) = &self.options.checkpoint_path else {
            return Ok(None);
        };
        CrawlCheckpoint::capture(state, self.client, &self.preference)?.save(path)?;
        log::debug!("checkpoint written at {} pushes", state.pushes());
        Ok(Some(path.clone()))
    }

    fn suspend(&self, state: &PushState, source: AccessError) -> CrawlError {
        match self.save(state) {
            Ok(checkpoint) => CrawlError::Transport { source, checkpoint },
            Err(e) => e.into(),
        }
    }

    fn outcome(&self, state: &PushState, status: CrawlStatus, checkpoint: Option<PathBuf>) -> Result<CrawlOutcome, Error> {
        let ids = self.client.ids();
        let result = state.result();
        let document = PprDocument::from_result(&result, &ids)?;
        let in_degrees = result
            .p
            .keys()
            .filter_map(|&u| Some((ids.name(u)?.to_owned(), self.client.cached_in_degree(u)?)))
            .collect();
        Ok(CrawlOutcome {
            status,
            result,
            document,
            in_degrees,
            missing: self.client.missing(),
            fetch_count: self.client.fetch_count(),
            checkpoint,
        })
    }

    fn start(&self, seeds: &[(String, f64)], alpha: f64, epsilon: f64) -> Result<PushState, CrawlError> {
        if let Some(path) = self.options.checkpoint_path.as_ref().filter(|p| p.exists()) {
            let cp = CrawlCheckpoint::load(path)?;
            if cp.alpha != alpha || cp.epsilon != epsilon || cp.preference != self.preference {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint {} was written for different parameters",
                    path.display()
                ))
                .into());
            }
            log::info!("resuming from {} at {} pushes", path.display(), cp.pushes);
            return Ok(cp.restore(self.client)?);
        }
        // Seeds are interned in the order given, which fixes their push order.
        let pi = PreferenceVector::new(seeds.iter().map(|(id, w)| (self.client.intern(id), *w)))?;
        PushState::new(self.client, &pi, alpha, epsilon).map_err(|e| match e {
            Error::Access(source) => CrawlError::Transport { source, checkpoint: None },
            other => other.into(),
        })
    }
}

/// Runs the push approximation against `client` from seeds given as
/// `(external id, mass)` pairs.
///
/// The result is identical to [`ppr_core::approximate_ppr`] on the same graph
/// held in memory, provided seeds are listed in the in-memory index order.
pub fn crawl_ppr(
    client: &RemoteGraphClient,
    seeds: &[(String, f64)],
    alpha: f64,
    epsilon: f64,
    options: &CrawlOptions,
) -> Result<CrawlOutcome, CrawlError> {
    if options.checkpoint_every == 0 {
        return Err(Error::InvalidParameter("checkpoint interval must be positive".into()).into());
    }
    let mut preference = BTreeMap::new();
    for (id, w) in seeds {
        if preference.insert(id.clone(), *w).is_some() {
            return Err(Error::InvalidParameter(format!("seed {id:?} listed twice")).into());
        }
    }
    let run = Run { client, preference, options };
    let mut state = run.start(seeds, alpha, epsilon)?;

    let mut since_save = 0;
    loop {
        let stop_requested = options.stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed));
        let budget_spent = options.max_pushes.is_some_and(|m| state.pushes() >= m);
        if (stop_requested || budget_spent) && !state.is_done() {
            let checkpoint = run.save(&state)?;
            log::info!("crawl suspended after {} pushes", state.pushes());
            return Ok(run.outcome(&state, CrawlStatus::Suspended, checkpoint)?);
        }
        match state.step(client) {
            Ok(true) => {
                since_save += 1;
                if since_save >= options.checkpoint_every {
                    run.save(&state)?;
                    since_save = 0;
                }
            }
            Ok(false) => break,
            Err(e) => return Err(run.suspend(&state, e)),
        }
    }

    if options.fetch_in_degrees {
        let pushed: Vec<usize> = state.estimates().map(|(u, _)| u).collect();
        if let Err(e) = client.fetch_in_degrees(&pushed) {
            return Err(run.suspend(&state, e));
        }
    }
    let checkpoint = run.save(&state)?;
    Ok(run.outcome(&state, CrawlStatus::Complete, checkpoint)?)
}
