//! Resumable crawl state, stored as canonical JSON keyed by external id.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ppr_core::ppr::PushState;
use ppr_core::{json, Error, PreferenceVector, Result};
use serde::{Deserialize, Serialize};

use crate::client::{CachedNode, RemoteGraphClient};

/// Total mass `Σp + Σr` must stay within this distance of 1.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlCheckpoint {
    pub alpha: f64,
    pub epsilon: f64,
    pub preference: BTreeMap<String, f64>,
    pub p: BTreeMap<String, f64>,
    /// Residual of every touched node, zeros included.
    pub r: BTreeMap<String, f64>,
    /// Violating nodes in push order.
    pub frontier: Vec<String>,
    pub pushes: u64,
    pub fetch_count: u64,
    pub cache: BTreeMap<String, CachedNode>,
}

fn finite_nonnegative(what: &str, map: &BTreeMap<String, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (id, &x) in map {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::Data(format!("{what} mass for {id:?} is {x}")));
        }
        total += x;
    }
    Ok(total)
}

impl CrawlCheckpoint {
    pub fn capture(
        state: &PushState,
        client: &RemoteGraphClient,
        preference: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let ids = client.ids();
        let name = |u: usize| ids.name(u).map(str::to_owned).ok_or(Error::NodeOutOfRange(u));
        Ok(Self {
            alpha: state.alpha(),
            epsilon: state.epsilon(),
            preference: preference.clone(),
            p: state.estimates().map(|(u, x)| Ok((name(u)?, x))).collect::<Result<_>>()?,
            r: state.residuals().map(|(u, x)| Ok((name(u)?, x))).collect::<Result<_>>()?,
            frontier: state.frontier().map(name).collect::<Result<_>>()?,
            pushes: state.pushes(),
            fetch_count: client.fetch_count(),
            cache: client.snapshot(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Data(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Data(format!("epsilon {} is not positive", self.epsilon)));
        }
        let seeds = finite_nonnegative("preference", &self.preference)?;
        if self.preference.is_empty() || (seeds - 1.0).abs() > PreferenceVector::MASS_TOLERANCE {
            return Err(Error::Data(format!("preference mass is {seeds}")));
        }
        let total = finite_nonnegative("estimate", &self.p)? + finite_nonnegative("residual", &self.r)?;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Data(format!("checkpoint holds total mass {total}")));
        }
        let mut seen = BTreeSet::new();
        for id in &self.frontier {
            if !self.r.contains_key(id) {
                return Err(Error::Data(format!("frontier node {id:?} has no residual")));
            }
            if !seen.insert(id) {
                return Err(Error::Data(format!("frontier node {id:?} listed twice")));
            }
        }
        Ok(())
    }

    /// Loads the cache into `client` and rebuilds the push state over the
    /// client's indices.
    pub fn restore(&self, client: &RemoteGraphClient) -> Result<PushState> {
        self.validate()?;
        client.restore(&self.cache, self.fetch_count);
        PushState::from_parts(
            self.alpha,
            self.epsilon,
            self.p.iter().map(|(id, &x)| (client.intern(id), x)),
            self.r.iter().map(|(id, &x)| (client.intern(id), x)),
            self.frontier.iter().map(|id| client.intern(id)),
            self.pushes,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        json::canonical_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Self = serde_json::from_str(text)?;
        cp.validate()?;
        Ok(cp)
    }

    /// Writes atomically: a temporary sibling file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
