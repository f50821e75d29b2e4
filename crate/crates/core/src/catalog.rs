//! Observed events with their per-event measurement-error models.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Domain, Point};
use crate::noise::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEvent {
    pub id: String,
    /// Noisy observed position.
    pub observed: Point,
    /// Distribution of the displacement `observed - true`.
    pub noise: NoiseModel,
    /// Optional cluster label.
    pub cluster: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCatalog {
    pub domain: Domain,
    pub events: Vec<CatalogEvent>,
}

impl EventCatalog {
    /// Checks unique identifiers, in-domain positions and matching noise dimensions.
    pub fn new(domain: Domain, events: Vec<CatalogEvent>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &events {
            if !seen.insert(e.id.as_str()) {
                return Err(invalid(format!("duplicate event identifier {:?}", e.id)));
            }
            if !e.observed.is_finite() || !domain.contains(&e.observed) {
                return Err(invalid(format!("event {:?} lies outside the domain: {:?}", e.id, e.observed.coords())));
            }
            if e.noise.dim() != domain.dim() {
                return Err(invalid(format!(
                    "event {:?}: {}D noise model in a {}D domain",
                    e.id,
                    e.noise.dim(),
                    domain.dim()
                )));
            }
            e.noise.validate().map_err(|err| invalid(format!("event {:?}: {err}", e.id)))?;
        }
        Ok(Self { domain, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event indices per cluster label, in catalog order.
    pub fn clusters(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if let Some(c) = &e.cluster {
                out.entry(c.clone()).or_default().push(i);
            }
        }
        out
    }
}
