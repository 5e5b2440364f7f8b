//! Supervised model fitting from a labeled trace, and the model file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::appearance::AppearanceModel;
use crate::error::{Error, Result};
use crate::inference::Models;
use crate::observation::{Label, Observation};
use crate::spatiotemporal::{fit_travel_model, SpatioTemporalModel};
use crate::topology::{CameraId, Topology};
use crate::trace::Trace;

pub const MODEL_VERSION: u32 = 1;

/// Learned appearance transfers plus a topology whose edge travel models
/// were refit from data where enough transits existed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub version: u32,
    pub topology: Topology,
    pub appearance: AppearanceModel,
    /// Directed edges that kept their prior travel model for lack of data.
    #[serde(default)]
    pub insufficient_data: Vec<(CameraId, CameraId)>,
}

impl LearnedModel {
    /// Untrained model: prior topology and identity appearance transfers.
    pub fn from_prior(topology: Topology, appearance: AppearanceModel) -> Self {
        Self { version: MODEL_VERSION, topology, appearance, insufficient_data: Vec::new() }
    }

    pub fn models(&self, order: usize, renormalize: bool) -> Result<Arc<Models>> {
        Ok(Arc::new(Models {
            appearance: Arc::new(self.appearance.clone()),
            spatiotemporal: SpatioTemporalModel::new(&self.topology, order, renormalize)?,
        }))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.version != MODEL_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

/// Transit durations per directed edge from consecutive sightings of the same
/// object. Consecutive sightings on non-adjacent cameras are skipped.
pub fn transit_samples(topo: &Topology, trace: &Trace) -> Result<BTreeMap<(CameraId, CameraId), Vec<f64>>> {
    let mut by_object: BTreeMap<Label, Vec<&Observation>> = BTreeMap::new();
    for e in &trace.events {
        let truth = e.truth.ok_or_else(|| Error::InsufficientData("trace has unlabeled observations".into()))?;
        by_object.entry(truth).or_default().push(&e.observation);
    }
    let mut out: BTreeMap<(CameraId, CameraId), Vec<f64>> = BTreeMap::new();
    for obs in by_object.values() {
        for w in obs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if topo.edge(a.camera, b.camera).is_some() {
                out.entry((a.camera, b.camera)).or_default().push(b.st.t_en - a.st.t_le);
            }
        }
    }
    Ok(out)
}

/// Fits appearance transfers for every camera pair seen in the trace and a
/// travel model for every directed edge with at least two transits.
pub fn learn(prior: &Topology, trace: &Trace, bandwidth: f64, lambda0: f64) -> Result<LearnedModel> {
    if trace.is_empty() || !trace.is_labeled() {
        return Err(Error::InsufficientData("learning needs a fully labeled, non-empty trace".into()));
    }
    trace.check_against(prior)?;
    let samples = transit_samples(prior, trace)?;
    let mut topology = prior.clone();
    let mut insufficient = Vec::new();
    let edges: Vec<(CameraId, CameraId)> = prior.edges().map(|(a, b, _)| (a, b)).collect();
    for (a, b) in edges {
        let data = samples.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[]);
        match fit_travel_model(data) {
            Ok(m) => {
                let mut params = prior.edge(a, b).expect("edge listed").clone();
                params.min_travel = m.min_travel;
                params.mean_travel = m.mean_travel;
                params.travel_var = m.travel_var;
                topology = topology.with_edge(a, b, params)?;
            }
            Err(Error::InsufficientData(msg)) => {
                log::warn!("edge {a}->{b}: {msg}; keeping prior travel model");
                insufficient.push((a, b));
            }
            Err(e) => return Err(e),
        }
    }
    let labeled = trace.events.iter().map(|e| (&e.observation, e.truth.as_ref().expect("checked labeled")));
    let appearance = AppearanceModel::train(bandwidth, lambda0, labeled)?;
    Ok(LearnedModel { version: MODEL_VERSION, topology, appearance, insufficient_data: insufficient })
}
