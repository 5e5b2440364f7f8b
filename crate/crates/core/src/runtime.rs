//! Event-driven distributed execution: one agent per camera, push-style
//! belief announcements, per-neighbour caches bounded at `M`.
//!
//! Events are processed in canonical global order and every message produced
//! by event `k` is delivered before event `k + 1` runs, so each agent's cache
//! holds exactly the published results of strictly earlier events in its
//! neighbourhood.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{infer, Inference, InferenceConfig, Models, NeighborhoodSnapshot};
use crate::observation::{Belief, Label, Observation};
use crate::topology::{CameraId, Topology};
use crate::trace::Trace;

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    /// A final belief for one observation; never re-sent or revised.
    BeliefAnnounce { sender: CameraId, observation: Arc<Observation>, belief: Arc<Belief> },
}

impl Message {
    pub fn sender(&self) -> CameraId {
        match self {
            Message::BeliefAnnounce { sender, .. } => *sender,
        }
    }
}

type CacheEntry = (Arc<Observation>, Arc<Belief>);

/// State of one camera agent.
#[derive(Debug)]
pub struct NodeState {
    camera: CameraId,
    next_local: u32,
    /// Cameras whose announcements this node accepts (its q-order neighbourhood).
    sources: BTreeSet<CameraId>,
    /// Cameras that count this node in their neighbourhood.
    audience: Vec<CameraId>,
    caches: BTreeMap<CameraId, VecDeque<CacheEntry>>,
    config: InferenceConfig,
    models: Arc<Models>,
    compute_secs: f64,
}

/// What one detection produced at its node.
#[derive(Clone, Debug)]
pub struct DetectionOutcome {
    pub inference: Inference,
    pub messages: Vec<(CameraId, Message)>,
    pub compute_secs: f64,
}

impl NodeState {
    pub fn new(topo: &Topology, camera: CameraId, config: InferenceConfig, models: Arc<Models>) -> Result<Self> {
        config.validate()?;
        let sources = topo.neighbors(camera, config.order)?;
        let mut audience = Vec::new();
        for v in topo.camera_ids() {
            if v != camera && topo.neighbors(v, config.order)?.contains(&camera) {
                audience.push(v);
            }
        }
        let mut caches = BTreeMap::new();
        caches.insert(camera, VecDeque::new());
        for &s in &sources {
            caches.insert(s, VecDeque::new());
        }
        Ok(Self { camera, next_local: 1, sources, audience, caches, config, models, compute_secs: 0.0 })
    }

    pub fn camera(&self) -> CameraId {
        self.camera
    }

    pub fn sources(&self) -> &BTreeSet<CameraId> {
        &self.sources
    }

    pub fn audience(&self) -> &[CameraId] {
        &self.audience
    }

    pub fn cache(&self, from: CameraId) -> Option<&VecDeque<CacheEntry>> {
        self.caches.get(&from)
    }

    /// Cumulative time spent inside inference calls.
    pub fn compute_secs(&self) -> f64 {
        self.compute_secs
    }

    /// Pooled cache view, newest first, capped at `M`.
    pub fn snapshot(&self) -> NeighborhoodSnapshot<'_> {
        let pooled = self.caches.values().flat_map(|c| c.iter().map(|(o, b)| (o.as_ref(), b.as_ref())));
        NeighborhoodSnapshot::build(pooled, self.config.memory_depth)
    }

    /// Labels a local detection and prepares announcements for the audience.
    pub fn on_detection(&mut self, obs: Observation) -> Result<DetectionOutcome> {
        if obs.camera != self.camera {
            return Err(Error::Protocol(format!(
                "observation of camera {} delivered to node {}",
                obs.camera, self.camera
            )));
        }
        if obs.local_index < self.next_local {
            return Err(Error::Protocol(format!(
                "local index {} at camera {} is not increasing",
                obs.local_index, self.camera
            )));
        }
        self.next_local = obs.local_index + 1;

        let start = Instant::now();
        let inference = infer(&obs, &self.snapshot(), &self.models, &self.config)?;
        let compute_secs = start.elapsed().as_secs_f64();
        self.compute_secs += compute_secs;

        let mut messages = Vec::new();
        if let Inference::Labeled { belief, .. } = &inference {
            let observation = Arc::new(obs);
            let belief = Arc::new(belief.clone());
            self.insert(self.camera, observation.clone(), belief.clone());
            for &to in &self.audience {
                messages.push((
                    to,
                    Message::BeliefAnnounce {
                        sender: self.camera,
                        observation: observation.clone(),
                        belief: belief.clone(),
                    },
                ));
            }
        }
        Ok(DetectionOutcome { inference, messages, compute_secs })
    }

    /// Accepts an announcement from a neighbour. Duplicates are ignored.
    pub fn deliver(&mut self, msg: Message) -> Result<()> {
        let Message::BeliefAnnounce { sender, observation, belief } = msg;
        if !self.sources.contains(&sender) {
            return Err(Error::Protocol(format!(
                "camera {sender} is not in the neighbourhood of camera {}",
                self.camera
            )));
        }
        if observation.camera != sender {
            return Err(Error::Protocol(format!(
                "camera {sender} announced an observation of camera {}",
                observation.camera
            )));
        }
        self.insert(sender, observation, belief);
        Ok(())
    }

    fn insert(&mut self, from: CameraId, observation: Arc<Observation>, belief: Arc<Belief>) {
        let cache = self.caches.entry(from).or_default();
        if cache.iter().any(|(o, _)| o.same_id(&observation)) {
            return;
        }
        let pos = cache.partition_point(|(o, _)| o.event_order(&observation).is_lt());
        cache.insert(pos, (observation, belief));
        if let Some(m) = self.config.memory_depth {
            while cache.len() > m {
                cache.pop_front();
            }
        }
    }
}

/// Outcome for one observation of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub global_index: Option<usize>,
    pub camera: CameraId,
    pub local_index: u32,
    pub t_en: f64,
    /// `None` when the false-alarm gate dropped the observation.
    pub label: Option<Label>,
    pub belief: Option<Belief>,
    pub log_evidence: f64,
}

impl LabelRecord {
    pub fn from_inference(obs: &Observation, inference: &Inference) -> Result<Self> {
        let (belief, log_evidence) = match inference {
            Inference::Labeled { belief, log_evidence } => (Some(belief.clone()), *log_evidence),
            Inference::Dropped { log_evidence } => (None, *log_evidence),
        };
        let label = belief.as_ref().map(Belief::argmax).transpose()?;
        Ok(Self {
            global_index: obs.global_index,
            camera: obs.camera,
            local_index: obs.local_index,
            t_en: obs.st.t_en,
            label,
            belief,
            log_evidence,
        })
    }

    pub fn dropped(&self) -> bool {
        self.belief.is_none()
    }
}

/// Wall-clock accounting of inference calls only.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timing {
    pub per_event_secs: Vec<f64>,
    pub per_node_secs: BTreeMap<CameraId, f64>,
}

impl Timing {
    /// Distributed execution time: the largest cumulative per-node time.
    pub fn tau_d(&self) -> f64 {
        self.per_node_secs.values().copied().fold(0.0, f64::max)
    }

    pub fn total_secs(&self) -> f64 {
        self.per_event_secs.iter().sum()
    }
}

/// Per-observation results in global order. Equality ignores timing.
#[derive(Clone, Debug, Default)]
pub struct LabelingResult {
    pub records: Vec<LabelRecord>,
    pub timing: Timing,
}

impl PartialEq for LabelingResult {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl LabelingResult {
    pub fn tau_d(&self) -> f64 {
        self.timing.tau_d()
    }

    pub fn dropped_count(&self) -> usize {
        self.records.iter().filter(|r| r.dropped()).count()
    }

    /// Largest absolute difference between matching belief entries, or an
    /// error if the runs disagree on which observations were labeled.
    pub fn max_belief_diff(&self, other: &Self) -> Result<f64> {
        if self.records.len() != other.records.len() {
            return Err(Error::Evaluation(format!(
                "result lengths differ: {} vs {}",
                self.records.len(),
                other.records.len()
            )));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.records.iter().zip(&other.records) {
            if (a.camera, a.local_index) != (b.camera, b.local_index) {
                return Err(Error::Evaluation("results cover different observations".into()));
            }
            match (&a.belief, &b.belief) {
                (None, None) => {}
                (Some(x), Some(y)) => {
                    let labels: BTreeSet<Label> = x.labels().chain(y.labels()).copied().collect();
                    for l in &labels {
                        worst = worst.max((x.prob(l) - y.prob(l)).abs());
                    }
                }
                _ => return Ok(1.0),
            }
        }
        Ok(worst)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl std::io::BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
        }
        Ok(Self { records, timing: Timing::default() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn save_timing(&self, path: impl AsRef<Path>) -> Result<()> {
        let summary = serde_json::json!({
            "tau_d_secs": self.tau_d(),
            "total_secs": self.timing.total_secs(),
            "per_node_secs": self.timing.per_node_secs.iter().map(|(c, s)| (c.to_string(), *s)).collect::<BTreeMap<_, _>>(),
        });
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
        Ok(())
    }
}

/// All camera agents of a network plus the in-order scheduler.
#[derive(Debug)]
pub struct Network {
    nodes: Vec<NodeState>,
}

impl Network {
    pub fn new(topo: &Topology, config: &InferenceConfig, models: Arc<Models>) -> Result<Self> {
        if models.spatiotemporal.order() != config.order {
            return Err(Error::Config(format!(
                "spatio-temporal model built for order {} but config asks for {}",
                models.spatiotemporal.order(),
                config.order
            )));
        }
        let nodes = topo
            .camera_ids()
            .map(|c| NodeState::new(topo, c, config.clone(), models.clone()))
            .collect::<Result<_>>()?;
        Ok(Self { nodes })
    }

    pub fn node(&self, c: CameraId) -> Result<&NodeState> {
        self.nodes.get(c.0).ok_or(Error::UnknownCamera(c))
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    /// Processes one event and delivers all resulting messages.
    pub fn step(&mut self, obs: Observation) -> Result<(LabelRecord, f64)> {
        let cam = obs.camera;
        let node = self.nodes.get_mut(cam.0).ok_or(Error::UnknownCamera(cam))?;
        let record_obs = obs.clone();
        let out = node.on_detection(obs)?;
        for (to, msg) in out.messages {
            self.nodes.get_mut(to.0).ok_or(Error::UnknownCamera(to))?.deliver(msg)?;
        }
        Ok((LabelRecord::from_inference(&record_obs, &out.inference)?, out.compute_secs))
    }
}

/// Runs every event of `events` through the distributed network.
pub fn run_simulation(
    topo: &Topology,
    events: &Trace,
    config: &InferenceConfig,
    models: Arc<Models>,
) -> Result<LabelingResult> {
    events.validate()?;
    events.check_against(topo)?;
    let mut net = Network::new(topo, config, models)?;
    let mut result = LabelingResult::default();
    for e in &events.events {
        let (rec, secs) = net.step(e.observation.clone())?;
        result.records.push(rec);
        result.timing.per_event_secs.push(secs);
    }
    result.timing.per_node_secs = net.nodes.iter().map(|n| (n.camera, n.compute_secs)).collect();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::AppearanceModel;
    use crate::observation::{Histogram, SpatioTemporalObs};
    use crate::spatiotemporal::SpatioTemporalModel;
    use crate::topology::tests::graph;
    use crate::topology::Border;
    use crate::trace::TraceEvent;

    fn models(topo: &Topology, order: usize) -> Arc<Models> {
        Arc::new(Models {
            appearance: Arc::new(AppearanceModel::new(6.0, 0.02).unwrap()),
            spatiotemporal: SpatioTemporalModel::new(topo, order, false).unwrap(),
        })
    }

    fn obs(cam: usize, idx: u32, t: f64, hist: [f64; 2]) -> Observation {
        Observation {
            camera: CameraId(cam),
            local_index: idx,
            appearance: Histogram::new(1, 2, hist.to_vec()).unwrap(),
            st: SpatioTemporalObs { t_en: t, e_en: Border(0), t_le: t + 2.0, e_le: Border(0) },
            global_index: None,
        }
    }

    fn trace(obs: Vec<Observation>) -> Trace {
        Trace::new(obs.into_iter().map(|observation| TraceEvent { observation, truth: None }).collect()).unwrap()
    }

    #[test]
    fn empty_log_gives_empty_result() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        let r = run_simulation(&topo, &Trace::default(), &InferenceConfig::default(), models(&topo, 0)).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.tau_d(), 0.0);
    }

    #[test]
    fn first_event_is_new_object_and_announced() {
        let topo = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let mut node = NodeState::new(&topo, CameraId(1), InferenceConfig::default(), models(&topo, 0)).unwrap();
        let o = obs(1, 1, 0.0, [0.5, 0.5]);
        let out = node.on_detection(o.clone()).unwrap();
        match out.inference {
            Inference::Labeled { belief, .. } => assert_eq!(belief, Belief::certain(o.own_label())),
            _ => panic!("dropped"),
        }
        let to: Vec<_> = out.messages.iter().map(|(c, _)| *c).collect();
        assert_eq!(to, vec![CameraId(0), CameraId(2)]);
        assert_eq!(node.cache(CameraId(1)).unwrap().len(), 1);
    }

    #[test]
    fn second_sighting_links_to_first() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        let t = trace(vec![obs(0, 1, 0.0, [0.2, 0.8]), obs(1, 1, 12.0, [0.2, 0.8])]);
        let r = run_simulation(&topo, &t, &InferenceConfig::default(), models(&topo, 0)).unwrap();
        assert_eq!(r.records[1].label, Some(t.events[0].observation.own_label()));
    }

    #[test]
    fn inadmissible_travel_time_means_new_object() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        // gap 0.5 is below the minimum travel time of 1
        let t = trace(vec![obs(0, 1, 0.0, [0.2, 0.8]), obs(1, 1, 2.5, [0.2, 0.8])]);
        let r = run_simulation(&topo, &t, &InferenceConfig::default(), models(&topo, 0)).unwrap();
        assert_eq!(r.records[1].belief, Some(Belief::certain(t.events[1].observation.own_label())));
    }

    #[test]
    fn deliver_evicts_dedups_and_rejects_strangers() {
        let topo = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let cfg = InferenceConfig { memory_depth: Some(2), ..InferenceConfig::default() };
        let mut node = NodeState::new(&topo, CameraId(0), cfg, models(&topo, 0)).unwrap();
        let announce = |idx: u32, t: f64, cam: usize| {
            let o = obs(cam, idx, t, [0.5, 0.5]);
            let b = Belief::certain(o.own_label());
            Message::BeliefAnnounce { sender: CameraId(cam), observation: Arc::new(o), belief: Arc::new(b) }
        };
        for (i, t) in [(1, 1.0), (2, 2.0), (3, 3.0)] {
            node.deliver(announce(i, t, 1)).unwrap();
        }
        let idx: Vec<u32> = node.cache(CameraId(1)).unwrap().iter().map(|(o, _)| o.local_index).collect();
        assert_eq!(idx, vec![2, 3]);
        node.deliver(announce(3, 3.0, 1)).unwrap();
        assert_eq!(node.cache(CameraId(1)).unwrap().len(), 2);
        assert!(matches!(node.deliver(announce(1, 1.0, 2)), Err(Error::Protocol(_))));
    }

    #[test]
    fn runs_are_reproducible() {
        let topo = graph(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let t = trace(vec![
            obs(0, 1, 0.0, [0.2, 0.8]),
            obs(1, 1, 12.0, [0.2, 0.8]),
            obs(0, 2, 13.0, [0.7, 0.3]),
            obs(2, 1, 25.0, [0.25, 0.75]),
            obs(1, 2, 26.0, [0.7, 0.3]),
        ]);
        let m = models(&topo, 1);
        let cfg = InferenceConfig { order: 1, ..InferenceConfig::default() };
        let a = run_simulation(&topo, &t, &cfg, m.clone()).unwrap();
        let b = run_simulation(&topo, &t, &cfg, m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        let cfg = InferenceConfig { order: 1, ..InferenceConfig::default() };
        assert!(run_simulation(&topo, &Trace::default(), &cfg, models(&topo, 0)).is_err());
    }
}
