//! Synthetic ground truth: objects random-walk over the camera graph and
//! produce observation traces with per-camera appearance distortion, noisy
//! travel times and optional missing detections.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{Histogram, Label, Observation, SpatioTemporalObs};
use crate::topology::{Border, CameraId, CameraParams, EdgeParams, SiteCondition, StochasticMatrix, Topology};
use crate::trace::{Trace, TraceEvent};

/// Upper bound on rejection-sampling attempts for one travel time.
const MAX_RESAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub identity: usize,
    pub base_appearance: Histogram,
    pub birth_time: f64,
    pub birth_camera: CameraId,
    /// Number of camera visits; `None` lets the object leave the region
    /// with the residual transition mass.
    #[serde(default)]
    pub lifetime: Option<usize>,
}

/// Uniform dwell duration `t_le - t_en`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellModel {
    pub min: f64,
    pub max: f64,
}

impl Default for DwellModel {
    fn default() -> Self {
        Self { min: 4.0, max: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deletion {
    Count(usize),
    Rate(f64),
}

impl Deletion {
    fn count(self, n: usize) -> Result<usize> {
        let k = match self {
            Deletion::Count(k) => k,
            Deletion::Rate(r) => {
                if !(0.0..1.0).contains(&r) {
                    return Err(Error::Generation(format!("missing rate must lie in [0,1), got {r}")));
                }
                (r * n as f64).round() as usize
            }
        };
        if k > 0 && k >= n {
            return Err(Error::Generation(format!("cannot delete {k} of {n} observations")));
        }
        Ok(k)
    }
}

/// Everything needed to reproduce one synthetic trace on a given topology.
/// Appearance distortion comes from each camera's site condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub dwell: DwellModel,
    /// Per-camera dwell overrides, indexed by camera id.
    #[serde(default)]
    pub camera_dwell: Vec<DwellModel>,
    /// Multiplier on each edge's travel-time standard deviation.
    #[serde(default = "one")]
    pub travel_sigma_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub missing: Option<Deletion>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioSpec {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        for o in &self.objects {
            o.base_appearance.validate()?;
            topo.camera(o.birth_camera)?;
            if o.lifetime == Some(0) {
                return Err(Error::Generation(format!("object {} has zero lifetime", o.identity)));
            }
        }
        for d in std::iter::once(&self.dwell).chain(&self.camera_dwell) {
            if !(d.min >= 0.0 && d.max >= d.min && d.max.is_finite()) {
                return Err(Error::Generation(format!("invalid dwell range [{}, {}]", d.min, d.max)));
            }
        }
        if !(self.travel_sigma_scale >= 0.0 && self.travel_sigma_scale.is_finite()) {
            return Err(Error::Generation("travel_sigma_scale must be >= 0".into()));
        }
        Ok(())
    }

    fn dwell_for(&self, c: CameraId) -> DwellModel {
        self.camera_dwell.get(c.0).copied().unwrap_or(self.dwell)
    }
}

/// A generated trace with the bookkeeping needed to score it.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTrace {
    pub trace: Trace,
    /// Object identity of each event, aligned with `trace.events`.
    pub objects: Vec<usize>,
    /// Global indices removed by missing-detection injection.
    pub deleted: Vec<usize>,
}

/// Observed histogram: per-channel brightness gain (a monotone rescaling of
/// the brightness axis, saturating at the top bin), a whole-bin brightness
/// offset saturating at both ends, then clipped additive noise and
/// per-channel renormalization.
pub fn distort(base: &Histogram, cond: &SiteCondition, rng: &mut impl Rng) -> Result<Histogram> {
    let (c_n, b_n) = (base.channels, base.bins);
    let mut values = vec![0.0; c_n * b_n];
    for c in 0..c_n {
        let g = cond.gain(c);
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Generation(format!("channel gain must be > 0, got {g}")));
        }
        // bin b covers brightness [b, b+1); scaling maps it to [b*g, (b+1)*g)
        // and its mass is spread uniformly over that interval
        let top = b_n as f64;
        for (b, &v) in base.channel(c).iter().enumerate() {
            let (lo, hi) = (b as f64 * g, (b as f64 + 1.0) * g);
            if lo >= top {
                values[c * b_n + b_n - 1] += v;
                continue;
            }
            let mut x = lo;
            while x < hi.min(top) {
                let bin = x.floor() as usize;
                let end = ((bin + 1) as f64).min(hi);
                values[c * b_n + bin] += v * (end - x) / (hi - lo);
                x = end;
            }
            if hi > top {
                values[c * b_n + b_n - 1] += v * (hi - top) / (hi - lo);
            }
        }
    }
    for c in 0..c_n {
        let off = cond.offset(c);
        if off != 0 {
            let ch = &mut values[c * b_n..(c + 1) * b_n];
            let mut shifted = vec![0.0; b_n];
            for (b, &v) in ch.iter().enumerate() {
                let to = (b as i64 + off as i64).clamp(0, b_n as i64 - 1) as usize;
                shifted[to] += v;
            }
            ch.copy_from_slice(&shifted);
        }
    }
    if cond.noise > 0.0 {
        let normal = Normal::new(0.0, cond.noise).map_err(|e| Error::Generation(e.to_string()))?;
        for c in 0..c_n {
            let ch = &mut values[c * b_n..(c + 1) * b_n];
            let noisy: Vec<f64> = ch.iter().map(|v| (v + normal.sample(rng)).max(0.0)).collect();
            if noisy.iter().sum::<f64>() > 0.0 {
                ch.copy_from_slice(&noisy);
            }
        }
    }
    Histogram::from_counts(c_n, b_n, values)
}

fn sample_row(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Transit gap `Δ + |N(δ - Δ, σ²)|`, resampled until it exceeds `Δ`.
fn sample_gap(e: &EdgeParams, sigma_scale: f64, rng: &mut impl Rng) -> Result<f64> {
    let sigma = e.travel_var.sqrt() * sigma_scale;
    let loc = e.mean_travel - e.min_travel;
    for _ in 0..MAX_RESAMPLES {
        let z: f64 = if sigma > 0.0 {
            Normal::new(loc, sigma).map_err(|err| Error::Generation(err.to_string()))?.sample(rng)
        } else {
            loc
        };
        let gap = e.min_travel + z.abs();
        if gap > e.min_travel {
            return Ok(gap);
        }
    }
    Err(Error::Generation(format!("no admissible travel time: mean {} equals minimum with zero spread", e.mean_travel)))
}

struct RawEvent {
    object: usize,
    camera: CameraId,
    appearance: Histogram,
    st: SpatioTemporalObs,
}

/// Generates a trace for `spec` on `topo`; deletions from `spec.missing` are
/// applied last.
pub fn generate_trace(topo: &Topology, spec: &ScenarioSpec) -> Result<GeneratedTrace> {
    spec.validate(topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut raw: Vec<RawEvent> = Vec::new();
    for obj in &spec.objects {
        let mut cam = obj.birth_camera;
        let mut t = obj.birth_time;
        let mut entry = Border(rng.random_range(0..topo.camera(cam)?.borders));
        let mut visits = 0usize;
        loop {
            let params = topo.camera(cam)?;
            let dwell = spec.dwell_for(cam);
            let d = if dwell.max > dwell.min { rng.random_range(dwell.min..=dwell.max) } else { dwell.min };
            let exit = Border(sample_row(params.traversal.row(entry.0), &mut rng));
            raw.push(RawEvent {
                object: obj.identity,
                camera: cam,
                appearance: distort(&obj.base_appearance, &params.condition, &mut rng)?,
                st: SpatioTemporalObs { t_en: t, e_en: entry, t_le: t + d, e_le: exit },
            });
            visits += 1;
            if obj.lifetime.is_some_and(|l| visits >= l) {
                break;
            }
            let out: Vec<(CameraId, &EdgeParams)> = topo
                .adjacent(cam)?
                .iter()
                .filter_map(|&v| topo.edge(cam, v).map(|e| (v, e)))
                .filter(|(_, e)| e.transition_prob > 0.0)
                .collect();
            let next = if obj.lifetime.is_some() {
                if out.is_empty() {
                    return Err(Error::Generation(format!(
                        "object {} is stuck at camera {cam} with visits left",
                        obj.identity
                    )));
                }
                let total: f64 = out.iter().map(|(_, e)| e.transition_prob).sum();
                let row: Vec<f64> = out.iter().map(|(_, e)| e.transition_prob / total).collect();
                Some(out[sample_row(&row, &mut rng)])
            } else {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                out.iter().copied().find(|(_, e)| {
                    acc += e.transition_prob;
                    u < acc
                })
            };
            let Some((v, e)) = next else { break };
            let gap = sample_gap(e, spec.travel_sigma_scale, &mut rng)?;
            entry = Border(sample_row(e.border_matrix.row(exit.0), &mut rng));
            t = t + d + gap;
            cam = v;
        }
    }
    raw.sort_by(|a, b| a.st.t_en.total_cmp(&b.st.t_en).then(a.camera.cmp(&b.camera)));

    let mut next_local: BTreeMap<CameraId, u32> = BTreeMap::new();
    let mut heads: BTreeMap<usize, Label> = BTreeMap::new();
    let mut events = Vec::with_capacity(raw.len());
    let mut objects = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let idx = next_local.entry(r.camera).or_insert(0);
        *idx += 1;
        let observation = Observation {
            camera: r.camera,
            local_index: *idx,
            appearance: r.appearance,
            st: r.st,
            global_index: Some(i + 1),
        };
        let truth = *heads.entry(r.object).or_insert_with(|| observation.own_label());
        events.push(TraceEvent { observation, truth: Some(truth) });
        objects.push(r.object);
    }
    let generated = GeneratedTrace { trace: Trace::new(events)?, objects, deleted: Vec::new() };
    match spec.missing {
        Some(del) => inject_missing(&generated, del, spec.seed.wrapping_add(1)),
        None => Ok(generated),
    }
}

/// Deletes observations uniformly at random and re-derives ground truth so
/// each surviving trajectory is labeled by its first surviving observation.
pub fn inject_missing(generated: &GeneratedTrace, deletion: Deletion, seed: u64) -> Result<GeneratedTrace> {
    let n = generated.trace.len();
    let k = deletion.count(n)?;
    if k == 0 {
        return Ok(generated.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = vec![false; n];
    for i in sample(&mut rng, n, k) {
        drop[i] = true;
    }
    let mut heads: BTreeMap<usize, Label> = BTreeMap::new();
    let mut events = Vec::with_capacity(n - k);
    let mut objects = Vec::with_capacity(n - k);
    let mut deleted = generated.deleted.clone();
    for (i, e) in generated.trace.events.iter().enumerate() {
        if drop[i] {
            deleted.push(e.observation.global_index.unwrap_or(i + 1));
            continue;
        }
        let obj = generated.objects[i];
        let truth = *heads.entry(obj).or_insert_with(|| e.observation.own_label());
        events.push(TraceEvent { observation: e.observation.clone(), truth: Some(truth) });
        objects.push(obj);
    }
    deleted.sort_unstable();
    Ok(GeneratedTrace { trace: Trace { events }, objects, deleted })
}

/// Time-prefix split into a labeled training part and an evaluation part
/// whose labels are kept aside for scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSplit {
    pub training: Trace,
    pub evaluation: Trace,
    pub evaluation_truth: Vec<Option<Label>>,
}

pub fn emit_training_split(trace: &Trace, fraction: f64) -> Result<TrainingSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Generation(format!("training fraction must lie in (0,1), got {fraction}")));
    }
    let cut = ((fraction * trace.len() as f64).ceil() as usize).min(trace.len());
    let training = Trace { events: trace.events[..cut].to_vec() };
    let rest = Trace { events: trace.events[cut..].to_vec() };
    let evaluation_truth = rest.events.iter().map(|e| e.truth).collect();
    Ok(TrainingSplit { training, evaluation: rest.unlabeled(), evaluation_truth })
}

/// Gaussian-bump appearance per channel on a small floor.
pub fn bump_histogram(channels: usize, bins: usize, centers: &[f64], width: f64) -> Result<Histogram> {
    let mut values = Vec::with_capacity(channels * bins);
    for c in 0..channels {
        let mu = centers[c % centers.len()];
        for b in 0..bins {
            let d = (b as f64 - mu) / width;
            values.push((-0.5 * d * d).exp() + 0.01);
        }
    }
    Histogram::from_counts(channels, bins, values)
}

/// Parameters for a random population of objects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub count: usize,
    pub channels: usize,
    pub bins: usize,
    /// Birth times are uniform on `[0, birth_window]`.
    pub birth_window: f64,
    #[serde(default)]
    pub lifetime: Option<usize>,
    /// Bump width range, as a fraction of the bin count.
    #[serde(default = "default_width")]
    pub width: (f64, f64),
    /// Minimum mean-L1 distance between any two base appearances.
    #[serde(default = "default_separation")]
    pub min_separation: f64,
    /// Bump centers stay this fraction of the bin count away from either end.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_width() -> (f64, f64) {
    (0.125, 0.22)
}

fn default_separation() -> f64 {
    0.6
}

fn default_margin() -> f64 {
    0.15
}

/// Draws objects with mutually distinct base appearances.
pub fn random_population(topo: &Topology, pop: &PopulationSpec, seed: u64) -> Result<Vec<ObjectSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(pop.count);
    let top = (pop.bins as f64 - 1.0).max(0.0);
    let (lo, hi) = (pop.margin * top, (1.0 - pop.margin) * top);
    if !(0.0..0.5).contains(&pop.margin) {
        return Err(Error::Generation(format!("center margin must be in [0, 0.5), got {}", pop.margin)));
    }
    for identity in 0..pop.count {
        let mut attempts = 0;
        let base = loop {
            let centers: Vec<f64> = (0..pop.channels).map(|_| rng.random_range(lo..=hi)).collect();
            let width = rng.random_range(pop.width.0..pop.width.1) * pop.bins as f64;
            let h = bump_histogram(pop.channels, pop.bins, &centers, width)?;
            let far = objects.iter().all(|o| crate::appearance::mean_l1(&o.base_appearance, &h) >= pop.min_separation);
            attempts += 1;
            if far || attempts > 1000 {
                break h;
            }
        };
        objects.push(ObjectSpec {
            identity,
            base_appearance: base,
            birth_time: rng.random_range(0.0..=pop.birth_window.max(0.0)),
            birth_camera: CameraId(rng.random_range(0..topo.num_cameras())),
            lifetime: pop.lifetime,
        });
    }
    Ok(objects)
}

/// Seconds per time unit in the office scenario; times are in minutes.
const SECONDS: f64 = 60.0;

/// Appearance kernel bandwidth calibrated on the office scenario.
pub const OFFICE_BANDWIDTH: f64 = 20.0;

/// New-object likelihood at the center of the office scenario's F plateau.
/// The spatio-temporal term is a density per minute, so this value is tied
/// to the scenario's time unit.
pub const OFFICE_LAMBDA0: f64 = 2e-5;

/// Objects in the labeled scenario used to train office models.
pub const OFFICE_TRAINING_OBJECTS: usize = 40;

/// Camera visits per object in the office scenario (10 objects give 300 observations).
pub const OFFICE_VISITS: usize = 30;

/// Ten-camera, two-floor building: a five-camera loop per floor joined by
/// two stairwells. Cameras differ by a few bins of brightness offset.
/// Times are in minutes.
pub fn office_topology() -> Topology {
    let links: [(usize, usize, f64); 12] = [
        (0, 1, 24.0),
        (1, 2, 30.0),
        (2, 3, 36.0),
        (3, 4, 28.0),
        (4, 0, 40.0),
        (5, 6, 26.0),
        (6, 7, 34.0),
        (7, 8, 22.0),
        (8, 9, 38.0),
        (9, 5, 32.0),
        (2, 5, 45.0),
        (4, 7, 42.0),
    ];
    let offsets = [0, -4, -2, 2, -3, -1, 0, 3, -1, 1];
    let mut degree = [0usize; 10];
    for &(a, b, _) in &links {
        degree[a] += 1;
        degree[b] += 1;
    }
    let cameras: Vec<CameraParams> = offsets
        .iter()
        .map(|&o| CameraParams {
            borders: 2,
            traversal: StochasticMatrix::new(vec![vec![0.2, 0.8], vec![0.8, 0.2]]).expect("valid"),
            condition: SiteCondition { gains: Vec::new(), offsets: vec![o; 3], noise: 0.0003 },
        })
        .collect();
    let mut edges = Vec::new();
    for (k, &(a, b, secs)) in links.iter().enumerate() {
        let mean = secs / SECONDS;
        let straight = StochasticMatrix::new(vec![vec![0.95, 0.05], vec![0.05, 0.95]]).expect("valid");
        let crossed = StochasticMatrix::new(vec![vec![0.05, 0.95], vec![0.95, 0.05]]).expect("valid");
        for (from, to) in [(a, b), (b, a)] {
            edges.push((
                CameraId(from),
                CameraId(to),
                EdgeParams {
                    min_travel: 0.5 * mean,
                    mean_travel: mean,
                    travel_var: (0.08 * mean).powi(2),
                    transition_prob: 0.95 / degree[from] as f64,
                    border_matrix: if k % 2 == 0 { straight.clone() } else { crossed.clone() },
                },
            ));
        }
    }
    Topology::new(cameras, edges).expect("office topology is valid")
}

/// Office scenario with `objects` objects of `visits` camera visits each.
pub fn office_scenario(topo: &Topology, objects: usize, visits: usize, seed: u64) -> Result<ScenarioSpec> {
    let pop = PopulationSpec {
        count: objects,
        channels: 3,
        bins: 64,
        birth_window: 120.0 / SECONDS,
        lifetime: Some(visits),
        width: default_width(),
        min_separation: 1.0,
        margin: default_margin(),
    };
    Ok(ScenarioSpec {
        objects: random_population(topo, &pop, seed)?,
        dwell: DwellModel { min: 4.0 / SECONDS, max: 10.0 / SECONDS },
        camera_dwell: Vec::new(),
        travel_sigma_scale: 1.0,
        seed,
        missing: None,
    })
}
