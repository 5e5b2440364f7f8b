//! Canonical observation trace: one JSON object per line, in global event
//! order.
//!
//! ```text
//! {"global_index":1,"camera":0,"local_index":1,"t_en":3.5,"e_en":0,"t_le":9.25,"e_le":1,
//!  "channels":3,"bins":16,"histogram":[...],"ground_truth":{"camera":0,"local_index":1,"head_time":3.5}}
//! ```
//!
//! `ground_truth` is omitted for unlabeled traces.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{Histogram, Label, Observation, SpatioTemporalObs};
use crate::topology::{Border, CameraId, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub global_index: usize,
    pub camera: CameraId,
    pub local_index: u32,
    pub t_en: f64,
    pub e_en: Border,
    pub t_le: f64,
    pub e_le: Border,
    pub channels: usize,
    pub bins: usize,
    pub histogram: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Label>,
}

impl TraceRecord {
    pub fn to_event(&self) -> Result<TraceEvent> {
        let observation = Observation {
            camera: self.camera,
            local_index: self.local_index,
            appearance: Histogram::new(self.channels, self.bins, self.histogram.clone())?,
            st: SpatioTemporalObs { t_en: self.t_en, e_en: self.e_en, t_le: self.t_le, e_le: self.e_le },
            global_index: Some(self.global_index),
        };
        observation.validate()?;
        Ok(TraceEvent { observation, truth: self.ground_truth })
    }
}

/// One detection with its (optional) ground-truth label.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub observation: Observation,
    pub truth: Option<Label>,
}

impl TraceEvent {
    pub fn to_record(&self) -> TraceRecord {
        let o = &self.observation;
        TraceRecord {
            global_index: o.global_index.unwrap_or(0),
            camera: o.camera,
            local_index: o.local_index,
            t_en: o.st.t_en,
            e_en: o.st.e_en,
            t_le: o.st.t_le,
            e_le: o.st.e_le,
            channels: o.appearance.channels,
            bins: o.appearance.bins,
            histogram: o.appearance.values.clone(),
            ground_truth: self.truth,
        }
    }
}

/// Detection events in canonical global order (entry time, camera, local index).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

pub type EventLog = Trace;

impl Trace {
    /// Sorts events into canonical order and validates them.
    pub fn new(mut events: Vec<TraceEvent>) -> Result<Self> {
        events.sort_by(|a, b| a.observation.event_order(&b.observation));
        let t = Self { events };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.events.iter().map(|e| &e.observation)
    }

    pub fn is_labeled(&self) -> bool {
        self.events.iter().all(|e| e.truth.is_some())
    }

    pub fn truth_labels(&self) -> Option<Vec<Label>> {
        self.events.iter().map(|e| e.truth).collect()
    }

    /// Checks ordering, id uniqueness and per-camera local index monotonicity.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut last_local: BTreeMap<CameraId, (u32, f64)> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            let o = &e.observation;
            o.validate()?;
            if i > 0 && self.events[i - 1].observation.event_order(o).is_gt() {
                return Err(Error::Parse { line: i + 1, msg: "events out of global order".into() });
            }
            if !seen.insert((o.camera, o.local_index)) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate observation id {}:{}", o.camera, o.local_index),
                });
            }
            if o.local_index == 0 {
                return Err(Error::Parse { line: i + 1, msg: "local_index must be >= 1".into() });
            }
            if let Some(&(idx, t)) = last_local.get(&o.camera) {
                if o.local_index <= idx || o.st.t_en < t {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("local index of camera {} not increasing with time", o.camera),
                    });
                }
            }
            last_local.insert(o.camera, (o.local_index, o.st.t_en));
        }
        Ok(())
    }

    /// Checks that every camera and border referenced exists in `topo`.
    pub fn check_against(&self, topo: &Topology) -> Result<()> {
        for e in &self.events {
            let o = &e.observation;
            let cam = topo.camera(o.camera)?;
            for b in [o.st.e_en, o.st.e_le] {
                if b.0 >= cam.borders {
                    return Err(Error::BorderOutOfRange { what: "observation border", border: b.0, size: cam.borders });
                }
            }
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            events.push(rec.to_event().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
        }
        let t = Self { events };
        t.validate()?;
        Ok(t)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, &e.to_record())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Copy with ground-truth labels removed.
    pub fn unlabeled(&self) -> Self {
        Self {
            events: self
                .events
                .iter()
                .map(|e| TraceEvent { observation: e.observation.clone(), truth: None })
                .collect(),
        }
    }
}
