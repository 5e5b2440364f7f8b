//! Observations, labels and beliefs: the values exchanged between cameras.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Border, CameraId};

/// Tolerance on the unit mass of beliefs and histogram channels.
pub const MASS_TOL: f64 = 1e-9;

/// Object identifier: the `(camera, local_index)` of the object's first
/// observation. `head_time` is that observation's entry time and defines the
/// total order (oldest first); equality and hashing use the pair only.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Label {
    pub camera: CameraId,
    pub local_index: u32,
    pub head_time: f64,
}

impl Label {
    pub fn new(camera: CameraId, local_index: u32, head_time: f64) -> Self {
        Self { camera, local_index, head_time }
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.camera == other.camera && self.local_index == other.local_index
    }
}

impl Eq for Label {}

impl Hash for Label {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.camera.hash(state);
        self.local_index.hash(state);
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.head_time
            .total_cmp(&other.head_time)
            .then(self.camera.cmp(&other.camera))
            .then(self.local_index.cmp(&other.local_index))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}-{}", self.camera, self.local_index)
    }
}

/// Per-channel normalized brightness histogram, `channels x bins`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub channels: usize,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl Histogram {
    pub fn new(channels: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        let h = Self { channels, bins, values };
        h.validate()?;
        Ok(h)
    }

    /// Normalizes each channel of raw non-negative counts to unit mass.
    pub fn from_counts(channels: usize, bins: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * bins {
            return Err(Error::DimensionMismatch(format!(
                "histogram has {} values, expected {channels}x{bins}",
                values.len()
            )));
        }
        for c in 0..channels {
            let ch = &mut values[c * bins..(c + 1) * bins];
            let total: f64 = ch.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Config(format!("channel {c} has no mass")));
            }
            ch.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(channels, bins, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.bins == 0 || self.values.len() != self.channels * self.bins {
            return Err(Error::DimensionMismatch(format!(
                "histogram has {} values, expected {}x{}",
                self.values.len(),
                self.channels,
                self.bins
            )));
        }
        if self.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("histogram has negative or non-finite values".into()));
        }
        for c in 0..self.channels {
            let s: f64 = self.channel(c).iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::Config(format!("histogram channel {c} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.bins..(c + 1) * self.bins]
    }
}

/// Entry/exit times and borders of one transit through a camera's view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatioTemporalObs {
    pub t_en: f64,
    pub e_en: Border,
    pub t_le: f64,
    pub e_le: Border,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub camera: CameraId,
    pub local_index: u32,
    pub appearance: Histogram,
    pub st: SpatioTemporalObs,
    /// Network-wide index; known to the simulator and evaluator only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_index: Option<usize>,
}

impl Observation {
    /// The label this observation carries if it heads a new trajectory.
    pub fn own_label(&self) -> Label {
        Label::new(self.camera, self.local_index, self.st.t_en)
    }

    /// Canonical global ordering key: entry time, then camera, then local index.
    pub fn event_order(&self, other: &Self) -> Ordering {
        self.st
            .t_en
            .total_cmp(&other.st.t_en)
            .then(self.camera.cmp(&other.camera))
            .then(self.local_index.cmp(&other.local_index))
    }

    pub fn same_id(&self, other: &Self) -> bool {
        self.camera == other.camera && self.local_index == other.local_index
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.st.t_le >= self.st.t_en) {
            return Err(Error::Config(format!(
                "observation {}:{} leaves before it enters",
                self.camera, self.local_index
            )));
        }
        self.appearance.validate()
    }
}

/// Normalized distribution of one labeling variable; support sorted by label
/// order, every probability strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    support: Vec<(Label, f64)>,
}

impl Belief {
    pub fn certain(label: Label) -> Self {
        Self { support: vec![(label, 1.0)] }
    }

    /// Probabilities proportional to non-negative scores; zero scores are dropped.
    pub fn normalize(weights: impl IntoIterator<Item = (Label, f64)>) -> Result<Self> {
        let mut support: Vec<(Label, f64)> = Vec::new();
        for (l, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("invalid score {w} for {l}")));
            }
            if w > 0.0 {
                support.push((l, w));
            }
        }
        support.sort_by_key(|a| a.0);
        // merge duplicates
        let mut merged: Vec<(Label, f64)> = Vec::with_capacity(support.len());
        for (l, w) in support {
            match merged.last_mut() {
                Some((last, acc)) if *last == l => *acc += w,
                _ => merged.push((l, w)),
            }
        }
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        merged.iter_mut().for_each(|(_, w)| *w /= total);
        Ok(Self { support: merged })
    }

    /// Rebuilds a belief from already-normalized entries, checking invariants.
    pub fn from_normalized(support: Vec<(Label, f64)>) -> Result<Self> {
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!("belief mass {total} is not 1")));
        }
        if support.iter().any(|(_, p)| !(*p > 0.0)) {
            return Err(Error::Config("belief has non-positive entries".into()));
        }
        let mut b = Self { support };
        b.support.sort_by_key(|a| a.0);
        if b.support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("belief has duplicate labels".into()));
        }
        Ok(b)
    }

    pub fn support(&self) -> &[(Label, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, label: &Label) -> f64 {
        self.support.binary_search_by(|(l, _)| l.cmp(label)).map_or(0.0, |i| self.support[i].1)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.support.iter().map(|(l, _)| l)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    /// Most probable label; ties go to the oldest label.
    pub fn argmax(&self) -> Result<Label> {
        let mut best: Option<(Label, f64)> = None;
        for &(l, p) in &self.support {
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((l, p)),
            }
        }
        best.map(|(l, _)| l).ok_or(Error::EmptyBelief)
    }
}
