//! Appearance likelihood between observation pairs.
//!
//! Histograms observed at different cameras are brought into a common
//! brightness space with a cumulative brightness transfer function (a
//! monotone per-channel bin mapping learned by matching cumulative
//! histograms), then compared with an exponential L1 kernel
//! `exp(-beta * mean_channel_L1)`. Any other re-identification score can be
//! plugged in through [`AppearanceScorer`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{Histogram, Label, Observation};
use crate::topology::CameraId;

/// Slack on cumulative-histogram comparisons.
const CUM_EPS: f64 = 1e-12;

/// Anything that scores the similarity of two appearance observations.
pub trait AppearanceScorer {
    /// Log of a strictly positive similarity score for `cur` (seen at
    /// `cur_cam`) against `prev` (seen at `prev_cam`).
    fn log_similarity(&self, cur_cam: CameraId, cur: &Histogram, prev_cam: CameraId, prev: &Histogram) -> f64;
}

/// Per-channel monotone bin mapping `source bin -> target bin`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub channels: Vec<Vec<usize>>,
}

impl TransferFunction {
    pub fn identity(channels: usize, bins: usize) -> Self {
        Self { channels: vec![(0..bins).collect(); channels] }
    }

    pub fn is_monotone(&self) -> bool {
        self.channels.iter().all(|m| m.windows(2).all(|w| w[0] <= w[1]))
    }

    pub fn is_identity(&self) -> bool {
        self.channels.iter().all(|m| m.iter().enumerate().all(|(i, &b)| i == b))
    }

    /// Moves every bin's mass to its mapped bin.
    pub fn apply(&self, h: &Histogram) -> Result<Histogram> {
        if self.channels.len() != h.channels || self.channels.iter().any(|m| m.len() != h.bins) {
            return Err(Error::DimensionMismatch(format!(
                "transfer function does not fit a {}x{} histogram",
                h.channels, h.bins
            )));
        }
        let mut values = vec![0.0; h.values.len()];
        for (c, map) in self.channels.iter().enumerate() {
            let src = h.channel(c);
            let dst = &mut values[c * h.bins..(c + 1) * h.bins];
            for (b, &target) in map.iter().enumerate() {
                dst[target] += src[b];
            }
        }
        Ok(Histogram { channels: h.channels, bins: h.bins, values })
    }
}

fn cumulative(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect()
}

/// Matches source bin `b` to the first target bin whose cumulative mass
/// reaches `H_src(b)`. When the target cumulative is flat at exactly that
/// level the choice is pulled towards `b`, so equal cumulatives give the
/// identity.
fn match_cumulative(src: &[f64], dst: &[f64]) -> Vec<usize> {
    let h_src = cumulative(src);
    let h_dst = cumulative(dst);
    let last = dst.len() - 1;
    h_src
        .iter()
        .enumerate()
        .map(|(b, &level)| {
            let lo = h_dst.iter().position(|&v| v >= level - CUM_EPS).unwrap_or(last);
            // last bin of the plateau where the target cumulative equals `level`
            let hi = h_dst.iter().position(|&v| v > level + CUM_EPS).map_or(last, |p| p.saturating_sub(1)).max(lo);
            b.clamp(lo, hi)
        })
        .collect()
}

/// Learns both directions of the transfer between two cameras from
/// `(histogram at A, histogram at B)` pairs of the same object.
/// Returns `(A -> B, B -> A)`.
pub fn learn_transfer(pairs: &[(Histogram, Histogram)]) -> Result<(TransferFunction, TransferFunction)> {
    let Some((first, _)) = pairs.first() else {
        return Err(Error::InsufficientData("untrained pair: no training pairs".into()));
    };
    let (channels, bins) = (first.channels, first.bins);
    let mut acc_a = vec![0.0; channels * bins];
    let mut acc_b = vec![0.0; channels * bins];
    for (a, b) in pairs {
        for h in [a, b] {
            if h.channels != channels || h.bins != bins {
                return Err(Error::DimensionMismatch("training histograms differ in shape".into()));
            }
        }
        acc_a.iter_mut().zip(&a.values).for_each(|(s, v)| *s += v);
        acc_b.iter_mut().zip(&b.values).for_each(|(s, v)| *s += v);
    }
    let mut forward = Vec::with_capacity(channels);
    let mut backward = Vec::with_capacity(channels);
    for c in 0..channels {
        let ca = &acc_a[c * bins..(c + 1) * bins];
        let cb = &acc_b[c * bins..(c + 1) * bins];
        forward.push(match_cumulative(ca, cb));
        backward.push(match_cumulative(cb, ca));
    }
    Ok((TransferFunction { channels: forward }, TransferFunction { channels: backward }))
}

/// Mean over channels of the per-channel L1 distance.
pub fn mean_l1(a: &Histogram, b: &Histogram) -> f64 {
    let total: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum();
    total / a.channels as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StoredTransfer {
    from: CameraId,
    to: CameraId,
    channels: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StoredModel", into = "StoredModel")]
pub struct AppearanceModel {
    transfer: BTreeMap<(CameraId, CameraId), TransferFunction>,
    bandwidth: f64,
    lambda0: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StoredModel {
    bandwidth: f64,
    lambda0: f64,
    #[serde(default)]
    transfer: Vec<StoredTransfer>,
}

impl TryFrom<StoredModel> for AppearanceModel {
    type Error = Error;
    fn try_from(s: StoredModel) -> Result<Self> {
        let mut m = AppearanceModel::new(s.bandwidth, s.lambda0)?;
        for t in s.transfer {
            m.insert_transfer(t.from, t.to, TransferFunction { channels: t.channels })?;
        }
        Ok(m)
    }
}

impl From<AppearanceModel> for StoredModel {
    fn from(m: AppearanceModel) -> Self {
        StoredModel {
            bandwidth: m.bandwidth,
            lambda0: m.lambda0,
            transfer: m
                .transfer
                .into_iter()
                .map(|((from, to), t)| StoredTransfer { from, to, channels: t.channels })
                .collect(),
        }
    }
}

pub const DEFAULT_BANDWIDTH: f64 = 6.0;
pub const DEFAULT_LAMBDA0: f64 = 0.02;

impl Default for AppearanceModel {
    fn default() -> Self {
        Self { transfer: BTreeMap::new(), bandwidth: DEFAULT_BANDWIDTH, lambda0: DEFAULT_LAMBDA0 }
    }
}

impl AppearanceModel {
    pub fn new(bandwidth: f64, lambda0: f64) -> Result<Self> {
        if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be >= 0, got {bandwidth}")));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be > 0, got {lambda0}")));
        }
        Ok(Self { transfer: BTreeMap::new(), bandwidth, lambda0 })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be > 0, got {lambda0}")));
        }
        self.lambda0 = lambda0;
        Ok(self)
    }

    pub fn insert_transfer(&mut self, from: CameraId, to: CameraId, t: TransferFunction) -> Result<()> {
        if !t.is_monotone() {
            return Err(Error::Config(format!("transfer {from}->{to} is not monotone")));
        }
        self.transfer.insert((from, to), t);
        Ok(())
    }

    pub fn transfer(&self, from: CameraId, to: CameraId) -> Option<&TransferFunction> {
        self.transfer.get(&(from, to))
    }

    pub fn trained_pairs(&self) -> impl Iterator<Item = (CameraId, CameraId)> + '_ {
        self.transfer.keys().copied()
    }

    /// Learns transfers for every camera pair that shares at least one object
    /// in the labeled training observations.
    pub fn train<'a>(
        bandwidth: f64,
        lambda0: f64,
        labeled: impl IntoIterator<Item = (&'a Observation, &'a Label)>,
    ) -> Result<Self> {
        let mut by_object: BTreeMap<Label, Vec<&Observation>> = BTreeMap::new();
        for (obs, label) in labeled {
            by_object.entry(*label).or_default().push(obs);
        }
        let mut pairs: BTreeMap<(CameraId, CameraId), Vec<(Histogram, Histogram)>> = BTreeMap::new();
        for obs in by_object.values() {
            for (i, a) in obs.iter().enumerate() {
                for b in &obs[i + 1..] {
                    if a.camera == b.camera {
                        continue;
                    }
                    let (lo, hi) = if a.camera < b.camera { (a, b) } else { (b, a) };
                    pairs
                        .entry((lo.camera, hi.camera))
                        .or_default()
                        .push((lo.appearance.clone(), hi.appearance.clone()));
                }
            }
        }
        let mut model = Self::new(bandwidth, lambda0)?;
        for ((a, b), p) in pairs {
            let (ab, ba) = learn_transfer(&p)?;
            model.insert_transfer(a, b, ab)?;
            model.insert_transfer(b, a, ba)?;
        }
        Ok(model)
    }

    /// `ln lambda_ap`: `-beta * mean_L1(cur, T(prev))`.
    pub fn log_likelihood(&self, cur_cam: CameraId, cur: &Histogram, prev_cam: CameraId, prev: &Histogram) -> f64 {
        let mapped = if cur_cam == prev_cam {
            None
        } else {
            match self.transfer(prev_cam, cur_cam) {
                Some(t) => t.apply(prev).ok(),
                None => {
                    log::debug!("no transfer for {prev_cam}->{cur_cam}; using identity");
                    None
                }
            }
        };
        -self.bandwidth * mean_l1(cur, mapped.as_ref().unwrap_or(prev))
    }

    pub fn appearance_likelihood(
        &self,
        cur_cam: CameraId,
        cur: &Histogram,
        prev_cam: CameraId,
        prev: &Histogram,
    ) -> f64 {
        self.log_likelihood(cur_cam, cur, prev_cam, prev).exp()
    }

    /// Constant likelihood of the "new object" hypothesis.
    pub fn new_object_likelihood(&self) -> f64 {
        self.lambda0
    }
}

impl AppearanceScorer for AppearanceModel {
    fn log_similarity(&self, cur_cam: CameraId, cur: &Histogram, prev_cam: CameraId, prev: &Histogram) -> f64 {
        self.log_likelihood(cur_cam, cur, prev_cam, prev)
    }
}
