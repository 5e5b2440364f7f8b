//! Per-observation Bayesian update.
//!
//! For an observation `y` at camera `u`, the snapshot holds the `L` most
//! recent observations of `u` and its neighbourhood together with their
//! beliefs, newest first. The labeling variable `x` ranges over the own label
//! plus every label in the snapshot beliefs; the pointer variable `z` picks
//! the immediate predecessor (`0` = new object). The joint posterior is
//!
//! ```text
//! b(x = h, z = l) ∝ lik(l) · prior(h) · pointer(l | h)
//! lik(0)  = λ0
//! lik(l)  = λ_ap(y, y_l) · λ_st(y, y_l)
//! prior(h) = (1/(L+1)) · ([h = own] + Σ_l b_l(h))
//! pointer(0 | h) = Π_m (1 - b_m(h))
//! pointer(l | h) = b_l(h) · Π_{m<l} (1 - b_m(h))
//! ```
//!
//! where the pointer prior treats snapshot beliefs as independent. Summing
//! out `z` gives the published belief, which is then capped at `H` labels.
//! Likelihood products are formed in log space.
//!
//! [`NewObjectHypothesis`] selects which cells the `λ0` term may occupy. With
//! [`NewObjectHypothesis::OwnLabelOnly`] (the default) `z = 0` is reserved for
//! the own label, and every other label takes its pointer prior conditioned
//! on `z ≥ 1`. [`NewObjectHypothesis::PerLabel`] applies the table above
//! verbatim, letting `(h, 0)` carry mass for every `h`.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::appearance::AppearanceScorer;
use crate::error::{Error, Result};
use crate::observation::{Belief, Label, Observation};
use crate::spatiotemporal::SpatioTemporalModel;

/// Missing fields take their [`Default`] values. Unbounded `M` or `H` is
/// written as the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// `M`: snapshot depth; `None` keeps every observation.
    #[serde(with = "bound")]
    pub memory_depth: Option<usize>,
    /// `H`: belief support cap; `None` disables pruning.
    #[serde(with = "bound")]
    pub space_cap: Option<usize>,
    /// `q`: neighbourhood order.
    pub order: usize,
    /// Likelihood of the new-object hypothesis.
    pub lambda0: f64,
    pub renormalize_truncation: bool,
    pub false_alarm_threshold: Option<f64>,
    pub new_object: NewObjectHypothesis,
}

/// `Option<usize>` as a number, or `"inf"` for `None`.
mod bound {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_u64(*n as u64),
            None => s.serialize_str("inf"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        N(u64),
        S(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::N(n) => usize::try_from(n).map(Some).map_err(de::Error::custom),
            Raw::S(s) if s == "inf" => Ok(None),
            Raw::S(s) => Err(de::Error::custom(format!("expected a count or \"inf\", got {s:?}"))),
        }
    }
}

/// Which labels may pair with the `z = 0` (no predecessor) pointer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewObjectHypothesis {
    /// Only the own label starts a new object; existing labels need a predecessor.
    #[default]
    OwnLabelOnly,
    /// Every label competes with `λ0` through `pointer(0 | h)`.
    PerLabel,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            memory_depth: Some(20),
            space_cap: Some(15),
            order: 0,
            lambda0: crate::appearance::DEFAULT_LAMBDA0,
            renormalize_truncation: false,
            false_alarm_threshold: None,
            new_object: NewObjectHypothesis::default(),
        }
    }
}

impl InferenceConfig {
    pub fn unbounded(order: usize) -> Self {
        Self { memory_depth: None, space_cap: None, order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_depth == Some(0) {
            return Err(Error::Config("memory depth M must be >= 1".into()));
        }
        if matches!(self.space_cap, Some(h) if h < 2) {
            return Err(Error::Config("space cap H must be >= 2".into()));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be > 0, got {}", self.lambda0)));
        }
        if matches!(self.false_alarm_threshold, Some(t) if !(t >= 0.0)) {
            return Err(Error::Config("false-alarm threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Likelihood models shared by every camera.
#[derive(Clone)]
pub struct Models {
    pub appearance: Arc<dyn AppearanceScorer + Send + Sync>,
    pub spatiotemporal: SpatioTemporalModel,
}

impl std::fmt::Debug for Models {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Models").field("spatiotemporal_order", &self.spatiotemporal.order()).finish_non_exhaustive()
    }
}

/// Recent (observation, belief) pairs of a camera's neighbourhood, newest first.
#[derive(Clone, Debug, Default)]
pub struct NeighborhoodSnapshot<'a> {
    entries: Vec<(&'a Observation, &'a Belief)>,
}

impl<'a> NeighborhoodSnapshot<'a> {
    /// Sorts candidates newest-first and keeps the `depth` most recent.
    pub fn build(candidates: impl IntoIterator<Item = (&'a Observation, &'a Belief)>, depth: Option<usize>) -> Self {
        let mut entries: Vec<_> = candidates.into_iter().collect();
        entries.sort_by(|a, b| b.0.event_order(a.0));
        if let Some(m) = depth {
            entries.truncate(m);
        }
        Self { entries }
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(&'a Observation, &'a Belief)] {
        &self.entries
    }

    pub fn beliefs(&self) -> impl Iterator<Item = &'a Belief> + '_ {
        self.entries.iter().map(|(_, b)| *b)
    }
}

/// Candidate labels: the own label plus every label any snapshot belief supports.
pub fn sampling_space(own: Label, snapshot: &NeighborhoodSnapshot<'_>) -> BTreeSet<Label> {
    let mut space = BTreeSet::from([own]);
    for b in snapshot.beliefs() {
        space.extend(b.labels().copied());
    }
    space
}

/// Predictive label distribution before the observation is seen.
pub fn label_prior(own: Label, snapshot: &NeighborhoodSnapshot<'_>) -> Result<Belief> {
    let scale = 1.0 / (snapshot.len() + 1) as f64;
    let mut weights = vec![(own, scale)];
    for b in snapshot.beliefs() {
        weights.extend(b.support().iter().map(|&(l, p)| (l, scale * p)));
    }
    Belief::normalize(weights)
}

/// Pointer prior `P(z = l | x = h)` for `l = 0..=L`, snapshot beliefs taken
/// as independent.
pub fn pointer_prior(h: &Label, snapshot: &NeighborhoodSnapshot<'_>) -> Vec<f64> {
    let probs: Vec<f64> = snapshot.beliefs().map(|b| b.prob(h)).collect();
    pointer_prior_from(&probs)
}

/// Pointer prior from `b_l(h)` for `l = 1..=L`.
fn pointer_prior_from(probs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(probs.len() + 1);
    out.push(0.0);
    let mut none_before = 1.0;
    for &p in probs {
        out.push(p * none_before);
        none_before *= 1.0 - p;
    }
    out[0] = none_before;
    out
}

/// Joint posterior table over (label, pointer).
#[derive(Clone, Debug, PartialEq)]
pub struct JointBelief {
    labels: Vec<Label>,
    /// `cells[i][l]` = b(x = labels[i], z = l).
    cells: Vec<Vec<f64>>,
}

impl JointBelief {
    pub fn new(labels: Vec<Label>, cells: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != cells.len() {
            return Err(Error::DimensionMismatch("joint belief rows do not match labels".into()));
        }
        let total: f64 = cells.iter().flatten().sum();
        if (total - 1.0).abs() > crate::observation::MASS_TOL || cells.iter().flatten().any(|p| *p < 0.0) {
            return Err(Error::Config(format!("joint belief mass {total} is not 1")));
        }
        Ok(Self { labels, cells })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn get(&self, h: &Label, l: usize) -> f64 {
        self.labels.iter().position(|x| x == h).and_then(|i| self.cells[i].get(l).copied()).unwrap_or(0.0)
    }

    /// All mass on `(own, z = 0)`.
    pub fn new_object(own: Label, pointers: usize) -> Self {
        let mut row = vec![0.0; pointers];
        row[0] = 1.0;
        Self { labels: vec![own], cells: vec![row] }
    }
}

/// `ln lik(l)` for `l = 0..=L`: `ln λ0` then appearance + spatio-temporal
/// log-likelihood against each snapshot entry.
pub fn log_likelihoods(
    obs: &Observation,
    snapshot: &NeighborhoodSnapshot<'_>,
    models: &Models,
    lambda0: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(snapshot.len() + 1);
    out.push(lambda0.ln());
    for (prev, _) in snapshot.entries() {
        let st = models.spatiotemporal.log_likelihood(obs.camera, &obs.st, prev.camera, &prev.st)?;
        if st == f64::NEG_INFINITY {
            out.push(st);
            continue;
        }
        let ap = models.appearance.log_similarity(obs.camera, &obs.appearance, prev.camera, &prev.appearance);
        out.push(ap + st);
    }
    Ok(out)
}

/// Normalized joint posterior from log-likelihoods, plus the log of the
/// unnormalized total mass (the evidence).
pub fn joint_from_log_likelihoods(
    own: Label,
    snapshot: &NeighborhoodSnapshot<'_>,
    log_lik: &[f64],
    mode: NewObjectHypothesis,
) -> Result<(JointBelief, f64)> {
    if log_lik.len() != snapshot.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} likelihoods for {} pointer values",
            log_lik.len(),
            snapshot.len() + 1
        )));
    }
    let prior = label_prior(own, snapshot)?;
    let labels: Vec<Label> = sampling_space(own, snapshot).into_iter().collect();
    // membership[i][l - 1] = b_l(labels[i])
    let mut membership = vec![vec![0.0; snapshot.len()]; labels.len()];
    for (l, b) in snapshot.beliefs().enumerate() {
        for (h, p) in b.support() {
            let i = labels.binary_search(h).expect("sampling space covers every support");
            membership[i][l] = *p;
        }
    }
    let mut log_cells = Vec::with_capacity(labels.len());
    let mut max = f64::NEG_INFINITY;
    for (h, probs) in labels.iter().zip(&membership) {
        let lp = prior.prob(h).ln();
        let mut ptr = pointer_prior_from(probs);
        if mode == NewObjectHypothesis::OwnLabelOnly {
            if *h == own {
                ptr.iter_mut().skip(1).for_each(|p| *p = 0.0);
                ptr[0] = 1.0;
            } else {
                ptr[0] = 0.0;
                let linked: f64 = ptr.iter().sum();
                if linked > 0.0 {
                    ptr.iter_mut().for_each(|p| *p /= linked);
                }
            }
        }
        let row: Vec<f64> = ptr
            .into_iter()
            .zip(log_lik)
            .map(|(ptr, ll)| if ptr > 0.0 { ll + lp + ptr.ln() } else { f64::NEG_INFINITY })
            .collect();
        max = row.iter().copied().fold(max, f64::max);
        log_cells.push(row);
    }
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegeneratePosterior);
    }
    let mut total = 0.0;
    let mut cells: Vec<Vec<f64>> = log_cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| {
                    let v = (x - max).exp();
                    total += v;
                    v
                })
                .collect()
        })
        .collect();
    cells.iter_mut().flatten().for_each(|v| *v /= total);
    Ok((JointBelief { labels, cells }, max + total.ln()))
}

pub fn joint_posterior(
    obs: &Observation,
    snapshot: &NeighborhoodSnapshot<'_>,
    models: &Models,
    cfg: &InferenceConfig,
) -> Result<JointBelief> {
    let log_lik = log_likelihoods(obs, snapshot, models, cfg.lambda0)?;
    joint_from_log_likelihoods(obs.own_label(), snapshot, &log_lik, cfg.new_object).map(|(j, _)| j)
}

/// Sums the pointer variable out of the joint.
pub fn marginal_posterior(joint: &JointBelief) -> Result<Belief> {
    Belief::normalize(joint.labels.iter().zip(&joint.cells).map(|(h, row)| (*h, row.iter().sum::<f64>())))
}

/// Drops lowest-probability labels (youngest first on ties) until at most
/// `cap` remain, then renormalizes.
pub fn prune_space(b: &Belief, cap: Option<usize>) -> Result<Belief> {
    let Some(cap) = cap else {
        return Ok(b.clone());
    };
    if b.len() <= cap {
        return Ok(b.clone());
    }
    let mut entries = b.support().to_vec();
    entries.sort_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
    let excess = entries.len() - cap;
    Belief::normalize(entries.into_iter().skip(excess))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateDecision {
    Keep,
    Drop,
}

/// Keeps an observation whose total unnormalized evidence reaches the threshold.
pub fn false_alarm_gate(mass: f64, threshold: f64) -> GateDecision {
    if mass >= threshold {
        GateDecision::Keep
    } else {
        GateDecision::Drop
    }
}

/// Outcome of one inference step.
#[derive(Clone, Debug, PartialEq)]
pub enum Inference {
    Labeled {
        belief: Belief,
        log_evidence: f64,
    },
    /// Rejected by the false-alarm gate; nothing is published.
    Dropped {
        log_evidence: f64,
    },
}

/// Full per-observation pipeline: sampling space, joint, marginal, pruning
/// and the optional false-alarm gate.
pub fn infer(
    obs: &Observation,
    snapshot: &NeighborhoodSnapshot<'_>,
    models: &Models,
    cfg: &InferenceConfig,
) -> Result<Inference> {
    let own = obs.own_label();
    let log_lik = log_likelihoods(obs, snapshot, models, cfg.lambda0)?;
    let (joint, log_evidence) = match joint_from_log_likelihoods(own, snapshot, &log_lik, cfg.new_object) {
        Ok(x) => x,
        Err(Error::DegeneratePosterior) => {
            log::warn!("degenerate posterior for {own}; declaring a new object");
            (JointBelief::new_object(own, snapshot.len() + 1), f64::NEG_INFINITY)
        }
        Err(e) => return Err(e),
    };
    if let Some(threshold) = cfg.false_alarm_threshold {
        if false_alarm_gate(log_evidence.exp(), threshold) == GateDecision::Drop {
            return Ok(Inference::Dropped { log_evidence });
        }
    }
    let belief = prune_space(&marginal_posterior(&joint)?, cfg.space_cap)?;
    Ok(Inference::Labeled { belief, log_evidence })
}
