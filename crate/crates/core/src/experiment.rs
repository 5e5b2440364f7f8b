//! Synthetic end-to-end runs: train on one generated trace, label another,
//! score against ground truth, and sweep over missing-detection counts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluation::{partitions, precision_recall_f, sweep_row, Scores, SweepRow};
use crate::inference::InferenceConfig;
use crate::learning::{learn, LearnedModel};
use crate::runtime::{run_simulation, LabelingResult};
use crate::scenario::{
    generate_trace, inject_missing, office_scenario, Deletion, GeneratedTrace, ScenarioSpec, OFFICE_BANDWIDTH,
    OFFICE_LAMBDA0, OFFICE_TRAINING_OBJECTS, OFFICE_VISITS,
};
use crate::topology::Topology;

/// Seed offset separating training scenarios from evaluation scenarios.
pub const TRAINING_SEED_OFFSET: u64 = 0x5EED_0000;

/// Learns a model from a dedicated labeled training scenario.
pub fn train_synthetic(
    topo: &Topology,
    objects: usize,
    visits: usize,
    seed: u64,
    bandwidth: f64,
    lambda0: f64,
) -> Result<LearnedModel> {
    let spec = office_scenario(topo, objects, visits, seed.wrapping_add(TRAINING_SEED_OFFSET))?;
    let training = generate_trace(topo, &spec)?;
    learn(topo, &training.trace, bandwidth, lambda0)
}

/// Runs the distributed labeling and scores it against the trace's ground truth.
pub fn run_scored(
    topo: &Topology,
    generated: &GeneratedTrace,
    model: &LearnedModel,
    cfg: &InferenceConfig,
) -> Result<(LabelingResult, Scores)> {
    let models = model.models(cfg.order, cfg.renormalize_truncation)?;
    let result = run_simulation(topo, &generated.trace.unlabeled(), cfg, models)?;
    let truth: Vec<_> = generated.trace.events.iter().map(|e| e.truth).collect();
    let (est, tru) = partitions(&result, &truth)?;
    Ok((result, precision_recall_f(&est, &tru)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub counts: Vec<usize>,
    pub orders: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub config: InferenceConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            counts: vec![0, 10, 20, 30, 40],
            orders: vec![0, 1],
            trials: 10,
            seed: 1,
            config: InferenceConfig { lambda0: OFFICE_LAMBDA0, ..InferenceConfig::default() },
        }
    }
}

/// Mean scores per (deletion count, order). Trial `t` labels the scenario
/// `scenario(spec.seed + t)` with its own deletion pattern; every order sees
/// identical traces.
pub fn missing_sweep(
    topo: &Topology,
    model: &LearnedModel,
    spec: &SweepSpec,
    scenario: impl Fn(u64) -> Result<ScenarioSpec>,
) -> Result<Vec<SweepRow>> {
    let scenarios: Vec<GeneratedTrace> = (0..spec.trials as u64)
        .map(|t| generate_trace(topo, &scenario(spec.seed.wrapping_add(t))?))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &count in &spec.counts {
        let reduced: Vec<GeneratedTrace> = scenarios
            .iter()
            .enumerate()
            .map(|(t, g)| {
                inject_missing(g, Deletion::Count(count), spec.seed.wrapping_mul(7919).wrapping_add(t as u64))
            })
            .collect::<Result<_>>()?;
        for &order in &spec.orders {
            let cfg = InferenceConfig { order, ..spec.config.clone() };
            let scores =
                reduced.iter().map(|g| run_scored(topo, g, model, &cfg).map(|(_, s)| s)).collect::<Result<Vec<_>>>()?;
            let row = sweep_row(count, order, &scores)?;
            log::info!("deleted {count} order {order}: mean F {:.4}", row.mean_f);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Office model trained on its own labeled scenario with the calibrated bandwidth.
pub fn train_office(topo: &Topology, seed: u64) -> Result<LearnedModel> {
    train_synthetic(topo, OFFICE_TRAINING_OBJECTS, OFFICE_VISITS, seed, OFFICE_BANDWIDTH, OFFICE_LAMBDA0)
}

/// Inference settings calibrated for the office scenario.
pub fn office_config(order: usize) -> InferenceConfig {
    InferenceConfig { order, lambda0: OFFICE_LAMBDA0, ..InferenceConfig::default() }
}
