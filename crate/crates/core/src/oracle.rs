//! Reference implementations used to check the distributed runtime.
//!
//! [`centralized_run`] keeps one global store and rebuilds each snapshot by
//! filtering it to the event's neighbourhood, so it shares no cache code with
//! the runtime. [`exact_joint_run`] tracks the exact joint distribution over
//! all labeling variables by enumeration, with the pointer prior derived from
//! the joint rather than from a product of marginals.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::inference::{infer, log_likelihoods, InferenceConfig, Models, NeighborhoodSnapshot};
use crate::observation::{Belief, Label, Observation};
use crate::runtime::{LabelRecord, LabelingResult};
use crate::topology::{CameraId, Topology};
use crate::trace::Trace;

/// Largest trace the exact oracle accepts.
pub const EXACT_MAX_EVENTS: usize = 10;

/// Sequential inference over a single global store.
pub fn centralized_run(
    topo: &Topology,
    events: &Trace,
    config: &InferenceConfig,
    models: Arc<Models>,
) -> Result<LabelingResult> {
    config.validate()?;
    events.validate()?;
    events.check_against(topo)?;
    if models.spatiotemporal.order() != config.order {
        return Err(Error::Config("spatio-temporal model order does not match config".into()));
    }
    let hoods: Vec<BTreeSet<CameraId>> = topo
        .camera_ids()
        .map(|c| {
            let mut n = topo.neighbors(c, config.order)?;
            n.insert(c);
            Ok(n)
        })
        .collect::<Result<_>>()?;

    let mut store: Vec<(Observation, Belief)> = Vec::new();
    let mut result = LabelingResult::default();
    let mut per_node = vec![0.0; topo.num_cameras()];
    for e in &events.events {
        let obs = &e.observation;
        let hood = &hoods[obs.camera.0];
        let snapshot = NeighborhoodSnapshot::build(
            store.iter().filter(|(o, _)| hood.contains(&o.camera)).map(|(o, b)| (o, b)),
            config.memory_depth,
        );
        let start = Instant::now();
        let inference = infer(obs, &snapshot, &models, config)?;
        let secs = start.elapsed().as_secs_f64();
        per_node[obs.camera.0] += secs;
        let rec = LabelRecord::from_inference(obs, &inference)?;
        if let Some(b) = &rec.belief {
            store.push((obs.clone(), b.clone()));
        }
        result.records.push(rec);
        result.timing.per_event_secs.push(secs);
    }
    result.timing.per_node_secs = topo.camera_ids().zip(per_node).collect();
    Ok(result)
}

/// Exact filtered marginals `p(x_k | y_1..y_k)` for every event, by
/// enumerating joint label assignments. No memory window or pruning is
/// applied; every earlier event in the neighbourhood is a pointer candidate.
pub fn exact_joint_run(
    topo: &Topology,
    events: &Trace,
    order: usize,
    lambda0: f64,
    models: &Models,
) -> Result<Vec<Belief>> {
    if events.len() > EXACT_MAX_EVENTS {
        return Err(Error::TooLarge(format!(
            "exact enumeration is capped at {EXACT_MAX_EVENTS} events, got {}",
            events.len()
        )));
    }
    if models.spatiotemporal.order() != order {
        return Err(Error::Config("spatio-temporal model order does not match".into()));
    }
    events.validate()?;
    events.check_against(topo)?;
    let obs: Vec<&Observation> = events.observations().collect();
    let placeholders: Vec<Belief> = obs.iter().map(|o| Belief::certain(o.own_label())).collect();

    // joint[assignment] = probability, assignment[i] = label of event i
    let mut joint: HashMap<Vec<Label>, f64> = HashMap::from([(Vec::new(), 1.0)]);
    let mut marginals = Vec::with_capacity(obs.len());
    for (k, o) in obs.iter().enumerate() {
        let mut hood = topo.neighbors(o.camera, order)?;
        hood.insert(o.camera);
        // earlier events in the neighbourhood, newest first
        let mut cand: Vec<usize> = (0..k).filter(|&i| hood.contains(&obs[i].camera)).collect();
        cand.sort_by(|&a, &b| obs[b].event_order(obs[a]));
        let snapshot = NeighborhoodSnapshot::build(cand.iter().map(|&i| (obs[i], &placeholders[i])), None);
        let log_lik = log_likelihoods(o, &snapshot, models, lambda0)?;
        let lik: Vec<f64> = log_lik.iter().map(|x| x.exp()).collect();
        let own = o.own_label();
        let scale = 1.0 / (cand.len() + 1) as f64;

        let mut next: HashMap<Vec<Label>, f64> = HashMap::new();
        for (assign, &w) in &joint {
            let mut options: Vec<Label> = vec![own];
            for &i in &cand {
                if !options.contains(&assign[i]) {
                    options.push(assign[i]);
                }
            }
            for h in options {
                let count = cand.iter().filter(|&&i| assign[i] == h).count() + usize::from(h == own);
                let prior = scale * count as f64;
                // the pointer is the newest candidate carrying h, or 0
                let ptr = cand.iter().position(|&i| assign[i] == h).map_or(0, |p| p + 1);
                let v = w * prior * lik[ptr];
                if v > 0.0 {
                    let mut a = assign.clone();
                    a.push(h);
                    *next.entry(a).or_insert(0.0) += v;
                }
            }
        }
        let total: f64 = next.values().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        next.values_mut().for_each(|v| *v /= total);
        let mut marg: Vec<(Label, f64)> = Vec::new();
        for (a, &p) in &next {
            marg.push((a[k], p));
        }
        marginals.push(Belief::normalize(marg)?);
        joint = next;
    }
    Ok(marginals)
}

/// Total-variation distance between two beliefs.
pub fn tv_distance(a: &Belief, b: &Belief) -> f64 {
    let labels: BTreeSet<Label> = a.labels().chain(b.labels()).copied().collect();
    0.5 * labels.iter().map(|l| (a.prob(l) - b.prob(l)).abs()).sum::<f64>()
}

/// Comparison of the factorized algorithm against exact enumeration.
#[derive(Clone, Debug)]
pub struct FactorizationReport {
    pub exact: Vec<Belief>,
    pub factorized: Vec<Belief>,
    pub tv: Vec<f64>,
    pub argmax_agree: bool,
}

impl FactorizationReport {
    pub fn max_tv(&self) -> f64 {
        self.tv.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the factorized algorithm without window or pruning and the exact
/// oracle on the same tiny trace.
pub fn compare_factorization(
    topo: &Topology,
    events: &Trace,
    order: usize,
    lambda0: f64,
    models: Arc<Models>,
) -> Result<FactorizationReport> {
    let exact = exact_joint_run(topo, events, order, lambda0, &models)?;
    let cfg = InferenceConfig { lambda0, ..InferenceConfig::unbounded(order) };
    let fact = centralized_run(topo, events, &cfg, models)?;
    let factorized: Vec<Belief> = fact
        .records
        .into_iter()
        .map(|r| r.belief.ok_or_else(|| Error::Evaluation("unexpected gated observation".into())))
        .collect::<Result<_>>()?;
    let tv: Vec<f64> = exact.iter().zip(&factorized).map(|(a, b)| tv_distance(a, b)).collect();
    let mut argmax_agree = true;
    for (a, b) in exact.iter().zip(&factorized) {
        argmax_agree &= a.argmax()? == b.argmax()?;
    }
    Ok(FactorizationReport { exact, factorized, tv, argmax_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::AppearanceModel;
    use crate::observation::{Histogram, SpatioTemporalObs};
    use crate::runtime::run_simulation;
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

    fn trace(items: &[(usize, u32, f64, f64)]) -> Trace {
        Trace::new(
            items
                .iter()
                .map(|&(cam, idx, t, a)| TraceEvent {
                    observation: Observation {
                        camera: CameraId(cam),
                        local_index: idx,
                        appearance: Histogram::new(1, 2, vec![a, 1.0 - a]).unwrap(),
                        st: SpatioTemporalObs { t_en: t, e_en: Border(0), t_le: t + 2.0, e_le: Border(0) },
                        global_index: None,
                    },
                    truth: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn sample() -> Trace {
        trace(&[
            (0, 1, 0.0, 0.1),
            (1, 1, 1.0, 0.9),
            (1, 2, 12.0, 0.1),
            (2, 1, 13.0, 0.9),
            (2, 2, 24.0, 0.1),
            (0, 2, 26.0, 0.5),
        ])
    }

    #[test]
    fn centralized_matches_distributed() {
        let topo = graph(3, &[(0, 1, 0.4), (1, 2, 0.4), (2, 0, 0.4)]);
        for (order, m) in [(0, Some(1)), (0, Some(20)), (1, None)] {
            let cfg = InferenceConfig { order, memory_depth: m, space_cap: Some(2), ..InferenceConfig::default() };
            let a = run_simulation(&topo, &sample(), &cfg, models(&topo, order)).unwrap();
            let b = centralized_run(&topo, &sample(), &cfg, models(&topo, order)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn exact_equals_factorized_for_two_events() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        let t = trace(&[(0, 1, 0.0, 0.3), (1, 1, 12.0, 0.35)]);
        let r = compare_factorization(&topo, &t, 0, 0.02, models(&topo, 0)).unwrap();
        assert_eq!(r.exact[0], Belief::certain(t.events[0].observation.own_label()));
        assert!(r.max_tv() < 1e-12, "{:?}", r.tv);
    }

    #[test]
    fn exact_marginals_normalized_and_argmax_agrees() {
        let topo = graph(3, &[(0, 1, 0.4), (1, 2, 0.4), (2, 0, 0.4)]);
        let r = compare_factorization(&topo, &sample(), 0, 0.02, models(&topo, 0)).unwrap();
        for b in &r.exact {
            assert!((b.total_mass() - 1.0).abs() < 1e-12);
        }
        assert!(r.tv.iter().all(|d| (0.0..=1.0).contains(d)));
        assert!(r.argmax_agree);
    }

    #[test]
    fn exact_refuses_large_instances() {
        let topo = graph(2, &[(0, 1, 0.5)]);
        let items: Vec<_> = (0..11).map(|i| (i % 2, (i / 2 + 1) as u32, i as f64 * 20.0, 0.5)).collect();
        assert!(matches!(exact_joint_run(&topo, &trace(&items), 0, 0.02, &models(&topo, 0)), Err(Error::TooLarge(_))));
    }
}
