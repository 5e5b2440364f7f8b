//! One labeling step by hand: a camera sees a new observation, builds its
//! neighbourhood snapshot and computes the joint and marginal posteriors.

use camnet::experiment::{office_config, train_office};
use camnet::inference::{
    infer, joint_posterior, label_prior, marginal_posterior, sampling_space, Inference, NeighborhoodSnapshot,
};
use camnet::observation::Belief;
use camnet::scenario::{generate_trace, office_scenario, office_topology};

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let cfg = office_config(0);
    let models = model.models(cfg.order, cfg.renormalize_truncation)?;
    let generated = generate_trace(&topo, &office_scenario(&topo, 3, 4, 5)?)?;
    let events: Vec<_> = generated.trace.observations().cloned().collect();

    // Treat every earlier observation as already labeled with its true label.
    let target = events
        .iter()
        .rposition(|o| {
            events.iter().any(|p| p.st.t_le < o.st.t_en && topo.neighbors(o.camera, 0).unwrap().contains(&p.camera))
        })
        .expect("a sighting with a predecessor");
    let obs = &events[target];
    let neighbours = topo.neighbors(obs.camera, cfg.order)?;
    let beliefs: Vec<Belief> =
        generated.trace.events.iter().map(|e| Belief::certain(e.truth.expect("labeled"))).collect();
    let snapshot = NeighborhoodSnapshot::build(
        events[..target].iter().zip(&beliefs).filter(|(p, _)| neighbours.contains(&p.camera)),
        cfg.memory_depth,
    );

    println!("observation at camera {} entering t={:.3}", obs.camera.0, obs.st.t_en);
    println!("sampling space: {:?}", sampling_space(obs.own_label(), &snapshot));
    println!("label prior: {:?}", label_prior(obs.own_label(), &snapshot)?.support());
    let joint = joint_posterior(obs, &snapshot, &models, &cfg)?;
    println!("marginal posterior: {:?}", marginal_posterior(&joint)?.support());
    if let Inference::Labeled { belief, log_evidence } = infer(obs, &snapshot, &models, &cfg)? {
        println!("argmax {}, true {}, log evidence {log_evidence:.2}", belief.argmax()?, beliefs[target].argmax()?);
    }
    Ok(())
}
