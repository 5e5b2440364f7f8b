//! Labels a full office scenario with the message-passing network and reports
//! accuracy and per-node compute time.

use camnet::evaluation::evaluate;
use camnet::experiment::{office_config, train_office};
use camnet::runtime::run_simulation;
use camnet::scenario::{generate_trace, office_scenario, office_topology};

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let generated = generate_trace(&topo, &office_scenario(&topo, 10, 30, 42)?)?;
    let truth: Vec<_> = generated.trace.events.iter().map(|e| e.truth).collect();
    for q in [0, 1] {
        let cfg = office_config(q);
        let models = model.models(q, cfg.renormalize_truncation)?;
        let result = run_simulation(&topo, &generated.trace.unlabeled(), &cfg, models)?;
        let report = evaluate(&result, &truth, &cfg)?;
        println!(
            "order {q}: K {} / {}, F {:.4}, tau_d {:.2} ms over {} observations",
            report.k_estimated,
            report.k_truth,
            report.f_measure,
            result.tau_d() * 1e3,
            result.records.len()
        );
    }
    Ok(())
}
