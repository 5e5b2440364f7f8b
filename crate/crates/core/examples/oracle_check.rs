//! Checks the distributed run against the centralized reference, and the
//! factorized posteriors against exact joint enumeration on a tiny trace.

use camnet::experiment::{office_config, train_office};
use camnet::oracle::{centralized_run, compare_factorization};
use camnet::runtime::run_simulation;
use camnet::scenario::{generate_trace, office_scenario, office_topology};

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let cfg = office_config(1);
    let models = model.models(cfg.order, false)?;

    let full = generate_trace(&topo, &office_scenario(&topo, 10, 30, 8)?)?.trace.unlabeled();
    let a = run_simulation(&topo, &full, &cfg, models.clone())?;
    let b = centralized_run(&topo, &full, &cfg, models.clone())?;
    println!("distributed vs centralized: max belief diff {:.3e}", a.max_belief_diff(&b)?);

    let tiny = generate_trace(&topo, &office_scenario(&topo, 3, 3, 8)?)?.trace.unlabeled();
    let report = compare_factorization(&topo, &tiny, cfg.order, cfg.lambda0, models)?;
    println!(
        "factorized vs exact on {} events: argmax agree {}, max TV {:.3e}",
        tiny.len(),
        report.argmax_agree,
        report.max_tv()
    );
    Ok(())
}
