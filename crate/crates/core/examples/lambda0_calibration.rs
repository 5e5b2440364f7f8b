//! Sweeps the new-object likelihood over a log grid and counts runs that
//! recover the exact object count with F >= 0.95.

use camnet::evaluation::estimated_count;
use camnet::experiment::{office_config, run_scored, train_office};
use camnet::inference::InferenceConfig;
use camnet::scenario::{generate_trace, office_scenario, office_topology, OFFICE_VISITS};

const RUNS: u64 = 10;

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let traces = (0..RUNS)
        .map(|s| generate_trace(&topo, &office_scenario(&topo, 10, OFFICE_VISITS, 1000 + s)?))
        .collect::<camnet::Result<Vec<_>>>()?;
    println!("lambda0,order,mean_f,passes");
    for lambda0 in [1e-7, 1e-6, 1e-5, 2e-5, 1e-4, 1e-3, 1e-2, 2e-2, 1e-1] {
        for order in [0, 1] {
            let cfg = InferenceConfig { lambda0, ..office_config(order) };
            let (mut total_f, mut passes) = (0.0, 0);
            for g in &traces {
                let (result, scores) = run_scored(&topo, g, &model, &cfg)?;
                total_f += scores.f_measure;
                passes += usize::from(estimated_count(&result) == 10 && scores.f_measure >= 0.95);
            }
            println!("{lambda0:e},{order},{:.4},{passes}", total_f / RUNS as f64);
        }
    }
    Ok(())
}
