//! Writes the per-observation belief matrix of a run as CSV and reads it back.

use camnet::evaluation::{export_belief_matrix, parse_belief_matrix};
use camnet::experiment::{office_config, train_office};
use camnet::runtime::run_simulation;
use camnet::scenario::{generate_trace, office_scenario, office_topology};

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let cfg = office_config(0);
    let generated = generate_trace(&topo, &office_scenario(&topo, 4, 5, 2)?)?;
    let truth: Vec<_> = generated.trace.events.iter().map(|e| e.truth).collect();
    let result = run_simulation(&topo, &generated.trace.unlabeled(), &cfg, model.models(0, false)?)?;

    let mut csv = Vec::new();
    export_belief_matrix(&result, Some(&truth), &mut csv)?;
    let text = String::from_utf8(csv.clone()).expect("utf-8 csv");
    for line in text.lines().take(6) {
        println!("{line}");
    }
    let parsed = parse_belief_matrix(csv.as_slice())?;
    let row_sums: Vec<f64> = parsed.rows.iter().map(|(_, p)| p.iter().sum()).collect();
    println!(
        "parsed {} rows over {} label columns; row sums within [{:.12}, {:.12}]",
        parsed.rows.len(),
        parsed.labels.len(),
        row_sums.iter().copied().fold(f64::INFINITY, f64::min),
        row_sums.iter().copied().fold(0.0, f64::max)
    );
    Ok(())
}
