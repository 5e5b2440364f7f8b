//! Mean F-measure against the number of deleted detections for first- and
//! second-order neighbourhoods, printed as CSV.

use camnet::evaluation::write_sweep_csv;
use camnet::experiment::{missing_sweep, train_office, SweepSpec};
use camnet::scenario::{office_scenario, office_topology, OFFICE_VISITS};

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    let model = train_office(&topo, 1)?;
    let spec = SweepSpec { trials: 5, ..SweepSpec::default() };
    let rows = missing_sweep(&topo, &model, &spec, |s| office_scenario(&topo, 10, OFFICE_VISITS, s))?;
    write_sweep_csv(&rows, std::io::stdout().lock())
}
