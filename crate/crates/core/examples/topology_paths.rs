//! Neighbourhoods, simple paths and chained border matrices on the office network.

use camnet::scenario::office_topology;
use camnet::topology::CameraId;

fn main() -> camnet::Result<()> {
    let topo = office_topology();
    println!("{} cameras, connected: {}", topo.num_cameras(), topo.is_connected());

    let cam = CameraId(0);
    for q in 0..=2 {
        let n: Vec<_> = topo.neighbors(cam, q)?.into_iter().map(|c| c.0).collect();
        println!("order {q} neighbourhood of camera 0: {n:?}");
    }

    let (src, dst) = (CameraId(0), CameraId(3));
    let paths = topo.enumerate_paths(src, dst, 2);
    let weights = topo.path_weights(&paths)?;
    for (p, w) in paths.iter().zip(&weights) {
        let nodes: Vec<_> = p.nodes.iter().map(|c| c.0).collect();
        let travel = topo.path_travel_model(p)?;
        println!(
            "path {nodes:?}: weight {w:.3}, travel mean {:.3} var {:.4}, min {:.3}",
            travel.mean_travel, travel.travel_var, travel.min_travel
        );
        let m = topo.chain_border_matrix(p)?;
        println!("  chained border matrix rows: {:?}", m.rows());
    }
    Ok(())
}
