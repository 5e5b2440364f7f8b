//! Writes the office scenario config, reloads it and generates a trace from
//! its scenario section.

use camnet::config::Config;
use camnet::scenario::generate_trace;

fn main() -> camnet::Result<()> {
    let dir = std::env::temp_dir().join("camnet-config-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("office.toml");
    Config::office().save(&path)?;

    let cfg = Config::load(&path)?;
    let scenario = cfg.scenario()?;
    let spec = scenario.spec(&cfg.topology, scenario.seed)?;
    let generated = generate_trace(&cfg.topology, &spec)?;
    println!(
        "{}: {} cameras, {} objects, {} observations, M {:?}, H {:?}, lambda0 {:e}",
        path.display(),
        cfg.topology.num_cameras(),
        spec.objects.len(),
        generated.trace.len(),
        cfg.inference.memory_depth,
        cfg.inference.space_cap,
        cfg.inference.lambda0
    );
    Ok(())
}
