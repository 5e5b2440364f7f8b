//! Fits a shifted travel-time model from transit samples and evaluates the
//! spatio-temporal likelihood with and without truncation renormalization.

use camnet::spatiotemporal::{fit_travel_model, travel_time_likelihood};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> camnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.6, 0.05).expect("valid normal");
    let samples: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
    let m = fit_travel_model(&samples)?;
    println!(
        "fitted min {:.3}, mean {:.3}, var {:.5}, admissible mass {:.4}",
        m.min_travel,
        m.mean_travel,
        m.travel_var,
        m.admissible_mass()
    );
    for dt in [0.3, 0.5, 0.6, 0.7, 0.9] {
        let lik = travel_time_likelihood(&m, 10.0 + dt, 10.0)?;
        let renorm = m.log_density(10.0 + dt, 10.0, true).exp();
        println!("transit {dt:.1}: density {lik:.4}, renormalized {renorm:.4}");
    }
    Ok(())
}
