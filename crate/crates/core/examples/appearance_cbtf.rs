//! Learns a cumulative brightness transfer between two cameras from matched
//! histograms and shows how it closes the appearance gap.

use camnet::appearance::{learn_transfer, mean_l1, AppearanceModel};
use camnet::scenario::{bump_histogram, distort};
use camnet::topology::{CameraId, SiteCondition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> camnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let site_a = SiteCondition { offsets: vec![0, 0, 0], noise: 0.0003, ..Default::default() };
    let site_b = SiteCondition { offsets: vec![-4, 2, 3], noise: 0.0003, ..Default::default() };

    let mut pairs = Vec::new();
    for i in 0..20 {
        let c = 12.0 + 2.0 * i as f64;
        let base = bump_histogram(3, 64, &[c, 63.0 - c, 32.0], 10.0)?;
        pairs.push((distort(&base, &site_a, &mut rng)?, distort(&base, &site_b, &mut rng)?));
    }
    let (a_to_b, b_to_a) = learn_transfer(&pairs)?;
    println!("monotone: {} / {}", a_to_b.is_monotone(), b_to_a.is_monotone());

    let base = bump_histogram(3, 64, &[28.0, 22.0, 38.0], 12.0)?;
    let (ha, hb) = (distort(&base, &site_a, &mut rng)?, distort(&base, &site_b, &mut rng)?);
    println!("raw mean L1 between sites:    {:.4}", mean_l1(&ha, &hb));
    println!("after mapping B's view into A: {:.4}", mean_l1(&ha, &b_to_a.apply(&hb)?));

    let mut model = AppearanceModel::new(20.0, 2e-5)?;
    model.insert_transfer(CameraId(1), CameraId(0), b_to_a)?;
    model.insert_transfer(CameraId(0), CameraId(1), a_to_b)?;
    let other = distort(&bump_histogram(3, 64, &[44.0, 14.0, 20.0], 12.0)?, &site_a, &mut rng)?;
    println!("log-likelihood same object:      {:.3}", model.log_likelihood(CameraId(1), &hb, CameraId(0), &ha));
    println!("log-likelihood different object: {:.3}", model.log_likelihood(CameraId(1), &hb, CameraId(0), &other));
    Ok(())
}
