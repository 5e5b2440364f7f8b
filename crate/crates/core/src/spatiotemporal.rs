//! Spatio-temporal likelihood: truncated-Gaussian travel time times a
//! border-transition factor, and its q-order path mixture.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::observation::SpatioTemporalObs;
use crate::topology::{Border, CameraId, StochasticMatrix, Topology};

/// Lower bound on fitted travel-time variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeModel {
    pub min_travel: f64,
    pub mean_travel: f64,
    pub travel_var: f64,
}

impl TravelTimeModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.travel_var > 0.0) {
            return Err(Error::Config(format!("travel variance must be > 0, got {}", self.travel_var)));
        }
        Ok(())
    }

    /// Log density of arriving at `t_en` after leaving at `t_le`; `-inf` on
    /// the truncated region `t_en <= t_le + min_travel`.
    pub fn log_density(&self, t_en: f64, t_le: f64, renormalize: bool) -> f64 {
        let gap = t_en - t_le;
        if gap <= self.min_travel {
            return f64::NEG_INFINITY;
        }
        let r = self.travel_var;
        let z = gap - self.mean_travel;
        let log_n = -0.5 * (2.0 * std::f64::consts::PI * r).ln() - z * z / (2.0 * r);
        if renormalize {
            log_n - self.admissible_mass().ln()
        } else {
            log_n
        }
    }

    /// Mass of the untruncated Gaussian above `min_travel`.
    pub fn admissible_mass(&self) -> f64 {
        let n = Normal::new(self.mean_travel, self.travel_var.sqrt()).expect("positive variance");
        1.0 - n.cdf(self.min_travel)
    }
}

/// Literal truncated travel-time density (no renormalization of the tail).
pub fn travel_time_likelihood(m: &TravelTimeModel, t_en: f64, t_le: f64) -> Result<f64> {
    m.validate()?;
    Ok(m.log_density(t_en, t_le, false).exp())
}

pub fn border_likelihood(matrix: &StochasticMatrix, e_le: Border, e_en: Border) -> Result<f64> {
    if e_le.0 >= matrix.nrows() {
        return Err(Error::BorderOutOfRange { what: "exit border", border: e_le.0, size: matrix.nrows() });
    }
    if e_en.0 >= matrix.ncols() {
        return Err(Error::BorderOutOfRange { what: "entry border", border: e_en.0, size: matrix.ncols() });
    }
    Ok(matrix.get(e_le.0, e_en.0).expect("checked"))
}

/// Zero-order likelihood of `cur` at `cur_cam` directly following `prev` at
/// `prev_cam`; 0 when the cameras share no edge.
pub fn st_likelihood_order0(
    topo: &Topology,
    cur_cam: CameraId,
    cur: &SpatioTemporalObs,
    prev_cam: CameraId,
    prev: &SpatioTemporalObs,
) -> Result<f64> {
    let Some(edge) = topo.edge(prev_cam, cur_cam) else {
        return Ok(0.0);
    };
    let time = travel_time_likelihood(&edge.travel_model(), cur.t_en, prev.t_le)?;
    if time == 0.0 {
        return Ok(0.0);
    }
    Ok(time * border_likelihood(&edge.border_matrix, prev.e_le, cur.e_en)?)
}

/// Path mixture over all simple paths with at most `q` intermediate cameras.
/// Computed from scratch on each call; [`SpatioTemporalModel`] caches the
/// mixture components.
pub fn st_likelihood_orderq(
    topo: &Topology,
    cur_cam: CameraId,
    cur: &SpatioTemporalObs,
    prev_cam: CameraId,
    prev: &SpatioTemporalObs,
    q: usize,
) -> Result<f64> {
    let paths = topo.enumerate_paths(prev_cam, cur_cam, q);
    if paths.is_empty() {
        return Ok(0.0);
    }
    let weights = mixture_weights(topo, &paths)?;
    let mut total = 0.0;
    for (path, w) in paths.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let time = travel_time_likelihood(&topo.path_travel_model(path)?, cur.t_en, prev.t_le)?;
        if time == 0.0 {
            continue;
        }
        let border = border_likelihood(&topo.chain_border_matrix(path)?, prev.e_le, cur.e_en)?;
        total += w * time * border;
    }
    Ok(total)
}

/// Path weights, falling back to uniform weights when every path has zero
/// transition mass (keeps an explicitly declared edge usable).
fn mixture_weights(topo: &Topology, paths: &[crate::topology::Path]) -> Result<Vec<f64>> {
    match topo.path_weights(paths) {
        Ok(w) => Ok(w),
        Err(Error::InconsistentTopology(msg)) => {
            log::warn!("{msg}; using uniform path weights");
            Ok(vec![1.0 / paths.len() as f64; paths.len()])
        }
        Err(e) => Err(e),
    }
}

/// Fits `(Δ, δ, R)` to observed transit durations of one directed edge.
pub fn fit_travel_model(samples: &[f64]) -> Result<TravelTimeModel> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "insufficient training data: {} transit sample(s), need 2",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let var = var.max(VARIANCE_FLOOR);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TravelTimeModel { min_travel: (min - 3.0 * var.sqrt()).max(0.0), mean_travel: mean, travel_var: var })
}

#[derive(Clone, Debug)]
struct MixtureComponent {
    log_weight: f64,
    travel: TravelTimeModel,
    border: StochasticMatrix,
}

/// Precomputed q-order mixtures for every ordered camera pair.
#[derive(Clone, Debug)]
pub struct SpatioTemporalModel {
    order: usize,
    renormalize: bool,
    mixtures: BTreeMap<(CameraId, CameraId), Vec<MixtureComponent>>,
}

impl SpatioTemporalModel {
    pub fn new(topo: &Topology, order: usize, renormalize: bool) -> Result<Self> {
        let mut mixtures = BTreeMap::new();
        for src in topo.camera_ids() {
            for dst in topo.camera_ids() {
                let paths = topo.enumerate_paths(src, dst, order);
                if paths.is_empty() {
                    continue;
                }
                let weights = mixture_weights(topo, &paths)?;
                let mut comps = Vec::with_capacity(paths.len());
                for (p, w) in paths.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    comps.push(MixtureComponent {
                        log_weight: w.ln(),
                        travel: topo.path_travel_model(p)?,
                        border: topo.chain_border_matrix(p)?,
                    });
                }
                mixtures.insert((src, dst), comps);
            }
        }
        Ok(Self { order, renormalize, mixtures })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `ln lambda_st` of `cur` at `cur_cam` given predecessor `prev` at `prev_cam`.
    pub fn log_likelihood(
        &self,
        cur_cam: CameraId,
        cur: &SpatioTemporalObs,
        prev_cam: CameraId,
        prev: &SpatioTemporalObs,
    ) -> Result<f64> {
        let Some(comps) = self.mixtures.get(&(prev_cam, cur_cam)) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut terms = Vec::with_capacity(comps.len());
        for c in comps {
            let lt = c.travel.log_density(cur.t_en, prev.t_le, self.renormalize);
            if lt == f64::NEG_INFINITY {
                continue;
            }
            let b = border_likelihood(&c.border, prev.e_le, cur.e_en)?;
            if b == 0.0 {
                continue;
            }
            terms.push(c.log_weight + lt + b.ln());
        }
        Ok(log_sum_exp(&terms))
    }
}

/// `ln(sum(exp(x)))`, `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
