//! First hitting time of the barrier: the smallest scale k+1 at which
//! max_h S_{k+1}(h) exceeds M(k+1). The histogram over k partitions the
//! crossing samples exactly.

use serde::{Deserialize, Serialize};

use super::{RunStamp, Simulator};
use crate::error::{Error, Result};
use crate::predict::{BarrierKind, BarrierSpec};
use crate::sampler::FieldSample;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingReport {
    pub stamp: RunStamp,
    pub barrier: BarrierSpec,
    /// counts[k] = samples whose first crossing is at scale k+1, k = 0..t-1.
    pub counts: Vec<u64>,
    pub crossed: u64,
    pub n: usize,
}

impl HittingReport {
    pub fn csv_header() -> &'static str {
        "k,first_crossing_scale,count"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.counts.iter().enumerate().map(|(k, c)| format!("{k},{},{c}", k + 1)).collect()
    }

    /// Mass in the late-scale bins k > t - t^alpha (the dominant range).
    pub fn late_mass_fraction(&self) -> f64 {
        let t = self.barrier.t as f64;
        let cut = t - t.powf(self.barrier.alpha);
        let late: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as f64) > cut)
            .map(|(_, c)| *c)
            .sum();
        late as f64 / self.crossed.max(1) as f64
    }
}

pub fn first_hitting_histogram(
    sim: &Simulator,
    barrier: &BarrierSpec,
    n: usize,
) -> Result<HittingReport> {
    if barrier.kind != BarrierKind::Upper {
        return Err(Error::Domain("first hitting uses the upper barrier".into()));
    }
    if barrier.t != sim.config.t || barrier.alpha != sim.config.alpha {
        return Err(Error::Domain("barrier scales do not match the simulator config".into()));
    }
    let t = sim.config.t;
    let levels: Vec<f64> = (1..=t).map(|k| barrier.value(k)).collect::<Result<_>>()?;
    let firsts = sim.engine.map_fields(&sim.config, n, &|_, s: &FieldSample| {
        s.scale_maxima()
            .iter()
            .enumerate()
            .find(|(j, &m)| m > levels[*j])
            .map(|(j, _)| j) // first crossing at scale j+1, histogram index k=j
    })?;
    let mut counts = vec![0u64; t as usize];
    let mut crossed = 0u64;
    for first in firsts.into_iter().flatten() {
        counts[first] += 1;
        crossed += 1;
    }
    Ok(HittingReport {
        stamp: RunStamp::new(&sim.config, n, &sim.engine),
        barrier: *barrier,
        counts,
        crossed,
        n,
    })
}
