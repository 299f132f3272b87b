use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConvConfig, ConvKind, DispatchError, WorkGroupConfig, LATTICE_VALUES};

#[derive(Debug, Error, PartialEq)]
pub enum TuneError<E> {
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("measurement failed: {0}")]
    Measure(E),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Multi-start coordinate descent from the eight lattice corners.
    #[default]
    Descent,
    /// Every one of the 27 lattice points.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub config: WorkGroupConfig,
    /// Mean latency of the winner over its trials.
    pub estimate: f64,
    /// Distinct lattice points measured.
    pub points_measured: usize,
    pub samples: usize,
}

/// Picks a work group by coordinate descent. See [`select_work_group_with`].
pub fn select_work_group<E>(
    measure: impl FnMut(WorkGroupConfig, &ConvConfig) -> Result<f64, E>,
    cfg: &ConvConfig,
    trials: usize,
) -> Result<TuneOutcome, TuneError<E>> {
    select_work_group_with(measure, cfg, trials, SearchMode::Descent)
}

/// Each lattice point's latency is the mean of `trials` samples, computed
/// once and reused. Descent starts from every corner of `{2,4,8}³`, moves to
/// the best value along one axis at a time and stops when no axis improves.
/// The winner is the lowest estimate among the converged points; equal
/// estimates go to the lexicographically smallest `(x, y, z)`.
pub fn select_work_group_with<E>(
    mut measure: impl FnMut(WorkGroupConfig, &ConvConfig) -> Result<f64, E>,
    cfg: &ConvConfig,
    trials: usize,
    mode: SearchMode,
) -> Result<TuneOutcome, TuneError<E>> {
    if trials == 0 {
        return Err(TuneError::ZeroTrials);
    }
    let mut memo: HashMap<WorkGroupConfig, f64> = HashMap::new();
    let mut estimate = |wg: WorkGroupConfig| -> Result<f64, TuneError<E>> {
        if let Some(&v) = memo.get(&wg) {
            return Ok(v);
        }
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += measure(wg, cfg).map_err(TuneError::Measure)?;
        }
        let mean = sum / trials as f64;
        memo.insert(wg, mean);
        Ok(mean)
    };
    let better = |a: (f64, WorkGroupConfig), b: (f64, WorkGroupConfig)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);

    let candidates = match mode {
        SearchMode::Exhaustive => WorkGroupConfig::lattice(),
        SearchMode::Descent => {
            let (lo, hi) = (LATTICE_VALUES[0], LATTICE_VALUES[2]);
            let mut converged = Vec::new();
            for x in [lo, hi] {
                for y in [lo, hi] {
                    for z in [lo, hi] {
                        let mut at = WorkGroupConfig { x, y, z };
                        let mut cost = estimate(at)?;
                        loop {
                            let mut moved = false;
                            for axis in 0..3 {
                                for v in LATTICE_VALUES {
                                    let mut next = at;
                                    *[&mut next.x, &mut next.y, &mut next.z][axis] = v;
                                    let c = estimate(next)?;
                                    if better((c, next), (cost, at)) {
                                        at = next;
                                        cost = c;
                                        moved = true;
                                    }
                                }
                            }
                            if !moved {
                                break;
                            }
                        }
                        converged.push(at);
                    }
                }
            }
            converged
        }
    };

    let mut best: Option<(f64, WorkGroupConfig)> = None;
    for wg in candidates {
        let c = estimate(wg)?;
        if best.is_none_or(|b| better((c, wg), b)) {
            best = Some((c, wg));
        }
    }
    let (estimate, config) = best.expect("at least one candidate");
    Ok(TuneOutcome { config, estimate, points_measured: memo.len(), samples: memo.len() * trials })
}

/// Synthetic latency bowl `base + (x−ox)² + (y−oy)² + (z−oz)²` with optional
/// uniform multiplicative noise in `[1 − noise, 1 + noise]`. Stands in for
/// on-device timing, which this crate cannot perform.
#[derive(Debug, Clone)]
pub struct SyntheticBowl {
    pub optimum: WorkGroupConfig,
    pub base: f64,
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl SyntheticBowl {
    pub fn new(seed: u64, noise: f64) -> Self {
        SyntheticBowl {
            optimum: WorkGroupConfig { x: 4, y: 8, z: 4 },
            base: 10.0,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn noiseless() -> Self {
        Self::new(0, 0.0)
    }

    /// Cost without noise.
    pub fn true_cost(&self, wg: WorkGroupConfig) -> f64 {
        let d = |a: usize, b: usize| (a as f64 - b as f64).powi(2);
        self.base + d(wg.x, self.optimum.x) + d(wg.y, self.optimum.y) + d(wg.z, self.optimum.z)
    }

    pub fn sample(&mut self, wg: WorkGroupConfig) -> f64 {
        let cost = self.true_cost(wg);
        if self.noise == 0.0 {
            return cost;
        }
        cost * self.rng.gen_range(1.0 - self.noise..=1.0 + self.noise)
    }

    pub fn measure(
        &mut self,
    ) -> impl FnMut(WorkGroupConfig, &ConvConfig) -> Result<f64, std::convert::Infallible> + '_ {
        |wg, _| Ok(self.sample(wg))
    }
}

/// Measured latencies from a CSV table with header `x,y,z,latency_ms`.
/// Repeated rows for one work group are returned in turn, cycling.
#[derive(Debug, Clone, Default)]
pub struct CsvCost {
    samples: HashMap<WorkGroupConfig, Vec<f64>>,
    cursor: HashMap<WorkGroupConfig, usize>,
}

#[derive(Deserialize)]
struct CostRow {
    x: usize,
    y: usize,
    z: usize,
    latency_ms: f64,
}

impl CsvCost {
    pub fn from_reader(r: impl Read) -> Result<Self, DispatchError> {
        let mut samples: HashMap<WorkGroupConfig, Vec<f64>> = HashMap::new();
        for row in csv::Reader::from_reader(r).deserialize::<CostRow>() {
            let row = row.map_err(|e| DispatchError::CostTable(e.to_string()))?;
            let wg = WorkGroupConfig::new(row.x, row.y, row.z)?;
            samples.entry(wg).or_default().push(row.latency_ms);
        }
        Ok(CsvCost { samples, cursor: HashMap::new() })
    }

    pub fn sample(&mut self, wg: WorkGroupConfig) -> Result<f64, DispatchError> {
        let list = self.samples.get(&wg).ok_or(DispatchError::MissingSample { x: wg.x, y: wg.y, z: wg.z })?;
        let i = self.cursor.entry(wg).or_default();
        let v = list[*i % list.len()];
        *i += 1;
        Ok(v)
    }

    pub fn measure(&mut self) -> impl FnMut(WorkGroupConfig, &ConvConfig) -> Result<f64, DispatchError> + '_ {
        |wg, _| self.sample(wg)
    }
}

/// Adreno GPUs with published work-group presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdrenoModel {
    Adreno630,
    Adreno540,
    Adreno510,
    Adreno509,
    /// Adreno 50X and 4XX families.
    Adreno50x4xx,
}

impl AdrenoModel {
    pub const ALL: [AdrenoModel; 5] = [
        AdrenoModel::Adreno630,
        AdrenoModel::Adreno540,
        AdrenoModel::Adreno510,
        AdrenoModel::Adreno509,
        AdrenoModel::Adreno50x4xx,
    ];
}

impl fmt::Display for AdrenoModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AdrenoModel::Adreno630 => "Adreno 630",
            AdrenoModel::Adreno540 => "Adreno 540",
            AdrenoModel::Adreno510 => "Adreno 510",
            AdrenoModel::Adreno509 => "Adreno 509",
            AdrenoModel::Adreno50x4xx => "Adreno 50X/4XX",
        };
        f.pad(s)
    }
}

/// Accepts "630", "Adreno 630", "adreno630", and "50x"/"4xx" style family names.
impl FromStr for AdrenoModel {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, DispatchError> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| !c.is_whitespace() && *c != '-').collect();
        let key = key.strip_prefix("adreno").unwrap_or(&key);
        match key {
            "630" => Ok(AdrenoModel::Adreno630),
            "540" => Ok(AdrenoModel::Adreno540),
            "510" => Ok(AdrenoModel::Adreno510),
            "509" => Ok(AdrenoModel::Adreno509),
            "50x" | "4xx" | "50x/4xx" => Ok(AdrenoModel::Adreno50x4xx),
            k if k.len() == 3
                && (k.starts_with("50") || k.starts_with('4'))
                && k.chars().all(|c| c.is_ascii_digit()) =>
            {
                Ok(AdrenoModel::Adreno50x4xx)
            }
            _ => Err(DispatchError::UnknownModel(s.to_string())),
        }
    }
}

/// Published optimal work group for a GPU model and convolution kind.
pub fn preset_work_group(gpu_model: &str, op_kind: ConvKind) -> Result<WorkGroupConfig, DispatchError> {
    let model: AdrenoModel = gpu_model.parse()?;
    let (x, y, z) = match (model, op_kind) {
        (AdrenoModel::Adreno630, ConvKind::Conv2d) => (4, 8, 4),
        (AdrenoModel::Adreno630, ConvKind::DepthwiseConv) => (4, 4, 8),
        (AdrenoModel::Adreno540, ConvKind::Conv2d) => (8, 2, 2),
        (AdrenoModel::Adreno540, ConvKind::DepthwiseConv) => (8, 8, 2),
        (AdrenoModel::Adreno510, _) => (8, 4, 4),
        (AdrenoModel::Adreno509, ConvKind::Conv2d) => (8, 4, 8),
        (AdrenoModel::Adreno509, ConvKind::DepthwiseConv) => (8, 4, 2),
        (AdrenoModel::Adreno50x4xx, _) => (8, 4, 8),
    };
    Ok(WorkGroupConfig { x, y, z })
}
