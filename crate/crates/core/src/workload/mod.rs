//! Hourly live-video workloads: a seeded synthetic generator and CSV
//! ingestion.

mod geo;
mod ingest;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::model::{DemandMatrix, LiveVideo, ModelError, Quality, RegionId, SlotIndex, VideoId, VideoMeta};

pub use geo::{classify_bitrate, haversine_km, map_to_region, RegionCatalog, RegionInfo};
pub use ingest::{export_csv, ingest_csv, ingest_trace_csv, read_workload, write_workload};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("region catalog is empty")]
    EmptyCatalog,
    #[error("duplicate region name {0:?}")]
    DuplicateRegion(String),
    #[error("invalid coordinates ({lat}, {lon})")]
    BadCoordinates { lat: f64, lon: f64 },
    #[error("invalid frame size {width}x{height}")]
    BadDimensions { width: u32, height: u32 },
    #[error("invalid workload config: {0}")]
    BadConfig(String),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Videos of every slot of a horizon, indexed from slot 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Workload {
    pub n_regions: usize,
    pub slots: Vec<Vec<LiveVideo>>,
}

impl Workload {
    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, t: SlotIndex) -> &[LiveVideo] {
        self.slots.get(t.0 as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn videos(&self) -> impl Iterator<Item = &LiveVideo> {
        self.slots.iter().flatten()
    }

    pub fn video_count(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }
}

/// Default hourly video arrivals, starting at midnight.
pub const DEFAULT_PROFILE: [f64; 24] = [
    18.0, 14.0, 11.0, 9.0, 8.0, 9.0, 12.0, 17.0, 22.0, 26.0, 29.0, 31.0, 33.0, 34.0, 35.0, 36.0, 38.0, 41.0, 44.0,
    46.0, 43.0, 37.0, 29.0, 22.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub horizon: usize,
    /// Expected videos per hour of day, repeated every 24 slots.
    pub videos_per_hour: [f64; 24],
    /// Mean viewers per video; a slot carries `videos * mean_viewers`.
    pub mean_viewers: f64,
    /// Rank-popularity exponent within a slot.
    pub zipf_exponent: f64,
    pub broadcaster_weights: Vec<f64>,
    pub viewer_weights: Vec<f64>,
    /// Probability that a viewer sits in the broadcaster's region.
    pub locality: f64,
    /// Requested-quality mix per viewer region, 240p to 720p.
    pub quality_mix: Vec<[f64; 4]>,
    /// Original-quality mix of broadcasts, 240p to 720p.
    pub original_quality_mix: [f64; 4],
    pub seed: u64,
}

impl WorkloadConfig {
    /// Ten-region defaults matching [`crate::defaults`].
    pub fn default_for(n_regions: usize) -> Self {
        let base = [0.14, 0.12, 0.08, 0.12, 0.08, 0.08, 0.06, 0.10, 0.08, 0.14];
        let weights: Vec<f64> = (0..n_regions).map(|i| base[i % base.len()]).collect();
        let mix = |i: usize| match i % 10 {
            3 | 6 | 9 => [0.30, 0.35, 0.20, 0.15],
            7 | 8 => [0.15, 0.25, 0.30, 0.30],
            _ => [0.10, 0.25, 0.30, 0.35],
        };
        Self {
            horizon: 24 * 7,
            videos_per_hour: DEFAULT_PROFILE,
            mean_viewers: 8.0,
            zipf_exponent: 1.0,
            broadcaster_weights: weights.clone(),
            viewer_weights: weights,
            locality: 0.6,
            quality_mix: (0..n_regions).map(mix).collect(),
            original_quality_mix: [0.10, 0.25, 0.30, 0.35],
            seed: 1,
        }
    }

    pub fn n_regions(&self) -> usize {
        self.broadcaster_weights.len()
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::BadConfig(m.to_string()));
        let n = self.n_regions();
        if n == 0 || self.viewer_weights.len() != n || self.quality_mix.len() != n {
            return bad("region weight vectors and quality mixes must share one non-zero length");
        }
        let all_weights = self
            .broadcaster_weights
            .iter()
            .chain(&self.viewer_weights)
            .chain(self.quality_mix.iter().flatten())
            .chain(&self.original_quality_mix)
            .chain(&self.videos_per_hour);
        if all_weights.clone().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("weights and profile values must be finite and non-negative");
        }
        let positive = |ws: &[f64]| ws.iter().sum::<f64>() > 0.0;
        if !positive(&self.broadcaster_weights)
            || !positive(&self.viewer_weights)
            || !positive(&self.original_quality_mix)
            || !self.quality_mix.iter().all(|m| positive(m))
        {
            return bad("every weight vector needs positive mass");
        }
        if !(0.0..=1.0).contains(&self.locality) {
            return bad("locality must be in [0, 1]");
        }
        if !(self.mean_viewers >= 0.0) || !(self.zipf_exponent >= 0.0) {
            return bad("mean_viewers and zipf_exponent must be non-negative");
        }
        Ok(())
    }
}

/// Splits `total` into `k` integer shares proportional to `weights` with
/// largest-remainder rounding (ties to the lower index).
pub(crate) fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let mut left = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Rank-`k` popularity weight `k^-s`, `k` from 1.
pub fn zipf_weights(count: usize, exponent: f64) -> Vec<f64> {
    (1..=count).map(|k| (k as f64).powf(-exponent)).collect()
}

/// Synthetic hourly workload. Pure function of `cfg`.
pub fn generate(cfg: &WorkloadConfig) -> Result<Workload, WorkloadError> {
    cfg.validate()?;
    let n = cfg.n_regions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let broadcaster = WeightedIndex::new(&cfg.broadcaster_weights).map_err(|e| WorkloadError::BadConfig(e.to_string()))?;
    let viewer = WeightedIndex::new(&cfg.viewer_weights).map_err(|e| WorkloadError::BadConfig(e.to_string()))?;
    let original = WeightedIndex::new(cfg.original_quality_mix).map_err(|e| WorkloadError::BadConfig(e.to_string()))?;
    let requested: Vec<WeightedIndex<f64>> = cfg
        .quality_mix
        .iter()
        .map(|m| WeightedIndex::new(m).map_err(|e| WorkloadError::BadConfig(e.to_string())))
        .collect::<Result<_, _>>()?;

    let mut next_id = 0u64;
    let mut slots = Vec::with_capacity(cfg.horizon);
    for t in 0..cfg.horizon {
        let m = cfg.videos_per_hour[t % 24].round() as usize;
        // every video gets one viewer, the rest follows rank popularity
        let total = ((m as f64 * cfg.mean_viewers).round() as u64).max(m as u64);
        let mut shares = apportion(total - m as u64, &zipf_weights(m, cfg.zipf_exponent));
        shares.iter_mut().for_each(|s| *s += 1);
        shares.shuffle(&mut rng);

        let mut videos = Vec::with_capacity(m);
        for &viewers in &shares {
            let rb = RegionId(broadcaster.sample(&mut rng));
            let qb = Quality::ALL[original.sample(&mut rng)];
            let mut demand = DemandMatrix::new();
            for _ in 0..viewers {
                let w = if rand::Rng::gen_bool(&mut rng, cfg.locality) {
                    rb
                } else {
                    RegionId(viewer.sample(&mut rng))
                };
                let q = Quality::ALL[requested[w.0].sample(&mut rng)].min(qb);
                demand.add(w, q, 1);
            }
            let meta = VideoMeta {
                id: VideoId(next_id),
                slot: SlotIndex(t as u32),
                broadcast_region: rb,
                original_quality: qb,
            };
            next_id += 1;
            videos.push(LiveVideo::new(meta, demand, n)?);
        }
        slots.push(videos);
    }
    Ok(Workload { n_regions: n, slots })
}

/// Noisy diurnal series: `profile[t % 24] * (1 + noise * z)` with standard
/// normal `z`, clamped at zero.
pub fn diurnal_series(profile: &[f64; 24], hours: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..hours)
        .map(|t| (profile[t % 24] * (1.0 + noise * normal.sample(&mut rng))).max(0.0))
        .collect()
}
