use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    fringe_observables, qudit_fringe_observables, ConfigError, FringeObservables, InterferometerConfig,
    PreparationSetting,
};
use crate::quantum::{QubitState, QuditPureState, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid interferometer config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// What is sent into the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FringeSource {
    Qubit(QubitState),
    /// Interferometer on the `{subspace, subspace+1}` levels of a pure qudit.
    Qudit { state: QuditPureState, subspace: usize },
}

impl FringeSource {
    pub fn observables(&self) -> Result<FringeObservables, StateError> {
        match self {
            FringeSource::Qubit(s) => Ok(fringe_observables(s)),
            FringeSource::Qudit { state, subspace } => qudit_fringe_observables(state, *subspace),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferogramMeta {
    pub config: InterferometerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FringeSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<PreparationSetting>,
    #[serde(default)]
    pub image_index: usize,
}

/// A recorded image: `rows × width` non-negative counts, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    width: usize,
    rows: usize,
    pixels: Vec<f64>,
    pub meta: InterferogramMeta,
}

impl Interferogram {
    /// Wraps raw pixel data; returns `None` when the shape is inconsistent or
    /// a pixel is negative or non-finite.
    pub fn from_pixels(width: usize, rows: usize, pixels: Vec<f64>, meta: InterferogramMeta) -> Option<Self> {
        if width == 0 || rows == 0 || pixels.len() != width * rows {
            return None;
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return None;
        }
        Some(Self { width, rows, pixels, meta })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pixels[i * self.width..(i + 1) * self.width]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.pixels.chunks_exact(self.width)
    }
}

/// Expected (noise-free) row profile for the given observables.
pub(crate) fn mean_profile(obs: &FringeObservables, cfg: &InterferometerConfig) -> Vec<f64> {
    let amplitude = cfg.peak_counts * obs.avg_intensity / 0.5;
    let visibility = obs.visibility * (1.0 - cfg.bs_imbalance);
    let phase = obs.phase_shift + cfg.phase_offset;
    (0..cfg.image_width)
        .map(|x| {
            let x = x as f64;
            cfg.background + amplitude * cfg.envelope(x) * (1.0 + visibility * (cfg.fringe_wavenumber * x + phase).cos())
        })
        .collect()
}

/// Synthesises image number `image_index` of an acquisition.
///
/// Each image draws from its own ChaCha stream keyed by `(rng_seed,
/// image_index)`, so images are reproducible individually and in any order.
pub fn synthesize(
    source: &FringeSource,
    cfg: &InterferometerConfig,
    image_index: usize,
) -> Result<Interferogram, SynthError> {
    cfg.validate()?;
    let obs = source.observables()?;
    let profile = mean_profile(&obs, cfg);
    let noisy = cfg.shot_noise || cfg.read_noise_sigma > 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(image_index as u64);
    let read = (cfg.read_noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.read_noise_sigma).expect("validated sigma"));

    let mut pixels = Vec::with_capacity(cfg.n_slices * cfg.image_width);
    for _ in 0..cfg.n_slices {
        for &mean in &profile {
            let mut v = if cfg.shot_noise { sample_poisson(mean, &mut rng) } else { mean };
            if let Some(read) = &read {
                v += read.sample(&mut rng);
            }
            pixels.push(if noisy { v.round().max(0.0) } else { v.max(0.0) });
        }
    }
    Ok(Interferogram {
        width: cfg.image_width,
        rows: cfg.n_slices,
        pixels,
        meta: InterferogramMeta {
            config: cfg.clone(),
            source: Some(source.clone()),
            preparation: None,
            image_index,
        },
    })
}

/// All `cfg.n_images` images of one acquisition.
pub fn synthesize_set(source: &FringeSource, cfg: &InterferometerConfig) -> Result<Vec<Interferogram>, SynthError> {
    (0..cfg.n_images).map(|i| synthesize(source, cfg, i)).collect()
}

fn sample_poisson<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean)
}
