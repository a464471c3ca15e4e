use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("fringe period {period:.3} px is below the 4 px minimum")]
    FringeTooFine { period: f64 },
    #[error("{0} must be finite and positive")]
    NotPositive(&'static str),
    #[error("{0} must be finite and non-negative")]
    Negative(&'static str),
    #[error("image width {0} is below the 16 px minimum")]
    TooNarrow(usize),
    #[error("bs_imbalance {0} outside [0, 0.1]")]
    Imbalance(f64),
}

/// Acquisition geometry and detector model for synthetic interferograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterferometerConfig {
    /// Spatial fringe frequency `k_f`, radians per pixel.
    pub fringe_wavenumber: f64,
    /// Envelope centre `m_f`, pixels.
    pub envelope_center: f64,
    /// Envelope standard deviation, pixels (`c_f = 1/(2σ²)`).
    pub envelope_sigma: f64,
    pub image_width: usize,
    /// Rows per image; each row is fitted as one slice.
    pub n_slices: usize,
    pub n_images: usize,
    /// Expected photon count at the envelope peak for `Ī = 1/2`.
    pub peak_counts: f64,
    /// Additive background `B_f`, counts.
    pub background: f64,
    pub read_noise_sigma: f64,
    /// Fractional visibility loss from polarisation-dependent splitting.
    pub bs_imbalance: f64,
    /// Interferometer phase offset added to every fringe; removed by the
    /// wave-plate calibration run.
    pub phase_offset: f64,
    /// Poisson counting noise on/off.
    pub shot_noise: bool,
    pub rng_seed: u64,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self {
            fringe_wavenumber: TAU / 12.0,
            envelope_center: 128.0,
            envelope_sigma: 48.0,
            image_width: 256,
            n_slices: 100,
            n_images: 5,
            peak_counts: 1e4,
            background: 20.0,
            read_noise_sigma: 3.0,
            bs_imbalance: 0.0,
            phase_offset: 0.0,
            shot_noise: true,
            rng_seed: 0,
        }
    }
}

impl InterferometerConfig {
    /// Same geometry with shot and read noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            shot_noise: false,
            read_noise_sigma: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, name| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::NotPositive(name))
            }
        };
        let non_negative = |v: f64, name| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Negative(name))
            }
        };
        positive(self.fringe_wavenumber, "fringe_wavenumber")?;
        let period = TAU / self.fringe_wavenumber;
        if period < 4.0 {
            return Err(ConfigError::FringeTooFine { period });
        }
        positive(self.envelope_sigma, "envelope_sigma")?;
        if !self.envelope_center.is_finite() {
            return Err(ConfigError::NotPositive("envelope_center"));
        }
        if self.image_width < 16 {
            return Err(ConfigError::TooNarrow(self.image_width));
        }
        if self.n_slices == 0 {
            return Err(ConfigError::NotPositive("n_slices"));
        }
        if self.n_images == 0 {
            return Err(ConfigError::NotPositive("n_images"));
        }
        non_negative(self.peak_counts, "peak_counts")?;
        non_negative(self.background, "background")?;
        non_negative(self.read_noise_sigma, "read_noise_sigma")?;
        if !self.phase_offset.is_finite() {
            return Err(ConfigError::NotPositive("phase_offset"));
        }
        if !(0.0..=0.1).contains(&self.bs_imbalance) {
            return Err(ConfigError::Imbalance(self.bs_imbalance));
        }
        Ok(())
    }

    /// Envelope `exp(-(x - m)²/(2σ²))` at pixel centre `x`.
    pub fn envelope(&self, x: f64) -> f64 {
        let u = (x - self.envelope_center) / self.envelope_sigma;
        (-0.5 * u * u).exp()
    }

    /// Expected background-free mean row intensity of a state with `Ī = 1/2`,
    /// i.e. what an ideal normalisation run would measure.
    pub fn reference_mean_intensity(&self) -> f64 {
        let w = self.image_width;
        self.peak_counts * (0..w).map(|x| self.envelope(x as f64)).sum::<f64>() / w as f64
    }
}
