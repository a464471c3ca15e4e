use serde::{Deserialize, Serialize};

/// Parameters of the Gaussian-weighted cosine fringe model
/// `B + A·exp(−c(x − m)²)·(1 + v·cos(k·x + φ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeParams {
    /// `B`, counts.
    pub background: f64,
    /// `A`, counts.
    pub amplitude: f64,
    /// `c`, 1/px².
    pub envelope_rate: f64,
    /// `m`, px.
    pub envelope_center: f64,
    /// `v`
    pub visibility: f64,
    /// `k`, rad/px.
    pub wavenumber: f64,
    /// `φ`, rad, referred to pixel 0.
    pub phase: f64,
}

pub const PARAM_NAMES: [&str; 7] = [
    "background",
    "amplitude",
    "envelope_rate",
    "envelope_center",
    "visibility",
    "wavenumber",
    "phase",
];

/// Index of each parameter in [`FringeParams::to_array`].
pub mod index {
    pub const BACKGROUND: usize = 0;
    pub const AMPLITUDE: usize = 1;
    pub const RATE: usize = 2;
    pub const CENTER: usize = 3;
    pub const VISIBILITY: usize = 4;
    pub const WAVENUMBER: usize = 5;
    pub const PHASE: usize = 6;
}

impl FringeParams {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.background,
            self.amplitude,
            self.envelope_rate,
            self.envelope_center,
            self.visibility,
            self.wavenumber,
            self.phase,
        ]
    }

    pub fn from_array(p: [f64; 7]) -> Self {
        Self {
            background: p[0],
            amplitude: p[1],
            envelope_rate: p[2],
            envelope_center: p[3],
            visibility: p[4],
            wavenumber: p[5],
            phase: p[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|p| p.is_finite())
    }

    pub fn envelope(&self, x: f64) -> f64 {
        let d = x - self.envelope_center;
        (-self.envelope_rate * d * d).exp()
    }

    /// Model value at pixel `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.background
            + self.amplitude * self.envelope(x) * (1.0 + self.visibility * (self.wavenumber * x + self.phase).cos())
    }

    /// Background-free, phase-averaged mean over pixels `0..width`.
    pub fn mean_intensity(&self, width: usize) -> f64 {
        self.amplitude * (0..width).map(|x| self.envelope(x as f64)).sum::<f64>() / width as f64
    }

    /// Envelope standard deviation `√(1/(2c))`.
    pub fn envelope_sigma(&self) -> f64 {
        (0.5 / self.envelope_rate).sqrt()
    }
}
