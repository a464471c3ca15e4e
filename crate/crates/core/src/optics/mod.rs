//! Forward model: waveplate preparation, the two-path intensity law and
//! synthetic interferogram images.

mod config;
mod intensity;
mod prepare;
mod synth;

pub use config::{ConfigError, InterferometerConfig};
pub use intensity::{
    fringe_observables, intensity_curve, qudit_fringe_observables, qudit_intensity_curve,
    FringeObservables,
};
pub use prepare::{prepare_jones_vector, prepare_qubit, PreparationSetting};
pub use synth::{synthesize, synthesize_set, FringeSource, Interferogram, InterferogramMeta, SynthError};
