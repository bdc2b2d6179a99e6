//! Band-pass filtering, epoch extraction, decimation and epoch averaging.

mod container;
mod design;
mod epochs;
mod filter;

pub use container::{read_epochs, write_epochs, EPB_MAGIC, EPB_VERSION};
pub use design::{design_cheby1_bandpass, Biquad, FilterDesign, IirFilter};
pub use epochs::{
    average_epochs, decimate_epoch, extract_epochs, extract_epochs_with, Epoch, EpochCharacter,
    EpochSet, FeatureVector, FilterMode, DEFAULT_DECIMATION_STRIDE, FEATURE_SAMPLES,
};
pub use filter::{filter_in_place, filter_signal, filter_zero_phase};

pub const DEFAULT_RIPPLE_DB: f64 = 0.5;
pub const DEFAULT_LOW_HZ: f64 = 0.1;
pub const DEFAULT_HIGH_HZ: f64 = 10.0;
pub const DEFAULT_ORDER: usize = 4;
