//! Readout protocol accounting: path-sum error model and its inversion,
//! fidelity and SNR, measurement-time speed-up, and an end-to-end Monte Carlo.

pub mod error_model;
pub mod mc;
pub mod snr;
pub mod speedup;

pub use error_model::{
    forward_error_model, invert_error_model, rabi_contrast, MeasuredErrors, ProtocolErrorBudget,
    ProtocolInit,
};
pub use mc::{end_to_end_mc, McReport};
pub use snr::{conventional_snr, fidelity_and_snr, FidelityReport};
pub use speedup::{
    repetitions_for_unit_snr, speedup_between, speedup_curve, MethodTiming, SensingTimingModel,
    SpeedupPoint,
};
