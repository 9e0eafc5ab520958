//! Planar mirror and microcavity optics, and the Gaussian output mode.

mod designs;
mod mode;
mod stackfile;
mod transfer;

pub use designs::{
    top_mirror, MicrocavityDesign, N_ALAS, N_FUSED_SILICA, N_GAAS, N_SIO2_COATING, N_TA2O5,
};
pub use mode::{
    fiber_matching_focal_length, fit_gaussian_mode, gaussian_beam_magnitude, numerical_aperture,
    rayleigh_range, FieldSample, GaussianBeamFit,
};
pub use stackfile::{format_stack, parse_stack};
pub use transfer::{
    cavity_q, kappa_from_q, spectrum, stack_reflectivity, wavelength_grid, write_spectrum_csv, Layer,
    LayerStack, ReflectivityResult, Resonance, Side, SPEED_OF_LIGHT,
};
