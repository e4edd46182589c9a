//! Exact solution of the pure linear-cost problem: no-trade band, value function
//! and the boundary diagnostics derived from them.

mod band;
mod pair;
mod value;

pub use band::{
    alpha_coefficients, find_band_zero, half_width_estimate, nt_boundaries, slope_with, theta_minus_at,
    theta_minus_deriv_at, theta_plus_at, theta_plus_deriv_at, Band,
};
pub use pair::{greens_particular, solve_homogeneous, HomogeneousPair, MsComponents};
pub use value::{
    alpha_prime, boundary_shift_response, check_gprime_identity, nt_slope, second_derivative_at_band,
    third_derivative_at_band, third_derivative_closed_form, value_nt_zero, GPrimeCheck, NtValue,
};
