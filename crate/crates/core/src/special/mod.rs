//! Numerical substrate for the boundary layer: Airy functions, adaptive ODE
//! integration and bracketed root finding.

mod airy;
mod ode;
mod root;

pub use airy::{airy_ai, airy_ai_prime, airy_first_max, airy_log_derivative, AIRY_FIRST_MAX};
pub use ode::{integrate_fixed, integrate_ode, integrate_ode_at, OdeOptions, Trajectory};
pub use root::{find_root, RootBracket};
