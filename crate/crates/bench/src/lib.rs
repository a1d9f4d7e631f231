//! Shared fixtures for the criterion benches.

use commprof::kernels::KernelParams;

/// Kripke-like per-rank sizing used across benches.
pub fn kripke_params() -> KernelParams {
    KernelParams::new([16, 32, 32])
}
