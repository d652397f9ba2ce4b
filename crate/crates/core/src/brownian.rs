//! Brownian increments on the fine grid, their coupling to the coarse grid,
//! the iterated-integral proxy that replaces Lévy areas, and the antithetic
//! swap.

use crate::error::{Result, SimError};
use crate::rng::RngStream;

/// One coarse step's worth of Brownian data, stored as the two half-step
/// increments. The coarse increment is always their sum, never sampled on its
/// own: the coarse, fine and antithetic paths must ride the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledIncrements {
    h: f64,
    delta_first: Vec<f64>,
    delta_second: Vec<f64>,
}

impl CoupledIncrements {
    /// Coarse timestep spanned by the two halves.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim_noise(&self) -> usize {
        self.delta_first.len()
    }

    /// Increment over the first half step, N(0, (h/2) I).
    pub fn delta_first(&self) -> &[f64] {
        &self.delta_first
    }

    /// Increment over the second half step.
    pub fn delta_second(&self) -> &[f64] {
        &self.delta_second
    }

    /// The full-step increment, reassembled componentwise.
    pub fn coarse(&self) -> Vec<f64> {
        self.delta_first
            .iter()
            .zip(&self.delta_second)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub(crate) fn coarse_into(&self, out: &mut [f64]) {
        for ((o, a), b) in out
            .iter_mut()
            .zip(&self.delta_first)
            .zip(&self.delta_second)
        {
            *o = a + b;
        }
    }

    /// Assemble increments from explicitly given halves (deterministic
    /// replay and tests).
    pub fn from_halves(h: f64, delta_first: Vec<f64>, delta_second: Vec<f64>) -> Self {
        assert!(h > 0.0, "coarse timestep must be positive");
        assert_eq!(delta_first.len(), delta_second.len());
        Self {
            h,
            delta_first,
            delta_second,
        }
    }

    pub(crate) fn zeros(dim_noise: usize) -> Self {
        Self::from_halves(1.0, vec![0.0; dim_noise], vec![0.0; dim_noise])
    }
}

/// Deterministic stream for the sample at `(seed, level, sample_index)`.
pub fn make_stream(seed: u64, level: u32, sample_index: u64) -> RngStream {
    RngStream::new(seed, level, sample_index)
}

/// Draw the two independent half-step increments for one coarse step of
/// length `h`.
pub fn sample_coupled(
    stream: &mut RngStream,
    dim_noise: usize,
    h: f64,
) -> Result<CoupledIncrements> {
    if !(h > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "coarse timestep must be positive, got {h}"
        )));
    }
    let mut inc = CoupledIncrements {
        h,
        delta_first: vec![0.0; dim_noise],
        delta_second: vec![0.0; dim_noise],
    };
    resample_coupled(stream, h, &mut inc);
    Ok(inc)
}

/// In-place variant used by the hot simulation loops.
pub(crate) fn resample_coupled(stream: &mut RngStream, h: f64, inc: &mut CoupledIncrements) {
    let scale = (0.5 * h).sqrt();
    inc.h = h;
    for d in inc.delta_first.iter_mut() {
        *d = scale * stream.next_standard_normal();
    }
    for d in inc.delta_second.iter_mut() {
        *d = scale * stream.next_standard_normal();
    }
}

/// The same coarse step seen by the antithetic path: half increments
/// exchanged, coarse sum untouched.
pub fn antithetic_view(inc: &CoupledIncrements) -> CoupledIncrements {
    CoupledIncrements {
        h: inc.h,
        delta_first: inc.delta_second.clone(),
        delta_second: inc.delta_first.clone(),
    }
}

/// Symmetric part of the iterated Itô integrals over an interval of length
/// `tau`, computable from the increment alone. Entry (j1, j2) is
/// (dw_j1 dw_j2 - [j1 == j2] tau) / 2; the antisymmetric remainder is the
/// Lévy area the scheme deliberately drops.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaProxy {
    dim: usize,
    entries: Vec<f64>,
}

impl AreaProxy {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j1: usize, j2: usize) -> f64 {
        self.entries[j1 * self.dim + j2]
    }

    pub(crate) fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }
}

/// Build the proxy matrix from an increment over an interval of length `tau`.
pub fn area_proxy(dw: &[f64], tau: f64) -> Result<AreaProxy> {
    if !(tau > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "interval length must be positive, got {tau}"
        )));
    }
    let mut pi = AreaProxy::zeros(dw.len());
    area_proxy_into(dw, tau, &mut pi);
    Ok(pi)
}

pub(crate) fn area_proxy_into(dw: &[f64], tau: f64, pi: &mut AreaProxy) {
    let m = dw.len();
    debug_assert_eq!(pi.dim, m);
    for j1 in 0..m {
        for j2 in 0..m {
            let compensator = if j1 == j2 { tau } else { 0.0 };
            pi.entries[j1 * m + j2] = 0.5 * (dw[j1] * dw[j2] - compensator);
        }
    }
}
