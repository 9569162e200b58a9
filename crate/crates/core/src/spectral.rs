//! Eigenvector estimator: entrywise phases of a leading eigenvector of `C`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::phase::PhaseVector;
use crate::scalar::{dot_h, norm2, Cx, Scalar};

/// Seed of the fixed pseudo-random starting vector of the power iteration.
const START_SEED: u64 = 0x5eed_0fc0_ffee;

/// Relative size below which an eigenvector entry counts as zero.
pub const ZERO_ENTRY_REL: f64 = 1e-14;

/// `|a^H u|` at or below this makes the fallback vector unusable.
pub const DEGENERATE_FALLBACK: f64 = 1e-14;

/// Leading eigenpair of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EigResult<T: Scalar> {
    /// Unit ℓ₂-norm eigenvector, stored as `[re, im]` pairs.
    pub vector: Vec<[T; 2]>,
    pub value: T,
    pub iterations: usize,
    /// `‖Cu − λu‖₂`
    pub residual: T,
}

impl<T: Scalar> EigResult<T> {
    pub fn vector_cx(&self) -> Vec<Cx<T>> {
        self.vector
            .iter()
            .map(|&[re, im]| Complex::new(re, im))
            .collect()
    }
}

/// Default iteration cap `50n + 1000`.
pub fn default_max_iter(n: usize) -> usize {
    50 * n + 1000
}

fn start_vector<T: Scalar>(n: usize) -> Vec<Cx<T>> {
    let mut rng = SplitMix64::seed_from_u64(START_SEED);
    let v: Vec<Cx<T>> = (0..n)
        .map(|_| {
            Complex::new(
                T::of(rng.random::<f64>() - 0.5),
                T::of(rng.random::<f64>() - 0.5),
            )
        })
        .collect();
    let nv = norm2(&v);
    v.into_iter().map(|x| x / nv).collect()
}

/// Eigenvector of the algebraically largest eigenvalue of `C`.
///
/// Power iteration on `C + sI` with `s = ‖C‖_F (1 + 10⁻³)`, which makes every
/// shifted eigenvalue nonnegative so the target is also largest in magnitude.
/// Converged once `‖Cu − λu‖₂ ≤ tol·‖C‖_F` with `λ` the Rayleigh quotient.
pub fn leading_eigenvector<T: Scalar>(
    c: &HermitianMatrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<EigResult<T>> {
    let n = c.n();
    if n == 0 {
        return Err(Error::Empty);
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidConfig(
            "eigen tolerance must be positive".into(),
        ));
    }
    let fro = c.frobenius_norm();
    let shift = fro * T::of(1.0 + 1e-3);
    let target = tol * fro;
    let mut x = start_vector::<T>(n);
    let mut best: Option<(T, Vec<Cx<T>>)> = None;

    for it in 0..=max_iter {
        let cx = c.matvec_unchecked(&x);
        let lam = dot_h(&x, &cx).re;
        let resid = norm2(
            &cx.iter()
                .zip(&x)
                .map(|(a, b)| a - b * lam)
                .collect::<Vec<_>>(),
        );
        if !resid.is_finite() {
            return Err(Error::NonFinite { iteration: it });
        }
        if resid <= target {
            return Ok(EigResult {
                vector: x.iter().map(|v| [v.re, v.im]).collect(),
                value: lam,
                iterations: it,
                residual: resid,
            });
        }
        if best.as_ref().is_none_or(|(r, _)| resid < *r) {
            best = Some((resid, x.clone()));
        }
        let y: Vec<Cx<T>> = cx.iter().zip(&x).map(|(a, b)| a + b * shift).collect();
        let ny = norm2(&y);
        x = y.into_iter().map(|v| v / ny).collect();
    }
    let (residual, best) = best.expect("at least one iterate");
    Err(Error::EigenNoConvergence {
        iterations: max_iter,
        residual: residual.to_f64_lossy(),
        best: best
            .iter()
            .map(|v| (v.re.to_f64_lossy(), v.im.to_f64_lossy()))
            .collect(),
    })
}

/// Phases of `u`, with entries `|u_j| ≤ 10⁻¹⁴‖u‖_∞` replaced by
/// `a^H u / |a^H u|`. Returns the indices that took the fallback branch.
pub fn phases_from_eigenvector<T: Scalar>(
    u: &[Cx<T>],
    a: &[Cx<T>],
) -> Result<(PhaseVector<T>, Vec<usize>)> {
    crate::error::check_dims(u.len(), a.len())?;
    let ahu = dot_h(a, u);
    if ahu.norm() <= T::of(DEGENERATE_FALLBACK) {
        return Err(Error::DegenerateFallback(ahu.norm().to_f64_lossy()));
    }
    let fallback = ahu / ahu.norm();
    let umax = u.iter().map(|v| v.norm()).fold(T::zero(), T::max);
    let thresh = T::of(ZERO_ENTRY_REL) * umax;
    let mut used = Vec::new();
    let phases = u
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let m = v.norm();
            if m <= thresh {
                used.push(j);
                fallback
            } else {
                v / m
            }
        })
        .collect();
    Ok((PhaseVector::new(phases)?, used))
}

/// `v_C` for a given fallback vector `a`.
pub fn eigenvector_estimator<T: Scalar>(
    c: &HermitianMatrix<T>,
    a: &[Cx<T>],
    tol: T,
    max_iter: usize,
) -> Result<PhaseVector<T>> {
    let eig = leading_eigenvector(c, tol, max_iter)?;
    let (phases, used) = phases_from_eigenvector(&eig.vector_cx(), a)?;
    if !used.is_empty() {
        log::info!("eigenvector estimator used the fallback phase at entries {used:?}");
    }
    Ok(phases)
}

/// Settings for [`spectral_init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpectralConfig<T: Scalar> {
    pub tol: T,
    /// `None` means `50n + 1000`.
    pub max_iter: Option<usize>,
    /// Seed of the random unit fallback vector tried when `a = 𝟏` is degenerate.
    pub retry_seed: u64,
}

impl<T: Scalar> Default for SpectralConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-12).max(T::epsilon() * T::of(64.0)),
            max_iter: None,
            retry_seed: 0x0a11_0ce5,
        }
    }
}

/// Which fallback vector produced the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackVector {
    Ones,
    RandomUnit { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate<T: Scalar> {
    pub phases: PhaseVector<T>,
    pub eig: EigResult<T>,
    pub fallback_entries: Vec<usize>,
    pub fallback_vector: FallbackVector,
}

/// `v_C` with `a = 𝟏`, retrying once with a seeded random unit vector if
/// `a^H u` vanishes.
pub fn spectral_init<T: Scalar>(
    c: &HermitianMatrix<T>,
    cfg: &SpectralConfig<T>,
) -> Result<SpectralEstimate<T>> {
    let n = c.n();
    let eig = leading_eigenvector(
        c,
        cfg.tol,
        cfg.max_iter.unwrap_or_else(|| default_max_iter(n)),
    )?;
    let (phases, used, which) = phases_with_retry(&eig.vector_cx(), cfg.retry_seed)?;
    if !used.is_empty() {
        log::info!("eigenvector estimator used the fallback phase at entries {used:?}");
    }
    Ok(SpectralEstimate {
        phases,
        eig,
        fallback_entries: used,
        fallback_vector: which,
    })
}

fn phases_with_retry<T: Scalar>(
    u: &[Cx<T>],
    retry_seed: u64,
) -> Result<(PhaseVector<T>, Vec<usize>, FallbackVector)> {
    let ones = vec![Complex::new(T::one(), T::zero()); u.len()];
    match phases_from_eigenvector(u, &ones) {
        Ok((p, used)) => Ok((p, used, FallbackVector::Ones)),
        Err(Error::DegenerateFallback(_)) => {
            let mut rng = SplitMix64::seed_from_u64(retry_seed);
            let a: Vec<Cx<T>> = (0..u.len())
                .map(|_| crate::scalar::unit(T::of(rng.random::<f64>() * std::f64::consts::TAU)))
                .collect();
            let (p, used) = phases_from_eigenvector(u, &a)?;
            Ok((p, used, FallbackVector::RandomUnit { seed: retry_seed }))
        }
        Err(e) => Err(e),
    }
}
