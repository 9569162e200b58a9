//! Synthetic phase-synchronization instances `C = z*(z*)^H + σW` and the
//! noise statistics that gate every bound check.
//!
//! Random streams: an instance seed `s` seeds a Xoshiro256++ generator through
//! SplitMix64 (`seed_from_u64(s)`). The ground truth is drawn from that
//! generator directly; the Wigner noise is drawn from a copy advanced by one
//! `jump()` (2^128 steps), so the two streams never overlap.

mod file;

pub use file::{
    instance_from_json, instance_to_json, load_instance, save_instance, INSTANCE_FORMAT,
    INSTANCE_FORMAT_VERSION,
};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::eigen::hermitian_eigenvalues;
use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::phase::{norm, Norm, PhaseVector};
use crate::scalar::{unit, Scalar};

/// How the ground-truth phase vector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TruthMode {
    #[default]
    RandomPhases,
    AllOnes,
}

impl std::str::FromStr for TruthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-phases" => Ok(Self::RandomPhases),
            "all-ones" => Ok(Self::AllOnes),
            other => Err(Error::InvalidConfig(format!(
                "unknown truth mode `{other}`"
            ))),
        }
    }
}

fn truth_stream(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn noise_stream(seed: u64) -> Xoshiro256PlusPlus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    rng.jump();
    rng
}

/// Wigner matrix: zero diagonal, i.i.d. standard complex normal entries above
/// the diagonal (real and imaginary parts `N(0, 1/2)`, so `E|W_jl|² = 1`).
pub fn sample_wigner<T: Scalar>(n: usize, seed: u64) -> Result<HermitianMatrix<T>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut rng = noise_stream(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    // draw in row-major upper-triangle order, then mirror
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for _ in 0..n * (n - 1) / 2 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        upper.push(Complex::new(T::of(re * half), T::of(im * half)));
    }
    let mut it = upper.into_iter();
    let mut entries = vec![Complex::new(T::zero(), T::zero()); n * n];
    for j in 0..n {
        for l in (j + 1)..n {
            entries[j * n + l] = it.next().expect("upper triangle count");
        }
    }
    Ok(HermitianMatrix::from_upper(n, |j, l| entries[j * n + l]))
}

pub fn sample_ground_truth<T: Scalar>(
    n: usize,
    seed: u64,
    mode: TruthMode,
) -> Result<PhaseVector<T>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    match mode {
        TruthMode::AllOnes => Ok(PhaseVector::ones(n)),
        TruthMode::RandomPhases => {
            let mut rng = truth_stream(seed);
            let angles: Vec<T> = (0..n)
                .map(|_| T::of(rng.random::<f64>() * std::f64::consts::TAU))
                .collect();
            PhaseVector::new(angles.into_iter().map(unit).collect())
        }
    }
}

/// An immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T: Scalar> {
    pub n: usize,
    pub sigma: T,
    pub seed: u64,
    pub mode: TruthMode,
    pub z_star: PhaseVector<T>,
    pub w: HermitianMatrix<T>,
    pub c: HermitianMatrix<T>,
}

/// Provenance of an instance, carried by traces and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceTag {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub mode: TruthMode,
}

pub fn build_instance<T: Scalar>(
    n: usize,
    sigma: T,
    seed: u64,
    mode: TruthMode,
) -> Result<Instance<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let z_star = sample_ground_truth::<T>(n, seed, mode)?;
    let w = sample_wigner::<T>(n, seed)?;
    let c = assemble(&z_star, sigma, &w);
    Ok(Instance {
        n,
        sigma,
        seed,
        mode,
        z_star,
        w,
        c,
    })
}

/// `z z^H + σW`, entry by entry.
pub(crate) fn assemble<T: Scalar>(
    z: &PhaseVector<T>,
    sigma: T,
    w: &HermitianMatrix<T>,
) -> HermitianMatrix<T> {
    let zs = z.as_slice();
    HermitianMatrix::from_upper(z.len(), |j, l| zs[j] * zs[l].conj() + w[(j, l)] * sigma)
}

impl<T: Scalar> Instance<T> {
    pub fn tag(&self) -> InstanceTag {
        InstanceTag {
            n: self.n,
            sigma: self.sigma.to_f64_lossy(),
            seed: self.seed,
            mode: self.mode,
        }
    }

    /// `Δ = σW`
    pub fn delta(&self) -> HermitianMatrix<T> {
        self.w.scale(self.sigma)
    }

    /// The same noise realization around a globally rotated ground truth
    /// `e^{iθ} z*`.
    pub fn rotated(&self, theta: T) -> Self {
        let z_star = self.z_star.rotated(theta);
        let c = assemble(&z_star, self.sigma, &self.w);
        Self {
            z_star,
            c,
            ..self.clone()
        }
    }
}

/// Which noise-regime hypotheses the realization satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumptions {
    /// `‖Δ‖_op ≤ n/16`
    pub thm1_ok: bool,
    /// `‖Δ‖_op ≤ n^{3/4}/312` and `‖Δz*‖_∞ ≤ n/24`
    pub thm3_ok: bool,
    /// `‖Δ‖_op ≤ n^{2/3}/32768` and `‖Δz*‖_∞ ≤ n/24`
    pub prop_ebcrit_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseStats<T: Scalar> {
    pub n: usize,
    /// `‖Δ‖_op`
    pub delta_op: T,
    /// `‖Δz*‖_∞`
    pub delta_zstar_inf: T,
    pub delta_eig_min: T,
    pub delta_eig_max: T,
    pub assumptions: Assumptions,
}

impl<T: Scalar> NoiseStats<T> {
    /// `λ_min(Δ + (n/α)I)`; with `α = ∞` this is `λ_min(Δ)`.
    pub fn a0(&self, alpha: crate::gpm::StepSize<T>) -> T {
        self.delta_eig_min + alpha.n_over_alpha(self.n)
    }

    /// Strict `α < n/‖Δ‖_op` (always true when `Δ = 0` and `α` is finite).
    pub fn alpha_below_noise_limit(&self, alpha: crate::gpm::StepSize<T>) -> bool {
        match alpha.finite() {
            None => false,
            Some(a) => a * self.delta_op < T::of_usize(self.n),
        }
    }
}

pub fn assumptions_for<T: Scalar>(n: usize, delta_op: T, delta_zstar_inf: T) -> Assumptions {
    let nf = n as f64;
    let op = delta_op.to_f64_lossy();
    let zi = delta_zstar_inf.to_f64_lossy();
    Assumptions {
        thm1_ok: op <= nf / 16.0,
        thm3_ok: op <= nf.powf(0.75) / 312.0 && zi <= nf / 24.0,
        prop_ebcrit_ok: op <= nf.powf(2.0 / 3.0) / 32768.0 && zi <= nf / 24.0,
    }
}

/// `‖Δ‖_op` by a dense eigensolve of `Δ = σW`, and `‖Δz*‖_∞`.
pub fn noise_stats<T: Scalar>(inst: &Instance<T>) -> Result<NoiseStats<T>> {
    let delta = inst.delta();
    let ev = hermitian_eigenvalues(&delta)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    let delta_op = lo.abs().max(hi.abs());
    let dz = delta.matvec(inst.z_star.as_slice())?;
    let delta_zstar_inf = norm(&dz, Norm::Linf);
    let band = inst.sigma * T::of(3.0) * T::of_usize(inst.n).sqrt();
    if inst.n >= 100 && delta_op > band {
        log::warn!(
            "‖Δ‖_op = {delta_op} exceeds the 3σ√n band {band} (n = {}, seed = {})",
            inst.n,
            inst.seed
        );
    }
    Ok(NoiseStats {
        n: inst.n,
        delta_op,
        delta_zstar_inf,
        delta_eig_min: lo,
        delta_eig_max: hi,
        assumptions: assumptions_for(inst.n, delta_op, delta_zstar_inf),
    })
}
