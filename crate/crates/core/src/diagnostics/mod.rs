//! Certificates and bound evaluators: the fixed-point residual `ρ`, the
//! criticality matrix `S(z)`, the tangent-space second-order test, the
//! trajectory constants `μ, ν, γ, ζ, ω`, and trace verification.

mod verify;

pub use verify::{
    perturbed_error_bound_check, verify_run, verify_run_with_noise, BoundReport, CheckOutcome,
    PerturbationCheck, RateFit, Verdict, VerifyConfig,
};

use serde::{Deserialize, Serialize};

use crate::eigen::hermitian_eigenvalues;
use crate::error::{check_dims, Result};
use crate::gpm::StepSize;
use crate::matrix::HermitianMatrix;
use crate::phase::PhaseVector;
use crate::scalar::{cx, Cx, Scalar};

/// `‖ |v|∘z − v ‖₂` for `v = C̃z` already computed.
pub(crate) fn rho_from_product<T: Scalar>(z: &[Cx<T>], v: &[Cx<T>]) -> T {
    z.iter()
        .zip(v)
        .map(|(zj, vj)| (zj * vj.norm() - vj).norm_sqr())
        .sum::<T>()
        .sqrt()
}

/// `ρ(z) = ‖(Diag(|C̃z|) − C̃)z‖₂` with `C̃ = C + (n/α)I` (`C̃ = C` for `α = ∞`).
pub fn rho<T: Scalar>(c: &HermitianMatrix<T>, z: &PhaseVector<T>, alpha: StepSize<T>) -> Result<T> {
    check_dims(c.n(), z.len())?;
    let shift = alpha.n_over_alpha(c.n());
    let v: Vec<Cx<T>> = c
        .matvec_unchecked(z.as_slice())
        .iter()
        .zip(z.as_slice())
        .map(|(a, b)| a + b * shift)
        .collect();
    Ok(rho_from_product(z.as_slice(), &v))
}

/// `(8/n)·ρ`, the distance bound to the maximizer implied by the error bound.
pub fn error_bound_to_maximizer<T: Scalar>(rho_val: T, n: usize) -> T {
    T::of(8.0) * rho_val / T::of_usize(n)
}

/// `S(z) = Re{Diag((Cz)_j·conj(z_j))} − C`.
pub fn criticality_matrix<T: Scalar>(
    c: &HermitianMatrix<T>,
    z: &PhaseVector<T>,
) -> Result<HermitianMatrix<T>> {
    check_dims(c.n(), z.len())?;
    let cz = c.matvec_unchecked(z.as_slice());
    let zs = z.as_slice();
    Ok(HermitianMatrix::from_upper(c.n(), |j, l| {
        if j == l {
            cx((cz[j] * zs[j].conj()).re - c[(j, j)].re, T::zero())
        } else {
            -c[(j, l)]
        }
    }))
}

/// `M = Re{Diag(conj z)·S(z)·Diag(z)}`, the matrix of `t ↦ w^H S(z) w` over
/// tangent vectors `w = i·Diag(z)t`, `t ∈ ℝⁿ`. Always `M𝟏 = 0`.
pub fn tangent_matrix<T: Scalar>(
    c: &HermitianMatrix<T>,
    z: &PhaseVector<T>,
) -> Result<HermitianMatrix<T>> {
    let s = criticality_matrix(c, z)?;
    let zs = z.as_slice();
    Ok(HermitianMatrix::from_real_upper(c.n(), |j, l| {
        (zs[j].conj() * s[(j, l)] * zs[l]).re
    }))
}

/// `w^H S w` for `w = i·Diag(z)t`, evaluated directly from `S`.
pub fn tangent_quadratic_form<T: Scalar>(
    s: &HermitianMatrix<T>,
    z: &PhaseVector<T>,
    t: &[T],
) -> Result<T> {
    check_dims(s.n(), z.len())?;
    check_dims(s.n(), t.len())?;
    let i = cx(T::zero(), T::one());
    let w: Vec<Cx<T>> = z
        .as_slice()
        .iter()
        .zip(t)
        .map(|(zj, &tj)| i * zj * tj)
        .collect();
    crate::phase::quadratic_form(s, &w)
}

/// First- and second-order criticality of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CriticalityReport<T: Scalar> {
    /// `‖(Diag(|Cz|) − C)z‖₂`
    pub rho: T,
    /// `λ_min(M)`. Never positive since `M𝟏 = 0`; zero at second-order points.
    pub min_tangent_eig: T,
    /// `λ_min` of `M` restricted to `𝟏^⊥`, which removes the global-phase
    /// direction (equals `n` at `z*` without noise).
    pub min_tangent_eig_quotient: T,
    /// `ρ ≤ tol·n`
    pub is_first_order: bool,
    /// First order and `min_tangent_eig ≥ −tol·n`.
    pub is_second_order: bool,
    pub tol: T,
}

pub fn second_order_check<T: Scalar>(
    c: &HermitianMatrix<T>,
    z: &PhaseVector<T>,
    tol: T,
) -> Result<CriticalityReport<T>> {
    let n = c.n();
    let nf = T::of_usize(n);
    let r = rho(c, z, StepSize::Infinite)?;
    let m = tangent_matrix(c, z)?;
    let min_eig = hermitian_eigenvalues(&m)?[0];
    let lift = m.frobenius_norm() + nf;
    let lifted = HermitianMatrix::from_real_upper(n, |j, l| m[(j, l)].re + lift / nf);
    let min_quotient = if n == 1 {
        lift
    } else {
        hermitian_eigenvalues(&lifted)?[0]
    };
    let is_first_order = r <= tol * nf;
    Ok(CriticalityReport {
        rho: r,
        min_tangent_eig: min_eig,
        min_tangent_eig_quotient: min_quotient,
        is_first_order,
        is_second_order: is_first_order && min_eig >= -tol * nf,
        tol,
    })
}

/// Constants of the distance-to-truth trajectory bounds and the rate argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundParams<T: Scalar> {
    pub n: usize,
    pub alpha: StepSize<T>,
    pub delta_op: T,
    pub delta_zstar_inf: T,
    /// `16(α‖Δ‖ + n)/((7α+8)n)`
    pub mu: T,
    /// `2α/(7α+8)`
    pub nu: T,
    /// `16/(7α+8)`
    pub gamma: T,
    /// `128α‖Δ‖²/((7α+8)n^{3/2})`
    pub zeta: T,
    /// `(16α/(7α+8))·(ν/(1−μ)·8‖Δ‖²/n^{3/2} + ‖Δz*‖_∞/n)`
    pub omega: T,
    /// `λ_min(Δ + (n/α)I)`, supplied separately.
    pub a0: Option<T>,
    /// `3n`
    pub a1_cap: T,
    /// `(3/2)n^{5/4}`
    pub a2_cap: T,
    /// `(a′−1)/a′` with `a′ = 64·a1_cap·a2_cap²/(a0·n²)`.
    pub lambda_nominal: Option<T>,
    /// `μ ≥ 1`: the trajectory bounds say nothing.
    pub mu_vacuous: bool,
    /// `γ/μ ≥ 1` (or `0/0`): the `ζ` term of the `ℓ∞` bound is undefined.
    pub gamma_over_mu_degenerate: bool,
}

/// Evaluates the constants; the `α = ∞` case uses the limits
/// `μ = 16‖Δ‖/(7n)`, `ν = 2/7`, `γ = 0`.
pub fn bound_params<T: Scalar>(
    n: usize,
    alpha: StepSize<T>,
    delta_op: T,
    delta_zstar_inf: T,
) -> BoundParams<T> {
    let nf = T::of_usize(n);
    let (r, s) = match alpha {
        StepSize::Finite(a) => {
            let d = T::of(7.0) * a + T::of(8.0);
            (a / d, T::one() / d)
        }
        StepSize::Infinite => (T::one() / T::of(7.0), T::zero()),
    };
    let sixteen = T::of(16.0);
    let mu = sixteen * r * delta_op / nf + sixteen * s;
    let nu = T::two() * r;
    let gamma = sixteen * s;
    let n32 = nf * nf.sqrt();
    let zeta = T::of(128.0) * r * delta_op * delta_op / n32;
    let omega = sixteen
        * r
        * (nu / (T::one() - mu) * T::of(8.0) * delta_op * delta_op / n32 + delta_zstar_inf / nf);
    BoundParams {
        n,
        alpha,
        delta_op,
        delta_zstar_inf,
        mu,
        nu,
        gamma,
        zeta,
        omega,
        a0: None,
        a1_cap: T::of(3.0) * nf,
        a2_cap: T::of(1.5) * nf.powf(T::of(1.25)),
        lambda_nominal: None,
        mu_vacuous: !(mu < T::one()),
        gamma_over_mu_degenerate: !(gamma < mu),
    }
}

impl<T: Scalar> BoundParams<T> {
    /// Attaches `a0` and the nominal rate it implies.
    pub fn with_a0(mut self, a0: T) -> Self {
        self.a0 = Some(a0);
        let nf = T::of_usize(self.n);
        let a_prime = T::of(64.0) * self.a1_cap * self.a2_cap * self.a2_cap / (a0 * nf * nf);
        self.lambda_nominal =
            (a0 > T::zero() && a_prime > T::one()).then(|| (a_prime - T::one()) / a_prime);
        self
    }

    /// `8‖Δ‖_op/√n`, the initializer radius.
    pub fn init_radius(&self) -> T {
        T::of(8.0) * self.delta_op / T::of_usize(self.n).sqrt()
    }

    /// `μ·d + ν·8‖Δ‖/√n`
    pub fn l2_step_bound(&self, d_k: T) -> T {
        self.mu * d_k + self.nu * self.init_radius()
    }

    /// `μ^{k+1}·d₀ + ν/(1−μ)·8‖Δ‖/√n`
    pub fn l2_trajectory_bound(&self, k_plus_1: usize, d0: T) -> T {
        self.mu.powi(k_plus_1 as i32) * d0 + self.nu / (T::one() - self.mu) * self.init_radius()
    }

    /// `γ^{k+1}·d∞₀ + ζμ^k/(1−γ/μ) + ω/(1−γ)`; `None` when the middle term is
    /// undefined with `ζ > 0`.
    pub fn linf_trajectory_bound(&self, k: usize, dinf0: T) -> Option<T> {
        let middle = if self.zeta == T::zero() {
            T::zero()
        } else if self.gamma_over_mu_degenerate {
            return None;
        } else {
            self.zeta * self.mu.powi(k as i32) / (T::one() - self.gamma / self.mu)
        };
        Some(self.gamma.powi(k as i32 + 1) * dinf0 + middle + self.omega / (T::one() - self.gamma))
    }
}
