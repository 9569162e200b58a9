//! The generalized power method `z ← normalize((I + (α/n)C) z)`, its `α = ∞`
//! variant `z ← normalize(Cz)`, and trajectory capture.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{rho_from_product, second_order_check, CriticalityReport};
use crate::error::{check_dims, Error, Result};
use crate::instance::{noise_stats, Instance, InstanceTag, NoiseStats};
use crate::matrix::HermitianMatrix;
use crate::phase::{
    diff_norm, dist_l2, dist_linf_with, normalize_entrywise, LinfSearch, Norm, PhaseVector,
    ZeroFill, ZeroPolicy,
};
use crate::scalar::{dot_h, Cx, Scalar};
use crate::spectral::{spectral_init, SpectralConfig};

/// Step size `α`, finite or the pure power limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> StepSize<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            StepSize::Finite(a) => Some(a),
            StepSize::Infinite => None,
        }
    }

    /// `n/α` (zero for `α = ∞`), the diagonal shift in `C̃ = C + (n/α)I`.
    pub fn n_over_alpha(self, n: usize) -> T {
        match self {
            StepSize::Finite(a) => T::of_usize(n) / a,
            StepSize::Infinite => T::zero(),
        }
    }

    /// `α ≥ x`, with `∞` satisfying every lower bound.
    pub fn at_least(self, x: f64) -> bool {
        self.finite().is_none_or(|a| a >= T::of(x))
    }
}

impl<T: Scalar> std::fmt::Display for StepSize<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepSize::Finite(a) => write!(f, "{a}"),
            StepSize::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Scalar> std::str::FromStr for StepSize<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "INFINITY" | "∞" => Ok(StepSize::Infinite),
            other => other
                .parse::<f64>()
                .map(|a| StepSize::Finite(T::of(a)))
                .map_err(|_| Error::InvalidConfig(format!("bad step size `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepRepr<T> {
    Num(T),
    Text(String),
}

impl<T: Scalar> Serialize for StepSize<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Finite(a) => StepRepr::Num(*a).serialize(s),
            StepSize::Infinite => StepRepr::<T>::Text("inf".into()).serialize(s),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for StepSize<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match StepRepr::<T>::deserialize(d)? {
            StepRepr::Num(a) => Ok(StepSize::Finite(a)),
            StepRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Solver settings.
///
/// Both tolerances are scale-free: the run stops when `ρ(z^k) ≤ rho_tol·n` or
/// `‖z^{k+1} − z^k‖₂ ≤ step_tol·√n`, whichever fires first, and in any case
/// after `max_iter` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GpmConfig<T: Scalar> {
    pub alpha: StepSize<T>,
    pub max_iter: usize,
    pub rho_tol: Option<T>,
    pub step_tol: Option<T>,
    pub zero_policy: ZeroPolicy,
    pub record_iterates: bool,
    #[serde(default)]
    pub linf_search: LinfSearch<T>,
}

impl<T: Scalar> Default for GpmConfig<T> {
    fn default() -> Self {
        Self {
            alpha: StepSize::Finite(T::of(4.0)),
            max_iter: 10_000,
            rho_tol: Some(T::of(1e-12)),
            step_tol: Some(T::of(1e-13)),
            zero_policy: ZeroPolicy::PreviousIterate,
            record_iterates: false,
            linf_search: LinfSearch::default(),
        }
    }
}

impl<T: Scalar> GpmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if let StepSize::Finite(a) = self.alpha {
            if !(a >= T::two()) || !a.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "alpha must lie in [2, ∞], got {a}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        for (name, tol) in [("rho_tol", self.rho_tol), ("step_tol", self.step_tol)] {
            if let Some(t) = tol {
                if !(t >= T::zero()) {
                    return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
                }
            }
        }
        Ok(())
    }
}

/// One GPM step from `z`.
pub fn gpm_step<T: Scalar>(
    c: &HermitianMatrix<T>,
    z: &PhaseVector<T>,
    alpha: StepSize<T>,
    zero_policy: ZeroPolicy,
) -> Result<PhaseVector<T>> {
    check_dims(c.n(), z.len())?;
    let cz = c.matvec_unchecked(z.as_slice());
    step_from_product(z, &cz, alpha, zero_policy)
}

fn step_from_product<T: Scalar>(
    z: &PhaseVector<T>,
    cz: &[Cx<T>],
    alpha: StepSize<T>,
    zero_policy: ZeroPolicy,
) -> Result<PhaseVector<T>> {
    let w: Vec<Cx<T>> = match alpha {
        StepSize::Finite(a) => {
            let s = a / T::of_usize(z.len());
            z.as_slice()
                .iter()
                .zip(cz)
                .map(|(zj, cj)| zj + cj * s)
                .collect()
        }
        StepSize::Infinite => cz.to_vec(),
    };
    normalize_entrywise(&w, ZeroFill::bind(zero_policy, Some(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    RhoTol,
    StepTol,
    MaxIter,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminationReason::RhoTol => "rho_tol",
            TerminationReason::StepTol => "step_tol",
            TerminationReason::MaxIter => "max_iter",
        })
    }
}

/// Where the starting point came from; the bound checks only apply to the
/// eigenvector estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitOrigin {
    Spectral,
    Given,
}

/// Diagnostics of iterate `z^k`. `step_norm` and `f_gain` describe the step
/// to `z^{k+1}` and are absent on the last record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterateRecord<T: Scalar> {
    pub k: usize,
    pub f: T,
    pub d2_to_truth: T,
    pub dinf_to_truth: T,
    pub rho: T,
    pub step_norm: Option<T>,
    /// `f(z^{k+1}) − f(z^k)`, evaluated without cancellation.
    pub f_gain: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<PhaseVector<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterateTrace<T: Scalar> {
    pub instance: InstanceTag,
    pub config: GpmConfig<T>,
    pub init_origin: InitOrigin,
    /// Dense in `k`, starting at `k = 0`.
    pub records: Vec<IterateRecord<T>>,
    pub z_final: PhaseVector<T>,
    /// Number of GPM steps taken.
    pub iterations: usize,
    pub termination_reason: TerminationReason,
}

impl<T: Scalar> IterateTrace<T> {
    pub fn converged(&self) -> bool {
        self.termination_reason != TerminationReason::MaxIter
    }

    pub fn last(&self) -> &IterateRecord<T> {
        self.records.last().expect("trace has at least one record")
    }

    /// `f(z_final) − f(z^k)` for every record, accumulated from the per-step
    /// gains so that small gaps keep their relative accuracy.
    pub fn gaps_to_final(&self) -> Vec<T> {
        let mut gaps = vec![T::zero(); self.records.len()];
        for k in (0..self.records.len().saturating_sub(1)).rev() {
            gaps[k] = gaps[k + 1] + self.records[k].f_gain.unwrap_or_else(T::zero);
        }
        gaps
    }

    /// CSV with the fixed header `k,f,d2,dinf,rho,step_norm`; the last row
    /// leaves `step_norm` empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "f", "d2", "dinf", "rho", "step_norm"])?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.f.to_string(),
                r.d2_to_truth.to_string(),
                r.dinf_to_truth.to_string(),
                r.rho.to_string(),
                r.step_norm.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `f(z⁺) − f(z)` for `z⁺ = normalize(C̃z)`, in the form
/// `(z⁺−z)^H C̃ (z⁺−z) + 2Σ_j |v_j|(1 − cos∠(v_j, z_j))` with `v = C̃z`.
///
/// Subtracting objective values of stored iterates loses everything below
/// about `ε·n^{3/2}`, since each stored entry sits `O(ε)` off the unit circle
/// and `f` is first-order sensitive to that; the second sum here is a sum of
/// nonnegative terms and keeps full relative accuracy.
fn step_gain<T: Scalar>(
    z: &[Cx<T>],
    next: &[Cx<T>],
    ctz: &[Cx<T>],
    cz: &[Cx<T>],
    c_next: &[Cx<T>],
    shift: T,
) -> T {
    let mut quad = T::zero();
    let mut pull = T::zero();
    for j in 0..z.len() {
        let d = next[j] - z[j];
        let cd = c_next[j] - cz[j] + d * shift;
        quad += (d.conj() * cd).re;
        let m = ctz[j].norm();
        if m > T::zero() {
            let u = ctz[j] * z[j].conj() / m;
            let one_minus_cos = if u.re > T::zero() {
                u.im * u.im / (T::one() + u.re)
            } else {
                T::one() - u.re
            };
            pull += m * one_minus_cos;
        }
    }
    quad + T::two() * pull
}

/// Runs the method from `init` until a termination criterion fires.
pub fn run_gpm<T: Scalar>(
    inst: &Instance<T>,
    init: &PhaseVector<T>,
    cfg: &GpmConfig<T>,
) -> Result<IterateTrace<T>> {
    run_gpm_from(inst, init, InitOrigin::Given, cfg)
}

pub fn run_gpm_from<T: Scalar>(
    inst: &Instance<T>,
    init: &PhaseVector<T>,
    origin: InitOrigin,
    cfg: &GpmConfig<T>,
) -> Result<IterateTrace<T>> {
    cfg.validate()?;
    check_dims(inst.n, init.len())?;
    let c = &inst.c;
    let n = inst.n;
    let shift = cfg.alpha.n_over_alpha(n);
    let rho_stop = cfg.rho_tol.map(|t| t * T::of_usize(n));
    let step_stop = cfg.step_tol.map(|t| t * T::of_usize(n).sqrt());
    let truth = inst.z_star.as_slice();

    let mut z = init.clone();
    let mut cz = c.matvec_unchecked(z.as_slice());
    let mut records: Vec<IterateRecord<T>> = Vec::new();
    let mut pending: Option<TerminationReason> = None;

    let reason = loop {
        let k = records.len();
        let f = dot_h(z.as_slice(), &cz).re;
        let ctz: Vec<Cx<T>> = cz
            .iter()
            .zip(z.as_slice())
            .map(|(a, b)| a + b * shift)
            .collect();
        let rho = rho_from_product(z.as_slice(), &ctz);
        if !f.is_finite() || !rho.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        records.push(IterateRecord {
            k,
            f,
            d2_to_truth: dist_l2(z.as_slice(), truth)?.value,
            dinf_to_truth: dist_linf_with(z.as_slice(), truth, &cfg.linf_search)?.value,
            rho,
            step_norm: None,
            f_gain: None,
            z: cfg.record_iterates.then(|| z.clone()),
        });
        if let Some(r) = pending {
            break r;
        }
        if rho_stop.is_some_and(|t| rho <= t) {
            break TerminationReason::RhoTol;
        }
        if k == cfg.max_iter {
            break TerminationReason::MaxIter;
        }

        let next = step_from_product(&z, &cz, cfg.alpha, cfg.zero_policy)?;
        let c_next = c.matvec_unchecked(next.as_slice());
        let step = diff_norm(next.as_slice(), z.as_slice(), Norm::L2);
        let gain = step_gain(z.as_slice(), next.as_slice(), &ctz, &cz, &c_next, shift);
        if !step.is_finite() || !gain.is_finite() {
            return Err(Error::NonFinite { iteration: k + 1 });
        }
        let rec = records.last_mut().expect("just pushed");
        rec.step_norm = Some(step);
        rec.f_gain = Some(gain);
        z = next;
        cz = c_next;
        if step_stop.is_some_and(|t| step <= t) {
            pending = Some(TerminationReason::StepTol);
        }
    };

    Ok(IterateTrace {
        instance: inst.tag(),
        config: *cfg,
        init_origin: origin,
        iterations: records.len() - 1,
        records,
        z_final: z,
        termination_reason: reason,
    })
}

/// Whether the returned point is certified as the global maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "label")]
pub enum Certification {
    /// Noise gates for the linear-rate theory hold, the run converged and the
    /// point is second-order critical; `distance_bound = (8/n)ρ(z)` bounds its
    /// distance to the (unique up to phase) maximizer.
    Certified {
        distance_bound: f64,
    },
    Candidate,
}

#[derive(Debug, Clone)]
pub struct Solution<T: Scalar> {
    pub z: PhaseVector<T>,
    pub trace: IterateTrace<T>,
    pub noise: NoiseStats<T>,
    pub criticality: CriticalityReport<T>,
    pub certification: Certification,
}

/// Tolerance used for the second-order test behind [`Certification`].
pub const CERTIFY_TOL: f64 = 1e-8;

/// Spectral initialization followed by [`run_gpm`].
pub fn run_from_spectral<T: Scalar>(
    inst: &Instance<T>,
    cfg: &GpmConfig<T>,
    spectral: &SpectralConfig<T>,
) -> Result<IterateTrace<T>> {
    let init = spectral_init(&inst.c, spectral)?;
    run_gpm_from(inst, &init.phases, InitOrigin::Spectral, cfg)
}

pub fn solve_to_maximizer<T: Scalar>(
    inst: &Instance<T>,
    cfg: &GpmConfig<T>,
    spectral: &SpectralConfig<T>,
) -> Result<Solution<T>> {
    let trace = run_from_spectral(inst, cfg, spectral)?;
    let noise = noise_stats(inst)?;
    let z = trace.z_final.clone();
    let criticality = second_order_check(&inst.c, &z, T::of(CERTIFY_TOL))?;
    let gated = noise.assumptions.thm3_ok
        && cfg.alpha.at_least(4.0)
        && noise.alpha_below_noise_limit(cfg.alpha);
    let certification = if gated && trace.converged() && criticality.is_second_order {
        let rho = crate::diagnostics::rho(&inst.c, &z, cfg.alpha)?;
        Certification::Certified {
            distance_bound: crate::diagnostics::error_bound_to_maximizer(rho, inst.n)
                .to_f64_lossy(),
        }
    } else {
        Certification::Candidate
    };
    Ok(Solution {
        z,
        trace,
        noise,
        criticality,
        certification,
    })
}
