//! Offline verification of a recorded run against every inequality whose
//! hypotheses the instance and configuration satisfy.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::{bound_params, rho, second_order_check, BoundParams, CriticalityReport};
use crate::eigen::hermitian_eigenvalues;
use crate::error::{Error, Result};
use crate::gpm::{InitOrigin, IterateTrace, StepSize};
use crate::instance::{noise_stats, Instance, InstanceTag, NoiseStats};
use crate::phase::{dist_l2, norm, normalize_entrywise, objective, Norm, PhaseVector, ZeroFill};
use crate::scalar::{cx, Cx, Scalar};

/// Tolerances of [`verify_run`]. Quantities marked "× n²" or "× n" are scaled
/// by the dimension before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Objective slack in the ascent checks (× n²).
    pub ascent_slack: f64,
    /// Relative slack on the initializer radius.
    pub init_rel: f64,
    /// Absolute slack on the initializer radius, for the eigensolver's accuracy.
    pub init_abs: f64,
    /// Absolute slack on the maximizer-closeness radius.
    pub maximizer_abs: f64,
    /// Accuracy of `d∞` evaluations.
    pub linf_abs: f64,
    /// Log floor of the rate fit, relative to the initial objective gap.
    pub rate_floor: f64,
    pub tail_fraction: f64,
    pub tail_min: usize,
    /// Objective gap the linear phase must reach (× n²).
    pub gap_target: f64,
    /// Tolerance of the second-order test (× n).
    pub second_order_tol: f64,
    /// Bound on `ρ(z_final)` for converged certified runs (× n).
    pub final_rho: f64,
    /// Relative tolerance of `z^H C z = ‖Cz‖₁`.
    pub fixed_point_rel: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            ascent_slack: 1e-9,
            init_rel: 1e-9,
            init_abs: 1e-9,
            maximizer_abs: 1e-9,
            linf_abs: 1e-10,
            rate_floor: 1e-15,
            tail_fraction: 0.2,
            tail_min: 10,
            gap_target: 1e-10,
            second_order_tol: 1e-8,
            final_rho: 1e-10,
            fixed_point_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "n/a",
        })
    }
}

/// Result of one inequality over all iterations it applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub hypotheses: String,
    pub verdict: Verdict,
    /// Smallest `rhs − lhs` seen; negative on failure.
    pub worst_margin: Option<f64>,
    pub worst_index: Option<usize>,
    pub evaluated: usize,
    pub note: Option<String>,
}

/// Least-squares rate of the objective gap over the tail of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub lambda_hat: f64,
    /// Largest per-step ratio `gap_{k+1}/gap_k` on the tail.
    pub lambda_max: f64,
    pub tail_start: usize,
    pub tail_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundReport<T: Scalar> {
    pub instance: InstanceTag,
    pub noise: NoiseStats<T>,
    pub params: BoundParams<T>,
    pub criticality: CriticalityReport<T>,
    pub rate: Option<RateFit>,
    pub lambda_nominal: Option<T>,
    /// `‖C̃‖_op + ‖C̃ẑ‖_∞`
    pub a1_instance: T,
    /// `max_k ‖C̃z^k‖_∞`, when iterates were recorded.
    pub a2_instance: Option<T>,
    pub checks: Vec<CheckOutcome>,
}

impl<T: Scalar> BoundReport<T> {
    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.check(name).map(|c| c.verdict)
    }

    /// Compact `name=verdict;...` listing used in CSV rows.
    pub fn verdict_string(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{}={}", c.name, c.verdict))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let t = &self.instance;
        let _ = writeln!(
            s,
            "instance: n={} sigma={} seed={} mode={:?}",
            t.n, t.sigma, t.seed, t.mode
        );
        let _ = writeln!(
            s,
            "noise: |Delta|_op={:.6e} |Delta z*|_inf={:.6e} flags: l2={} rate={} critical={}",
            self.noise.delta_op.to_f64_lossy(),
            self.noise.delta_zstar_inf.to_f64_lossy(),
            self.noise.assumptions.thm1_ok,
            self.noise.assumptions.thm3_ok,
            self.noise.assumptions.prop_ebcrit_ok
        );
        let p = &self.params;
        let _ = writeln!(
            s,
            "constants: alpha={} mu={:.6} nu={:.6} gamma={:.6} zeta={:.3e} omega={:.3e} a0={}",
            p.alpha,
            p.mu.to_f64_lossy(),
            p.nu.to_f64_lossy(),
            p.gamma.to_f64_lossy(),
            p.zeta.to_f64_lossy(),
            p.omega.to_f64_lossy(),
            opt(p.a0.map(|a| a.to_f64_lossy()))
        );
        let _ = writeln!(
            s,
            "rate: lambda_hat={} lambda_nominal={} a1_instance={:.4e} a2_instance={}",
            opt(self.rate.map(|r| r.lambda_hat)),
            opt(self.lambda_nominal.map(|l| l.to_f64_lossy())),
            self.a1_instance.to_f64_lossy(),
            opt(self.a2_instance.map(|a| a.to_f64_lossy()))
        );
        let c = &self.criticality;
        let _ = writeln!(
            s,
            "final point: rho={:.3e} min_tangent_eig={:.3e} quotient={:.3e} second_order={}",
            c.rho.to_f64_lossy(),
            c.min_tangent_eig.to_f64_lossy(),
            c.min_tangent_eig_quotient.to_f64_lossy(),
            c.is_second_order
        );
        let _ = writeln!(s);
        for ch in &self.checks {
            let margin = ch
                .worst_margin
                .map_or("-".to_string(), |m| format!("{m:.3e}"));
            let _ = write!(
                s,
                "{:<26} {:<5} evaluated={:<6} worst_margin={:<11} [{}]",
                ch.name, ch.verdict, ch.evaluated, margin, ch.hypotheses
            );
            if let Some(note) = &ch.note {
                let _ = write!(s, " ({note})");
            }
            let _ = writeln!(s);
        }
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |v| format!("{v:.6}"))
}

/// Accumulates `rhs − lhs` over evaluation points.
struct Tally {
    worst: Option<(f64, usize)>,
    evaluated: usize,
    failed: bool,
}

impl Tally {
    fn new() -> Self {
        Self {
            worst: None,
            evaluated: 0,
            failed: false,
        }
    }

    fn add<T: Scalar>(&mut self, index: usize, lhs: T, rhs: T) {
        let margin = (rhs - lhs).to_f64_lossy();
        self.evaluated += 1;
        if !(margin >= 0.0) {
            self.failed = true;
        }
        if self
            .worst
            .is_none_or(|(w, _)| margin < w || margin.is_nan())
        {
            self.worst = Some((margin, index));
        }
    }

    fn finish(self, name: &str, hypotheses: &str, note: Option<String>) -> CheckOutcome {
        let verdict = match (self.evaluated, self.failed) {
            (0, _) => Verdict::NotApplicable,
            (_, true) => Verdict::Fail,
            _ => Verdict::Pass,
        };
        CheckOutcome {
            name: name.into(),
            hypotheses: hypotheses.into(),
            verdict,
            worst_margin: self.worst.map(|w| w.0),
            worst_index: self.worst.map(|w| w.1),
            evaluated: self.evaluated,
            note,
        }
    }
}

fn not_applicable(name: &str, hypotheses: &str, why: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        hypotheses: hypotheses.into(),
        verdict: Verdict::NotApplicable,
        worst_margin: None,
        worst_index: None,
        evaluated: 0,
        note: Some(why.into()),
    }
}

pub const INIT_DISTANCE: &str = "init_distance";
pub const L2_RECURSION: &str = "l2_recursion";
pub const L2_TRAJECTORY: &str = "l2_trajectory";
pub const LINF_TRAJECTORY: &str = "linf_trajectory";
pub const MONOTONE_ASCENT: &str = "monotone_ascent";
pub const SUFFICIENT_ASCENT: &str = "sufficient_ascent";
pub const MAXIMIZER_CLOSENESS: &str = "maximizer_closeness";
pub const COST_TO_GO: &str = "cost_to_go";
pub const SAFEGUARD: &str = "safeguard";
pub const ERROR_BOUND: &str = "error_bound";
pub const ERROR_BOUND_CRITICAL: &str = "error_bound_critical";
pub const FIXED_POINT_IDENTITIES: &str = "fixed_point_identities";
pub const SECOND_ORDER_FINAL: &str = "second_order_final";
pub const LINEAR_RATE: &str = "linear_rate";

pub fn verify_run<T: Scalar>(
    inst: &Instance<T>,
    trace: &IterateTrace<T>,
    cfg: &VerifyConfig,
) -> Result<BoundReport<T>> {
    let noise = noise_stats(inst)?;
    verify_run_with_noise(inst, trace, &noise, cfg)
}

fn check_consistency<T: Scalar>(inst: &Instance<T>, trace: &IterateTrace<T>) -> Result<()> {
    if trace.instance != inst.tag() {
        return Err(Error::TraceMismatch(format!(
            "trace was produced for {:?}, instance is {:?}",
            trace.instance,
            inst.tag()
        )));
    }
    if trace.records.is_empty() || trace.records.len() != trace.iterations + 1 {
        return Err(Error::TraceMismatch(
            "record count does not match iteration count".into(),
        ));
    }
    if trace.z_final.len() != inst.n {
        return Err(Error::TraceMismatch(
            "final point has the wrong dimension".into(),
        ));
    }
    for (k, r) in trace.records.iter().enumerate() {
        if r.k != k {
            return Err(Error::TraceMismatch(format!(
                "record {k} is labelled k = {}",
                r.k
            )));
        }
        if k < trace.iterations && r.step_norm.is_none() {
            return Err(Error::TraceMismatch(format!(
                "record {k} lacks its step norm"
            )));
        }
        if let Some(z) = &r.z {
            if z.len() != inst.n {
                return Err(Error::TraceMismatch(format!(
                    "iterate {k} has the wrong dimension"
                )));
            }
        }
    }
    Ok(())
}

/// As [`verify_run`], reusing precomputed noise statistics.
pub fn verify_run_with_noise<T: Scalar>(
    inst: &Instance<T>,
    trace: &IterateTrace<T>,
    noise: &NoiseStats<T>,
    cfg: &VerifyConfig,
) -> Result<BoundReport<T>> {
    check_consistency(inst, trace)?;
    let n = inst.n;
    let nf = T::of_usize(n);
    let n2 = nf * nf;
    let sqrt_n = nf.sqrt();
    let eps = T::epsilon();
    let d_floor = T::of(64.0) * eps * sqrt_n;
    let rho_floor = T::of(64.0) * eps * nf * sqrt_n;
    let alpha = trace.config.alpha;
    let recs = &trace.records;
    let steps = trace.iterations;
    let a0 = noise.a0(alpha);
    let params = bound_params(n, alpha, noise.delta_op, noise.delta_zstar_inf).with_a0(a0);
    let flags = noise.assumptions;
    let spectral = trace.init_origin == InitOrigin::Spectral;
    let converged = trace.converged();
    let iterates: Option<Vec<&PhaseVector<T>>> = recs.iter().map(|r| r.z.as_ref()).collect();
    let z_hat = &trace.z_final;
    let shift = alpha.n_over_alpha(n);
    let rho_hat = rho(&inst.c, z_hat, alpha)?;
    let criticality = second_order_check(&inst.c, z_hat, T::of(cfg.second_order_tol))?;
    let mut checks = Vec::new();

    // distance-to-truth bounds along the whole trajectory
    let l2_gate = flags.thm1_ok && alpha.at_least(2.0) && spectral;
    let l2_hyp = "‖Δ‖_op ≤ n/16, α ≥ 2, z⁰ = v_C";
    let l2_missing = || {
        if !spectral {
            "initial point is not the eigenvector estimator".to_string()
        } else {
            "‖Δ‖_op exceeds n/16".to_string()
        }
    };
    if l2_gate {
        let mut t = Tally::new();
        t.add(
            0,
            recs[0].d2_to_truth,
            params.init_radius() * T::of(1.0 + cfg.init_rel) + T::of(cfg.init_abs) + d_floor,
        );
        checks.push(t.finish(INIT_DISTANCE, l2_hyp, None));

        let mut rec = Tally::new();
        let mut traj = Tally::new();
        let mut linf = Tally::new();
        let mut linf_note = None;
        let d0 = recs[0].d2_to_truth;
        let dinf0 = recs[0].dinf_to_truth;
        for k in 0..steps {
            let next = &recs[k + 1];
            rec.add(
                k,
                next.d2_to_truth,
                params.l2_step_bound(recs[k].d2_to_truth) + d_floor,
            );
            traj.add(
                k,
                next.d2_to_truth,
                params.l2_trajectory_bound(k + 1, d0) + d_floor,
            );
            match params.linf_trajectory_bound(k, dinf0) {
                Some(b) => linf.add(k, next.dinf_to_truth, b + T::of(cfg.linf_abs)),
                None => linf_note = Some("γ/μ ≥ 1 with ζ > 0".to_string()),
            }
        }
        checks.push(rec.finish(L2_RECURSION, l2_hyp, None));
        checks.push(traj.finish(L2_TRAJECTORY, l2_hyp, None));
        checks.push(linf.finish(LINF_TRAJECTORY, l2_hyp, linf_note));
    } else {
        for name in [INIT_DISTANCE, L2_RECURSION, L2_TRAJECTORY, LINF_TRAJECTORY] {
            checks.push(not_applicable(name, l2_hyp, l2_missing()));
        }
    }

    // ascent, valid whenever C̃ − z*z*^H is positive semidefinite
    let ascent_hyp = "λ_min(Δ) + n/α ≥ 0";
    let slack = T::of(cfg.ascent_slack) * n2;
    if a0 >= T::zero() {
        let mut mono = Tally::new();
        let mut suff = Tally::new();
        for k in 0..steps {
            let df = recs[k + 1].f - recs[k].f;
            let step = recs[k].step_norm.expect("checked");
            mono.add(k, -df, slack);
            suff.add(k, a0 * step * step, df + slack);
        }
        checks.push(mono.finish(MONOTONE_ASCENT, ascent_hyp, None));
        checks.push(suff.finish(SUFFICIENT_ASCENT, ascent_hyp, None));
    } else {
        for name in [MONOTONE_ASCENT, SUFFICIENT_ASCENT] {
            checks.push(not_applicable(
                name,
                ascent_hyp,
                format!("λ_min(Δ) + n/α = {a0}"),
            ));
        }
    }

    // every point at least as good as the truth is close to it
    let f_star = objective(&inst.c, &inst.z_star)?;
    let mut close = Tally::new();
    let close_radius = T::of(4.0) * noise.delta_op / sqrt_n + T::of(cfg.maximizer_abs) + d_floor;
    for (k, r) in recs.iter().enumerate() {
        if r.f >= f_star {
            close.add(k, r.d2_to_truth, close_radius);
        }
    }
    let close_note = (close.evaluated == 0).then(|| "no iterate reached f(z*)".to_string());
    checks.push(close.finish(MAXIMIZER_CLOSENESS, "f(z^k) ≥ f(z*)", close_note));

    // linear-rate regime
    let rate_gate =
        flags.thm3_ok && alpha.at_least(4.0) && noise.alpha_below_noise_limit(alpha) && spectral;
    let rate_hyp = "‖Δ‖_op ≤ n^{3/4}/312, ‖Δz*‖_∞ ≤ n/24, 4 ≤ α < n/‖Δ‖_op, z⁰ = v_C";
    let rate_missing = || -> String {
        if !flags.thm3_ok {
            "noise exceeds the linear-rate gate".into()
        } else if !spectral {
            "initial point is not the eigenvector estimator".into()
        } else {
            format!("α = {alpha} outside [4, n/‖Δ‖_op)")
        }
    };
    if let (Some(a), true) = (alpha.finite(), rate_gate) {
        let limit = nf / noise.delta_op;
        if a > limit * T::of(0.99) {
            log::info!("α = {a} is within 1% of n/‖Δ‖_op = {limit}");
        }
    }
    let gaps = trace.gaps_to_final();
    // rounding of the accumulated gains: relative error of the nonnegative
    // sum plus the error of the quadratic term from O(ε) entries of z^{k+1}−z^k
    let c_bound = inst.c.frobenius_norm() + shift;
    let mut gap_err = vec![T::zero(); recs.len()];
    for k in (0..steps).rev() {
        let step = recs[k].step_norm.expect("checked");
        let gain = recs[k].f_gain.unwrap_or_else(T::zero).abs();
        gap_err[k] =
            gap_err[k + 1] + T::of(64.0) * eps * gain + T::of(8.0) * eps * sqrt_n * step * c_bound;
    }
    // distance from z_final to the exact maximizer, by the error bound applied at z_final
    let hat_err = super::error_bound_to_maximizer(rho_hat, n) + d_floor;

    if !rate_gate {
        for name in [
            COST_TO_GO,
            SAFEGUARD,
            ERROR_BOUND,
            SECOND_ORDER_FINAL,
            LINEAR_RATE,
        ] {
            checks.push(not_applicable(name, rate_hyp, rate_missing()));
        }
    } else {
        let mut safe = Tally::new();
        for (k, r) in recs.iter().take(steps).enumerate() {
            let step = r.step_norm.expect("checked");
            safe.add(k, r.rho, params.a2_cap * step + rho_floor);
        }
        checks.push(safe.finish(SAFEGUARD, rate_hyp, None));

        if !converged {
            for name in [COST_TO_GO, ERROR_BOUND, SECOND_ORDER_FINAL, LINEAR_RATE] {
                checks.push(not_applicable(
                    name,
                    rate_hyp,
                    "run hit max_iter; no reference maximizer",
                ));
            }
        } else {
            match &iterates {
                Some(zs) => {
                    let mut ctg = Tally::new();
                    let mut eb = Tally::new();
                    for (k, zk) in zs.iter().enumerate() {
                        let d = dist_l2(zk.as_slice(), z_hat.as_slice())?.value;
                        let reach = d + hat_err;
                        ctg.add(k, gaps[k] - gap_err[k], params.a1_cap * reach * reach);
                        if recs[k].d2_to_truth <= sqrt_n / T::two() {
                            eb.add(
                                k,
                                d,
                                super::error_bound_to_maximizer(recs[k].rho, n) + hat_err,
                            );
                        }
                    }
                    checks.push(ctg.finish(COST_TO_GO, rate_hyp, None));
                    checks.push(eb.finish(ERROR_BOUND, rate_hyp, None));
                }
                None => {
                    for name in [COST_TO_GO, ERROR_BOUND] {
                        checks.push(not_applicable(name, rate_hyp, "iterates not recorded"));
                    }
                }
            }

            let mut so = Tally::new();
            so.add(
                0,
                -criticality.min_tangent_eig,
                T::of(cfg.second_order_tol) * nf,
            );
            so.add(1, rho_hat, T::of(cfg.final_rho) * nf);
            checks.push(so.finish(SECOND_ORDER_FINAL, rate_hyp, None));

            checks.push(
                linear_rate_check(
                    &gaps,
                    &gap_err,
                    steps,
                    n2,
                    params.lambda_nominal,
                    cfg,
                    rate_hyp,
                )
                .0,
            );
        }
    }

    // error bound towards second-order critical points
    let crit_hyp = "‖Δ‖_op ≤ n^{2/3}/32768, ‖Δz*‖_∞ ≤ n/24, α ≥ 4, z_final second-order critical";
    if !(flags.prop_ebcrit_ok && alpha.at_least(4.0)) {
        checks.push(not_applicable(
            ERROR_BOUND_CRITICAL,
            crit_hyp,
            "noise exceeds the critical-point gate",
        ));
    } else if !criticality.is_second_order {
        checks.push(not_applicable(
            ERROR_BOUND_CRITICAL,
            crit_hyp,
            "z_final is not second-order critical",
        ));
    } else if let Some(zs) = &iterates {
        let mut eb = Tally::new();
        for (k, zk) in zs.iter().enumerate() {
            if recs[k].d2_to_truth <= sqrt_n / T::two() {
                let d = dist_l2(zk.as_slice(), z_hat.as_slice())?.value;
                eb.add(
                    k,
                    d,
                    super::error_bound_to_maximizer(recs[k].rho, n) + hat_err,
                );
            }
        }
        checks.push(eb.finish(ERROR_BOUND_CRITICAL, crit_hyp, None));
    } else {
        checks.push(not_applicable(
            ERROR_BOUND_CRITICAL,
            crit_hyp,
            "iterates not recorded",
        ));
    }

    // fixed-point identities at a second-order critical final point
    let fp_hyp = "z_final second-order critical";
    if criticality.is_second_order {
        let tol = T::of(cfg.second_order_tol) * nf;
        let cz = inst.c.matvec(z_hat.as_slice())?;
        let f_hat = objective(&inst.c, z_hat)?;
        let l1 = norm(&cz, Norm::L1);
        let mut fp = Tally::new();
        fp.add(0, criticality.rho, tol);
        fp.add(1, rho_hat, tol);
        fp.add(
            2,
            (f_hat - l1).abs(),
            T::of(cfg.fixed_point_rel) * f_hat.abs().max(l1),
        );
        checks.push(fp.finish(FIXED_POINT_IDENTITIES, fp_hyp, None));
    } else {
        checks.push(not_applicable(
            FIXED_POINT_IDENTITIES,
            fp_hyp,
            "z_final is not second-order critical",
        ));
    }

    let rate = if converged {
        linear_rate_check(
            &gaps,
            &gap_err,
            steps,
            n2,
            params.lambda_nominal,
            cfg,
            rate_hyp,
        )
        .1
    } else {
        None
    };

    // instance-level a₁, a₂
    let ev = hermitian_eigenvalues(&inst.c)?;
    let c_op = (ev[0] + shift).abs().max((ev[n - 1] + shift).abs());
    let ct_inf = |z: &PhaseVector<T>| -> T {
        let v: Vec<Cx<T>> = inst
            .c
            .matvec_unchecked(z.as_slice())
            .iter()
            .zip(z.as_slice())
            .map(|(a, b)| a + b * shift)
            .collect();
        norm(&v, Norm::Linf)
    };
    let a1_instance = c_op + ct_inf(z_hat);
    let a2_instance = iterates
        .as_ref()
        .map(|zs| zs.iter().map(|z| ct_inf(z)).fold(T::zero(), T::max));

    let order = |name: &str| {
        CHECK_ORDER
            .iter()
            .position(|n| *n == name)
            .unwrap_or(usize::MAX)
    };
    checks.sort_by_key(|c| order(&c.name));

    Ok(BoundReport {
        instance: inst.tag(),
        noise: *noise,
        lambda_nominal: params.lambda_nominal,
        params,
        criticality,
        rate,
        a1_instance,
        a2_instance,
        checks,
    })
}

const CHECK_ORDER: [&str; 14] = [
    INIT_DISTANCE,
    L2_RECURSION,
    L2_TRAJECTORY,
    LINF_TRAJECTORY,
    MONOTONE_ASCENT,
    SUFFICIENT_ASCENT,
    MAXIMIZER_CLOSENESS,
    COST_TO_GO,
    SAFEGUARD,
    ERROR_BOUND,
    ERROR_BOUND_CRITICAL,
    FIXED_POINT_IDENTITIES,
    SECOND_ORDER_FINAL,
    LINEAR_RATE,
];

/// Fits `λ̂ = exp(slope)` of `log(gap_k + floor)` over the tail and checks
/// `gap_{k+1} ≤ λ̂·gap_k` there, monotone gaps, and that the gap falls below
/// the target.
fn linear_rate_check<T: Scalar>(
    gaps: &[T],
    gap_err: &[T],
    steps: usize,
    n2: T,
    lambda_nominal: Option<T>,
    cfg: &VerifyConfig,
    hyp: &str,
) -> (CheckOutcome, Option<RateFit>) {
    let floor = T::of(cfg.rate_floor) * gaps[0];
    let above: Vec<usize> = (0..steps).filter(|&k| gaps[k] > floor).collect();
    let tail_len = (cfg.tail_min).max((cfg.tail_fraction * above.len() as f64).ceil() as usize);
    if above.len() < 3 {
        return (
            not_applicable(
                LINEAR_RATE,
                hyp,
                format!("only {} iterations above the gap floor", above.len()),
            ),
            None,
        );
    }
    let tail = &above[above.len().saturating_sub(tail_len)..];
    let xs: Vec<f64> = tail.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = tail
        .iter()
        .map(|&k| (gaps[k] + floor).to_f64_lossy().ln())
        .collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let lambda_hat = (sxy / sxx).exp();
    let lambda_max = tail
        .iter()
        .map(|&k| (gaps[k + 1] / gaps[k]).to_f64_lossy())
        .fold(0.0, f64::max);
    let fit = RateFit {
        lambda_hat,
        lambda_max,
        tail_start: tail[0],
        tail_len: tail.len(),
    };

    let below_one = T::one() - T::of(f64::EPSILON);
    let mut t = Tally::new();
    t.add(usize::MAX, T::of(lambda_hat), below_one);
    t.add(usize::MAX, T::of(lambda_max), below_one);
    if let Some(lam) = lambda_nominal {
        for k in 0..steps {
            t.add(k, gaps[k + 1], lam * gaps[k] + gap_err[k]);
        }
    }
    for k in 0..steps {
        t.add(k, gaps[k + 1], gaps[k] + gap_err[k]);
    }
    let reached = (0..steps).map(|k| gaps[k]).fold(T::infinity(), T::min);
    t.add(steps, reached, T::of(cfg.gap_target) * n2);
    let mut out = t.finish(
        LINEAR_RATE,
        hyp,
        Some(format!(
            "lambda_hat = {lambda_hat:.6}, lambda_max = {lambda_max:.6}"
        )),
    );
    if out.worst_index == Some(usize::MAX) {
        out.worst_index = None;
    }
    (out, Some(fit))
}

/// Outcome of [`perturbed_error_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCheck {
    pub evaluated: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

/// Tests `d₂(z′, ẑ) ≤ (8/n)ρ(z′)` at `count` points `z′ = normalize(ẑ + εu)`,
/// `u` standard complex normal, keeping only points with `d₂(z′, z*) ≤ √n/2`.
/// `ẑ`'s own distance to the exact maximizer, `(8/n)ρ(ẑ)`, is added to the
/// right-hand side.
pub fn perturbed_error_bound_check<T: Scalar>(
    inst: &Instance<T>,
    z_hat: &PhaseVector<T>,
    alpha: StepSize<T>,
    count: usize,
    eps: T,
    seed: u64,
) -> Result<PerturbationCheck> {
    let n = inst.n;
    let sqrt_n = T::of_usize(n).sqrt();
    let hat_err = super::error_bound_to_maximizer(rho(&inst.c, z_hat, alpha)?, n)
        + T::of(64.0) * T::epsilon() * sqrt_n;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let scale = T::of(std::f64::consts::FRAC_1_SQRT_2) * eps;
    let mut out = PerturbationCheck {
        evaluated: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for _ in 0..count {
        let w: Vec<Cx<T>> = z_hat
            .as_slice()
            .iter()
            .map(|z| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                z + cx(T::of(re), T::of(im)) * scale
            })
            .collect();
        let zp = normalize_entrywise(&w, ZeroFill::UnitOne)?;
        if dist_l2(zp.as_slice(), inst.z_star.as_slice())?.value > sqrt_n / T::two() {
            continue;
        }
        let d = dist_l2(zp.as_slice(), z_hat.as_slice())?.value;
        let bound = super::error_bound_to_maximizer(rho(&inst.c, &zp, alpha)?, n) + hat_err;
        let margin = (bound - d).to_f64_lossy();
        out.evaluated += 1;
        if !(margin >= 0.0) {
            out.violations += 1;
        }
        out.worst_margin = out.worst_margin.min(margin);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpm::{run_from_spectral, run_gpm, GpmConfig};
    use crate::instance::{build_instance, TruthMode};
    use crate::spectral::SpectralConfig;

    fn recorded() -> GpmConfig<f64> {
        GpmConfig {
            record_iterates: true,
            ..GpmConfig::default()
        }
    }

    #[test]
    fn noiseless_run_passes_everything_applicable() {
        let inst = build_instance::<f64>(40, 0.0, 5, TruthMode::RandomPhases).unwrap();
        let trace = run_from_spectral(&inst, &recorded(), &SpectralConfig::default()).unwrap();
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        assert!(!rep.any_failed(), "{}", rep.summary_text());
        for c in &rep.checks {
            if let Some(m) = c.worst_margin {
                assert!(m >= 0.0, "{}: {m}", c.name);
            }
        }
        assert_eq!(rep.verdict(L2_RECURSION), Some(Verdict::Pass));
        assert_eq!(rep.verdict(SECOND_ORDER_FINAL), Some(Verdict::Pass));
    }

    #[test]
    fn moderate_noise_run_passes() {
        let n = 100;
        let inst =
            build_instance::<f64>(n, (n as f64).sqrt() / 48.0, 2, TruthMode::RandomPhases).unwrap();
        let trace = run_from_spectral(&inst, &recorded(), &SpectralConfig::default()).unwrap();
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        assert!(rep.noise.assumptions.thm1_ok);
        assert!(!rep.any_failed(), "{}", rep.summary_text());
        assert_eq!(rep.verdict(L2_RECURSION), Some(Verdict::Pass));
        assert_eq!(rep.verdict(LINF_TRAJECTORY), Some(Verdict::Pass));
        assert_eq!(rep.verdict(SUFFICIENT_ASCENT), Some(Verdict::Pass));
    }

    #[test]
    fn huge_noise_gates_everything_off() {
        let inst = build_instance::<f64>(30, 50.0, 2, TruthMode::RandomPhases).unwrap();
        let trace =
            run_from_spectral(&inst, &GpmConfig::default(), &SpectralConfig::default()).unwrap();
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        for name in [
            INIT_DISTANCE,
            L2_RECURSION,
            LINF_TRAJECTORY,
            SAFEGUARD,
            LINEAR_RATE,
            ERROR_BOUND,
        ] {
            assert_eq!(rep.verdict(name), Some(Verdict::NotApplicable), "{name}");
        }
        assert!(!rep.any_failed());
    }

    #[test]
    fn given_init_disables_trajectory_bounds() {
        let inst = build_instance::<f64>(20, 0.1, 2, TruthMode::RandomPhases).unwrap();
        let trace = run_gpm(&inst, &PhaseVector::ones(20), &GpmConfig::default()).unwrap();
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        assert_eq!(rep.verdict(L2_RECURSION), Some(Verdict::NotApplicable));
        assert_eq!(rep.verdict(SUFFICIENT_ASCENT), Some(Verdict::Pass));
    }

    #[test]
    fn tampered_objective_fails_ascent() {
        let inst = build_instance::<f64>(30, 0.3, 2, TruthMode::RandomPhases).unwrap();
        let mut trace = run_gpm(&inst, &PhaseVector::ones(30), &GpmConfig::default()).unwrap();
        assert!(trace.iterations >= 2);
        trace.records[2].f = trace.records[1].f - 1.0;
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        assert_eq!(rep.verdict(SUFFICIENT_ASCENT), Some(Verdict::Fail));
        assert!(rep.any_failed());
    }

    #[test]
    fn mismatched_instance_is_an_error() {
        let inst = build_instance::<f64>(10, 0.3, 2, TruthMode::RandomPhases).unwrap();
        let other = build_instance::<f64>(10, 0.3, 3, TruthMode::RandomPhases).unwrap();
        let trace =
            run_from_spectral(&inst, &GpmConfig::default(), &SpectralConfig::default()).unwrap();
        assert!(matches!(
            verify_run(&other, &trace, &VerifyConfig::default()),
            Err(Error::TraceMismatch(_))
        ));
    }

    #[test]
    fn rate_fit_recovers_exact_geometric_decay() {
        let r: f64 = 0.6;
        let steps = 60;
        let gaps: Vec<f64> = (0..=steps)
            .map(|k| if k == steps { 0.0 } else { r.powi(k as i32) })
            .collect();
        let err = vec![0.0; steps + 1];
        let exact = VerifyConfig {
            rate_floor: 1e-300,
            ..VerifyConfig::default()
        };
        let (out, fit) = linear_rate_check(&gaps, &err, steps, 1.0, Some(0.61), &exact, "");
        // the final zero gap is excluded from the fit and only helps the ratio test
        assert!((fit.unwrap().lambda_hat - r).abs() < 1e-12);
        assert_eq!(out.verdict, Verdict::Pass);
        // the default log floor flattens the end of the tail, raising λ̂ slightly
        let (out, fit) =
            linear_rate_check(&gaps, &err, steps, 1.0, None, &VerifyConfig::default(), "");
        let lam = fit.unwrap().lambda_hat;
        assert!(lam >= r && lam < 0.7);
        assert_eq!(out.verdict, Verdict::Pass);
        // a nominal rate below the observed one is violated
        let (out, _) = linear_rate_check(&gaps, &err, steps, 1.0, Some(0.59), &exact, "");
        assert_eq!(out.verdict, Verdict::Fail);
    }

    #[test]
    fn rate_check_rejects_a_stalled_tail() {
        let steps = 40;
        let mut gaps: Vec<f64> = (0..=steps).map(|k| 0.5f64.powi(k as i32)).collect();
        gaps[steps] = 0.0;
        gaps[35] = gaps[34];
        let err = vec![0.0; steps + 1];
        let (out, fit) =
            linear_rate_check(&gaps, &err, steps, 1.0, None, &VerifyConfig::default(), "");
        assert_eq!(fit.unwrap().lambda_max, 1.0);
        assert_eq!(out.verdict, Verdict::Fail);
    }

    #[test]
    fn report_text_lists_every_check() {
        let inst = build_instance::<f64>(20, 0.2, 1, TruthMode::RandomPhases).unwrap();
        let trace =
            run_from_spectral(&inst, &GpmConfig::default(), &SpectralConfig::default()).unwrap();
        let rep = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        let text = rep.summary_text();
        for name in CHECK_ORDER {
            assert!(text.contains(name), "{name}");
        }
        assert_eq!(rep.checks.len(), CHECK_ORDER.len());
        let json = serde_json::to_string(&rep).unwrap();
        let back: BoundReport<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks, rep.checks);
    }
}
