use std::f64::consts::PI;

use num_complex::Complex64;
use phasesync::diagnostics::second_order_check;
use phasesync::gpm::run_gpm_from;
use phasesync::phase::ZeroFill;
use phasesync::{
    build_instance, dist_l2, noise_stats, normalize_entrywise, run_from_spectral, run_gpm,
    spectral_init, verify_run, GpmConfig, InitOrigin, StepSize, TerminationReason, TruthMode,
    Verdict, VerifyConfig,
};
use proptest::prelude::*;

fn step_size() -> impl Strategy<Value = StepSize<f64>> {
    prop_oneof![
        Just(StepSize::Finite(2.0)),
        Just(StepSize::Finite(4.0)),
        (4.0..200.0).prop_map(StepSize::Finite),
        Just(StepSize::Infinite),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Every check either holds or is reported as not applicable.
    #[test]
    fn no_check_fails_on_random_runs(
        n in 2usize..48,
        log_sigma in -6.0f64..1.5,
        alpha in step_size(),
        seed in any::<u64>(),
    ) {
        let sigma = 10f64.powf(log_sigma);
        let inst = build_instance::<f64>(n, sigma, seed, TruthMode::RandomPhases).unwrap();
        let cfg = GpmConfig { alpha, record_iterates: true, ..GpmConfig::default() };
        let Ok(trace) = run_from_spectral(&inst, &cfg, &Default::default()) else {
            // non-convergent power iteration only happens far outside the l2 gate
            prop_assert!(!noise_stats(&inst).unwrap().assumptions.thm1_ok);
            return Ok(());
        };
        let report = verify_run(&inst, &trace, &VerifyConfig::default()).unwrap();
        for c in &report.checks {
            prop_assert!(c.verdict != Verdict::Fail, "{}", report.summary_text());
        }
        let flags = report.noise.assumptions;
        if !flags.thm1_ok {
            for name in ["init_distance", "l2_recursion", "l2_trajectory", "linf_trajectory", "linear_rate"] {
                prop_assert_eq!(report.verdict(name), Some(Verdict::NotApplicable));
            }
        }
        if !flags.prop_ebcrit_ok {
            prop_assert_eq!(report.verdict("error_bound_critical"), Some(Verdict::NotApplicable));
        }
    }

    #[test]
    fn second_order_implies_first_order(n in 2usize..30, log_sigma in -4.0f64..1.0, seed in any::<u64>(), wobble in 0.0..0.3) {
        let inst = build_instance::<f64>(n, 10f64.powf(log_sigma), seed, TruthMode::RandomPhases).unwrap();
        let Ok(trace) = run_from_spectral(&inst, &GpmConfig::default(), &Default::default()) else {
            return Ok(());
        };
        // also probe points near, but not at, the final iterate
        let z = trace.z_final.as_slice();
        let w: Vec<Complex64> = z
            .iter()
            .enumerate()
            .map(|(j, x)| x * Complex64::from_polar(1.0, wobble * ((j * 7919 % 13) as f64 - 6.0) / 6.0))
            .collect();
        let near = normalize_entrywise(&w, ZeroFill::UnitOne).unwrap();
        for p in [&trace.z_final, &near] {
            for tol in [1e-10, 1e-8, 1e-4] {
                let rep = second_order_check(&inst.c, p, tol).unwrap();
                prop_assert!(!rep.is_second_order || rep.is_first_order, "{rep:?}");
            }
        }
    }

    #[test]
    fn termination_leaves_a_small_fixed_point_residual(n in 2usize..40, log_sigma in -4.0f64..0.5, seed in any::<u64>()) {
        let inst = build_instance::<f64>(n, 10f64.powf(log_sigma), seed, TruthMode::RandomPhases).unwrap();
        let cfg = GpmConfig::<f64>::default();
        let Ok(trace) = run_from_spectral(&inst, &cfg, &Default::default()) else {
            return Ok(());
        };
        let nf = n as f64;
        let rho = trace.last().rho;
        match trace.termination_reason {
            TerminationReason::RhoTol => prop_assert!(rho <= cfg.rho_tol.unwrap() * nf),
            TerminationReason::StepTol => {
                let a2 = 1.5 * nf.powf(1.25);
                let bound = (cfg.rho_tol.unwrap() * nf).max(a2 * cfg.step_tol.unwrap() * nf.sqrt());
                prop_assert!(rho <= bound + 64.0 * f64::EPSILON * nf.powf(1.5), "{rho} > {bound}");
            }
            TerminationReason::MaxIter => prop_assert_eq!(trace.iterations, cfg.max_iter),
        }
    }
}

#[test]
fn perturbed_starts_reach_the_same_maximizer() {
    let n = 128;
    let sigma = (n as f64).powf(0.25) / 936.0;
    for seed in 0..4 {
        let inst = build_instance::<f64>(n, sigma, seed, TruthMode::RandomPhases).unwrap();
        assert!(noise_stats(&inst).unwrap().assumptions.thm3_ok);
        let v = spectral_init(&inst.c, &Default::default()).unwrap().phases;
        let cfg = GpmConfig::default();
        let finals: Vec<_> = (0..3u64)
            .map(|k| {
                // tangent perturbation: rotate each entry by a small pseudo-random angle
                let z: Vec<Complex64> = v
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(j, x)| {
                        let t = ((j as u64 * 2654435761 + k * 40503) % 1000) as f64 / 1000.0 - 0.5;
                        x * Complex64::from_polar(1.0, 0.2 * PI * t)
                    })
                    .collect();
                let start = normalize_entrywise(&z, ZeroFill::UnitOne).unwrap();
                let trace = run_gpm(&inst, &start, &cfg).unwrap();
                assert!(trace.converged());
                trace.z_final
            })
            .collect();
        let plain = run_gpm_from(&inst, &v, InitOrigin::Spectral, &cfg)
            .unwrap()
            .z_final;
        for z in &finals {
            let d = dist_l2(z.as_slice(), plain.as_slice()).unwrap().value;
            assert!(d <= 1e-7 * (n as f64).sqrt(), "seed {seed}: {d}");
        }
    }
}
