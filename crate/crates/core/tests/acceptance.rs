//! Acceptance suite: one test per quantitative gate, each printing a
//! PASS line (visible with `--nocapture`) after its assertions hold.
//!
//! Run with `cargo test --test acceptance -- --nocapture`.

use rabinovich_core::field::{assemble_rhs, unperturbed_rhs, Mode, PerturbationSpec, ScalarField};
use rabinovich_core::integrator::{integrate, IntegratorConfig, Termination};
use rabinovich_core::linalg::Vec3;
use rabinovich_core::orbit::{
    detect_period, monodromy, probe_period, solve_fiber_point, unperturbed_field, Orbit,
    PeriodProbe, FIBER_TOL,
};
use rabinovich_core::rabinovich::{
    self, classify_equilibrium, explicit_perturbed_rhs, fiber_seed, make_context,
    matching_regions, Family, LevelPair, Stability, SystemParams,
};
use rabinovich_core::report::{
    dist_to_orbit, lyapunov_rate_check, run_experiment, ExperimentSpec, Verdict,
};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn pass(tag: &str, detail: String) {
    println!("[PASS] {tag}: {detail}");
}

fn tight() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-14)
}

fn reference_orbit(cfg: &IntegratorConfig) -> Orbit {
    let p = SystemParams::new(1.0);
    let fp = solve_fiber_point(LevelPair::new(0.0, 2.0), p, Vec3::new(0.0, 1.7, 0.7)).unwrap();
    detect_period(&fp, p, cfg).unwrap()
}

/// Unit offset direction that changes H while staying tangent to the
/// Casimir leaf: grad C x (grad H x grad C).
fn off_energy_direction(u: Vec3, p: SystemParams) -> Vec3 {
    let gh = rabinovich::grad_hamiltonian(u, p);
    let gc = rabinovich::grad_casimir(u);
    gc.cross(gh.cross(gc)).unit().unwrap()
}

/// Unit offset direction that changes C while staying tangent to the
/// energy leaf: grad H x (grad H x grad C).
fn off_casimir_direction(u: Vec3, p: SystemParams) -> Vec3 {
    let gh = rabinovich::grad_hamiltonian(u, p);
    let gc = rabinovich::grad_casimir(u);
    gh.cross(gh.cross(gc)).unit().unwrap()
}

#[test]
fn criterion_01_transcription_oracle() {
    let mut rng = StdRng::seed_from_u64(20260808);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = SystemParams::new(rng.gen_range(-2.0..2.0));
        let ctx = make_context(p);
        let u = Vec3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let h = rng.gen_range(-3.0..3.0);
        let c = rng.gen_range(-3.0..3.0);
        let gain_a = ScalarField::constant(rng.gen_range(0.1..2.0));
        let gain_b = ScalarField::constant(rng.gen_range(0.1..2.0));
        for spec in [
            PerturbationSpec::casimir_leaf_stabilize(h, gain_a.clone()),
            PerturbationSpec::casimir_leaf_destabilize(h, gain_a.clone()),
            PerturbationSpec::energy_leaf_stabilize(c, gain_b.clone()),
            PerturbationSpec::energy_leaf_destabilize(c, gain_b.clone()),
            PerturbationSpec::full(h, c, gain_a.clone(), gain_b.clone()),
        ] {
            let assembled = assemble_rhs(&spec, &ctx).unwrap().eval(u);
            let explicit = explicit_perturbed_rhs(u, p, &spec).unwrap();
            let scale = assembled.norm_inf().max(explicit.norm_inf()).max(1.0);
            let rel = (assembled - explicit).norm_inf() / scale;
            worst = worst.max(rel);
            assert!(
                rel <= 1e-10,
                "mode {:?} at {u}, beta {}: rel err {rel:.3e}",
                spec.mode,
                p.beta
            );
        }
    }
    pass(
        "criterion 01 transcription oracle",
        format!("5 modes x 1e4 states, worst relative error {worst:.3e} <= 1e-10"),
    );
}

#[test]
fn criterion_02_conservation() {
    let p = SystemParams::new(1.0);
    let fp = solve_fiber_point(LevelPair::new(0.0, 2.0), p, Vec3::new(0.0, 1.7, 0.7)).unwrap();
    let field = unperturbed_field(p);
    let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
    let traj = integrate(&field, fp.state, 50.0, &cfg).unwrap();
    assert_eq!(traj.termination(), Termination::Completed);
    let h0 = traj.first().energy;
    let c0 = traj.first().casimir;
    let mut dh_max = 0.0f64;
    let mut dc_max = 0.0f64;
    for s in traj.samples() {
        dh_max = dh_max.max((s.energy - h0).abs());
        dc_max = dc_max.max((s.casimir - c0).abs());
    }
    assert!(dh_max <= 1e-8, "|dH| = {dh_max:.3e}");
    assert!(dc_max <= 1e-8, "|dC| = {dc_max:.3e}");
    pass(
        "criterion 02 conservation",
        format!("t = 50 at rtol 1e-10: |dH| = {dh_max:.2e}, |dC| = {dc_max:.2e} <= 1e-8"),
    );
}

#[test]
fn criterion_03_casimir_leaf_stabilize() {
    let p = SystemParams::new(1.0);
    let orbit = reference_orbit(&tight());
    let base = orbit.samples[0];
    let offset = off_energy_direction(base, p) * 0.15;
    let ex = ExperimentSpec {
        params: p,
        perturbation: PerturbationSpec::casimir_leaf_stabilize(0.0, ScalarField::constant(1.0)),
        orbit,
        offset,
        t_end: 200.0,
        cfg: IntegratorConfig::default(),
    };
    let (record, _) = run_experiment(&ex).unwrap();

    let dev0 = record.energy_sq_dev[0];
    assert!(dev0 > 1e-3, "start should be well off the target leaf, dev0 = {dev0:.3e}");
    for w in record.energy_sq_dev.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "(H-h)^2 grew: {} -> {}", w[0], w[1]);
    }
    let final_dev = record.energy_sq_dev.last().unwrap().sqrt();
    assert!(final_dev < 1e-6, "|H - h| at t = 200: {final_dev:.3e}");
    assert!(record.drift_c <= 1e-7, "Casimir drift {:.3e}", record.drift_c);
    pass(
        "criterion 03 casimir-leaf stabilization",
        format!(
            "(H-h)^2 non-increasing from {dev0:.2e}; final |H-h| = {final_dev:.2e} < 1e-6; \
             Casimir drift {:.2e} <= 1e-7",
            record.drift_c
        ),
    );
}

#[test]
fn criterion_04_energy_leaf_stabilize() {
    let p = SystemParams::new(1.0);
    let orbit = reference_orbit(&tight());
    let base = orbit.samples[0];
    let offset = off_casimir_direction(base, p) * 0.15;
    let ex = ExperimentSpec {
        params: p,
        perturbation: PerturbationSpec::energy_leaf_stabilize(2.0, ScalarField::constant(1.0)),
        orbit,
        offset,
        t_end: 200.0,
        cfg: IntegratorConfig::default(),
    };
    let (record, _) = run_experiment(&ex).unwrap();

    let dev0 = record.casimir_sq_dev[0];
    assert!(dev0 > 1e-3, "start should be well off the target leaf, dev0 = {dev0:.3e}");
    for w in record.casimir_sq_dev.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "(C-c)^2 grew: {} -> {}", w[0], w[1]);
    }
    let final_dev = record.casimir_sq_dev.last().unwrap().sqrt();
    assert!(final_dev < 1e-6, "|C - c| at t = 200: {final_dev:.3e}");
    assert!(record.drift_h <= 1e-7, "energy drift {:.3e}", record.drift_h);
    pass(
        "criterion 04 energy-leaf stabilization",
        format!(
            "(C-c)^2 non-increasing from {dev0:.2e}; final |C-c| = {final_dev:.2e} < 1e-6; \
             energy drift {:.2e} <= 1e-7",
            record.drift_h
        ),
    );
}

#[test]
fn criterion_05_destabilizing_modes() {
    let p = SystemParams::new(1.0);
    let orbit = reference_orbit(&tight());
    let offset = Vec3::new(1.0, 1.0, 1.0).unit().unwrap() * 1e-3;

    let runs = [
        (
            PerturbationSpec::casimir_leaf_destabilize(0.0, ScalarField::constant(1.0)),
            "casimir-leaf destabilize",
        ),
        (
            PerturbationSpec::energy_leaf_destabilize(2.0, ScalarField::constant(1.0)),
            "energy-leaf destabilize",
        ),
    ];
    let mut summaries = Vec::new();
    for (spec, name) in runs {
        let mode = spec.mode;
        let ex = ExperimentSpec {
            params: p,
            perturbation: spec,
            orbit: orbit.clone(),
            offset,
            t_end: 10.0,
            cfg: IntegratorConfig::default(),
        };
        let (record, verdict) = run_experiment(&ex).unwrap();
        let dev = if mode == Mode::CasimirLeafDestabilize {
            &record.energy_sq_dev
        } else {
            &record.casimir_sq_dev
        };
        let t_last = *record.t.last().unwrap();
        assert!(t_last <= 10.0);
        for w in dev.windows(2) {
            assert!(
                w[1] >= w[0] * (1.0 - 1e-10),
                "{name}: squared deviation fell: {} -> {}",
                w[0],
                w[1]
            );
        }
        let growth = dev.last().unwrap() / dev.first().unwrap();
        assert!(growth > 1e2, "{name}: growth factor only {growth:.3e}");
        // the trajectory must actually leave the orbit's neighborhood;
        // blow-up (a DIVERGED verdict) is one way that happens, capture by
        // a leaf equilibrium far from the orbit is another
        let final_dist = record.final_dist();
        assert!(
            final_dist > 0.5,
            "{name}: trajectory stayed near the orbit, dist = {final_dist:.3e}"
        );
        assert_ne!(verdict, Verdict::ConvergedToOrbit, "{name}");
        summaries.push(format!(
            "{name}: deviation x{growth:.1e} by t = {t_last:.2} ({verdict:?})"
        ));
    }

    // Floquet certificate of instability for the destabilized orbit. The
    // gain is kept moderate here: over one period the transverse expansion
    // factor is exp(gain * int |grad H x grad C|^2 dt), and beyond roughly
    // 1e6 the base point's own fiber residual is amplified past the orbit
    // shadowing limit, so no forward integration could close the orbit.
    let ctx = make_context(p);
    let spec = PerturbationSpec::casimir_leaf_destabilize(0.0, ScalarField::constant(0.1));
    let field = assemble_rhs(&spec, &ctx).unwrap();
    let result = monodromy(&orbit, &field, &tight()).unwrap();
    let lam_max = result.multipliers[0].norm();
    assert!(lam_max > 1.0 + 1e-3, "|lambda|max = {lam_max:.6}");
    summaries.push(format!("unstable multiplier |lambda| = {lam_max:.3e}"));

    pass("criterion 05 destabilizing modes", summaries.join("; "));
}

#[test]
fn criterion_06_full_mode_converges_with_floquet_certificate() {
    let p = SystemParams::new(1.0);
    let orbit = reference_orbit(&tight());
    let spec = PerturbationSpec::full(
        0.0,
        2.0,
        ScalarField::constant(1.0),
        ScalarField::constant(1.0),
    );
    let ex = ExperimentSpec {
        params: p,
        perturbation: spec.clone(),
        orbit: orbit.clone(),
        offset: Vec3::new(0.05, 0.05, 0.05),
        t_end: 300.0,
        cfg: IntegratorConfig::default(),
    };
    let (record, verdict) = run_experiment(&ex).unwrap();
    let final_dist = record.final_dist();
    assert_eq!(verdict, Verdict::ConvergedToOrbit);
    assert!(final_dist < 1e-4, "final dist {final_dist:.3e}");

    let ctx = make_context(p);
    let field = assemble_rhs(&spec, &ctx).unwrap();
    let result = monodromy(&orbit, &field, &tight()).unwrap();
    let mut mults: Vec<Complex64> = result.multipliers.to_vec();
    // trivial multiplier: the one closest to 1
    mults.sort_by(|a, b| {
        (a - 1.0).norm().partial_cmp(&(b - 1.0).norm()).unwrap()
    });
    let trivial = mults[0];
    assert!(
        (trivial - Complex64::new(1.0, 0.0)).norm() <= 1e-3,
        "trivial multiplier {trivial}"
    );
    for lam in &mults[1..] {
        assert!(lam.norm() <= 1.0 - 1e-3, "nontrivial multiplier {lam}");
    }
    pass(
        "criterion 06 full-mode stabilization",
        format!(
            "dist(u, orbit) = {final_dist:.2e} < 1e-4 at t = 300; trivial multiplier off by \
             {:.1e}; contracting multipliers |lambda| <= {:.1e}",
            (trivial - Complex64::new(1.0, 0.0)).norm(),
            mults[1..].iter().map(|l| l.norm()).fold(0.0, f64::max)
        ),
    );
}

#[test]
fn criterion_07_unperturbed_floquet_spectrum() {
    let p = SystemParams::new(1.0);
    let orbit = reference_orbit(&tight());
    let field = unperturbed_field(p);
    let result = monodromy(&orbit, &field, &tight()).unwrap();
    let mut worst = 0.0f64;
    for lam in result.multipliers {
        let err = (lam - Complex64::new(1.0, 0.0)).norm();
        worst = worst.max(err);
        assert!(err <= 1e-3, "multiplier {lam}");
    }
    let div_consistency = (result.det - result.div_integral.exp()).abs();
    assert!(
        div_consistency <= 1e-4,
        "det {} vs exp(int div) {}",
        result.det,
        result.div_integral.exp()
    );
    assert!((result.det - 1.0).abs() <= 1e-4, "det = {}", result.det);
    pass(
        "criterion 07 unperturbed Floquet spectrum",
        format!(
            "all multipliers within {worst:.2e} of 1; det(M) = {:.8} matches exp(int div) \
             within {div_consistency:.2e}",
            result.det
        ),
    );
}

#[test]
fn criterion_08_period_limits() {
    let p = SystemParams::new(1.0);

    let probe_axis = PeriodProbe::near_axis_equilibrium(2.0, p, 1e-3);
    let expected_axis = probe_axis.expected_period.unwrap();
    let orbit_axis = probe_period(&probe_axis, p, &tight()).unwrap();
    let rel_axis = (orbit_axis.period - expected_axis).abs() / expected_axis;
    assert!(rel_axis < 0.02, "axis probe: T = {}, limit = {expected_axis}", orbit_axis.period);

    let probe_plane = PeriodProbe::near_plane_equilibrium(3.0, p, 1e-3);
    let expected_plane = probe_plane.expected_period.unwrap();
    let orbit_plane = probe_period(&probe_plane, p, &tight()).unwrap();
    let rel_plane =
        (orbit_plane.period - expected_plane).abs() / expected_plane;
    assert!(
        rel_plane < 0.02,
        "plane probe: T = {}, limit = {expected_plane}",
        orbit_plane.period
    );

    pass(
        "criterion 08 period limits",
        format!(
            "T(0,0,2) = {:.6} vs 2pi/sqrt(3) = {expected_axis:.6} ({:.3}%); \
             T(3,0,1) = {:.6} vs 2pi/3 = {expected_plane:.6} ({:.3}%)",
            orbit_axis.period,
            100.0 * rel_axis,
            orbit_plane.period,
            100.0 * rel_plane
        ),
    );
}

#[test]
fn criterion_09_equilibrium_verdict_table() {
    use Family::*;
    use Stability::*;
    // (beta, family, m, expected stability); z-axis points report E3
    let table: [(f64, Family, f64, Stability); 30] = [
        (1.0, E1, -2.0, NonlinearlyStable),
        (1.0, E1, -0.5, NonlinearlyStable),
        (1.0, E1, 0.5, NonlinearlyStable),
        (1.0, E1, 2.0, NonlinearlyStable),
        (1.0, E1, 7.0, NonlinearlyStable),
        (1.0, E2, -2.0, Unstable),
        (1.0, E2, -0.5, Unstable),
        (1.0, E2, 0.5, Unstable),
        (1.0, E2, 2.0, Unstable),
        (1.0, E3, -2.0, NonlinearlyStable),
        (1.0, E3, -1.0, Unstable),
        (1.0, E3, -0.5, Unstable),
        (1.0, E3, 0.0, Unstable),
        (1.0, E3, 0.5, Unstable),
        (1.0, E3, 1.0, Unstable),
        (1.0, E3, 2.0, NonlinearlyStable),
        (0.0, E1, -3.0, NonlinearlyStable),
        (0.0, E1, -0.5, NonlinearlyStable),
        (0.0, E1, 0.5, NonlinearlyStable),
        (0.0, E1, 3.0, NonlinearlyStable),
        (0.0, E2, -3.0, Unstable),
        (0.0, E2, -0.5, Unstable),
        (0.0, E2, 0.5, Unstable),
        (0.0, E2, 3.0, Unstable),
        (0.0, E3, -3.0, NonlinearlyStable),
        (0.0, E3, -0.5, NonlinearlyStable),
        (0.0, E3, 0.0, NonlinearlyStable),
        (0.0, E3, 0.5, NonlinearlyStable),
        (0.0, E3, 1.0, NonlinearlyStable),
        (0.0, E3, 3.0, NonlinearlyStable),
    ];
    let mut mismatches = 0;
    for (beta, family, m, expected) in table {
        let p = SystemParams::new(beta);
        let point = rabinovich::equilibrium_point(family, m, p);
        assert_eq!(unperturbed_rhs(point, &make_context(p)), Vec3::ZERO);
        let verdict = classify_equilibrium(point, p).unwrap();
        if verdict.stability != expected || verdict.family != family || verdict.m != m {
            eprintln!("mismatch: beta={beta} {family:?} m={m}: got {verdict:?}");
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
    pass(
        "criterion 09 equilibrium verdicts",
        "30-case table across all families, both signs of M, beta in {0, 1}: 0 mismatches"
            .to_string(),
    );
}

#[test]
fn criterion_10_region_atlas() {
    let n = 400;
    let mut cells = 0usize;
    let mut listed_cells = 0usize;
    let mut violations = 0usize;
    let mut worst_residual = 0.0f64;
    for beta in [0.0, 1.0, 2.0] {
        let p = SystemParams::new(beta);
        for i in 0..n {
            for j in 0..n {
                let h = -5.0 + 10.0 * i as f64 / (n - 1) as f64;
                let c = -5.0 + 10.0 * j as f64 / (n - 1) as f64;
                let lp = LevelPair::new(h, c);
                cells += 1;
                let matches = matching_regions(lp, p);
                if matches.len() > 1 {
                    violations += 1;
                    continue;
                }
                if let Some(region) = matches.first() {
                    assert!(region.is_listed());
                    listed_cells += 1;
                    let seed = fiber_seed(lp, p).unwrap_or_else(|| {
                        panic!("no seed for listed cell ({h}, {c}) beta {beta} {region:?}")
                    });
                    let fp = solve_fiber_point(lp, p, seed).unwrap_or_else(|e| {
                        panic!("fiber solve failed at ({h}, {c}) beta {beta}: {e}")
                    });
                    let res = fp.residual_h.max(fp.residual_c);
                    worst_residual = worst_residual.max(res);
                    assert!(res <= FIBER_TOL);
                }
            }
        }
    }
    assert_eq!(violations, 0);
    assert!(listed_cells > 100_000, "listed cells: {listed_cells}");
    pass(
        "criterion 10 region atlas",
        format!(
            "{cells} cells over beta in {{0, 1, 2}}: 0 disjointness violations; \
             {listed_cells} listed cells all carry fiber points, worst residual \
             {worst_residual:.2e} <= 1e-10"
        ),
    );
}

#[test]
fn criterion_11_decay_rate_identity_with_tripwire() {
    let p = SystemParams::new(1.0);
    let ctx = make_context(p);
    let orbit = reference_orbit(&tight());
    let spec = PerturbationSpec::full(
        0.0,
        2.0,
        ScalarField::constant(1.0),
        ScalarField::constant(1.0),
    );
    let field = assemble_rhs(&spec, &ctx).unwrap();
    let start = orbit.samples[0] + Vec3::new(0.05, 0.05, 0.05);
    let traj = integrate(&field, start, 0.3, &tight()).unwrap();

    let report = lyapunov_rate_check(&traj, &ctx, &spec).unwrap();
    let energy = report.energy.unwrap();
    let casimir = report.casimir.unwrap();
    assert!(energy.n_checked > 1000 && casimir.n_checked > 1000);
    assert!(energy.median_rel_err <= 1e-5, "H median {:.3e}", energy.median_rel_err);
    assert!(casimir.median_rel_err <= 1e-5, "C median {:.3e}", casimir.median_rel_err);

    // regression tripwire: evaluating the same trajectory against flipped
    // sign conventions must fail the check by a wide margin
    let flipped_h = PerturbationSpec { mode: Mode::CasimirLeafDestabilize, ..spec.clone() };
    let flipped_c = PerturbationSpec { mode: Mode::EnergyLeafDestabilize, ..spec.clone() };
    let bad_h = lyapunov_rate_check(&traj, &ctx, &flipped_h).unwrap();
    let bad_c = lyapunov_rate_check(&traj, &ctx, &flipped_c).unwrap();
    assert!(bad_h.energy.unwrap().median_rel_err > 0.5);
    assert!(bad_c.casimir.unwrap().median_rel_err > 0.5);

    pass(
        "criterion 11 decay-rate identity",
        format!(
            "median relative error: dH/dt {:.2e}, dC/dt {:.2e} (<= 1e-5); \
             sign-flipped check fails at {:.2}",
            energy.median_rel_err,
            casimir.median_rel_err,
            bad_h.energy.unwrap().median_rel_err
        ),
    );
}

/// Shared sanity anchor for the suite: the reference orbit itself.
#[test]
fn reference_orbit_is_well_formed() {
    let orbit = reference_orbit(&tight());
    assert_eq!(orbit.samples.len(), 256);
    assert!(orbit.max_fiber_residual() <= 1e-7);
    let d0 = dist_to_orbit(orbit.samples[0], &orbit);
    assert_eq!(d0, 0.0);
}
