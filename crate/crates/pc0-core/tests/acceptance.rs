//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them). The two desk-scale grids are
//! computed once and shared across criteria.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pc0_core::decoder::{run_trial, TrialOptions};
use pc0_core::disorder::{generate_sample, Model, Prob, RngPolicy};
use pc0_core::fixtures;
use pc0_core::lattice::{
    boundary, classify_homology, classify_homology_with_cuts, LatticeSpec, MAX_DIM,
};
use pc0_core::matcher::{brute_force_matching, min_weight_perfect_matching};
use pc0_core::montecarlo::{estimate_pfail, PfailPoint};
use pc0_core::scaling::{
    fit_corrected, fit_quadratic, slope_exponent, synthetic_points, AnsatzParams, Parity,
};

const SAMPLES_PER_POINT: u64 = 10_000;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn prob(micro: u32) -> Prob {
    Prob::from_micro(micro).unwrap()
}

fn grid_points(model: Model, sizes: &[usize], p_micro: (u32, u32, u32), seed: u64) -> Vec<PfailPoint> {
    let mut out = Vec::new();
    for &l in sizes {
        let mut micro = p_micro.0;
        while micro <= p_micro.1 {
            out.push(estimate_pfail(model, l, prob(micro), SAMPLES_PER_POINT, seed).unwrap());
            micro += p_micro.2;
        }
    }
    out
}

fn grid_2d() -> &'static [PfailPoint] {
    static GRID: OnceLock<Vec<PfailPoint>> = OnceLock::new();
    GRID.get_or_init(|| {
        grid_points(
            Model::Rbim2d,
            &[8, 12, 16, 24],
            (95_000, 115_000, 2_000),
            20_2406,
        )
    })
}

fn grid_3d() -> &'static [PfailPoint] {
    static GRID: OnceLock<Vec<PfailPoint>> = OnceLock::new();
    GRID.get_or_init(|| {
        grid_points(
            Model::Rpgm3d,
            &[6, 8, 10, 12],
            (24_000, 35_000, 1_000),
            30_2406,
        )
    })
}

#[test]
fn c01_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut checked = 0u32;
    let mut mismatches = 0u32;
    for model in [Model::Rbim2d, Model::Rpgm3d] {
        for instance in 0..500u64 {
            let l = rng.random_range(4..=8usize);
            let spec = model.lattice(l).unwrap();
            let defects = fixtures::random_defect_set(&spec, 6, &mut rng);
            let fast = min_weight_perfect_matching(&defects, &spec, instance).unwrap();
            let slow = brute_force_matching(&defects, &spec).unwrap();
            checked += 1;
            if fast.total_weight() != slow.matching.total_weight() {
                mismatches += 1;
            }
        }
    }
    report(
        1,
        "oracle equivalence",
        mismatches == 0 && checked == 1000,
        &format!("{checked} instances, {mismatches} mismatches"),
    );
}

#[test]
fn c02_homology_invariance_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let specs = [
        LatticeSpec::new(2, 4).unwrap(),
        LatticeSpec::new(2, 5).unwrap(),
        LatticeSpec::new(2, 6).unwrap(),
        LatticeSpec::new(3, 3).unwrap(),
        LatticeSpec::new(3, 4).unwrap(),
    ];
    let pick = |rng: &mut ChaCha8Rng| specs[rng.random_range(0..specs.len())];
    let mut violations = 0u32;

    // cut-position independence
    for _ in 0..10_000 {
        let spec = pick(&mut rng);
        let (cycle, expected) = fixtures::random_cycle(&spec, &mut rng);
        let axis = rng.random_range(0..spec.dimension());
        let offset = rng.random_range(0..spec.length());
        let mut cuts = [spec.length() - 1; MAX_DIM];
        cuts[axis] = offset;
        let class = classify_homology_with_cuts(&cycle, &spec, &cuts).unwrap();
        if class != expected || classify_homology(&cycle, &spec).unwrap() != expected {
            violations += 1;
        }
    }
    // XOR additivity of classes
    for _ in 0..10_000 {
        let spec = pick(&mut rng);
        let (c1, k1) = fixtures::random_cycle(&spec, &mut rng);
        let (c2, k2) = fixtures::random_cycle(&spec, &mut rng);
        if classify_homology(&c1.sum(&c2), &spec).unwrap() != k1.xor(&k2) {
            violations += 1;
        }
    }
    // even boundary cardinality
    for _ in 0..10_000 {
        let spec = pick(&mut rng);
        let chain = fixtures::random_chain(&spec, 0.25, &mut rng);
        if boundary(&chain, &spec).unwrap().len() % 2 != 0 {
            violations += 1;
        }
    }
    // boundary of a sum is the symmetric difference of boundaries
    for _ in 0..10_000 {
        let spec = pick(&mut rng);
        let c1 = fixtures::random_chain(&spec, 0.2, &mut rng);
        let c2 = fixtures::random_chain(&spec, 0.2, &mut rng);
        let lhs = boundary(&c1.sum(&c2), &spec).unwrap();
        let rhs = boundary(&c1, &spec)
            .unwrap()
            .sym_diff(&boundary(&c2, &spec).unwrap());
        if lhs != rhs {
            violations += 1;
        }
    }
    report(
        2,
        "homology invariance suite",
        violations == 0,
        &format!("4 x 10^4 randomized cases, {violations} violations"),
    );
}

#[test]
fn c03_crossing_2d() {
    let fit = fit_quadratic(grid_2d(), Parity::All).unwrap();
    let pc0 = fit.p_c0.value;
    report(
        3,
        "2D desk-scale crossing",
        (0.099..=0.107).contains(&pc0),
        &format!(
            "fit_quadratic pooled: p_c0 = {:.5} +- {:.5} (window [0.099, 0.107]), chi2/dof = {:.1}/{}",
            pc0, fit.p_c0.one_sigma, fit.chi2, fit.dof
        ),
    );
}

#[test]
fn c04_exponent_2d() {
    let fit = fit_quadratic(grid_2d(), Parity::All).unwrap();
    let se = slope_exponent(grid_2d(), fit.p_c0.value).unwrap();
    let fit_ok = (1.2..=1.7).contains(&fit.nu0.value);
    let slope_ok = (1.2..=1.7).contains(&se.nu0);
    report(
        4,
        "2D exponent",
        fit_ok && slope_ok,
        &format!(
            "fit nu0 = {:.3} +- {:.3}, slope-exponent nu0 = {:.3} +- {:.3} (window [1.2, 1.7])",
            fit.nu0.value, fit.nu0.one_sigma, se.nu0, se.error
        ),
    );
}

#[test]
fn c05_crossing_and_exponent_3d() {
    let fit = fit_quadratic(grid_3d(), Parity::All).unwrap();
    let pc0 = fit.p_c0.value;
    let nu0 = fit.nu0.value;
    let pc0_ok = (0.026..=0.032).contains(&pc0);
    let nu0_ok = (0.8..=1.2).contains(&nu0);
    report(
        5,
        "3D desk-scale crossing and exponent",
        pc0_ok && nu0_ok,
        &format!(
            "p_c0 = {:.5} +- {:.5} (window [0.026, 0.032]), nu0 = {:.3} +- {:.3} (window [0.8, 1.2])",
            pc0, fit.p_c0.one_sigma, nu0, fit.nu0.one_sigma
        ),
    );
}

#[test]
fn c06_rigorous_lower_bounds() {
    let fit2 = fit_quadratic(grid_2d(), Parity::All).unwrap();
    let fit3 = fit_quadratic(grid_3d(), Parity::All).unwrap();
    let ok2 = fit2.p_c0.value > 0.0373;
    let ok3 = fit3.p_c0.value > 0.0114;
    report(
        6,
        "rigorous lower bounds",
        ok2 && ok3,
        &format!(
            "2D p_c0 = {:.5} > 0.0373: {ok2}; 3D p_c0 = {:.5} > 0.0114: {ok3}",
            fit2.p_c0.value, fit3.p_c0.value
        ),
    );
}

#[test]
fn c07_supercritical_asymptotes() {
    let p2 = estimate_pfail(Model::Rbim2d, 16, prob(150_000), SAMPLES_PER_POINT, 777).unwrap();
    let p3 = estimate_pfail(Model::Rpgm3d, 10, prob(60_000), SAMPLES_PER_POINT, 777).unwrap();
    let ok2 = (p2.pfail - 0.75).abs() <= 0.05;
    let ok3 = (p3.pfail - 0.875).abs() <= 0.10;
    report(
        7,
        "supercritical asymptotes",
        ok2 && ok3,
        &format!(
            "2D L=16 p=0.15: pfail = {:.4} (3/4 +- 0.05); 3D L=10 p=0.06: pfail = {:.4} (7/8 +- 0.10)",
            p2.pfail, p3.pfail
        ),
    );
}

#[test]
fn c08_determinism_across_worker_counts() {
    let cases = [
        (Model::Rbim2d, 8usize, 103_000u32),
        (Model::Rbim2d, 12, 99_000),
        (Model::Rpgm3d, 6, 29_000),
    ];
    let mut all_equal = true;
    let mut detail = String::new();
    for (model, l, micro) in cases {
        let counts: Vec<u64> = [1usize, 2, 4]
            .iter()
            .map(|&threads| {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .unwrap();
                pool.install(|| {
                    estimate_pfail(model, l, prob(micro), 2_000, 4242).unwrap().n_fail
                })
            })
            .collect();
        let equal = counts.windows(2).all(|w| w[0] == w[1]);
        all_equal &= equal;
        detail.push_str(&format!("{model} L={l}: n_fail {:?}; ", counts));
    }
    report(
        8,
        "determinism across worker counts",
        all_equal,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn c09_fit_self_consistency() {
    let sizes = [8usize, 12, 16, 24, 32];
    let ps: Vec<Prob> = (95_000..=115_000)
        .step_by(2_000)
        .map(|m| prob(m as u32))
        .collect();
    let plain = AnsatzParams {
        a: 0.3,
        b: 5.0,
        c: 8.0,
        p_c0: 0.103,
        nu0: 1.46,
        correction: None,
    };
    let corrected = AnsatzParams {
        correction: Some((0.165, 0.71)),
        ..plain
    };

    // zero-noise recovery for both ansaetze
    let mut max_rel: f64 = 0.0;
    {
        let pts = synthetic_points(Model::Rbim2d, &plain, &sizes, &ps, 0.005, None);
        let fit = fit_quadratic(&pts, Parity::Even).unwrap();
        for (got, want) in [
            (fit.a.value, 0.3),
            (fit.b.value, 5.0),
            (fit.c.value, 8.0),
            (fit.p_c0.value, 0.103),
            (fit.nu0.value, 1.46),
        ] {
            max_rel = max_rel.max((got - want).abs() / want);
        }
        let pts = synthetic_points(Model::Rbim2d, &corrected, &sizes, &ps, 0.005, None);
        let fit = fit_corrected(&pts, Parity::Even).unwrap();
        for (got, want) in [
            (fit.a.value, 0.3),
            (fit.b.value, 5.0),
            (fit.c.value, 8.0),
            (fit.p_c0.value, 0.103),
            (fit.nu0.value, 1.46),
            (fit.d.as_ref().unwrap().value, 0.165),
            (fit.mu.as_ref().unwrap().value, 0.71),
        ] {
            max_rel = max_rel.max((got - want).abs() / want);
        }
    }

    // noisy coverage: p_c0 within 2 quoted sigmas in >= 90% of replicas
    let mut covered = 0u32;
    let replicas = 100u32;
    for r in 0..replicas {
        let pts = synthetic_points(
            Model::Rbim2d,
            &plain,
            &sizes,
            &ps,
            0.005,
            Some(9000 + r as u64),
        );
        let fit = fit_quadratic(&pts, Parity::Even).unwrap();
        if (fit.p_c0.value - 0.103).abs() <= 2.0 * fit.p_c0.one_sigma {
            covered += 1;
        }
    }
    let pass = max_rel <= 1e-3 && covered >= 90;
    report(
        9,
        "fit self-consistency",
        pass,
        &format!(
            "zero-noise max relative error = {max_rel:.2e} (<= 1e-3); noisy coverage {covered}/{replicas} (>= 90)"
        ),
    );
}

#[test]
fn c10_p_zero_exactness() {
    let mut failures = 0u64;
    let mut trials = 0u64;
    for (model, sizes) in [
        (Model::Rbim2d, vec![8usize, 12, 16, 24]),
        (Model::Rpgm3d, vec![6, 8, 10, 12]),
    ] {
        for l in sizes {
            let spec = model.lattice(l).unwrap();
            let rng = RngPolicy::new(10_101);
            for i in 0..1_000u64 {
                let t = run_trial(&spec, model, Prob::ZERO, i, &rng, &TrialOptions::default())
                    .unwrap();
                trials += 1;
                failures += !t.success as u64;
                // the sample itself must be empty at p = 0
                debug_assert!(generate_sample(&spec, model, Prob::ZERO, i, &rng)
                    .unwrap()
                    .error_chain
                    .is_empty());
            }
        }
    }
    report(
        10,
        "p=0 exactness",
        failures == 0,
        &format!("{trials} trials at p=0, {failures} failures"),
    );
}
