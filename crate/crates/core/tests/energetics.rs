mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use damplast_core::energetics::{
    cleavage_reduction_check, diss_along, dissipation_distance, energy_balance_check, stability_check, stability_margin, verify_trajectory,
    CleavageSample, CompetitorSpec, DerivedConstants, EnergeticsError,
};
use damplast_core::solver::run_evolution;
use damplast_core::{Material, MaterialParams, Model, StateFields, SymTensor2};

fn random_state(m: &Model, seed: u64) -> StateFields {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = StateFields::sound(m.mesh());
    let dim = m.dim();
    for i in 0..q.chi.len() {
        q.chi[i] = rng.gen_range(0.0..=1.0);
        let mut d = SymTensor2::zeros(dim);
        for c in d.components_mut() {
            *c = rng.gen_range(-1.0..=1.0);
        }
        q.d[i] = d;
    }
    q
}

fn plate() -> Model {
    common::from_toml(
        r#"
        [mesh]
        dim = 2
        extents = [1.0, 1.0]
        subdivisions = [2, 2]
        dirichlet = ["left"]
        [material]
        lame_lambda = 0.5
        lame_mu = 0.5
        k_min = 0.2
        w = 0.1
        alpha = 0.05
        mu_diss = 1.3
        nu_diss = 0.4
        [time]
        horizon = 1.0
        n_steps = 1
        "#,
    )
    .1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dissipation_distance_is_a_quasi_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let m = plate();
        let (z1, z2, z3) = (random_state(&m, a), random_state(&m, b), random_state(&m, c));
        let d12 = dissipation_distance(&m, &z1, &z2).unwrap();
        let d23 = dissipation_distance(&m, &z2, &z3).unwrap();
        let d13 = dissipation_distance(&m, &z1, &z3).unwrap();
        prop_assert!(d12 >= 0.0);
        prop_assert_eq!(dissipation_distance(&m, &z1, &z1).unwrap(), 0.0);
        prop_assert!(d13 <= d12 + d23 + 1e-12 * (1.0 + d13.min(1e300)));
    }

    #[test]
    fn healing_costs_infinity_and_damaging_is_finite(a in any::<u64>(), s in 0.01..1.0f64) {
        let m = plate();
        let z = random_state(&m, a);
        let mut lower = z.clone();
        lower.chi.iter_mut().for_each(|c| *c *= 1.0 - s);
        prop_assert!(dissipation_distance(&m, &z, &lower).unwrap().is_finite());
        if z.chi.iter().any(|c| *c > 0.0) {
            prop_assert_eq!(dissipation_distance(&m, &lower, &z).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn dissipation_is_positively_homogeneous(a in any::<u64>(), s in 0.1..3.0f64) {
        let m = plate();
        let z = StateFields::sound(m.mesh());
        let mut step = random_state(&m, a);
        step.chi.iter_mut().for_each(|c| *c = 1.0 - 0.2 * *c);
        let mut scaled = step.clone();
        scaled.chi.iter_mut().for_each(|c| *c = 1.0 - s * (1.0 - *c) * 0.3);
        step.chi.iter_mut().for_each(|c| *c = 1.0 - 0.3 * (1.0 - *c));
        for (d, e) in scaled.d.iter_mut().zip(&step.d) {
            *d = e.scale(s);
        }
        let r1 = dissipation_distance(&m, &z, &step).unwrap();
        let rs = dissipation_distance(&m, &z, &scaled).unwrap();
        prop_assert!((rs - s * r1).abs() <= 1e-12 * (1.0 + rs));
    }
}

#[test]
fn margin_of_the_state_itself_is_zero() {
    let m = plate();
    let q = random_state(&m, 3);
    assert_eq!(stability_margin(&m, 0.5, &q, &q), 0.0);
}

#[test]
fn stability_report_covers_all_families() {
    let (s, m) = common::canned("tiny_bar.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let specs = CompetitorSpec::families(&s.verification);
    let last = traj.records.last().unwrap();
    let rep = stability_check(&m, last.t, &last.state, &specs, 1e-8).unwrap();
    assert_eq!(rep.evaluated + rep.skipped, 5 * s.verification.per_family);
    assert!(!rep.violated(), "{}", rep.min_margin);
    assert!(rep.evaluated >= 1000 && rep.min_margin >= -1e-6 * (1.0 + rep.energy.abs()));
    let again = stability_check(&m, last.t, &last.state, &specs, 1e-8).unwrap();
    assert_eq!(rep.min_margin, again.min_margin);
}

#[test]
fn diss_along_sums_consecutive_distances() {
    let (s, m) = common::canned("bar_ramp.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let n = traj.len() - 1;
    let whole = diss_along(&m, &traj, 0, n).unwrap();
    assert!(whole > 0.0);
    assert_eq!(diss_along(&m, &traj, 3, 3).unwrap(), 0.0);
    for mid in [1, n / 3, n / 2, n - 1] {
        let split = diss_along(&m, &traj, 0, mid).unwrap() + diss_along(&m, &traj, mid, n).unwrap();
        assert!((split - whole).abs() <= 1e-14 * whole, "{split} vs {whole}");
    }
    let by_hand: f64 = (1..=n)
        .map(|k| {
            m.dissipation(
                &traj.records[k - 1].state.chi,
                &traj.records[k - 1].state.d,
                &traj.records[k].state.chi,
                &traj.records[k].state.d,
            )
        })
        .sum();
    assert_eq!(by_hand, whole);
    assert!((traj.records[n].diss_cum - whole).abs() <= 1e-12 * whole);
    assert!(matches!(diss_along(&m, &traj, 4, 2), Err(EnergeticsError::Range { .. })));
    assert!(matches!(diss_along(&m, &traj, 0, n + 1), Err(EnergeticsError::Range { .. })));
}

#[test]
fn balance_gaps_bracket_zero() {
    let (s, m) = common::canned("plate_2d.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let rep = energy_balance_check(&m, &traj).unwrap();
    for st in &rep.steps {
        assert!(st.upper_gap <= 1e-9 * (1.0 + st.energy.abs()), "{st:?}");
        assert!(st.lower_gap >= -1e-9 * (1.0 + st.energy.abs()), "{st:?}");
    }
    let full = verify_trajectory(&m, &traj, &s.verification).unwrap();
    assert!(full.violations().is_empty(), "{:?}", full.violations());
}

#[test]
fn derived_constants_match_a_hand_computation() {
    // two unit elements, left end fixed, end traction 0.5 ramped to 3
    let (_, m) = common::from_toml(
        r#"
        [mesh]
        dim = 1
        extents = [2.0]
        subdivisions = [2]
        dirichlet = ["left"]
        [material]
        lame_lambda = 0.0
        lame_mu = 0.5
        k_min = 0.2
        w = 0.1
        alpha = 0.05
        mu_diss = 1.0
        nu_diss = 0.1
        quartic_weight = 0.5
        [loading]
        dirichlet_gradient = [0.4]
        dirichlet_profile = { kind = "constant", value = 1.0 }
        traction = [0.5]
        traction_facets = ["right"]
        force_profile = { kind = "linear-ramp", t0 = 0.0, t1 = 1.0, amplitude = 3.0 }
        [time]
        horizon = 1.0
        n_steps = 1
        "#,
    );
    let c = DerivedConstants::compute(&m, 1.0).unwrap();
    // ∫e² stiffness [[2, −1], [−1, 1]] has inverse [[1, 1], [1, 2]]; F₀ = (0, 0.5)
    let dual = (0.25f64 * 2.0).sqrt();
    let (cf, cf_rate) = (3.0 * dual, 3.0 * dual);
    let ed = 0.4 * 2f64.sqrt();
    let (k1, w_g, res) = (0.2, 0.5, 3f64.sqrt());
    let m_expected = cf * cf / k1 + cf * ed + cf * cf / (4.0 * w_g) + cf * res;
    let n_expected = cf_rate * cf_rate / k1 + cf_rate * cf_rate / (4.0 * w_g) + cf_rate * (ed + res);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + b.abs());
    assert!(close(c.k1, 0.2) && close(c.k2, 1.0), "{c:?}");
    assert!(close(c.c_f, cf) && close(c.c_f_rate, cf_rate), "{c:?}");
    assert!(close(c.e_d, ed) && c.e_d_rate == 0.0, "{c:?}");
    assert!(close(c.m, m_expected), "{} vs {m_expected}", c.m);
    assert!(close(c.c0, m_expected + n_expected / 3.0));
    assert_eq!(c.c1, 3.0);
    assert!(close(c.volume, 2.0));
    assert!(close(c.time_lipschitz(1.0), 3.0 * 3f64.exp() * (1.0 + c.c0)));
}

fn cleavage_material(dim: usize) -> Material {
    Material::new(
        MaterialParams {
            lame_lambda: 0.0,
            lame_mu: 0.5,
            k_min: 1.0,
            w: 0.1,
            alpha: 0.1,
            beta: 0.0,
            w1_variant: Default::default(),
            mu_diss: 1.0,
            nu_diss: 0.1,
            q: 2.0,
            quartic_weight: 1.0,
            subspace: Default::default(),
            k_set: Default::default(),
        },
        dim,
    )
}

#[test]
fn cleavage_density_examples() {
    let mat = cleavage_material(2);
    let e = SymTensor2::identity(2);
    assert_eq!(mat.elastic_density(0.0, &e, &e).unwrap(), 0.0);
    assert!((mat.elastic_density(1.0, &e, &e).unwrap() - 1.0).abs() < 1e-15);
    assert!((mat.elastic_density(0.5, &e, &e).unwrap() - 0.25).abs() < 1e-15);
    let samples = [0.0, 0.5, 1.0].map(|chi| CleavageSample { chi, strain: e });
    let rep = cleavage_reduction_check(&mat, &samples, 21).unwrap();
    assert!(rep.passed(1e-12), "{rep:?}");
}

#[test]
fn cleavage_requires_identity_stiffness() {
    let mut p = cleavage_material(1).params().clone();
    p.k_min = 1e-8;
    let mat = Material::new(p, 1);
    let s = [CleavageSample { chi: 0.5, strain: SymTensor2::identity(1) }];
    assert!(matches!(cleavage_reduction_check(&mat, &s, 11), Err(EnergeticsError::Configuration(_))));
}

#[test]
fn step_partition_attains_the_supremum_over_sub_partitions() {
    let (s, m) = common::canned("simplified_bar.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    // a three-step window in which damage and plastic strain both move
    let k = (1..traj.len() - 3)
        .find(|&k| {
            let a = &traj.records[k].state;
            let b = &traj.records[k + 3].state;
            a.chi != b.chi && a.d != b.d
        })
        .expect("an evolving window");
    let toy = damplast_core::solver::Trajectory { records: traj.records[k..k + 4].to_vec() };
    let full = diss_along(&m, &toy, 0, 3).unwrap();
    let mut best: f64 = 0.0;
    for mask in 0..4u32 {
        let mut points = vec![0];
        points.extend((1..3).filter(|i| mask & (1 << (i - 1)) != 0));
        points.push(3);
        let sum: f64 =
            points.windows(2).map(|w| dissipation_distance(&m, &toy.records[w[0]].state, &toy.records[w[1]].state).unwrap()).sum();
        assert!(sum <= full * (1.0 + 1e-14), "{points:?}: {sum} > {full}");
        best = best.max(sum);
    }
    assert!((best - full).abs() <= 1e-15 * full, "{best} vs {full}");
}

#[test]
fn single_step_dissipation_matches_the_lumped_formula() {
    let m = plate();
    let z0 = random_state(&m, 9);
    let mut z1 = z0.clone();
    let mass = m.mesh().lumped_mass().to_vec();
    let mut expected = 0.0;
    for (i, m_i) in mass.iter().enumerate() {
        let dc = 0.1 * z0.chi[i];
        z1.chi[i] -= dc;
        let dd = SymTensor2::from_components(2, &[0.01 * i as f64, -0.02, 0.03]).unwrap();
        z1.d[i] = z0.d[i] + dd;
        expected += m_i * (0.4 * dc + 1.3 * dd.norm());
    }
    let got = dissipation_distance(&m, &z0, &z1).unwrap();
    assert!((got - expected).abs() <= 1e-14 * expected, "{got} vs {expected}");
    let one = damplast_core::solver::Trajectory::default();
    assert!(diss_along(&m, &one, 0, 0).is_err());
}

#[test]
fn healing_competitors_have_infinite_margin() {
    let m = plate();
    let mut q = random_state(&m, 4);
    q.chi.iter_mut().for_each(|c| *c *= 0.5);
    q.u = m.elastic_solve(0.3, &q.chi, &q.d).unwrap();
    let mut healed = q.clone();
    healed.chi[2] += 0.1;
    assert_eq!(stability_margin(&m, 0.3, &q, &healed), f64::INFINITY);
}

#[test]
fn constant_loading_gives_zero_balance_gap() {
    let (s, m) = common::from_toml(
        r#"
        [mesh]
        dim = 2
        extents = [1.0, 1.0]
        subdivisions = [2, 2]
        dirichlet = ["left"]
        [material]
        lame_lambda = 0.5
        lame_mu = 0.5
        k_min = 0.3
        w = 0.5
        alpha = 0.05
        mu_diss = 3.0
        nu_diss = 0.5
        [loading]
        traction = [0.1, 0.05]
        traction_facets = ["right"]
        force_profile = { kind = "constant", value = 1.0 }
        [time]
        horizon = 1.0
        n_steps = 6
        "#,
    );
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let rep = energy_balance_check(&m, &traj).unwrap();
    for st in &rep.steps {
        assert!(st.upper_gap.abs() <= 1e-12 && st.lower_gap.abs() <= 1e-12, "{st:?}");
        assert_eq!(st.diss_cum, 0.0);
    }
}
