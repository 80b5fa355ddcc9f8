mod common;

use damplast_core::oracle::{oracle_minimize, OracleError};
use damplast_core::scenario::OracleConfig;
use damplast_core::solver::incremental_step;
use damplast_core::StateFields;

const ONE_ELEMENT: &str = r#"
[mesh]
dim = 1
extents = [1.0]
subdivisions = [1]
dirichlet = ["left"]

[material]
lame_lambda = 0.0
lame_mu = 0.5
k_min = 0.3
w = 0.05
alpha = 0.02
mu_diss = 1.5
nu_diss = 0.02

[loading]
traction = [0.8]
traction_facets = ["right"]
force_profile = { kind = "linear-ramp", t0 = 0.0, t1 = 1.0, amplitude = 1.0 }

[time]
horizon = 1.0
n_steps = 1
"#;

fn start(m: &damplast_core::Model) -> StateFields {
    let mut q = StateFields::sound(m.mesh());
    q.u = m.elastic_solve(0.0, &q.chi, &q.d).unwrap();
    q
}

#[test]
fn zero_loading_keeps_the_previous_state() {
    let text = ONE_ELEMENT.replace("traction = [0.8]", "traction = [0.0]").replace("mu_diss = 1.5", "mu_diss = 5.0");
    let (_, m) = common::from_toml(&text);
    let prev = start(&m);
    let r = oracle_minimize(&m, 1.0, &prev, &OracleConfig { levels: 9, rounds: 2, d_radius: 1.0 }).unwrap();
    assert_eq!(r.state.chi, prev.chi);
    assert_eq!(r.state.d, prev.d);
    let e = m.assemble_energy(1.0, &r.state).unwrap().total;
    assert!((r.objective - e).abs() <= 1e-12 * (1.0 + e.abs()));
}

#[test]
fn size_guard_rejects_large_instances() {
    let (s, m) = common::canned("plate_2d.cfg");
    let prev = start(&m);
    assert!(matches!(oracle_minimize(&m, 0.1, &prev, &s.oracle), Err(OracleError::TooLarge { .. })));
    let (_, small) = common::from_toml(ONE_ELEMENT);
    let prev = start(&small);
    let cfg = OracleConfig { levels: 23, rounds: 0, d_radius: 1.0 };
    assert!(matches!(oracle_minimize(&small, 0.1, &prev, &cfg), Err(OracleError::TooLarge { .. })));
}

#[test]
fn refining_nested_grids_never_increases_the_minimum() {
    let (_, m) = common::from_toml(ONE_ELEMENT);
    let prev = start(&m);
    let coarse = oracle_minimize(&m, 1.0, &prev, &OracleConfig { levels: 11, rounds: 0, d_radius: 1.0 }).unwrap();
    let fine = oracle_minimize(&m, 1.0, &prev, &OracleConfig { levels: 21, rounds: 0, d_radius: 1.0 }).unwrap();
    assert!(fine.objective <= coarse.objective, "{} > {}", fine.objective, coarse.objective);
}

#[test]
fn results_are_deterministic() {
    let (_, m) = common::from_toml(ONE_ELEMENT);
    let prev = start(&m);
    let cfg = OracleConfig { levels: 7, rounds: 4, d_radius: 1.0 };
    let a = oracle_minimize(&m, 1.0, &prev, &cfg).unwrap();
    let b = oracle_minimize(&m, 1.0, &prev, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn matches_the_incremental_solver_on_a_moderate_increment() {
    let (s, m) = common::from_toml(ONE_ELEMENT);
    let prev = start(&m);
    let am = incremental_step(&m, 0.5, &prev, &s.solver).unwrap();
    let or = oracle_minimize(&m, 0.5, &prev, &s.oracle).unwrap();
    assert!(am.state.chi[0] < 1.0, "no damage at this load");
    assert!(
        (am.objective - or.objective).abs() <= or.quantization_gap.max(1e-6),
        "{} vs {} ({:?} / {:?})",
        am.objective,
        or.objective,
        am.state,
        or.state
    );
    assert!(am.objective <= or.objective + 1e-9);
}
