use damplast_core::scenario::{Scenario, ScenarioError};

const BASE: &str = r#"
[mesh]
dim = 2
extents = [1.0, 1.0]
subdivisions = [2, 2]
dirichlet = ["left"]

[material]
lame_lambda = 0.5
lame_mu = 0.5
k_min = 0.5
w = 0.1
alpha = 0.05
mu_diss = 1.0
nu_diss = 0.1
q = 2.0
k_set = { kind = "frobenius-ball", radius = 1.0 }

[loading]
traction = [0.1, 0.0]
traction_facets = ["right"]
force_profile = { kind = "linear-ramp", t0 = 0.0, t1 = 1.0, amplitude = 1.0 }

[time]
horizon = 1.0
n_steps = 4
"#;

fn validation(text: &str) -> Vec<String> {
    match Scenario::from_toml_str(text) {
        Err(ScenarioError::Validation(v)) => v,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn base_fixture_is_valid() {
    Scenario::from_toml_str(BASE).unwrap().build_model().unwrap();
}

#[test]
fn every_rule_has_a_rejecting_fixture() {
    let cases = [
        ("q = 2.0", "q = 0.9", "growth condition"),
        ("q = 2.0", "q = 4.5", "growth condition"),
        ("k_min = 0.5", "k_min = 0.0", "k_min"),
        ("k_min = 0.5", "k_min = 1.2", "k_min"),
        ("lame_mu = 0.5", "lame_mu = 0.0", "lame_mu"),
        ("lame_lambda = 0.5", "lame_lambda = -2.0", "d*lame_lambda + 2*lame_mu"),
        ("mu_diss = 1.0", "mu_diss = 0.0", "mu_diss"),
        ("nu_diss = 0.1", "nu_diss = -0.1", "nu_diss"),
        ("w = 0.1", "w = 0.0", "w = 0"),
        ("alpha = 0.05", "alpha = 0.0", "alpha"),
        ("q = 2.0", "q = 2.0\nbeta = -1.0", "beta"),
        ("q = 2.0", "q = 2.0\nquartic_weight = 0.0", "quartic_weight"),
        ("radius = 1.0", "radius = 0.0", "radius"),
        ("dirichlet = [\"left\"]", "dirichlet = []", "Dirichlet boundary must be nonempty"),
        ("subdivisions = [2, 2]", "subdivisions = [2, 0]", "subdivisions"),
        ("extents = [1.0, 1.0]", "extents = [1.0, -1.0]", "extents"),
        ("dim = 2", "dim = 3", "not supported"),
        ("t0 = 0.0, t1 = 1.0", "t0 = 1.0, t1 = 0.5", "t1 > t0"),
        ("traction = [0.1, 0.0]", "traction = [0.1]", "loading.traction"),
        ("n_steps = 4", "n_steps = 0", "n_steps"),
        ("n_steps = 4", "n_steps = 4\n[initial]\nchi = 1.5", "initial.chi"),
        ("n_steps = 4", "n_steps = 4\n[initial]\nd = [2.0, 0.0, 0.0]", "outside K"),
        ("n_steps = 4", "n_steps = 4\n[solver]\nam_tol = 0.0", "am_tol"),
        ("n_steps = 4", "n_steps = 4\n[verification]\nper_family = 0", "per_family"),
        ("n_steps = 4", "n_steps = 4\n[oracle]\nlevels = 1", "oracle.levels"),
    ];
    for (from, to, needle) in cases {
        assert!(BASE.contains(from), "fixture lacks {from}");
        let v = validation(&BASE.replacen(from, to, 1));
        assert!(v.iter().any(|m| m.contains(needle)), "{to}: {v:?}");
    }
}

#[test]
fn deviatoric_initial_strain_must_be_traceless() {
    let text = BASE.replace("q = 2.0", "q = 2.0\nsubspace = \"deviatoric\"") + "[initial]\nd = [0.2, 0.1, 0.0]\n";
    assert!(validation(&text).iter().any(|m| m.contains("subspace")));
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [BASE.replace("w = 0.1", "w = 0.1\ncolour = 3"), BASE.to_string() + "[extras]\nx = 1\n"] {
        assert!(matches!(Scenario::from_toml_str(&text), Err(ScenarioError::Parse(_))));
    }
}

#[test]
fn violations_are_aggregated() {
    let text = BASE.replace("k_min = 0.5", "k_min = 0.0").replace("alpha = 0.05", "alpha = -1.0").replace("n_steps = 4", "n_steps = 0");
    assert_eq!(validation(&text).len(), 3);
}

#[test]
fn serialization_round_trips() {
    let s = Scenario::from_toml_str(BASE).unwrap();
    let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
    assert_eq!(s, again);
    assert_eq!(again.to_toml_string(), s.to_toml_string());
}
