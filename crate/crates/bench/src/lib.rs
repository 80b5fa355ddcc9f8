//! Fixtures shared by the benchmarks.

use damplast_core::scenario::Scenario;
use damplast_core::{Model, StateFields, SymTensor2};

/// Square plate on an `n`×`n` grid, clamped on the left and pulled on the
/// right.
pub fn plate(n: usize) -> Model {
    let text = format!(
        r#"
        [mesh]
        dim = 2
        extents = [1.0, 1.0]
        subdivisions = [{n}, {n}]
        dirichlet = ["left"]
        [material]
        lame_lambda = 0.5
        lame_mu = 0.5
        k_min = 0.3
        w = 0.04
        alpha = 0.05
        beta = 0.05
        w1_variant = "inhibit"
        mu_diss = 2.0
        nu_diss = 0.04
        subspace = "deviatoric"
        [loading]
        traction = [0.6, 0.0]
        traction_facets = ["right"]
        force_profile = {{ kind = "linear-ramp", t0 = 0.0, t1 = 1.0, amplitude = 1.0 }}
        [time]
        horizon = 1.0
        n_steps = 10
        "#
    );
    Scenario::from_toml_str(&text).expect("fixture scenario").build_model().expect("fixture model")
}

/// A smooth, partially damaged state with its equilibrium displacement at `t`.
pub fn damaged_state(model: &Model, t: f64) -> StateFields {
    let mut q = StateFields::sound(model.mesh());
    for i in 0..q.chi.len() {
        let x = model.mesh().coords(i);
        q.chi[i] = 0.6 + 0.4 * x[0] * x[1];
        q.d[i] = SymTensor2::from_components(2, &[0.05 * x[1], -0.05 * x[1], 0.02 * x[0]]).expect("2D tensor");
    }
    q.u = model.elastic_solve(t, &q.chi, &q.d).expect("elastic solve");
    q
}
