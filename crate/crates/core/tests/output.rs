mod common;

use damplast_core::output::{read_run, read_timeseries, write_run, write_timeseries, TIMESERIES_COLUMNS, TIMESERIES_FILE};
use damplast_core::solver::run_evolution;
use damplast_core::StateFields;

#[test]
fn timeseries_has_one_row_per_state() {
    let (s, m) = common::canned("plate_2d.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(TIMESERIES_FILE);
    write_timeseries(&traj, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TIMESERIES_COLUMNS.join(","));
    assert_eq!(read_timeseries(&path).unwrap().len(), s.time.n_steps + 1);
}

#[test]
fn stored_runs_round_trip_bit_exactly() {
    let (s, m) = common::canned("bar_ramp.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&m, &traj, dir.path()).unwrap();
    let back = read_run(&m, dir.path()).unwrap();
    assert_eq!(back.len(), traj.len());
    for (a, b) in traj.records.iter().zip(&back.records) {
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.state, b.state);
        assert_eq!(a.energy, b.energy);
        assert_eq!(a.diss_cum.to_bits(), b.diss_cum.to_bits());
        assert_eq!(a.power_integral.to_bits(), b.power_integral.to_bits());
    }
}

#[test]
fn constant_trajectory_has_zero_increments() {
    let (s, m) = common::canned("activation.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &StateFields::sound(m.mesh())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(TIMESERIES_FILE);
    write_timeseries(&traj, &path).unwrap();
    for row in read_timeseries(&path).unwrap() {
        assert_eq!(row.diss_increment, 0.0);
        assert_eq!(row.diss_cum, 0.0);
        assert_eq!(row.min_chi, 1.0);
    }
}

#[test]
fn missing_snapshot_is_an_error() {
    let (s, m) = common::canned("tiny_bar.cfg");
    let traj = run_evolution(&m, &s.time, &s.solver, &s.initial_state(&m)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&m, &traj, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("snapshots/step_00002_d.csv")).unwrap();
    assert!(read_run(&m, dir.path()).is_err());
}
