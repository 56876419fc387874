use segregation_core::engine::{stationarity, RunOptions};
use segregation_core::meanfield::find_fixed_points;
use segregation_core::{run_ensemble, run_simulation, ModelParams, Recording};

#[test]
fn attractions_are_stationary_late_in_a_run() {
    let params = ModelParams { horizon: 2000, ..ModelParams::default() }.with_temperature(0.29);
    let report = stationarity(&params, 20, 5, 1001..=1500, 1501..=2000);
    assert!(report.is_stationary(4.0), "{report:?}");
    assert!(report.late_mean.iter().all(|a| *a > 0.0));
}

#[test]
fn two_group_means_follow_the_mean_field_fixed_point() {
    let t = 0.5;
    let params = ModelParams { horizon: 2000, ..ModelParams::two_group() }.with_temperature(t);
    let fp = find_fixed_points(&params, t).unwrap();
    assert_eq!(fp.len(), 1);
    let target = fp[0].state.as_slice().to_vec();

    let opts = RunOptions { recording: Recording::Last(1000), ..Default::default() };
    let half = params.n_agents / 2;
    let (mut sums, mut n) = ([0.0; 2], 0.0);
    for run in 0..20 {
        let traj = run_simulation(&params, 9, run, opts);
        for rec in &traj.records {
            for (i, c) in rec.coords.iter().enumerate() {
                sums[usize::from(i >= half)] += c.delta_12;
            }
            n += half as f64;
        }
    }
    for g in 0..2 {
        let mean = sums[g] / n;
        assert!((mean - target[g]).abs() < 0.01, "group {g}: {mean} vs {}", target[g]);
    }
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let params = ModelParams { n_agents: 30, horizon: 300, ..ModelParams::default() };
    let opts = RunOptions { persistence: true, ..Default::default() };
    let parallel = run_ensemble(&params, 6, 3, opts, true);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| run_ensemble(&params, 6, 3, opts, true));
    assert_eq!(parallel, serial);
}
