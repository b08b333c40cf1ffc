use vriesz_core::config::InitialCondition;
use vriesz_core::output::{read_snapshot, write_snapshot};
use vriesz_core::{run, RunConfig, Termination};

const CONFIG: &str = r#"
[kernel]
terms = [{ coefficient = 1.0, alpha = 0.5 }, { coefficient = 0.25, alpha = 2.0 }]

[grid]
d = 1
nx = 32
nv = 64
v_max = 8.0

[mode]
kind = "regularized"
eps = 0.1

[initial]
kind = "perturbed_maxwellian"
amplitude = 0.05
mode = [2]

[time]
dt = 0.05
t_final = 0.5

[diagnostics]
cadence = 3
sobolev = [{ k = 2, weight = 4.0 }]
rho = [1.5]
"#;

#[test]
fn toml_round_trip_preserves_config_and_hash() {
    let cfg = RunConfig::parse(CONFIG).unwrap();
    let again = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.hash(), again.hash());
    let mut other = cfg.clone();
    other.time.dt = 0.025;
    assert_ne!(cfg.hash(), other.hash());
}

#[test]
fn runs_are_bitwise_deterministic() {
    let cfg = RunConfig::parse(CONFIG).unwrap();
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.termination, Termination::Completed);
    assert_eq!(a.final_state.values, b.final_state.values);
    assert_eq!(a.rows, b.rows);
    // step 0, every third step, and the last
    let steps: Vec<usize> = a.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 3, 6, 9, 10]);
    assert!(a.history.iter().all(|h| h.sobolev(2, 4.0).is_some() && h.rho(1.5).is_some()));
}

#[test]
fn snapshot_restart_reproduces_a_continued_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = RunConfig::parse(CONFIG).unwrap();
    let mut half = full.clone();
    half.time.t_final = 0.25;
    let first = run(&half).unwrap();
    let snap = dir.path().join("half.bin");
    write_snapshot(&snap, &first.final_state, 0.25, &half.hash()).unwrap();
    assert_eq!(read_snapshot(&snap).unwrap().values, first.final_state.values);

    let mut rest = half.clone();
    rest.initial = InitialCondition::File { path: snap };
    let second = run(&rest).unwrap();
    assert_eq!(second.final_state.values, run(&full).unwrap().final_state.values);
}

#[test]
fn invalid_configs_are_rejected() {
    for (from, to) in [
        ("alpha = 0.5 }", "alpha = 0.0 }"),
        ("nx = 32", "nx = 31"),
        ("dt = 0.05", "dt = -0.05"),
        ("eps = 0.1", "eps = -0.1"),
        ("d = 1", "d = 3"),
    ] {
        let text = CONFIG.replacen(from, to, 1);
        let res = RunConfig::parse(&text).and_then(|c| c.validate().map(|_| c));
        assert!(res.is_err(), "{to} was accepted");
    }
    assert!(RunConfig::parse(&format!("{CONFIG}\nunknown = 1\n")).is_err());
}
