use ssns_core::criteria::{certify, endpoint_monitor};
use ssns_core::snapshot::{read_snapshot, write_snapshot, SnapshotData};
use ssns_core::solver::simulate;
use ssns_core::{CutoffRule, Diagnostics, Error, Fft3, SolverConfig, Variant};

const CONFIG: &str = "\
# small decaying run
n = 16
nu = 0.1
dt = 0.002
t_end = 0.1
sample_every = 10
init = random_div_free
seed = 5
";

#[test]
fn config_text_round_trips() {
    let c = SolverConfig::parse(CONFIG).unwrap();
    assert_eq!((c.n, c.seed, c.sample_every), (16, 5, 10));
    assert_eq!(SolverConfig::parse(&c.to_string()).unwrap(), c);
}

#[test]
fn config_errors_name_the_key() {
    for (text, key) in [
        (format!("{CONFIG}bogus = 1\n"), "bogus"),
        (CONFIG.replace("n = 16", "n = 12.5"), "n"),
        (CONFIG.replace("t_end = 0.1", "t_end = 0.1001"), "t_end"),
        (CONFIG.replace("init = random_div_free", "init = vortex"), "init"),
        (CONFIG.replace("dt = 0.002\n", ""), "dt"),
    ] {
        match SolverConfig::parse(&text) {
            Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("expected config error for {key}, got {other:?}"),
        }
    }
}

#[test]
fn simulate_snapshot_and_certify() {
    let config = SolverConfig::parse(CONFIG).unwrap();
    let log = simulate(&config).unwrap();
    assert_eq!(log.samples.len(), 6);
    assert_eq!(log.snapshots.len(), 6);
    assert!(log.samples.windows(2).all(|w| w[1].energy <= w[0].energy));
    assert_eq!(log.to_csv().lines().count(), 7);

    let fft = Fft3::new(&log.grid);
    let last = log.snapshots.last().unwrap();
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &SnapshotData::velocity(last.t, &last.u, &fft)).unwrap();
    let back = read_snapshot(bytes.as_slice()).unwrap();
    assert_eq!(back.time, last.t);
    let mut diff = back.to_velocity(&fft).unwrap();
    diff.add_scaled(&last.u, -1.0);
    assert!(diff.l2_sq().sqrt() <= 1e-12 * last.u.l2_sq().sqrt());

    let diag = Diagnostics::from_log(&log);
    let c = certify(&diag, Variant::Strain, 2.0, 3.0, &CutoffRule::AllInLq).unwrap();
    assert_eq!(c.times.len(), 6);
    assert!(c.passes(), "{:?}", c.first_violation());
    let e = endpoint_monitor(&diag, Variant::Strain, &CutoffRule::median()).unwrap();
    assert_eq!(e.times.len(), 6);
}

#[test]
fn truncated_snapshot_is_rejected() {
    let config = SolverConfig::parse(&CONFIG.replace("t_end = 0.1", "t_end = 0")).unwrap();
    let log = simulate(&config).unwrap();
    let fft = Fft3::new(&log.grid);
    let s = &log.snapshots[0];
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &SnapshotData::velocity(s.t, &s.u, &fft)).unwrap();
    bytes.truncate(bytes.len() - 8);
    assert!(read_snapshot(bytes.as_slice()).is_err());
    bytes[0] = b'X';
    assert!(read_snapshot(bytes.as_slice()).is_err());
}
