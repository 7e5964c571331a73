//! Frozen results of the reference experiment (seed 42, 250 crossings).

use std::fs;
use std::path::Path;

use pedhybrid::gap::ModelKind;
use pedhybrid::harness::{cmd_evaluate, cmd_simulate, cmd_train_gap, ExperimentConfig};
use pedhybrid::Error;

/// CV minus hybrid error on wait-then-cross episodes, at horizons 1..=6 s.
const ADE_MARGIN: [f64; 6] = [0.00036, 0.00123, 0.00252, 0.00380, 0.00521, 0.00696];
const FDE_MARGIN: [f64; 6] = [0.00076, 0.00335, 0.00602, 0.00820, 0.01182, 0.01584];
const RMSE_MARGIN: [f64; 6] = [0.00031, 0.00138, 0.00284, 0.00411, 0.00559, 0.00758];

fn reference_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().with_seed(42);
    cfg.sim.n_crossings = 250;
    cfg
}

fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 0.05 * want.abs() + 1e-5
}

#[test]
fn wait_then_cross_margins_are_frozen() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = reference_config();
    let ds = t.join("ds");
    let sim = cmd_simulate(&cfg, &ds).unwrap();
    assert_eq!(sim.summary.n_events, 1074);
    assert_eq!(sim.summary.accepted, 250);

    cmd_train_gap(&cfg, &ds, &[ModelKind::SvmPoly3], &t.join("tr")).unwrap();
    let out = cmd_evaluate(&cfg, &ds, &t.join("tr/model_svm_poly3.json"), &t.join("ev")).unwrap();
    let c = &out.wait_then_cross;
    assert_eq!(c.hybrid.len(), 6);
    for (i, (h, v)) in c.hybrid.iter().zip(&c.cv).enumerate() {
        let got = [v.ade - h.ade, v.fde - h.fde, v.rmse - h.rmse];
        let want = [ADE_MARGIN[i], FDE_MARGIN[i], RMSE_MARGIN[i]];
        for (g, w) in got.iter().zip(&want) {
            assert!(close(*g, *w), "{} s: margins {got:?}, frozen {want:?}", h.horizon_s);
        }
    }
}

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::default().with_seed(7);
    cfg.sim.n_crossings = 20;
    let ds = dir.join("ds");
    cmd_simulate(&cfg, &ds).unwrap();
    ds
}

fn relabel(ds: &Path, from: &str, to: &str) {
    let p = ds.join("gap_events.csv");
    let text = fs::read_to_string(&p).unwrap().replace(&format!(",{from}\n"), &format!(",{to}\n"));
    fs::write(p, text).unwrap();
}

#[test]
fn missing_dataset_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    let e = cmd_train_gap(&cfg, &tmp.path().join("none"), &ModelKind::ALL, &tmp.path().join("o")).unwrap_err();
    assert!(matches!(e, Error::Io { .. }), "{e:?}");
}

#[test]
fn single_label_events_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path());
    relabel(&ds, "accepted", "rejected");
    let e = cmd_train_gap(&ExperimentConfig::default(), &ds, &ModelKind::ALL, &tmp.path().join("o")).unwrap_err();
    assert!(matches!(e, Error::SingleClass(_) | Error::TooFewEvents { .. } | Error::Data(_)), "{e:?}");
}

#[test]
fn horizon_beyond_rollout_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path());
    let cfg = ExperimentConfig::default();
    cmd_train_gap(&cfg, &ds, &[ModelKind::Logistic], &tmp.path().join("tr")).unwrap();
    let bad = ExperimentConfig::from_json(r#"{"horizons": [1, 2, 60]}"#).unwrap();
    let model = tmp.path().join("tr/model_logistic.json");
    let e = cmd_evaluate(&bad, &ds, &model, &tmp.path().join("ev")).unwrap_err();
    assert!(matches!(e, Error::InvalidParameter { name: "horizons", .. }), "{e:?}");
}
