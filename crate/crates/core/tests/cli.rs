use std::path::Path;
use std::process::{Command, Output};

use neurofront::config::RunConfig;
use neurofront::pipeline::run_pipeline;

fn neurofront(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurofront"))
        .args(args)
        .current_dir(cwd)
        .env("NEUROFRONT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_with_two_and_name_every_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sim]\ndt = 0.0\n[grid]\nn = 8\n").unwrap();
    let o = neurofront(&["gap", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("sim.dt"));
    assert!(stderr(&o).contains("grid.n"));

    std::fs::write(&cfg, "[sim]\nstep = 1e-3\n").unwrap();
    let o = neurofront(&["gap", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = neurofront(&["gap", "--sim.dt", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sim.dt"));
}

#[test]
fn relaxation_below_projection_constant_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = neurofront(&["gap", "--sim.m", "1.0", "--grid.n", "256"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = neurofront(&["pipeline", "--dir", "out", "--sim.m=1.0", "--grid.n=256"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    // nothing past the gap stage
    assert!(dir.path().join("out/front.csv").exists());
    assert!(!dir.path().join("out/stability.json").exists());
}

#[test]
fn gap_certificate_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let o = neurofront(&["gap", "--grid.n", "256"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["kappa_star"].as_f64().unwrap() > 0.0);
    assert!(v["C_star"].as_f64().unwrap() < v["m"].as_f64().unwrap());
    assert_eq!(v["shifts"].as_array().unwrap().len(), 5);
}

#[test]
fn path_subcommands_write_series_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--grid.n", "256", "--sim.t_end", "0.5", "--seed", "4"];
    let mut args = vec!["simulate", "--out", "sim.csv", "--output.snapshot_stride", "100"];
    args.extend_from_slice(&common);
    let o = neurofront(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(csv.starts_with("t,C,norm_v,norm_tilde_v,norm_tilde_v_eps\n"));
    assert_eq!(csv.lines().count(), 502);
    assert!(dir.path().join("sim_snapshots.csv").exists());

    let mut args = vec!["decompose", "--out", "dec.csv", "--epsilon", "1e-3"];
    args.extend_from_slice(&common);
    let o = neurofront(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("dec.json")).unwrap()).unwrap();
    assert_eq!(side["epsilon"].as_f64(), Some(1e-3));
    assert!(side["consistency_residual"].as_f64().unwrap() < 1e-2);
    assert!(side["z_bound"]["bound_ok"].as_bool().unwrap());

    let o = neurofront(&["decompose", "--epsilon", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn front_subcommand_reports_speed() {
    let dir = tempfile::tempdir().unwrap();
    let o = neurofront(&["front", "--out", "f/front.csv", "--firing.theta", "0.5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("f/front.json")).unwrap()).unwrap();
    assert!(side["c"].as_f64().unwrap().abs() < 1e-6);
    assert!(side["residual_norm"].as_f64().unwrap() < 1e-8);
}

#[test]
fn pipeline_reruns_reproduce_all_digests() {
    let cfg = RunConfig::from_toml_str("[grid]\nn = 256\n[sim]\nt_end = 0.5\n[mc]\nn_paths = 3\n", &[]).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_pipeline(&cfg, a.path(), 1).unwrap();
    let mb = run_pipeline(&cfg, b.path(), 2).unwrap();
    assert_eq!(ma.config_sha256, mb.config_sha256);
    assert_eq!(ma.digests(), mb.digests());
    assert_eq!(ma.digests().len(), 7);
    let other = RunConfig::from_toml_str("[grid]\nn = 256\n[sim]\nt_end = 0.5\n[mc]\nn_paths = 3\nbase_seed = 5\n", &[]).unwrap();
    let c = tempfile::tempdir().unwrap();
    let mc = run_pipeline(&other, c.path(), 1).unwrap();
    assert_ne!(ma.config_sha256, mc.config_sha256);
    let stab = |m: &neurofront::pipeline::RunManifest| m.outputs["stability"][0].sha256.clone();
    assert_ne!(stab(&ma), stab(&mc));
}
