use std::fs;
use std::path::Path;
use std::process::Command;

use z2metts::config::parse_toml;
use z2metts::experiments::run_eos;
use z2metts::output::OutDir;

const BIN: &str = env!("CARGO_BIN_EXE_z2metts");

fn z2metts(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const SMALL_EOS: &str = r#"
seed = 11
[eos]
L = 4
h_values = [0.0]
betas = [5.0]
walk = { s_w = 40, s_0 = 20 }
"#;

#[test]
fn eos_matches_exact_diagonalization_at_l4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_toml(SMALL_EOS).unwrap();
    let out = OutDir::create(tmp.path()).unwrap();
    let rows = run_eos(&cfg, &out).unwrap();
    assert_eq!(rows.len(), 81);
    for r in &rows {
        // chains are autocorrelated, so the per-walk (blocked) errors are the honest ones
        let tol_e = 3.0 * r.eps_blocked.stderr + 1e-9;
        let tol_n = 3.0 * r.n_blocked.stderr + 1e-9;
        assert!(
            (r.eps.mean - r.eps_ed).abs() <= tol_e,
            "eps at mu={}: {:?} vs {}",
            r.mu,
            r.eps_blocked,
            r.eps_ed
        );
        assert!(
            (r.n.mean - r.n_ed).abs() <= tol_n,
            "n at mu={}: {:?} vs {}",
            r.mu,
            r.n_blocked,
            r.n_ed
        );
        let (ef, nf) = r.free_fermion.unwrap();
        assert!((ef - r.eps_ed).abs() < 1e-10 && (nf - r.n_ed).abs() < 1e-10);
    }
}

#[test]
fn reruns_are_bitwise_identical_and_manifests_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "eos.toml", SMALL_EOS);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for dir in [&a, &b] {
        let o = z2metts(&["eos", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));

    let manifest = a.join("manifest.json");
    let o = z2metts(&[
        "eos",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&c));

    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["experiment"], "eos");
    assert_eq!(m["outputs"][0], "eos.csv");
    assert_eq!(m["config"]["seed"], 11);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "eos.toml", SMALL_EOS);
    let mut dirs = Vec::new();
    for w in ["1", "3"] {
        let d = tmp.path().join(w);
        let o = z2metts(&["eos", "--config", &cfg, "--workers", w, "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dirs.push(read_dir_sorted(&d));
    }
    assert_eq!(dirs[0], dirs[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "eos.toml", SMALL_EOS);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    z2metts(&["eos", "--config", &cfg, "--out", a.to_str().unwrap()]);
    let o = z2metts(&[
        "eos",
        "--config",
        &cfg,
        "--seed",
        "12",
        "--workers",
        "1",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_ne!(read_dir_sorted(&a), read_dir_sorted(&b));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 12);
    assert_eq!(m["config"]["workers"], 1);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("unknown.toml", "[eos]\nmu_stpe = 0.1\n"),
        ("syntax.toml", "[eos\n"),
        ("empty_grid.toml", "[eos]\nbetas = []\n"),
        ("bad_beta.toml", "[friedel]\nbetas = [-1.0]\n"),
        ("too_large.toml", "[ed-reference]\nL = 20\n"),
    ];
    for (name, body) in cases {
        let cfg = write(tmp.path(), name, body);
        let kind = if name.starts_with("bad") {
            "friedel"
        } else if name.starts_with("too") {
            "ed-reference"
        } else {
            "eos"
        };
        let o = z2metts(&[kind, "--config", &cfg, "--out", out]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    let o = z2metts(&["eos", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "stall.toml",
        "[avqite]\nthreshold = 1e-30\n[avqite-accuracy]\nL = 3\nbases = [\"x\"]\nbetas = [1.0]\nsamples = 1\n",
    );
    let out = tmp.path().join("out");
    let o = z2metts(&["avqite-accuracy", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ed_reference_writes_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ed.toml", "[ed-reference]\nL = 4\nbetas = [1.0]\n");
    let out = tmp.path().join("out");
    let o = z2metts(&["ed-reference", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("ed.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "h,mu,beta,eps,n,n_1,n_2,n_3,n_4");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let total: f64 = v[5..].iter().sum();
        assert!((total / 4.0 - v[4]).abs() < 1e-10);
    }
}

#[test]
fn shipped_configs_load_and_validate() {
    use z2metts::ExperimentKind;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for kind in [
        ExperimentKind::BasisStudy,
        ExperimentKind::Eos,
        ExperimentKind::Friedel,
        ExperimentKind::Strings,
        ExperimentKind::AvqiteAccuracy,
        ExperimentKind::Avqmetts,
        ExperimentKind::NcxScaling,
        ExperimentKind::EdReference,
    ] {
        let path = dir.join(format!("{}.toml", kind.name()));
        let cfg = z2metts::config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate(kind).unwrap();
        seen += 1;
    }
    assert_eq!(seen, fs::read_dir(&dir).unwrap().count());
}
