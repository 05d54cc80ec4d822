//! End-to-end checks of the `ptycho` binary: determinism of simulation,
//! audit output, ambiguity reports, reconstruction artifacts, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn ptycho(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptycho"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn ptycho")
}

fn stdout_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key}= in output:\n{text}"))
}

const SMALL_CONFIG: &str = "
geom.n = 16
geom.m = 8
pattern.kind = perturbed_separable
pattern.tau = 4
pattern.delta = explicit
pattern.delta1 = 0,1,-1,0
pattern.delta2 = 0,-1,1,0
object.kind = cib_like
object.seed = 5
probe.kind = random_phase
probe.seed = 6
os = 2
recon.max_epochs = 160
recon.inner_iters = 30
recon.tol_data = 1e-8
recon.seed = 7
out.dir = out
";

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.cfg"), SMALL_CONFIG).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let first = std::fs::read(dir.path().join("out/data.ptyd")).unwrap();
    let first_obj = std::fs::read(dir.path().join("out/object.ptyc")).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert!(out.status.success());
    let second = std::fs::read(dir.path().join("out/data.ptyd")).unwrap();
    let second_obj = std::fs::read(dir.path().join("out/object.ptyc")).unwrap();
    assert_eq!(first, second, "data files differ between identical runs");
    assert_eq!(first_obj, second_obj);
}

#[test]
fn simulate_rejects_bad_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_CONFIG.replace("pattern.tau = 4", "pattern.tau = 3");
    std::fs::write(dir.path().join("exp.cfg"), cfg).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn audit_raster_fails_coprime_and_perturbed_passes() {
    let dir = tempfile::tempdir().unwrap();
    let raster_cfg = "
        geom.n = 8
        geom.m = 4
        pattern.kind = raster
        pattern.tau = 2
    ";
    std::fs::write(dir.path().join("raster.cfg"), raster_cfg).unwrap();
    let out = ptycho(&["audit", "--config", "raster.cfg"], dir.path());
    assert!(out.status.success());
    let text = stdout_text(&out);
    assert_eq!(field(&text, "coprime_ok"), "false");

    let perturbed_cfg = "
        geom.n = 8
        geom.m = 6
        pattern.kind = perturbed_separable
        pattern.tau = 2
        pattern.delta = explicit
        pattern.delta1 = 0,0,-1,0
        pattern.delta2 = 0,0,-1,0
    ";
    std::fs::write(dir.path().join("perturbed.cfg"), perturbed_cfg).unwrap();
    let out = ptycho(&["audit", "--config", "perturbed.cfg"], dir.path());
    assert!(out.status.success());
    let text = stdout_text(&out);
    assert_eq!(field(&text, "coprime_ok"), "true");
    assert_eq!(field(&text, "a1"), "1,-2");

    // File-based audit of the same pattern.
    let out = ptycho(
        &["pattern", "perturbed.cfg", "pattern.txt"],
        dir.path(),
    );
    assert!(out.status.success());
    let out = ptycho(&["audit", "pattern.txt", "-m", "6"], dir.path());
    assert!(out.status.success());
    assert_eq!(field(&stdout_text(&out), "coprime_ok"), "true");
}

#[test]
fn audit_missing_file_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptycho(&["audit", "nope.txt", "-m", "4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ambiguity_classes_report_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let base = "
        geom.n = 12
        geom.m = 6
        pattern.kind = raster
        pattern.tau = 3
        object.kind = random_complex
        object.seed = 3
        probe.seed = 4
    ";
    for (name, extra) in [
        ("scaling", "ambiguity.class = scaling\nambiguity.c = 2.0\n"),
        (
            "affine",
            "ambiguity.class = affine\nambiguity.a = 0.2\nambiguity.b = -0.4\nambiguity.w1_units = 1\n",
        ),
        (
            "progression",
            "ambiguity.class = progression\nambiguity.theta00 = 0.5\nambiguity.r1_units = 1\nambiguity.r2_units = 1\n",
        ),
        (
            "pathology",
            "ambiguity.class = pathology\nambiguity.psi = random\nambiguity.psi_seed = 9\n",
        ),
    ] {
        let cfg = format!("{base}\nout.dir = out_{name}\n{extra}");
        let path = format!("{name}.cfg");
        std::fs::write(dir.path().join(&path), cfg).unwrap();
        let out = ptycho(&["ambiguity", &path], dir.path());
        assert!(out.status.success(), "{name}: {out:?}");
        let text = stdout_text(&out);
        assert_eq!(field(&text, "data_equivalent"), "true", "{name}: {text}");
        assert!(dir.path().join(format!("out_{name}/g.ptyc")).exists());
        assert!(dir.path().join(format!("out_{name}/nu.ptyc")).exists());
    }

    // Identity scaling: the constructed pair equals the truth pair.
    let cfg = format!(
        "{base}\nout.dir = out_id\nambiguity.class = scaling\nambiguity.c = 1.0\n"
    );
    std::fs::write(dir.path().join("id.cfg"), cfg).unwrap();
    let out = ptycho(&["ambiguity", "id.cfg"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let cfg_sim = format!("{base}\nout.dir = out_id\n");
    std::fs::write(dir.path().join("id_sim.cfg"), cfg_sim).unwrap();
    let out = ptycho(&["simulate", "id_sim.cfg"], dir.path());
    assert!(out.status.success());
    let g = ptycho_core::io::read_ptyc(&dir.path().join("out_id/g.ptyc")).unwrap();
    let f = ptycho_core::io::read_ptyc(&dir.path().join("out_id/object.ptyc")).unwrap();
    assert_eq!(g, f, "identity scaling must pass the object through");
    let nu = ptycho_core::io::read_ptyc(&dir.path().join("out_id/nu.ptyc")).unwrap();
    let mu = ptycho_core::io::read_ptyc(&dir.path().join("out_id/probe.ptyc")).unwrap();
    assert_eq!(nu, mu);

    // Over-shifted raster routes pathology to the 3x3 construction.
    let cfg = "
        geom.n = 12
        geom.m = 6
        pattern.kind = raster
        pattern.tau = 4
        object.kind = random_complex
        object.seed = 3
        probe.seed = 4
        out.dir = out_over
        ambiguity.class = pathology
        ambiguity.psi = random
        ambiguity.psi_seed = 11
        ambiguity.r1_units = 1
        ";
    std::fs::write(dir.path().join("over.cfg"), cfg).unwrap();
    let out = ptycho(&["ambiguity", "over.cfg"], dir.path());
    assert!(out.status.success(), "{out:?}");
    assert_eq!(field(&stdout_text(&out), "data_equivalent"), "true");
}

#[test]
fn reconstruct_writes_artifacts_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.cfg"), SMALL_CONFIG).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert!(out.status.success());
    let out = ptycho(&["reconstruct", "exp.cfg"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let text = stdout_text(&out);
    let residual: f64 = field(&text, "data_residual").parse().unwrap();
    assert!(residual < 1e-6, "residual = {residual}");
    let re_obj: f64 = field(&text, "re_object").parse().unwrap();
    assert!(re_obj < 1e-4, "re_object = {re_obj}");
    assert!(dir.path().join("out/f_est.ptyc").exists());
    assert!(dir.path().join("out/mu_est.ptyc").exists());

    // CSV re-runs agree modulo the wall-time column.
    let strip_wall = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    let first = strip_wall(&dir.path().join("out/convergence.csv"));
    let out = ptycho(&["reconstruct", "exp.cfg"], dir.path());
    assert!(out.status.success());
    let second = strip_wall(&dir.path().join("out/convergence.csv"));
    assert_eq!(first, second);
    assert!(first[0].starts_with("epoch,data_residual,RE_object,RE_probe"));
}

#[test]
fn reconstruct_corrupt_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.cfg"), SMALL_CONFIG).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert!(out.status.success());
    std::fs::write(dir.path().join("out/data.ptyd"), b"PTYD garbage\n").unwrap();
    let out = ptycho(&["reconstruct", "exp.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn reconstruct_nonconvergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // One epoch cannot reach 1e-10; require_tol turns that into exit code 1.
    let cfg = SMALL_CONFIG
        .replace("recon.max_epochs = 160", "recon.max_epochs = 1")
        .replace("recon.tol_data = 1e-8", "recon.tol_data = 1e-10")
        + "recon.require_tol = true\n";
    std::fs::write(dir.path().join("exp.cfg"), cfg).unwrap();
    let out = ptycho(&["simulate", "exp.cfg"], dir.path());
    assert!(out.status.success());
    let out = ptycho(&["reconstruct", "exp.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}
