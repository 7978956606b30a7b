use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_hjlab");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn hjlab(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HJLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Constant rates `b = 0.5`, `d = 1`, `p = 0.25` and a tent initial exponent.
const TENT: &str = r#"
[model]
ln_k = 3.0
x_min = -3.0
x_max = 3.0
kernel = { kind = "gaussian", sigma = 1.0 }

[model.rates]
birth = { kind = "constant", value = 0.5 }
death = { kind = "constant", value = 1.0 }
mutation = 0.25
birth_bound = 0.5
death_bound = 1.0

[initial]
u0 = { kind = "tent", peak = 1.0, slope = 1.0 }

[run]
t_end = 1.0
observations = [0.0, 0.5, 1.0]
replicates = 20
base_seed = 9
"#;

/// The same rates with a flat initial exponent, which has no linear decay at
/// infinity and so fails the subcritical initial-data check.
fn flat() -> String {
    TENT.replace(
        r#"u0 = { kind = "tent", peak = 1.0, slope = 1.0 }"#,
        r#"u0 = { kind = "constant", value = 1.0 }"#,
    )
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn out_dir(dir: &TempDir) -> String {
    dir.path().join("out").to_str().unwrap().to_string()
}

/// Data rows of a CSV written by the tool (provenance comment and header skipped).
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn provenance_hash(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["record"], "provenance");
    first["config"].as_str().unwrap().to_string()
}

#[test]
fn demo_configuration_passes_its_check() {
    let dir = TempDir::new().unwrap();
    let config = configs().join("subcritical_demo.toml");
    let out = hjlab(&["check", config.to_str().unwrap(), "--out", &out_dir(&dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let verdict = stdout.lines().last().unwrap();
    assert!(verdict.contains("\"passed\":true"), "{verdict}");
    assert!(dir.path().join("out/check.jsonl").exists());
    assert!(dir.path().join("out/check.config.toml").exists());
}

#[test]
fn growing_rates_fail_a_subcritical_declaration() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "regime = \"subcritical\"\n{}",
        TENT.replace("value = 0.5", "value = 1.0")
            .replace("birth_bound = 0.5", "birth_bound = 1.0")
    );
    let config = write_config(&dir, "growing.toml", &text);
    let out = hjlab(&["check", &config, "--out", &out_dir(&dir)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("assumption check failed"));

    // Other commands refuse to run, unless forced.
    assert_eq!(code(&hjlab(&["mean", &config, "--out", &out_dir(&dir)])), 2);
    let forced = hjlab(&["mean", &config, "--out", &out_dir(&dir), "--force"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
}

#[test]
fn coarse_mesh_is_an_assumption_failure() {
    let dir = TempDir::new().unwrap();
    let text = TENT.replace(
        "ln_k = 3.0",
        "ln_k = 3.0\nmesh = { rule = \"fixed\", delta = 0.5 }",
    );
    let config = write_config(&dir, "coarse.toml", &text);
    let out = hjlab(&["check", &config, "--out", &out_dir(&dir)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "bogus.toml", &format!("{TENT}\n[bogus]\nx = 1\n"));
    assert_eq!(code(&hjlab(&["check", &config])), 1);
    let both = write_config(
        &dir,
        "both.toml",
        &TENT.replace("ln_k = 3.0", "ln_k = 3.0\nk = 20.0"),
    );
    assert_eq!(code(&hjlab(&["check", &both])), 1);
    assert_eq!(code(&hjlab(&["frobnicate"])), 1);
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&hjlab(&["check", missing.to_str().unwrap()])), 4);
}

#[test]
fn capacity_may_be_given_directly() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "k.toml", &TENT.replace("ln_k = 3.0", "k = 20.0"));
    let out = hjlab(&["check", &config, "--out", &out_dir(&dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn flat_exponent_decays_at_the_hamiltonian_rate() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "flat.toml", &flat());
    let refused = hjlab(&["mean", &config, "--out", &out_dir(&dir)]);
    assert_eq!(code(&refused), 2, "{}", stderr(&refused));
    assert!(stderr(&refused).contains("B-1"));
    let out = hjlab(&["mean", &config, "--out", &out_dir(&dir), "--force"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("out/mean.csv"));
    assert!(!rows.is_empty());
    let mut seen = 0;
    for row in &rows {
        let (t, x, u): (f64, f64, f64) = (
            row[0].parse().unwrap(),
            row[3].parse().unwrap(),
            row[5].parse().unwrap(),
        );
        if x.abs() < 0.5 {
            // Far from the window edges u = u0 + (b - d + p) t.
            assert!((u - (1.0 - 0.25 * t)).abs() < 1e-3, "t = {t}, x = {x}: {u}");
            seen += 1;
        }
    }
    assert!(seen > 0);
    assert!(dir.path().join("out/bounds.jsonl").exists());
}

#[test]
fn simulation_is_reproducible_and_verifiable() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "tent.toml",
        &TENT
            .replace("x_min = -3.0", "x_min = -0.5")
            .replace("x_max = 3.0", "x_max = 0.5"),
    );
    let out = out_dir(&dir);
    assert_eq!(code(&hjlab(&["simulate", &config, "--out", &out])), 0);
    let moments = dir.path().join("out/moments.csv");
    let first = std::fs::read(&moments).unwrap();
    assert_eq!(
        code(&hjlab(&[
            "simulate",
            &config,
            "--out",
            &out,
            "--workers",
            "1"
        ])),
        0
    );
    assert_eq!(std::fs::read(&moments).unwrap(), first);

    let verified = hjlab(&["simulate", &config, "--out", &out, "--verify"]);
    assert_eq!(code(&verified), 0, "{}", stderr(&verified));
    assert!(stderr(&verified).contains("verified"));

    let other_seed = hjlab(&[
        "simulate", &config, "--out", &out, "--verify", "--seed", "10",
    ]);
    assert_eq!(code(&other_seed), 1, "{}", stderr(&other_seed));
    assert!(stderr(&other_seed).contains("differs"));
}

#[test]
fn written_configuration_round_trips() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "tent.toml", TENT);
    let first = dir.path().join("first");
    assert_eq!(
        code(&hjlab(&[
            "check",
            &config,
            "--out",
            first.to_str().unwrap()
        ])),
        0
    );
    let echoed = first.join("check.config.toml");
    let second = dir.path().join("second");
    assert_eq!(
        code(&hjlab(&[
            "check",
            echoed.to_str().unwrap(),
            "--out",
            second.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        provenance_hash(&first.join("check.jsonl")),
        provenance_hash(&second.join("check.jsonl"))
    );
    assert_eq!(
        std::fs::read(echoed).unwrap(),
        std::fs::read(second.join("check.config.toml")).unwrap()
    );
}

const LADDER: &str = r#"
regime = "subcritical"

[model]
ln_k = 3.0
x_min = -1.5
x_max = 1.5
kernel = { kind = "gaussian", sigma = 1.0 }

[model.rates]
birth = { kind = "gaussian_bump", base = 0.3, amplitude = 0.2, center = 0.0, width = 0.5 }
death = { kind = "constant", value = 1.0 }
mutation = 0.3
birth_bound = 1.0
death_bound = 1.0

[initial]
u0 = { kind = "smooth_tent", peak = 1.0, slope = 1.0, width = 0.5 }

[run]
t_end = 0.5
replicates = 1
base_seed = 1

[hj]
times = [0.5]
compare_on = [-0.5, 0.5]
ref_tol = 2e-2

[sweep]
kind = "ladder"
ln_ks = [3.0, 4.0]
compact = [-0.5, 0.5]
t = 0.5
"#;

#[test]
fn sweep_skips_finished_cells_and_verifies() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "ladder.toml", LADDER);
    let out = out_dir(&dir);
    let run = hjlab(&["sweep", &config, "--out", &out]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let cell = dir.path().join("out/sweep/ladder_lnk_3.jsonl");
    assert!(stderr(&run).contains("ladder_lnk_3.jsonl"));
    let table = csv_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(table.len(), 2);

    let again = hjlab(&["sweep", &config, "--out", &out]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert!(
        !stderr(&again).contains("ladder_lnk_"),
        "{}",
        stderr(&again)
    );
    assert_eq!(csv_rows(&dir.path().join("out/sweep.csv")), table);

    assert_eq!(
        code(&hjlab(&["sweep", &config, "--out", &out, "--verify"])),
        0
    );
    let text = std::fs::read_to_string(&cell).unwrap();
    std::fs::write(&cell, text.replace("\"sup_error\":", "\"sup_error\":1")).unwrap();
    let tampered = hjlab(&["sweep", &config, "--out", &out, "--verify"]);
    assert_eq!(code(&tampered), 1, "{}", stderr(&tampered));
    assert!(stderr(&tampered).contains("ladder_lnk_3.jsonl"));
}
