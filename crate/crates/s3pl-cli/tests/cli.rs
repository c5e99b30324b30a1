use std::path::Path;
use std::process::{Command, Output};

use s3pl::data::{dump, prepare, MsiDataset, MzAxis};
use s3pl::pick::{export_peaks, read_peaks, PeakList};
use s3pl::train::output_bias;
use s3pl::S3plModel;

fn s3pl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s3pl"))
        .args(args)
        .env_remove("S3PL_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = s3pl(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    s3pl(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn subdir(root: &Path, name: &str) -> std::path::PathBuf {
    let d = root.join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// A small synthetic dataset in `root/syn`.
fn synth(root: &Path, bins: usize) -> std::path::PathBuf {
    let dir = subdir(root, &format!("syn{bins}"));
    let b = bins.to_string();
    ok(&[
        "synth",
        "--out",
        p(&dir),
        "--width",
        "10",
        "--height",
        "9",
        "--bins",
        &b,
        "--structured",
        "4",
        "--unstructured",
        "4",
        "--seed",
        "3",
    ]);
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn synth_is_reproducible_and_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), 40);
    let b = subdir(tmp.path(), "again");
    ok(&[
        "synth",
        "--out",
        p(&b),
        "--width",
        "10",
        "--height",
        "9",
        "--bins",
        "40",
        "--structured",
        "4",
        "--unstructured",
        "4",
        "--seed",
        "3",
    ]);
    for f in ["dataset.s3pl", "mask.png", "mask.csv", "truth.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let ds = dump::read(&a.join("dataset.s3pl")).unwrap();
    let mask = s3pl::io::read_mask(&a.join("mask.png")).unwrap();
    mask.check_matches(&ds).unwrap();
}

#[test]
fn full_pipeline_is_deterministic_with_one_thread() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let data = syn.join("dataset.s3pl");
    // both runs use the same paths, which the report records
    let run = || {
        let root = tmp.path().join("run");
        let _ = std::fs::remove_dir_all(&root);
        let m = subdir(&root, "model");
        let k = subdir(&root, "pick");
        let e = subdir(&root, "eval");
        ok(&[
            "--threads",
            "1",
            "train",
            "--input",
            p(&data),
            "--epochs",
            "2",
            "--seed",
            "5",
            "--out",
            p(&m),
        ]);
        ok(&[
            "--threads",
            "1",
            "pick",
            "--input",
            p(&data),
            "--model",
            p(&m.join("model.ckpt")),
            "--z",
            "6",
            "--n",
            "4",
            "--out",
            p(&k),
        ]);
        ok(&[
            "--threads",
            "1",
            "eval",
            "--input",
            p(&data),
            "--mask",
            p(&syn.join("mask.csv")),
            "--peaks",
            p(&k.join("peaks.csv")),
            "--out",
            p(&e),
        ]);
        (
            read(&m.join("model.ckpt")),
            read(&k.join("peaks.csv")),
            read(&e.join("report.json")),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_epochs_writes_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let m = subdir(tmp.path(), "m");
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# small kernel\nd1 = 7\nseed = 9\n").unwrap();
    ok(&[
        "train",
        "--input",
        p(&syn.join("dataset.s3pl")),
        "--config",
        p(&cfg),
        "--epochs",
        "0",
        "--out",
        p(&m),
    ]);
    let raw = dump::read(&syn.join("dataset.s3pl")).unwrap();
    let mut expected = S3plModel::init(3, 40, 7, 1, 9).unwrap();
    expected.decoder.bias = output_bias(&prepare(&raw));
    assert_eq!(S3plModel::load(&m.join("model.ckpt")).unwrap(), expected);
    let losses = std::fs::read_to_string(m.join("losses.csv")).unwrap();
    assert_eq!(losses, "epoch,loss\n");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let data = syn.join("dataset.s3pl");
    let m = subdir(tmp.path(), "m");

    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "p = 4\n").unwrap();
    assert_eq!(
        code(&[
            "train",
            "--input",
            p(&data),
            "--config",
            p(&bad),
            "--out",
            p(&m)
        ]),
        2
    );
    assert_eq!(
        code(&["train", "--input", p(&data), "--out", "/no/such/dir"]),
        3
    );
    assert_eq!(code(&["synth", "--out", p(&tmp.path().join("missing"))]), 3);
    assert_eq!(code(&["train", "--bogus-flag"]), 2);

    ok(&[
        "train",
        "--input",
        p(&data),
        "--epochs",
        "1",
        "--out",
        p(&m),
    ]);
    let other = synth(tmp.path(), 48);
    let k = subdir(tmp.path(), "k");
    assert_eq!(
        code(&[
            "pick",
            "--input",
            p(&other.join("dataset.s3pl")),
            "--model",
            p(&m.join("model.ckpt")),
            "--n",
            "3",
            "--out",
            p(&k),
        ]),
        4
    );
    assert_eq!(
        code(&[
            "pick",
            "--input",
            p(&data),
            "--model",
            p(&m.join("model.ckpt")),
            "--z",
            "41",
            "--n",
            "3",
            "--out",
            p(&k),
        ]),
        2
    );
    assert_eq!(
        code(&[
            "eval",
            "--input",
            p(&data),
            "--mask",
            p(&other.join("../syn40/mask.csv")),
            "--peaks",
            p(&tmp.path().join("none.csv")),
            "--out",
            p(&k),
        ]),
        3
    );
    assert_eq!(
        code(&[
            "ionimage",
            "--input",
            p(&data),
            "--bins",
            "40",
            "--out",
            p(&k)
        ]),
        2
    );
}

#[test]
fn mismatched_mask_is_a_compatibility_error() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let mask = tmp.path().join("small.csv");
    std::fs::write(&mask, "0,1\n1,0\n").unwrap();
    let peaks = tmp.path().join("peaks.csv");
    export_peaks(&PeakList::default(), &peaks).unwrap();
    let e = subdir(tmp.path(), "e");
    assert_eq!(
        code(&[
            "eval",
            "--input",
            p(&syn.join("dataset.s3pl")),
            "--mask",
            p(&mask),
            "--peaks",
            p(&peaks),
            "--out",
            p(&e),
        ]),
        4
    );
}

#[test]
fn single_patch_dataset_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let axis = MzAxis::linear(50.0, 1.0, 5).unwrap();
    let ds = MsiDataset::from_dense(1, 1, axis, vec![0.1, 0.7, 0.2, 0.4, 0.0]).unwrap();
    let data = tmp.path().join("one.s3pl");
    dump::write(&ds, &data).unwrap();
    let m = subdir(tmp.path(), "m");
    let k = subdir(tmp.path(), "k");
    ok(&[
        "train",
        "--input",
        p(&data),
        "--epochs",
        "1",
        "--out",
        p(&m),
    ]);
    ok(&[
        "pick",
        "--input",
        p(&data),
        "--model",
        p(&m.join("model.ckpt")),
        "--z",
        "1",
        "--n",
        "1",
        "--out",
        p(&k),
    ]);
    let text = std::fs::read_to_string(k.join("peaks.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(read_peaks(&k.join("peaks.csv")).unwrap().len(), 1);
}

#[test]
fn eval_reports_pickers_in_input_order() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let data = syn.join("dataset.s3pl");
    let raw = dump::read(&data).unwrap();
    let mask = s3pl::io::read_mask(&syn.join("mask.png")).unwrap();
    let truth = s3pl::eval::build_ground_truth(&raw, &mask, 0.3).unwrap();

    // the positives at the lowest threshold are a superset of the others
    let mz = raw.axis().values();
    let perfect = PeakList {
        entries: truth
            .positives
            .iter()
            .map(|&bin| s3pl::pick::PeakEntry {
                bin,
                mz: mz[bin],
                frequency: 1,
            })
            .collect(),
    };
    let all = tmp.path().join("all.csv");
    let empty = tmp.path().join("empty.csv");
    export_peaks(&perfect, &all).unwrap();
    export_peaks(&PeakList::default(), &empty).unwrap();
    let e = subdir(tmp.path(), "e");
    let out = ok(&[
        "eval",
        "--input",
        p(&data),
        "--mask",
        p(&syn.join("mask.png")),
        "--peaks",
        &format!("zero={}", p(&empty)),
        "--peaks",
        p(&all),
        "--budget",
        "--out",
        p(&e),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("T_PCC 0.3:"));

    let table = std::fs::read_to_string(e.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(
        rows[0],
        "picker,n_peaks,f1_t0.3,f1_t0.4,f1_t0.5,f1_t0.6,mscf1"
    );
    assert!(rows[1].starts_with("zero,0,0,0,0,0,0"));
    assert!(rows[2].starts_with("all,"));
    let report: serde_json::Value = serde_json::from_slice(&read(&e.join("report.json"))).unwrap();
    assert_eq!(report["pickers"][0]["mscf1"], 0.0);
    assert_eq!(report["pickers"][1]["thresholds"][0]["f1"], 1.0);
    let pcc = std::fs::read_to_string(e.join("pcc_table.csv")).unwrap();
    assert_eq!(pcc.lines().count(), 41);
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let m = subdir(tmp.path(), "m");
    ok(&[
        "train",
        "--input",
        p(&syn.join("dataset.s3pl")),
        "--epochs",
        "2",
        "--out",
        p(&m),
    ]);
    let again = subdir(tmp.path(), "again");
    ok(&[
        "replay",
        p(&m.join("train.manifest.json")),
        "--out",
        p(&again),
    ]);
    assert_eq!(read(&m.join("model.ckpt")), read(&again.join("model.ckpt")));
    assert_eq!(read(&m.join("losses.csv")), read(&again.join("losses.csv")));

    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&m.join("train.manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["epochs"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["timings_ms"]["train"].as_f64().unwrap() >= 0.0);
}

#[test]
fn ion_images_export_as_png_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let syn = synth(tmp.path(), 40);
    let data = syn.join("dataset.s3pl");
    let out = subdir(tmp.path(), "img");
    ok(&[
        "ionimage",
        "--input",
        p(&data),
        "--bins",
        "3,7",
        "--out",
        p(&out),
    ]);
    ok(&[
        "ionimage",
        "--input",
        p(&data),
        "--bins",
        "7",
        "--format",
        "csv",
        "--out",
        p(&out),
    ]);
    assert!(out.join("ion_3.png").is_file());
    let grid =
        s3pl::io::parse_ion_image_csv(&std::fs::read_to_string(out.join("ion_7.csv")).unwrap())
            .unwrap();
    assert_eq!(grid, dump::read(&data).unwrap().ion_image(7).unwrap());
}

#[test]
fn help_lists_defaults() {
    let out = ok(&["pick", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("default: 256"));
    assert!(text.contains("d1=51"));
    let out = ok(&["baseline", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[default: 10]") && text.contains("[default: 3]"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_s3pl"))
        .args(["synth", "--out", p(tmp.path()), "--bins", "96"])
        .env("S3PL_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&tmp.path().join("synth.manifest.json"))).unwrap();
    assert_eq!(manifest["threads"], 2);
}
