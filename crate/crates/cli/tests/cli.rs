use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use cellcut::imagecore::io::{load_label_map, save_label_map};
use cellcut::imagecore::LabelMap;

fn cellcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellcut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cellcut(args);
    assert!(
        out.status.success(),
        "cellcut {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &[&str] = &["--width", "160", "--height", "160", "--min-cells", "6", "--max-cells", "8"];

fn synth(dir: &Path, name: &str, seed: u64) -> (PathBuf, PathBuf) {
    let prefix = dir.join(name);
    let seed = seed.to_string();
    let mut args = vec!["synth", "--rng-seed", &seed, "--out", s(&prefix)];
    args.extend_from_slice(SMALL);
    ok(&args);
    (dir.join(format!("{name}.png")), dir.join(format!("{name}.gt.png")))
}

/// Two small scenes and a model trained on them with default fern settings.
struct Fixture {
    dir: tempfile::TempDir,
    scenes: Vec<(PathBuf, PathBuf)>,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let scenes = vec![synth(dir.path(), "a", 1), synth(dir.path(), "b", 2)];
        let prefix = dir.path().join("model");
        ok(&[
            "train",
            "--image",
            s(&scenes[0].0),
            "--annotation",
            s(&scenes[0].1),
            "--image",
            s(&scenes[1].0),
            "--annotation",
            s(&scenes[1].1),
            "--rng-seed",
            "5",
            "--out",
            s(&prefix),
        ]);
        Fixture {
            model: dir.path().join("model.frn"),
            dir,
            scenes,
        }
    })
}

#[test]
fn synth_default_size_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["x", "y"] {
        ok(&["synth", "--rng-seed", "9", "--out", s(&dir.path().join(name))]);
    }
    let gt = load_label_map(dir.path().join("x.gt.png")).unwrap();
    assert_eq!(gt.dims(), (512, 512));
    for ext in ["png", "gt.png"] {
        let a = std::fs::read(dir.path().join(format!("x.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("y.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs");
    }
}

#[test]
fn synth_impossible_packing_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("p");
    let out = cellcut(&[
        "synth", "--width", "64", "--height", "64", "--min-cells", "200", "--max-cells", "200", "--out", s(&prefix),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot place"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn train_writes_header_and_is_deterministic() {
    let f = fixture();
    let text = ok(&["inspect", s(&f.model)]);
    assert!(text.contains("ferns (N) = 200"), "{text}");
    assert!(text.contains("tests per fern (S) = 10"), "{text}");
    assert!(text.contains("window radius (l) = 10"), "{text}");
    for class in ["interior", "border", "exterior"] {
        assert!(text.contains(class), "{text}");
    }

    let again = f.dir.path().join("again");
    ok(&[
        "train",
        "--image",
        s(&f.scenes[0].0),
        "--annotation",
        s(&f.scenes[0].1),
        "--image",
        s(&f.scenes[1].0),
        "--annotation",
        s(&f.scenes[1].1),
        "--rng-seed",
        "5",
        "--out",
        s(&again),
    ]);
    assert_eq!(
        std::fs::read(&f.model).unwrap(),
        std::fs::read(f.dir.path().join("again.frn")).unwrap()
    );
}

#[test]
fn train_rejects_empty_annotation_by_name() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.gt.png");
    save_label_map(&LabelMap::zeros(160, 160), &empty).unwrap();
    let out = cellcut(&[
        "train",
        "--image",
        s(&f.scenes[0].0),
        "--annotation",
        s(&empty),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty.gt.png"));
    assert!(!dir.path().join("m.frn").exists());
}

#[test]
fn exclude_annotation_drops_the_pair() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = cellcut(&[
        "train",
        "--image",
        s(&f.scenes[0].0),
        "--annotation",
        s(&f.scenes[0].1),
        "--exclude-annotation",
        s(&f.scenes[0].1),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no training pairs"));
}

#[test]
fn segment_produces_cells_trace_and_dumps() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("seg");
    ok(&["segment", "--model", s(&f.model), "--image", s(&f.scenes[1].0), "--dump", "--out", s(&prefix)]);

    let labels = load_label_map(dir.path().join("seg.labels.png")).unwrap();
    assert!(labels.max_label() >= 1);
    assert!(dir.path().join("seg.overlay.png").exists());

    let trace = std::fs::read_to_string(dir.path().join("seg.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("sweep,energy,labels_used"));
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energies.len() >= 2);
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-9));

    let summary = ok(&["inspect", s(&dir.path().join("seg.scores.grd"))]);
    assert!(summary.contains("160x160 channels=3"), "{summary}");
    assert!(summary.contains("channel 2: min="), "{summary}");
    assert!(dir.path().join("seg.datacost.grd").exists());
    assert!(dir.path().join("seg.weights.0.png").exists());
}

#[test]
fn manual_seed_gives_one_label() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let truth = load_label_map(&f.scenes[1].1).unwrap();
    // A pixel deep inside cell 1.
    let mask = truth.mask_of(1);
    let eroded = cellcut::imagecore::erode(&mask, 3);
    let i = eroded.indices().next().unwrap();
    let seeds = dir.path().join("seeds.txt");
    std::fs::write(&seeds, format!("# one seed\n{} {}\n", i % 160, i / 160)).unwrap();

    let prefix = dir.path().join("m");
    ok(&[
        "segment",
        "--model",
        s(&f.model),
        "--image",
        s(&f.scenes[1].0),
        "--seeds-file",
        s(&seeds),
        "--out",
        s(&prefix),
    ]);
    let labels = load_label_map(dir.path().join("m.labels.png")).unwrap();
    assert_eq!(labels.cell_ids(), vec![1]);
    assert_eq!(labels.get(i % 160, i / 160), 1);
}

#[test]
fn missing_model_is_an_error() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = cellcut(&[
        "segment",
        "--model",
        s(&dir.path().join("nope.frn")),
        "--image",
        s(&f.scenes[0].0),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.frn"));
}

#[test]
fn failed_batch_removes_partial_outputs() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = cellcut(&[
        "segment",
        "--model",
        s(&f.model),
        "--image",
        s(&f.scenes[0].0),
        "--image",
        s(&dir.path().join("missing.png")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_mismatch_with_model_is_rejected() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = cellcut(&[
        "segment",
        "--model",
        s(&f.model),
        "--image",
        s(&f.scenes[0].0),
        "--set",
        "fern.num_ferns=50",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("N=200"));
}

#[test]
fn corrupt_model_is_rejected() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = std::fs::read(&f.model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = dir.path().join("bad.frn");
    std::fs::write(&bad, bytes).unwrap();
    let out = cellcut(&["inspect", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("crc"));
}

#[test]
fn default_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["inspect", "--default-config"]);
    let path = dir.path().join("c.cfg");
    std::fs::write(&path, &text).unwrap();
    let loaded = cellcut::config::PipelineConfig::load(&path).unwrap();
    assert_eq!(loaded, cellcut::config::PipelineConfig::default());
    assert_eq!(loaded.to_text(), text);
}

fn write_map(dir: &Path, name: &str, w: usize, h: usize, f: impl Fn(usize, usize) -> u32) -> PathBuf {
    let labels = (0..w * h).map(|i| f(i % w, i / w)).collect();
    let path = dir.join(name);
    save_label_map(&LabelMap::new(w, h, labels).unwrap(), &path).unwrap();
    path
}

fn dice_of(report: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(report).unwrap();
    v["mean_dice"].as_f64().unwrap()
}

#[test]
fn eval_reference_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let truth = write_map(d, "t.png", 20, 10, |x, y| (x >= 2 && x < 18 && y >= 2 && y < 8) as u32);
    let none = write_map(d, "n.png", 20, 10, |_, _| 0);
    let halves = write_map(d, "h.png", 20, 10, |x, y| {
        if y >= 2 && y < 8 && x >= 2 && x < 18 {
            if x < 10 { 1 } else { 2 }
        } else {
            0
        }
    });

    let same = ok(&["eval", "--predicted", s(&truth), "--truth", s(&truth), "--json"]);
    assert_eq!(dice_of(&same), 1.0);
    let empty = ok(&["eval", "--predicted", s(&none), "--truth", s(&truth), "--json"]);
    assert_eq!(dice_of(&empty), 0.0);
    let split = ok(&["eval", "--predicted", s(&halves), "--truth", s(&truth), "--json"]);
    assert!((dice_of(&split) - 2.0 / 3.0).abs() < 1e-12);

    let text = ok(&["eval", "--predicted", s(&truth), "--truth", s(&truth), "--out", s(&d.join("r"))]);
    assert!(text.contains("mean_dice = 1.000000"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.metrics.json")).unwrap()).unwrap();
    for key in ["mean_dice", "accuracy_mean", "accuracy_std", "splits", "merges", "n_labels_used"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!(d.join("r.metrics.txt").exists());

    let small = write_map(d, "s.png", 5, 5, |_, _| 1);
    let out = cellcut(&["eval", "--predicted", s(&small), "--truth", s(&truth)]);
    assert!(!out.status.success());
}
