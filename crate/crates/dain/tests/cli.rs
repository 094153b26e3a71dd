use std::process::{Command, Output};

use dain_core::data::SplitSpec;

fn dain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dain")).args(args).output().expect("binary runs")
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = dain(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_or_flag_exits_1() {
    assert_eq!(dain(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dain(&["gen", "--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dain(&["gen", "--out", dir.path().to_str().unwrap(), "no_such_key=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn runtime_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dain(&["scan", "--data", dir.path().join("missing").to_str().unwrap(), "--out", dir.path().join("i.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn split_of_ten_instances_is_seven_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let splits = dir.path().join("splits");
    let gen = dain(&["gen", "--seed", "3", "--out", data.to_str().unwrap(), "classes=2", "instances_per_class=10", "illuminations=1", "image_size=16"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let out = dain(&["split", "--train-frac", "0.7", "--n", "5", "--seed", "3", "--data", data.to_str().unwrap(), "--out", splits.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in 0..5 {
        let text = std::fs::read_to_string(splits.join(format!("split{s}.json"))).unwrap();
        let spec: SplitSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec.split_id, s);
        for c in &spec.classes {
            assert_eq!((c.train.len(), c.test.len()), (7, 3));
        }
    }
}

#[test]
fn dry_run_touches_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = dain(&["train", "--dry-run", "--data", "nowhere", "--out", out_dir.to_str().unwrap(), "--fusion-arch", "final", "epochs=4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("final/sum/pooling"), "{text}");
    assert!(text.contains("\"epochs\": 4"), "{text}");
    assert!(!out_dir.exists());
    let bad = dain(&["eval", "--dry-run", "--checkpoint", "x", "--data", "y", "--out", "z", "lr=-1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn gradcheck_passes() {
    let out = dain(&["gradcheck", "--seed", "7", "--instances", "2"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("conv2d"), "{text}");
    assert!(text.lines().filter(|l| l.contains("max rel error")).all(|l| l.ends_with("ok")));
}
