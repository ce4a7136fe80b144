//! End-to-end runs of the command-line driver.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hcocluster::cli::{run_from, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK};

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("hcocluster").chain(args.iter().copied()))
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["synth", "--seed", "3", "-o", s(&a)]), EXIT_OK);
    assert_eq!(run(&["synth", "--seed", "3", "-o", s(&b)]), EXIT_OK);
    assert_eq!(files(&a), files(&b));
    assert!(a.join("two-rectangles").join("config.json").exists());
}

#[test]
fn multires_eval_render_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    assert_eq!(run(&["synth", "-o", s(&fx)]), EXIT_OK);
    let config = fx.join("two-rectangles").join("config.json");
    let bundle = tmp.path().join("bundle");
    assert_eq!(run(&["multires", "--config", s(&config), "--levels", "3", "-o", s(&bundle)]), EXIT_OK);
    let before = files(&bundle);

    let eval = tmp.path().join("eval");
    assert_eq!(run(&["eval", "--config", s(&config), "--bundle", s(&bundle), "-o", s(&eval)]), EXIT_OK);
    for name in ["boundary_pr.csv", "sequence_object1.csv", "sequence_object2.csv", "consistency_object1_frame000.csv"] {
        assert!(eval.join(name).exists(), "{name}");
    }

    let render = tmp.path().join("render");
    assert_eq!(run(&["render", "--config", s(&config), "--bundle", s(&bundle), "-o", s(&render)]), EXIT_OK);
    assert!(render.join("frame_000").join("level_00_overlay.png").exists());
    assert_eq!(files(&bundle), before);

    // existing output without --force
    assert_eq!(run(&["eval", "--config", s(&config), "--bundle", s(&bundle), "-o", s(&eval)]), EXIT_CONFIG);
    assert_eq!(
        run(&["eval", "--config", s(&config), "--bundle", s(&bundle), "-o", s(&eval), "--force"]),
        EXIT_OK
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["multires", "--t-min", "0.9", "--t-max", "0.5", "-o", s(&out)]), EXIT_CONFIG);
    assert_eq!(run(&["multires", "--frames", "/nonexistent/frame.png", "-o", s(&out)]), EXIT_INPUT);
    assert!(!out.exists());

    let fx = tmp.path().join("fx");
    assert_eq!(run(&["synth", "-o", s(&fx)]), EXIT_OK);
    let config = fx.join("two-rectangles").join("config.json");
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"frames\": 3}").unwrap();
    assert_eq!(run(&["multires", "--config", s(&bad), "-o", s(&out)]), EXIT_CONFIG);
    // a band narrower than any reachable contour mass
    assert_eq!(
        run(&["cocluster", "--config", s(&config), "--t", "0.233", "--beta", "0.001", "-o", s(&out)]),
        EXIT_INFEASIBLE
    );
    assert!(!out.exists());
    let leftovers: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("partial"))
        .collect();
    assert!(leftovers.is_empty());
}
