//! End-to-end tests that drive the compiled binary: every subcommand, the
//! stdout contracts other tools parse, and the exit-code mapping.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tetriqa"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should spawn")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout should be utf-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr should be utf-8")
}

fn assert_success(output: &Output, context: &str) {
    assert!(
        output.status.success(),
        "{context} failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        stdout(output),
        stderr(output)
    );
}

fn q_line(output: &Output) -> String {
    stdout(output)
        .lines()
        .find(|l| l.starts_with("Q = "))
        .expect("output should contain a Q line")
        .to_string()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["synth", name, "--width", "64", "--height", "64", "--seed", "11"];
    args.extend_from_slice(extra);
    let output = run(&args, dir);
    assert_success(&output, &format!("synth {name}"));
    path
}

#[test]
fn extract_then_measure_self_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ref.pgm", &[]);

    let extract = run(&["extract", "ref.pgm", "ref.rr"], dir.path());
    assert_success(&extract, "extract");
    let text = stdout(&extract);
    assert!(
        text.contains("ref: analyzed 64x64 at 2 levels, 6 subbands"),
        "unexpected extract summary:\n{text}"
    );
    assert!(text.contains("wrote ref.rr"), "missing wrote line:\n{text}");
    assert_eq!(
        text.lines().filter(|l| l.starts_with("scale ")).count(),
        6,
        "expected one summary line per subband:\n{text}"
    );

    let measure = run(&["measure", "ref.pgm", "ref.rr"], dir.path());
    assert_success(&measure, "measure");
    assert_eq!(q_line(&measure), "Q = 0.000000");
}

#[test]
fn compare_matches_extract_then_measure() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ref.pgm", &[]);
    synth(dir.path(), "noisy.pgm", &["--awgn", "8"]);

    let extract = run(&["extract", "ref.pgm", "ref.rr"], dir.path());
    assert_success(&extract, "extract");
    let measure = run(&["measure", "noisy.pgm", "ref.rr"], dir.path());
    assert_success(&measure, "measure");
    let compare = run(&["compare", "ref.pgm", "noisy.pgm"], dir.path());
    assert_success(&compare, "compare");

    assert_eq!(
        q_line(&compare),
        q_line(&measure),
        "compare must reproduce the extract-then-measure score exactly"
    );
    assert_ne!(q_line(&compare), "Q = 0.000000");

    let self_compare = run(&["compare", "ref.pgm", "ref.pgm"], dir.path());
    assert_success(&self_compare, "self compare");
    assert_eq!(q_line(&self_compare), "Q = 0.000000");
}

#[test]
fn compare_is_direction_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "a.pgm", &[]);
    synth(dir.path(), "b.pgm", &["--blur", "2"]);

    let forward = run(&["compare", "a.pgm", "b.pgm"], dir.path());
    assert_success(&forward, "compare a b");
    let backward = run(&["compare", "b.pgm", "a.pgm"], dir.path());
    assert_success(&backward, "compare b a");
    assert_ne!(
        q_line(&forward),
        q_line(&backward),
        "the divergence is asymmetric, so swapped arguments must score differently"
    );
}

#[test]
fn usage_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "img.pgm", &[]);

    let missing_rr = run(&["measure", "img.pgm", "no-such.rr"], dir.path());
    assert_eq!(missing_rr.status.code(), Some(2), "missing feature file");
    assert!(stderr(&missing_rr).contains("error:"));

    let missing_image = run(&["extract", "no-such.pgm", "out.rr"], dir.path());
    assert_eq!(missing_image.status.code(), Some(2), "missing image");

    let bad_flag = run(&["extract", "img.pgm", "out.rr", "--levels", "x"], dir.path());
    assert_eq!(bad_flag.status.code(), Some(2), "unparsable flag value");

    let no_args = run(&[], dir.path());
    assert_eq!(no_args.status.code(), Some(2), "no subcommand");
}

#[test]
fn too_small_image_exits_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(
        &["synth", "tiny.pgm", "--width", "7", "--height", "7", "--seed", "1"],
        dir.path(),
    );
    assert_success(&output, "synth tiny");

    let extract = run(&["extract", "tiny.pgm", "tiny.rr"], dir.path());
    assert_eq!(extract.status.code(), Some(2));
    let text = stderr(&extract);
    assert!(
        text.contains("must be at least"),
        "diagnostic should explain the size requirement:\n{text}"
    );
}

#[test]
fn tilings_listing_and_orbits_and_grid() {
    let dir = tempfile::tempdir().unwrap();

    let listing = run(&["tilings"], dir.path());
    assert_success(&listing, "tilings");
    let text = stdout(&listing);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("117 coverings"));
    assert_eq!(lines.count(), 117, "one line per covering");

    let orbits = run(&["tilings", "--orbits"], dir.path());
    assert_success(&orbits, "tilings --orbits");
    let text = stdout(&orbits);
    assert!(
        text.starts_with("117 coverings in 22 classes under the 8 board symmetries\n"),
        "unexpected orbit header:\n{text}"
    );
    assert_eq!(
        text.lines().filter(|l| l.starts_with("class of covering")).count(),
        22
    );

    let grid = run(&["tilings", "--index", "0"], dir.path());
    assert_success(&grid, "tilings --index 0");
    let text = stdout(&grid);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "covering 0:");
    assert_eq!(lines.len(), 5, "header plus a 4x4 grid:\n{text}");
    let mut counts = [0usize; 4];
    for line in &lines[1..] {
        assert_eq!(line.len(), 4, "grid rows are 4 cells wide:\n{text}");
        for c in line.chars() {
            let label = c.to_digit(10).expect("grid cells are digits") as usize;
            assert!(label < 4, "labels are 0..=3:\n{text}");
            counts[label] += 1;
        }
    }
    assert_eq!(counts, [4, 4, 4, 4], "each piece covers four cells:\n{text}");

    let out_of_range = run(&["tilings", "--index", "117"], dir.path());
    assert_eq!(out_of_range.status.code(), Some(2));
    assert!(stderr(&out_of_range).contains("out of range"));
}

#[test]
fn decompose_writes_subband_images() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "img.pgm", &[]);

    let output = run(&["decompose", "img.pgm", "--out-dir", "bands"], dir.path());
    assert_success(&output, "decompose");
    let wrote = stdout(&output)
        .lines()
        .filter(|l| l.starts_with("wrote "))
        .count();
    assert!(wrote >= 7, "expected lowpass plus per-level detail planes");
    assert!(dir.path().join("bands").is_dir());
}

/// Writes a manifest plus its images: one pristine reference and two
/// distortion ladders whose subjective scores fall as severity rises.
fn write_manifest(dir: &Path) -> PathBuf {
    synth(dir, "ref.pgm", &[]);
    let mut rows = vec!["ref_path,dist_path,mos,distortion_label".to_string()];
    for (i, sigma) in ["1", "2", "4", "8", "16", "24"].iter().enumerate() {
        let name = format!("awgn{sigma}.pgm");
        synth(dir, &name, &["--awgn", sigma]);
        rows.push(format!("ref.pgm,{name},{:.1},awgn", 9.0 - i as f64));
    }
    for (i, radius) in ["0.5", "1", "1.5", "2", "3", "4"].iter().enumerate() {
        let name = format!("blur{radius}.pgm");
        synth(dir, &name, &["--blur", radius]);
        rows.push(format!("ref.pgm,{name},{:.1},blur", 8.5 - i as f64));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, rows.join("\n") + "\n").unwrap();
    path
}

#[test]
fn evaluate_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path());

    let args = ["evaluate", "manifest.csv", "--psnr", "--out-dir"];
    let first = run(&[&args[..], &["run1"]].concat(), dir.path());
    assert_success(&first, "evaluate run1");
    let text = stdout(&first);
    assert!(
        text.contains("scored 12 of 12 rows (0 skipped)"),
        "unexpected scoring summary:\n{text}"
    );
    assert!(text.contains("awgn"), "per-group column missing:\n{text}");
    assert!(text.contains("blur"), "per-group column missing:\n{text}");
    assert!(text.contains("All"), "pooled column missing:\n{text}");
    assert!(text.contains("PLCC"), "correlation table missing:\n{text}");
    assert!(text.contains("SROCC"), "rank table missing:\n{text}");

    for name in ["report.csv", "scatter.csv", "psnr_report.csv"] {
        assert!(
            dir.path().join("run1").join(name).is_file(),
            "{name} should exist"
        );
    }
    let report = std::fs::read_to_string(dir.path().join("run1/report.csv")).unwrap();
    assert!(report.starts_with("group,n,plcc,srocc,rmse,g1,g2,g3,g4"));
    let scatter = std::fs::read_to_string(dir.path().join("run1/scatter.csv")).unwrap();
    assert!(scatter.starts_with("q,mos,mos_p"));
    assert_eq!(
        scatter.lines().count(),
        13,
        "header plus one scatter row per scored pair"
    );

    let second = run(&[&args[..], &["run2"]].concat(), dir.path());
    assert_success(&second, "evaluate run2");
    let tables_only = |s: &str| -> String {
        s.lines()
            .filter(|l| !l.starts_with("wrote "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        tables_only(&stdout(&second)),
        tables_only(&text),
        "tables must be reproducible"
    );
    let rerun = std::fs::read_to_string(dir.path().join("run2/report.csv")).unwrap();
    assert_eq!(report, rerun, "report.csv must be byte-identical across runs");
}

#[test]
fn evaluate_skips_broken_rows_but_scores_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text.push_str("ref.pgm,missing.pgm,2.0,awgn\n");
    std::fs::write(&manifest, text).unwrap();

    let output = run(&["evaluate", "manifest.csv", "--out-dir", "out"], dir.path());
    assert_success(&output, "evaluate with one broken row");
    assert!(stdout(&output).contains("scored 12 of 13 rows (1 skipped)"));
    assert!(stderr(&output).contains("skipping"));
}

#[test]
fn evaluate_identical_pairs_is_a_degenerate_fit() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ref.pgm", &[]);
    let mut rows = vec!["ref_path,dist_path,mos,distortion_label".to_string()];
    for mos in 1..=6 {
        rows.push(format!("ref.pgm,ref.pgm,{mos}.0,self"));
    }
    std::fs::write(dir.path().join("manifest.csv"), rows.join("\n") + "\n").unwrap();

    let output = run(&["evaluate", "manifest.csv", "--out-dir", "out"], dir.path());
    assert_eq!(
        output.status.code(),
        Some(1),
        "constant scores cannot support a fit\nstdout: {}\nstderr: {}",
        stdout(&output),
        stderr(&output)
    );
    assert!(stderr(&output).contains("error:"));
}

#[test]
fn evaluate_missing_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&["evaluate", "no-such.csv", "--out-dir", "out"], dir.path());
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("error:"));
}
