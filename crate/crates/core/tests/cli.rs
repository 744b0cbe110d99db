use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use namegender::corpus::pairwise_overlap;
use namegender::FrequencyTable;

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(file)
}

fn namegender(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_namegender"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = child.stdin.take().unwrap();
    // a child that fails early may exit before reading its input
    if let Err(e) = input.write_all(stdin.unwrap_or("").as_bytes()) {
        assert_eq!(e.kind(), std::io::ErrorKind::BrokenPipe, "{e}");
    }
    drop(input);
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = namegender(args, None);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn ingest_matches_hand_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let csv = data("synthetic.csv");
    ok(&["--out-dir", out, "ingest", "csv", "--input", s(&csv), "--id", "synthetic", "--count-column", "count"]);
    let report = fs::read_to_string(dir.path().join("synthetic.ingest.tsv")).unwrap();
    for line in ["retained\t2641", "rejected_too_short\t1", "rejected_no_vowel\t1", "rejected_is_title\t2", "rejected_invalid_characters\t1", "unknown_gender\t1"] {
        assert!(report.contains(line), "missing `{line}` in\n{report}");
    }
    ok(&["--out-dir", out, "stats", s(&dir.path().join("synthetic.table.tsv"))]);
    let stats = fs::read_to_string(dir.path().join("stats.tsv")).unwrap();
    assert_eq!(stats.lines().nth(1), Some("synthetic\tfirst\t50948\t500\t500\t0\t175"));
    assert!(dir.path().join("ambiguity.synthetic.tsv").exists());
    assert!(dir.path().join("ingest.manifest.json").exists());
}

#[test]
fn malformed_input_names_first_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "bad.csv", "name,gender,count\nanna,F,lots\nbob,M,-1\n");
    let out = namegender(&["--out-dir", s(dir.path()), "ingest", "csv", "--input", s(&csv), "--id", "bad", "--count-column", "count"], None);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let last = err.lines().last().unwrap();
    assert!(last.starts_with("error: "), "{err}");
    assert!(last.contains("bad.csv:2:"), "{err}");

    let missing = namegender(&["ingest", "csv", "--input", "/nonexistent.csv", "--id", "x"], None);
    assert!(!missing.status.success());
}

fn trained_model(dir: &Path) -> PathBuf {
    let csv = write(dir, "tiny.csv", "name,gender,count\nMary,F,95\nmary,M,5\nJohn,M,40\nKim,F,5\nKim,M,5\n");
    let out = s(dir);
    ok(&["--out-dir", out, "ingest", "csv", "--input", s(&csv), "--id", "tiny", "--count-column", "count"]);
    ok(&["--out-dir", out, "train", s(&dir.join("tiny.table.tsv")), "--id", "model"]);
    dir.join("model.model.tsv")
}

#[test]
fn infer_labels_a_trained_name() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let spec = format!("mle:{}", s(&model));
    let out = namegender(&["--out-dir", s(dir.path()), "infer", "--inferrer", &spec], Some("Mary\n"));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "input\tname\tlabel\tp_female\tsource\nMary\tmary\tfemale\t0.950000\tmodel\n");
}

#[test]
fn stdin_and_file_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let spec = format!("mle:{}", s(&model));
    let names = "Mary\nJOHN\nkim\nzelda\nDr\n";
    let list = write(dir.path(), "names.txt", names);
    let from_stdin = namegender(&["--out-dir", s(dir.path()), "infer", "--inferrer", &spec], Some(names));
    let from_file = ok(&["--out-dir", s(dir.path()), "infer", "--inferrer", &spec, "--input", s(&list)]);
    assert_eq!(String::from_utf8(from_stdin.stdout).unwrap(), from_file);
    let lines: Vec<&str> = from_file.lines().collect();
    assert_eq!(lines[2], "JOHN\tjohn\tmale\t0.000000\tmodel");
    assert_eq!(lines[3], "kim\tkim\tambiguous\t0.500000\tmodel");
    assert_eq!(lines[4], "zelda\tzelda\tunknown\tNA\tmodel");
    assert_eq!(lines[5], "Dr\t\tunknown\tNA\trejected:is_title");

    let json = ok(&["--out-dir", s(dir.path()), "--format", "structured", "infer", "--inferrer", &spec, "--input", s(&list)]);
    let first: serde_json::Value = serde_json::from_str(json.lines().next().unwrap()).unwrap();
    assert_eq!(first["label"], "female");
    assert_eq!(first["p_female"], 0.95);
}

#[test]
fn stats_overlap_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.tsv", "# name_type=first source_id=a\nanna\t3\t0\nbob\t0\t2\nkim\t1\t1\n");
    let b = write(dir.path(), "b.tsv", "# name_type=first source_id=b\nanna\t1\t0\nzoe\t4\t0\n");
    ok(&["--out-dir", s(dir.path()), "stats", s(&a), s(&b)]);
    let tables = [FrequencyTable::load(&a).unwrap(), FrequencyTable::load(&b).unwrap()];
    let oracle = pairwise_overlap(&tables).unwrap();
    let text = fs::read_to_string(dir.path().join("overlap.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let i = oracle.ids.iter().position(|x| x == r[0]).unwrap();
        let j = oracle.ids.iter().position(|x| x == r[1]).unwrap();
        assert_eq!(r[2].parse::<u64>().unwrap(), oracle.counts[i][j]);
        assert!((r[3].parse::<f64>().unwrap() - oracle.percentages[i][j]).abs() < 1e-4);
    }
    let uniq = fs::read_to_string(dir.path().join("uniqueness.tsv")).unwrap();
    assert!(uniq.contains("a\t2\t"), "{uniq}");
}

#[test]
fn eval_with_mock_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(dir.path(), "a.test.tsv", "# testset id=a\nx\tF\ny\tM\nz\tF\nw\tM\n");
    let mock = write(dir.path(), "m.mock.tsv", "x\tfemale\ny\tfemale\nz\tfemale\nw\tmale\n");
    let spec = format!("mock:{}", s(&mock));
    ok(&["--out-dir", s(dir.path()), "eval", "--testset", s(&set), "--inferrer", &spec]);
    let report = fs::read_to_string(dir.path().join("report.tsv")).unwrap();
    // TF 2 (x, z), TM 1 (w), FF 1 (y): accuracy 75, precision 66.67, recall 100, GBE 25
    assert_eq!(
        report.lines().nth(1).unwrap(),
        "m\ta\t4\t75.0000\t66.6667\t100.0000\t80.0000\t25.0000\t2\t1\t1\t0\t0\t0"
    );
    let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.starts_with("Inferrer"));

    ok(&["--out-dir", s(dir.path()), "--format", "structured", "eval", "--testset", s(&set), "--inferrer", &spec]);
    let jsonl = fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    let cell: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(cell["metrics"]["accuracy"], 75.0);
}

#[test]
fn split_is_reproducible_and_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = data("synthetic.csv");
    let base = s(dir.path());
    ok(&["--out-dir", base, "ingest", "csv", "--input", s(&csv), "--id", "syn", "--count-column", "count"]);
    let table = dir.path().join("syn.table.tsv");
    let (one, two) = (dir.path().join("one"), dir.path().join("two"));
    ok(&["--out-dir", s(&one), "--seed", "9", "split", s(&table)]);
    ok(&["--out-dir", s(&two), "--seed", "9", "split", s(&table)]);
    for f in ["syn.train.tsv", "syn.test.tsv", "syn.ties.tsv"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(two.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(one.join("split.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);

    let out = namegender(&["--out-dir", s(&one), "split", s(&table)], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn ensembles_resolve_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    write(dir.path(), "a.mock.tsv", "kim\tfemale\nzelda\tfemale\n");
    write(dir.path(), "b.mock.tsv", "kim\tfemale\nzelda\tmale\n");
    write(dir.path(), "c.mock.tsv", "kim\tmale\nzelda\tmale\n");
    write(
        dir.path(),
        "hybrid.conf",
        &format!("id = hybrid\nmodel = {}\nvoters = a, b, c\n", model.file_name().unwrap().to_str().unwrap()),
    );
    let config = write(
        dir.path(),
        "run.conf",
        "inferrer.a = mock:a.mock.tsv\ninferrer.b = mock:b.mock.tsv\ninferrer.c = mock:c.mock.tsv\n\
         inferrer.hybrid = ensemble:hybrid.conf\n",
    );
    let set = write(dir.path(), "t.test.tsv", "# testset id=t\nmary\tF\njohn\tM\nkim\tF\nzelda\tF\n");
    let out = s(dir.path());
    let cfg = s(&config);

    let infer = namegender(&["--out-dir", out, "--config", cfg, "infer", "--inferrer", "hybrid=ensemble:hybrid.conf"], Some("mary\nkim\nzelda\n"));
    // relative path on the command line is resolved against the working directory, which is not `dir`
    assert!(!infer.status.success());

    let spec = format!("ensemble:{}", s(&dir.path().join("hybrid.conf")));
    let text = String::from_utf8(
        namegender(&["--out-dir", out, "--config", cfg, "infer", "--inferrer", &spec], Some("mary\nkim\nzelda\n")).stdout,
    )
    .unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!((rows[0][2], rows[0][4]), ("female", "hybrid/stage1"));
    assert_eq!((rows[1][2], rows[1][4]), ("female", "hybrid/stage2"));
    assert_eq!((rows[2][2], rows[2][4]), ("male", "hybrid/stage2"));

    ok(&["--out-dir", out, "--config", cfg, "eval", "--testset", s(&set)]);
    let report = fs::read_to_string(dir.path().join("report.tsv")).unwrap();
    let ids: Vec<&str> = report.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids, vec!["a", "a", "b", "b", "c", "c", "hybrid", "hybrid"]);
    let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("hybrid stage1_answers: 2"), "{text}");
    assert!(text.contains("hybrid vote_decided: 2"), "{text}");
}

#[test]
fn cyclic_and_unknown_ids_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    write(dir.path(), "loop.conf", &format!("id = loop\nmodel = {}\nfallback = loop\n", s(&model)));
    let config = write(dir.path(), "run.conf", "inferrer.loop = ensemble:loop.conf\n");
    let set = write(dir.path(), "t.test.tsv", "# testset id=t\nmary\tF\n");
    let out = namegender(&["--out-dir", s(dir.path()), "--config", s(&config), "eval", "--testset", s(&set)], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("depends on itself"));

    let out = namegender(
        &["--out-dir", s(dir.path()), "eval", "--testset", s(&set), "--inferrer", &format!("mle:{}", s(&model)), "--na", "ghost=t"],
        None,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));
}

#[test]
fn analyze_writes_all_exports() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(dir.path(), "t.test.tsv", "# testset id=t\nmary\tF\njosé\tM\nann\tF\nbob\tM\n");
    let mock = write(dir.path(), "m.mock.tsv", "mary\tfemale\njosé\tfemale\nann\tmale\nbob\tmale\n");
    ok(&["--out-dir", s(dir.path()), "analyze", "--testset", s(&set), "--inferrer", &format!("mock:{}", s(&mock))]);
    let non_english = fs::read_to_string(dir.path().join("m.non_english.tsv")).unwrap();
    assert_eq!(non_english, "rate_type\tnames\tnon_english\tpercentage\nTF\t1\t0\t0.0000\nFF\t1\t1\t100.0000\nTM\t1\t0\t0.0000\nFM\t1\t0\t0.0000\n");
    for f in ["m.lengths.tsv", "m.bigrams.tsv", "m.trigrams.tsv", "analyze.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
