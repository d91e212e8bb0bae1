use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const DICT: &str = "CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nCALLED  K AO1 L D\nHOT  HH AA1 T\n\
                    FATHER  F AA1 DH ER0\nCAT  K AE1 T\nREADER  R IY1 D ER0\nREADER(2)  R EH1 D ER0\n";

fn lexiforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexiforge")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = lexiforge(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fixture(dir: &Path) -> String {
    let p = dir.join("mini.dict");
    fs::write(&p, DICT).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn line_for<'a>(text: &'a str, word: &str) -> &'a str {
    text.lines().find(|l| l.split_whitespace().next() == Some(word)).unwrap()
}

#[test]
fn apply_writes_lexicon_and_match_log() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let out = path(dir.path(), "out.dict");
    ok(&["apply", "--dict", &dict, "--out", &out]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(line_for(&text, "CITED"), "CITED  s ai t ee d");
    let log = fs::read_to_string(format!("{out}.matches.tsv")).unwrap();
    assert!(log.lines().any(|l| l.starts_with("CITED\t") && l.contains("sfx-ted")), "{log}");
}

#[test]
fn empty_rules_give_the_plain_common_image() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let rules = path(dir.path(), "empty.rules");
    fs::write(&rules, "# nothing\n").unwrap();
    let out = path(dir.path(), "out.dict");
    ok(&["apply", "--dict", &dict, "--rules", &rules, "--out", &out]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(line_for(&text, "CITED"), "CITED  s ai T a D");
    assert!(fs::read_to_string(format!("{out}.matches.tsv")).unwrap().is_empty());
}

#[test]
fn all_variants_keeps_alternates() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let out = path(dir.path(), "out.dict");
    ok(&["apply", "--dict", &dict, "--all-variants", "--out", &out]);
    assert!(fs::read_to_string(&out).unwrap().contains("READER(2)"));
    ok(&["apply", "--dict", &dict, "--out", &out]);
    assert!(!fs::read_to_string(&out).unwrap().contains("READER(2)"));
}

#[test]
fn stats_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let json: Value = serde_json::from_slice(&ok(&["stats", "--dict", &dict, "--format", "json"]).stdout).unwrap();
    assert_eq!(json["lexicon_size"], 7);
    let tsv = String::from_utf8(ok(&["stats", "--dict", &dict, "--format", "tsv"]).stdout).unwrap();
    assert_eq!(tsv.lines().next(), Some("scope\tid\twords\tpercent"));
    let total = tsv.lines().find(|l| l.starts_with("total\t")).unwrap();
    let words: u64 = total.split('\t').nth(2).unwrap().parse().unwrap();
    assert_eq!(Some(words), json["total_changed"].as_u64());
    let table = String::from_utf8(ok(&["stats", "--dict", &dict]).stdout).unwrap();
    assert!(table.contains("rule2"));
}

#[test]
fn clusters_from_a_dump_are_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let dump = path(dir.path(), "a.dump");
    fs::write(
        &dump,
        "DOCTOR\t0\td|D|dx o|AA|ax c|K|k t|T|tx o|ER|a _|_|r\nHOT\t0\th|HH|h o|AA|ax t|T|tx\n\
         FATHER\t0\tf|F|ph a|AA|aa th|DH|d er|ER|a _|_|r\n",
    )
    .unwrap();
    let out = ok(&["clusters", "--alignments", &dump]);
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["source_cmu"], "AA");
    assert_eq!(lines[0]["total"], 3);
}

#[test]
fn align_then_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let translit = path(dir.path(), "t.tsv");
    fs::write(&translit, "HOT\tहॉट\nCAT\tकैट\nMISSING\tमिस\n").unwrap();
    let dump = path(dir.path(), "a.dump");
    let out = ok(&["align", "--dict", &dict, "--translit", &translit, "--out", &dump]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 not in dictionary"));
    assert_eq!(fs::read_to_string(&dump).unwrap().lines().count(), 2);
    ok(&["clusters", "--alignments", &dump]);
}

#[test]
fn select_filters_by_dictionary_and_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let freq = path(dir.path(), "freq.txt");
    fs::write(&freq, "the\ncat\nhot\nzzyzx\ncited\ndoctor\n").unwrap();
    let exclude = path(dir.path(), "ex.txt");
    fs::write(&exclude, "HOT\n").unwrap();
    let out = ok(&["select", "--dict", &dict, "--freq", &freq, "--top-k", "5", "--exclude", &exclude]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "CAT\nCITED\n");
}

#[test]
fn bad_rules_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let dict = fixture(dir.path());
    let rules = path(dir.path(), "bad.rules");
    fs::write(&rules, "SYLL r1 o QQ ax anywhere\n").unwrap();
    let out = lexiforge(&["apply", "--dict", &dict, "--rules", &rules, "--out", &path(dir.path(), "o")]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let error = stderr.lines().find(|l| l.starts_with("error:")).unwrap();
    assert_eq!(error.matches("QQ").count(), 1, "{error}");
}

#[test]
fn malformed_lines_warn_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let dict = path(dir.path(), "messy.dict");
    fs::write(&dict, format!("{DICT}BROKEN  Q1 X\n")).unwrap();
    let out = path(dir.path(), "out.dict");
    ok(&["apply", "--dict", &dict, "--out", &out]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 7);
    assert!(!lexiforge(&["--strict", "apply", "--dict", &dict, "--out", &out]).status.success());
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let dict = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cmudict/cmudict.dict");
    let sample: String = fs::read_to_string(dict)
        .unwrap()
        .lines()
        .step_by(40)
        .filter(|l| !l.starts_with('\''))
        .map(|l| format!("{l}\n"))
        .collect();
    let dict = path(dir.path(), "sample.dict");
    fs::write(&dict, sample).unwrap();
    let (a, b) = (path(dir.path(), "a"), path(dir.path(), "b"));
    ok(&["--jobs", "1", "apply", "--dict", &dict, "--all-variants", "--out", &a]);
    ok(&["--jobs", "4", "apply", "--dict", &dict, "--all-variants", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(format!("{a}.matches.tsv")).unwrap(), fs::read(format!("{b}.matches.tsv")).unwrap());
}
