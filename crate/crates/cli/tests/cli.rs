use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn srmq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srmq"))
        .args(args)
        .env_remove("RMQ_MAX_N")
        .output()
        .expect("spawn srmq")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn check_schema(name: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_array(dir: &Path, vals: &[i64]) -> PathBuf {
    let p = dir.join("a.txt");
    let text: String = vals.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&p, text).unwrap();
    p
}

fn sample_values(n: usize) -> Vec<i64> {
    (0..n as i64).map(|i| (i * 7919 + 13) % 101).collect()
}

#[test]
fn build_query_space_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let vals = sample_values(64);
    let input = write_array(dir.path(), &vals);
    let mut answers = Vec::new();
    for (kind, extra) in [
        ("onebit", vec![]),
        ("tradeoff", vec!["--t", "2"]),
        ("sparse", vec![]),
    ] {
        let out = dir.path().join(format!("{kind}.ds"));
        let mut args = vec![
            "build",
            "--input",
            s(&input),
            "--kind",
            kind,
            "--out",
            s(&out),
        ];
        args.extend(extra.iter());
        let rep = json(&srmq(&args));
        check_schema("space_report.schema.json", &rep);
        assert_eq!(rep["kind"], kind);
        if kind == "onebit" {
            assert!(
                rep["total_bits"].as_f64().unwrap()
                    <= rep["benchmark_bits"].as_f64().unwrap() + 1.0
            );
        }
        if kind == "tradeoff" {
            assert_eq!(rep["dfuds_bits"], 128);
        }
        let first = std::fs::read(&out).unwrap();
        json(&srmq(&args));
        assert_eq!(
            std::fs::read(&out).unwrap(),
            first,
            "{kind} rebuild must be byte-identical"
        );

        let space = json(&srmq(&["space", "--ds", s(&out)]));
        assert_eq!(space, rep);

        let q = json(&srmq(&[
            "query",
            "--ds",
            s(&out),
            "--a",
            "5",
            "--b",
            "40",
            "--probes",
            "--json",
        ]));
        check_schema("query.schema.json", &q);
        assert!(q["probes"]["distinct"].as_u64().unwrap() > 0);
        answers.push(q["answer"].as_u64().unwrap());

        let same = srmq(&["query", "--ds", s(&out), "--a", "9", "--b", "9"]);
        assert_eq!(stdout(&same).trim(), "9");
        assert_eq!(
            code(&srmq(&["query", "--ds", s(&out), "--a", "5", "--b", "65"])),
            3
        );
        assert_eq!(
            code(&srmq(&["query", "--ds", s(&out), "--a", "6", "--b", "5"])),
            3
        );
    }
    let want = (5..=40).min_by_key(|&i| (vals[i - 1], i)).unwrap() as u64;
    assert_eq!(answers, vec![want; 3]);
}

#[test]
fn binary_array_format_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = write_array(dir.path(), &sample_values(20));
    let bin = dir.path().join("a.bin");
    let mut bytes = b"RMQA".to_vec();
    bytes.extend(1u32.to_le_bytes());
    bytes.extend(20u64.to_le_bytes());
    for v in sample_values(20) {
        bytes.extend(v.to_le_bytes());
    }
    std::fs::write(&bin, &bytes).unwrap();
    let o1 = dir.path().join("1.ds");
    let o2 = dir.path().join("2.ds");
    json(&srmq(&[
        "build",
        "--input",
        s(&text),
        "--kind",
        "tradeoff",
        "--format",
        "text",
        "--out",
        s(&o1),
    ]));
    json(&srmq(&[
        "build",
        "--input",
        s(&bin),
        "--kind",
        "tradeoff",
        "--format",
        "bin",
        "--out",
        s(&o2),
    ]));
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());

    let missing = dir.path().join("missing.txt");
    assert_eq!(
        code(&srmq(&[
            "build",
            "--input",
            s(&missing),
            "--kind",
            "sparse",
            "--out",
            s(&o1)
        ])),
        2
    );
    let junk = dir.path().join("junk.txt");
    std::fs::write(&junk, "1\nx\n").unwrap();
    assert_eq!(
        code(&srmq(&[
            "build",
            "--input",
            s(&junk),
            "--kind",
            "sparse",
            "--out",
            s(&o1)
        ])),
        3
    );
    assert_eq!(
        code(&srmq(&[
            "build",
            "--input",
            s(&text),
            "--kind",
            "bogus",
            "--out",
            s(&o1)
        ])),
        1
    );

    let mut corrupt = std::fs::read(&o2).unwrap();
    let mid = corrupt.len() - 3;
    corrupt[mid] ^= 0x40;
    std::fs::write(&o1, &corrupt).unwrap();
    let c = code(&srmq(&["space", "--ds", s(&o1)]));
    assert!(c == 3 || c == 4, "corrupt file gave exit {c}");

    let limited = Command::new(env!("CARGO_BIN_EXE_srmq"))
        .args([
            "build",
            "--input",
            s(&text),
            "--kind",
            "onebit",
            "--out",
            s(&o1),
        ])
        .env("RMQ_MAX_N", "10")
        .output()
        .unwrap();
    assert_eq!(code(&limited), 1);
}

#[test]
fn bench_grid_csv_and_json() {
    let args = [
        "bench",
        "--kind",
        "tradeoff,sparse",
        "--n",
        "512",
        "--t",
        "1,2,3",
        "--queries",
        "200",
        "--seed",
        "4",
    ];
    let csv = srmq(&args);
    assert_eq!(code(&csv), 0);
    let text = stdout(&csv);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "kind,n,param,total_bits,redundancy_bits,benchmark_bits,mean_probes,max_probes,mean_ns,seed");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let red: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "tradeoff")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert!(
        red.windows(2).all(|w| w[1] < w[0]),
        "redundancy must fall with t: {red:?}"
    );

    let mut jargs = args.to_vec();
    jargs.push("--json");
    let v = json(&srmq(&jargs));
    check_schema("bench_records.schema.json", &v);
    let again = json(&srmq(&jargs));
    for (a, b) in v.as_array().unwrap().iter().zip(again.as_array().unwrap()) {
        assert_eq!(a["total_bits"], b["total_bits"]);
        assert_eq!(a["max_probes"], b["max_probes"]);
    }
}

#[test]
fn bench_records_failed_cells() {
    let o = Command::new(env!("CARGO_BIN_EXE_srmq"))
        .args([
            "bench",
            "--kind",
            "onebit,sparse",
            "--n",
            "64",
            "--queries",
            "10",
            "--json",
        ])
        .env("RMQ_MAX_N", "32")
        .output()
        .unwrap();
    let v = json(&o);
    check_schema("bench_records.schema.json", &v);
    assert!(v.as_array().unwrap().iter().all(|r| r["error"].is_string()));
}

#[test]
fn verify_exit_codes_and_schema() {
    let ok = json(&srmq(&["verify", "--lemma", "mfold", "--json"]));
    check_schema("verify_report.schema.json", &ok);
    assert_eq!(ok["pass"], true);
    let ext = json(&srmq(&[
        "hardgen",
        "verify",
        "--lemma",
        "ext-roundtrip",
        "--trials",
        "300",
        "--seed",
        "2",
        "--json",
    ]));
    check_schema("verify_report.schema.json", &ext);
    let again = json(&srmq(&[
        "hardgen",
        "verify",
        "--lemma",
        "ext-roundtrip",
        "--trials",
        "300",
        "--seed",
        "2",
        "--json",
    ]));
    assert_eq!(ext, again);
    assert_eq!(code(&srmq(&["verify", "--lemma", "nope"])), 1);
    // a tiny sample cannot reach the sampler TV bound
    let weak = srmq(&["verify", "--lemma", "marginal", "--trials", "20", "--json"]);
    assert_eq!(code(&weak), 5);
    check_schema(
        "verify_report.schema.json",
        &serde_json::from_slice(&weak.stdout).unwrap(),
    );
}

#[test]
fn catalan_check_command() {
    let v = json(&srmq(&["catalan", "check", "--max-u", "14", "--json"]));
    check_schema("catalan_check.schema.json", &v);
    assert_eq!(v["mismatches"], 0);
    assert_eq!(code(&srmq(&["catalan", "check", "--max-u", "99"])), 1);
}

#[test]
fn hardgen_sample_reduce_build_query() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("sets.json");
    let v = json(&srmq(&[
        "hardgen",
        "sample",
        "--n",
        "60",
        "--r",
        "2",
        "--seed",
        "9",
        "--out",
        s(&inst),
    ]));
    check_schema("instance.schema.json", &v);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    check_schema("instance.schema.json", &file);
    assert_eq!(
        (file["d"].as_u64(), file["B"].as_u64(), file["u"].as_u64()),
        (Some(4), Some(14), Some(3))
    );

    let arr = dir.path().join("arr.bin");
    let red = json(&srmq(&[
        "hardgen",
        "reduce",
        "--sets",
        s(&inst),
        "--n",
        "60",
        "--r",
        "2",
        "--out",
        s(&arr),
    ]));
    check_schema("reduce.schema.json", &red);
    let ds = dir.path().join("t.ds");
    json(&srmq(&[
        "build",
        "--input",
        s(&arr),
        "--kind",
        "tradeoff",
        "--out",
        s(&ds),
    ]));

    // pred(1, B) through the structure: the largest element of the first set
    let set1: Vec<u64> = file["sets"][0]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    let p = 15;
    let q = json(&srmq(&[
        "query",
        "--ds",
        s(&ds),
        "--a",
        &(p - 14).to_string(),
        "--b",
        &p.to_string(),
        "--json",
    ]));
    assert_eq!(p - q["answer"].as_u64().unwrap(), *set1.last().unwrap());

    assert_eq!(
        code(&srmq(&[
            "hardgen",
            "reduce",
            "--sets",
            s(&inst),
            "--n",
            "61",
            "--r",
            "3",
            "--out",
            s(&arr)
        ])),
        3
    );
    let manual = dir.path().join("m.json");
    json(&srmq(&[
        "hardgen",
        "sample",
        "--B",
        "10",
        "--u",
        "3",
        "--d",
        "2",
        "--Z",
        "7",
        "--out",
        s(&manual),
    ]));
    assert_eq!(
        code(&srmq(&[
            "hardgen",
            "sample",
            "--B",
            "10",
            "--out",
            s(&manual)
        ])),
        1
    );
    assert_eq!(
        code(&srmq(&[
            "hardgen",
            "sample",
            "--B",
            "3",
            "--u",
            "5",
            "--d",
            "2",
            "--Z",
            "1",
            "--out",
            s(&manual)
        ])),
        3
    );
}
