use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_linforest"));
    c.env_remove("LINFOREST_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        ok(&[
            "synth", "--kind", "mixed", "--n", "300", "--levels", "10", "--seed", "3",
            "--out", p(&f.path("train.csv")), "--test-out", p(&f.path("test.csv")), "--n-test", "100",
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, model: &str, extra: &[&str]) -> Output {
        let data = self.path("train.csv");
        let mut args = vec![
            "train", "--data", p(&data), "--target", "y", "--ntree", "8",
            "--nodesize-spl", "10", "--seed", "5",
        ];
        if !extra.iter().any(|a| a.contains("min-split-gain")) {
            args.extend_from_slice(&["--min-split-gain", "0.001"]);
        }
        let out = self.path(model);
        args.extend_from_slice(&["--out", p(&out)]);
        args.extend_from_slice(extra);
        run(&args)
    }
}

/// Tokens of the DOT subset this crate emits, checked against the grammar
///   graph  := "digraph" ID "{" stmt* "}"
///   stmt   := ("node" | ID) attrs ";" | ID "->" ID attrs? ";"
///   attrs  := "[" (ID "=" ID ("," ID "=" ID)*)? "]"
/// where ID is an identifier, a number or a double-quoted string.
fn check_dot(text: &str) -> Result<(usize, usize), String> {
    #[derive(Debug, PartialEq)]
    enum Tok {
        Id(String),
        Sym(&'static str),
    }
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' | '}' | '[' | ']' | ';' | ',' | '=' => {
                chars.next();
                toks.push(Tok::Sym(match c {
                    '{' => "{",
                    '}' => "}",
                    '[' => "[",
                    ']' => "]",
                    ';' => ";",
                    ',' => ",",
                    _ => "=",
                }));
            }
            '-' => {
                chars.next();
                if chars.next() != Some('>') {
                    return Err("dangling '-'".into());
                }
                toks.push(Tok::Sym("->"));
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('\\') => s.push(chars.next().ok_or("bad escape")?),
                        Some('"') => break,
                        Some(ch) => s.push(ch),
                    }
                }
                toks.push(Tok::Id(s));
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' || ch == '.' {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Id(s));
            }
            other => return Err(format!("unexpected character {other:?}")),
        }
    }

    let mut i = 0;
    let id = |i: &mut usize| -> Result<String, String> {
        match toks.get(*i) {
            Some(Tok::Id(s)) => {
                *i += 1;
                Ok(s.clone())
            }
            t => Err(format!("expected ID at token {i}, got {t:?}")),
        }
    };
    let sym = |i: &mut usize, s: &str| -> Result<(), String> {
        match toks.get(*i) {
            Some(Tok::Sym(t)) if *t == s => {
                *i += 1;
                Ok(())
            }
            t => Err(format!("expected {s} at token {i}, got {t:?}")),
        }
    };
    let attrs = |i: &mut usize| -> Result<(), String> {
        sym(i, "[")?;
        if toks.get(*i) == Some(&Tok::Sym("]")) {
            *i += 1;
            return Ok(());
        }
        loop {
            id(i)?;
            sym(i, "=")?;
            id(i)?;
            if toks.get(*i) == Some(&Tok::Sym(",")) {
                *i += 1;
            } else {
                return sym(i, "]");
            }
        }
    };

    if id(&mut i)? != "digraph" {
        return Err("not a digraph".into());
    }
    id(&mut i)?;
    sym(&mut i, "{")?;
    let mut nodes = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    while toks.get(i) != Some(&Tok::Sym("}")) {
        let head = id(&mut i)?;
        if toks.get(i) == Some(&Tok::Sym("->")) {
            i += 1;
            let tail = id(&mut i)?;
            if toks.get(i) == Some(&Tok::Sym("[")) {
                attrs(&mut i)?;
            }
            edges.push((head, tail));
        } else {
            attrs(&mut i)?;
            if head != "node" {
                nodes.insert(head);
            }
        }
        sym(&mut i, ";")?;
    }
    sym(&mut i, "}")?;
    if i != toks.len() {
        return Err("trailing tokens".into());
    }
    for (a, b) in &edges {
        if !nodes.contains(a) || !nodes.contains(b) {
            return Err(format!("edge {a} -> {b} references an undeclared node"));
        }
    }
    Ok((nodes.len(), edges.len()))
}

#[test]
fn dot_checker_rejects_garbage() {
    assert!(check_dot("digraph t { a [label=\"x\"]; }").is_ok());
    assert!(check_dot("digraph t { a [label=\"x\"] }").is_err());
    assert!(check_dot("digraph t { a -> b; }").is_err());
    assert!(check_dot("graph t { }").is_err());
}

#[test]
fn synth_writes_train_and_test() {
    let f = Fixture::new();
    let train = std::fs::read_to_string(f.path("train.csv")).unwrap();
    let test = std::fs::read_to_string(f.path("test.csv")).unwrap();
    assert_eq!(train.lines().next().unwrap(), "X1,X2,X3,X4,X5,X6,X7,X8,X9,X10,y");
    assert_eq!(train.lines().count(), 301);
    assert_eq!(test.lines().count(), 101);
}

#[test]
fn train_predict_eval_round_trip() {
    let f = Fixture::new();
    f.train("m.lrf", &[]);
    let model = f.path("m.lrf");
    assert!(model.exists());
    ok(&["predict", "--model", p(&model), "--data", p(&f.path("test.csv")), "--out", p(&f.path("pred.csv"))]);
    let pred = std::fs::read_to_string(f.path("pred.csv")).unwrap();
    let mut lines = pred.lines();
    assert_eq!(lines.next(), Some("prediction"));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 100);

    let out = ok(&["eval", "--model", p(&model), "--data", p(&f.path("test.csv"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "100");
    let rmse: f64 = row[1].parse().unwrap();
    let mse: f64 = row[2].parse().unwrap();
    assert!(rmse > 0.0 && (rmse * rmse - mse).abs() < 1e-9);

    // predictions to stdout match the file
    let out = ok(&["predict", "--model", p(&model), "--data", p(&f.path("test.csv"))]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), pred);
}

#[test]
fn training_is_reproducible_and_thread_independent() {
    let f = Fixture::new();
    f.train("a.lrf", &["--threads", "1"]);
    f.train("b.lrf", &["--threads", "3"]);
    let out = bin()
        .env("LINFOREST_THREADS", "2")
        .args([
            "train", "--data", p(&f.path("train.csv")), "--target", "y", "--ntree", "8", "--nodesize-spl", "10",
            "--min-split-gain", "0.001", "--seed", "5", "--out", p(&f.path("c.lrf")),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = std::fs::read(f.path("a.lrf")).unwrap();
    assert_eq!(a, std::fs::read(f.path("b.lrf")).unwrap());
    assert_eq!(a, std::fs::read(f.path("c.lrf")).unwrap());
}

#[test]
fn config_file_and_preset() {
    let f = Fixture::new();
    let cfg = f.path("lm.toml");
    std::fs::write(&cfg, "preset = \"artificial LM 1024\"\nntree = 4\nseed = 9\n").unwrap();
    let out = f.train("cfg.lrf", &["--config", p(&cfg), "--lambda", "0.7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(f.path("cfg.lrf")).unwrap()).unwrap();
    let params = &model["params"];
    assert_eq!(params["ntree"], 8); // the fixture's --ntree flag wins over the file
    assert_eq!(params["mtry"], 4);
    assert_eq!(params["lambda"], 0.7);
    assert_eq!(params["nodesize_spl"], 10);
    assert_eq!(params["seed"], 5);

    let out = f.train("log.lrf", &["--log-min-split-gain", "-2.82", "--min-split-gain", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    // a gain in the file and its log form on the command line: the flag wins
    std::fs::write(&cfg, "min_split_gain = 0.5\n").unwrap();
    let out = f.train("flag.lrf", &["--config", p(&cfg), "--log-min-split-gain", "-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn log_min_split_gain_is_natural_log() {
    let f = Fixture::new();
    let out = run(&[
        "train", "--data", p(&f.path("train.csv")), "--target", "y", "--ntree", "2", "--log-min-split-gain", "-2.82",
        "--out", p(&f.path("l.lrf")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(f.path("l.lrf")).unwrap()).unwrap();
    let m = model["params"]["min_split_gain"].as_f64().unwrap();
    assert!((m - (-2.82f64).exp()).abs() < 1e-15);
}

#[test]
fn export_dot_and_audit() {
    let f = Fixture::new();
    f.train("m.lrf", &[]);
    let model = f.path("m.lrf");
    let out = ok(&["export-dot", "--model", p(&model), "--tree", "2"]);
    let dot = String::from_utf8(out.stdout).unwrap();
    let (nodes, edges) = check_dot(&dot).unwrap();
    assert_eq!(edges, nodes - 1);
    assert!(dot.contains("intercept = "));

    let out = ok(&["audit", "--model", p(&model)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    let row: Vec<&str> = text.lines().nth(3).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[2].parse::<usize>().unwrap(), nodes);

    let out = run(&["export-dot", "--model", p(&model), "--tree", "8"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_leaf_model_exports_one_node() {
    let f = Fixture::new();
    assert!(f.train("leaf.lrf", &["--min-split-gain", "0.99"]).status.success());
    let out = ok(&["export-dot", "--model", p(&f.path("leaf.lrf"))]);
    let (nodes, edges) = check_dot(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!((nodes, edges), (1, 0));
}

#[test]
fn bench_emits_both_strategies() {
    let out = ok(&["bench", "--strategy", "both", "--n", "200,400", "--dlin", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "strategy,n,d_lin,seconds");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("fast,200,2,"));
    assert!(lines[4].starts_with("exhaustive,400,2,"));
}

#[test]
fn categorical_columns_and_unseen_levels() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("cat.csv");
    let mut csv = String::from("x,colour,y\n");
    for i in 0..60 {
        let colour = ["red", "green", "blue"][i % 3];
        let y = if colour == "red" { 5.0 } else { 0.0 } + i as f64 * 0.01;
        csv.push_str(&format!("{},{colour},{y}\n", i as f64 / 10.0));
    }
    std::fs::write(&train, csv).unwrap();
    let model = dir.path().join("cat.lrf");
    ok(&[
        "train", "--data", p(&train), "--target", "y", "--categorical", "colour", "--ntree", "3", "--nodesize-spl", "3",
        "--mtry", "2", "--out", p(&model),
    ]);
    let test = dir.path().join("new.csv");
    std::fs::write(&test, "colour,x\nred,1.0\npurple,1.0\ngreen,1.0\n").unwrap();
    let out = ok(&["predict", "--model", p(&model), "--data", p(&test)]);
    let v: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(v.len(), 3);
    assert!(v[0] > v[2] + 2.0, "red should predict high: {v:?}");
    // an unseen level takes the not-equal branch, like green
    assert!((v[1] - v[2]).abs() < 1.0, "{v:?}");
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    // usage
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(f.train("x.lrf", &["--mtry", "11"]).status.code(), Some(2));
    assert_eq!(f.train("x.lrf", &["--honest"]).status.code(), Some(2));
    assert_eq!(f.train("x.lrf", &["--lambda", "-1"]).status.code(), Some(2));
    assert_eq!(f.train("x.lrf", &["--preset", "nope"]).status.code(), Some(2));
    // data
    let missing = run(&["train", "--data", "/nonexistent.csv", "--target", "y", "--out", p(&f.path("x.lrf"))]);
    assert_eq!(missing.status.code(), Some(1));
    let wrong_target = run(&["train", "--data", p(&f.path("train.csv")), "--target", "nope", "--out", p(&f.path("x.lrf"))]);
    assert_eq!(wrong_target.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&wrong_target.stderr).contains("nope"));

    f.train("m.lrf", &[]);
    let bad = f.path("bad.csv");
    std::fs::write(&bad, "X1,X2\n1,2\n").unwrap();
    let out = run(&["predict", "--model", p(&f.path("m.lrf")), "--data", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("X3"));

    let holes = f.path("holes.csv");
    std::fs::write(&holes, "a,y\n1,2\n,3\n").unwrap();
    let out = run(&["train", "--data", p(&holes), "--target", "y", "--out", p(&f.path("x.lrf"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn honest_training_records_sets() {
    let f = Fixture::new();
    let out = f.train("h.lrf", &["--honest", "--splitratio", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(f.path("h.lrf")).unwrap()).unwrap();
    for t in model["trees"].as_array().unwrap() {
        assert!(!t["split_set"].as_array().unwrap().is_empty());
        assert!(!t["agg_set"].as_array().unwrap().is_empty());
    }
}
